#include "tunnelguard/server/api.hpp"

#include <charconv>
#include <limits>
#include <optional>

#include <httplib.h>
#include <json.hpp>

#include "tunnelguard/device/command.hpp"
#include "tunnelguard/server/json_views.hpp"

namespace tg::server {

Executor::Executor() : worker_([this] { loop(); }) {}

Executor::~Executor() { stop(); }

void Executor::push(std::function<void()> job) {
  {
    std::lock_guard lock(mu_);
    if (stopping_) return;
    jobs_.push_back(std::move(job));
  }
  cv_.notify_one();
}

void Executor::stop() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  cv_.notify_one();
  if (worker_.joinable()) worker_.join();
}

void Executor::loop() {
  for (;;) {
    std::function<void()> job;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [this] { return stopping_ || !jobs_.empty(); });
      if (jobs_.empty()) return;
      job = std::move(jobs_.front());
      jobs_.pop_front();
    }
    job();
  }
}

namespace {

using nlohmann::json;

std::optional<std::uint32_t> parse_id(const std::string& text) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || v > std::numeric_limits<std::uint32_t>::max()) {
    return std::nullopt;
  }
  return static_cast<std::uint32_t>(v);
}

void reply(httplib::Response& res, int status, const std::string& body) {
  res.status = status;
  res.set_content(body, "application/json");
}

void error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  reply(res, status, json{{"error", code}, {"message", message}}.dump());
}

int http_status(ServerErrc e) {
  switch (e) {
    case ServerErrc::UnknownRoom:
    case ServerErrc::NotFound: return 404;
    case ServerErrc::DuplicateRoom:
    case ServerErrc::DuplicateSession: return 409;
    case ServerErrc::SessionDown: return 503;
    default: return 500;
  }
}

int http_status(CommandStatus s) {
  switch (s) {
    case CommandStatus::Ok: return 200;
    case CommandStatus::RefusedOccupied: return 409;
    case CommandStatus::UnknownCommand: return 400;
    case CommandStatus::Timeout: return 504;
    case CommandStatus::SessionDown: return 503;
  }
  return 500;
}

}  // namespace

struct ApiServer::Impl {
  Executor& executor;
  ApiBackend& backend;
  ApiOptions options;
  std::shared_ptr<EventFeed> feed = std::make_shared<EventFeed>();
  httplib::Server http;
  std::thread thread;

  Impl(Executor& ex, ApiBackend& be, ApiOptions opts) : executor(ex), backend(be), options(std::move(opts)) {}

  // Runs `fn` on the executor and maps server errors onto HTTP responses.
  template <typename F>
  bool call(httplib::Response& res, F fn) {
    try {
      executor.submit(std::move(fn)).get();
      return true;
    } catch (const ServerError& e) {
      error(res, http_status(e.code()), to_string(e.code()), e.what());
    } catch (const std::invalid_argument& e) {
      error(res, 400, "BadRequest", e.what());
    } catch (const std::exception& e) {
      error(res, 500, "Internal", e.what());
    }
    return false;
  }

  void routes() {
    // httplib defaults to SO_REUSEPORT, which would let a second server share
    // a port that is already taken.
    http.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
    });
    http.set_post_routing_handler([](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Origin", "*");
    });
    http.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Methods", "GET, POST, PUT, DELETE, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.status = 204;
    });

    http.Get("/rooms", [this](const httplib::Request&, httplib::Response& res) {
      std::string body;
      if (call(res, [&] { body = to_json(backend.control().registry().list()); })) reply(res, 200, body);
    });

    http.Get(R"(/rooms/([^/]+)/status)", [this](const httplib::Request& req, httplib::Response& res) {
      const auto id = parse_id(req.matches[1]);
      if (!id) return error(res, 404, "UnknownRoom", "bad room id");
      std::optional<RoomStatus> status;
      bool no_data = false;
      const bool ok = call(res, [&] {
        try {
          status = backend.control().get_status(*id, backend.now());
        } catch (const ServerError& e) {
          if (e.code() != ServerErrc::NoDataYet) throw;
          no_data = true;
        }
      });
      if (!ok) return;
      if (no_data) {
        res.status = 204;
        return;
      }
      reply(res, 200, to_json(*status));
    });

    http.Post(R"(/rooms/([^/]+)/command)", [this](const httplib::Request& req, httplib::Response& res) {
      const auto id = parse_id(req.matches[1]);
      if (!id) return error(res, 404, "UnknownRoom", "bad room id");
      const json body = json::parse(req.body, nullptr, false);
      if (body.is_discarded() || !body.is_object() || !body.contains("opcode") || !body["opcode"].is_string()) {
        return error(res, 400, "BadRequest", "expected {\"opcode\": \"...\"}");
      }
      const auto op = device::opcode_from_string(body["opcode"].get<std::string>());
      if (!op) return error(res, 400, "UnknownOpcode", body["opcode"].get<std::string>());

      auto promise = std::make_shared<std::promise<CommandOutcome>>();
      auto outcome = promise->get_future();
      const auto room = *id;
      const auto opcode = static_cast<std::uint8_t>(*op);
      if (!call(res, [this, room, opcode, promise] {
            backend.dispatch([this, room, opcode, promise](VirtualTime now) {
              try {
                backend.control().send_command(now, room, opcode, Origin::Api,
                                               [promise](const CommandOutcome& o) { promise->set_value(o); });
              } catch (...) {
                promise->set_exception(std::current_exception());
              }
            });
          })) {
        return;
      }
      if (outcome.wait_for(options.command_wait) != std::future_status::ready) {
        return reply(res, 504, json{{"status", "TIMEOUT"}, {"room_id", room}}.dump());
      }
      try {
        const CommandOutcome o = outcome.get();
        reply(res, http_status(o.status), to_json(o));
      } catch (const ServerError& e) {
        const int status = http_status(e.code());
        reply(res, status,
              json{{"status", e.code() == ServerErrc::SessionDown ? "SESSION_DOWN" : to_string(e.code())},
                   {"error", to_string(e.code())},
                   {"message", e.what()}}
                  .dump());
      }
    });

    http.Post("/admin/rooms", [this](const httplib::Request& req, httplib::Response& res) {
      RegistryEntry entry;
      try {
        entry = registry_entry_from_json(req.body);
      } catch (const std::invalid_argument& e) {
        return error(res, 400, "BadRequest", e.what());
      }
      if (call(res, [&] { backend.control().registry_put(backend.now(), entry, Origin::Api); })) {
        reply(res, 201, to_json(entry));
      }
    });

    http.Put(R"(/admin/rooms/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const auto id = parse_id(req.matches[1]);
      if (!id) return error(res, 404, "NotFound", "bad room id");
      RegistryEntry entry;
      try {
        entry = registry_entry_from_json(req.body, *id);
      } catch (const std::invalid_argument& e) {
        return error(res, 400, "BadRequest", e.what());
      }
      if (call(res, [&] { backend.control().registry_update(backend.now(), *id, entry, Origin::Api); })) {
        reply(res, 200, to_json(entry));
      }
    });

    http.Delete(R"(/admin/rooms/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const auto id = parse_id(req.matches[1]);
      if (!id) return error(res, 404, "NotFound", "bad room id");
      if (call(res, [&] { backend.control().registry_delete(backend.now(), *id, Origin::Api); })) res.status = 204;
    });

    http.Get("/events", [this](const httplib::Request& req, httplib::Response& res) {
      std::uint64_t since = 0;
      if (req.has_param("since")) {
        const auto s = parse_id(req.get_param_value("since"));
        if (!s) return error(res, 400, "BadRequest", "since must be an unsigned integer");
        since = *s;
      }
      auto wait = options.long_poll;
      if (req.has_param("timeout_ms")) {
        const auto t = parse_id(req.get_param_value("timeout_ms"));
        if (!t) return error(res, 400, "BadRequest", "timeout_ms must be an unsigned integer");
        wait = std::min(wait, std::chrono::milliseconds(*t));
      }
      reply(res, 200, to_json(feed->wait_since(since, wait)));
    });

    http.Post("/admin/sweep", [this](const httplib::Request&, httplib::Response& res) {
      auto promise = std::make_shared<std::promise<SweepReport>>();
      auto report = promise->get_future();
      if (!call(res, [this, promise] {
            backend.dispatch([this, promise](VirtualTime now) {
              backend.control().start_sweep(now, Origin::Api,
                                            [promise](const SweepReport& r) { promise->set_value(r); });
            });
          })) {
        return;
      }
      if (report.wait_for(options.command_wait) != std::future_status::ready) {
        return reply(res, 504, json{{"status", "TIMEOUT"}}.dump());
      }
      reply(res, 200, to_json(report.get()));
    });

    if (!options.static_dir.empty()) http.set_mount_point("/", options.static_dir);
  }
};

ApiServer::ApiServer(Executor& executor, ApiBackend& backend, ApiOptions options)
    : impl_(std::make_unique<Impl>(executor, backend, std::move(options))) {
  auto feed = impl_->feed;
  executor
      .submit([&backend, feed] {
        EventLog& log = backend.control().event_log();
        for (const auto& e : log.events()) feed->publish(e);
        log.set_listener([feed](const Event& e) { feed->publish(e); });
      })
      .get();
  impl_->routes();
}

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->http.bind_to_any_port(host) : (impl_->http.bind_to_port(host, port) ? port : -1);
  if (bound <= 0) {
    throw ServerError(ServerErrc::BindFailure, "cannot bind " + host + ":" + std::to_string(port));
  }
  return bound;
}

void ApiServer::start() {
  impl_->thread = std::thread([this] { impl_->http.listen_after_bind(); });
  impl_->http.wait_until_ready();
}

void ApiServer::stop() {
  if (!impl_) return;
  impl_->feed->shutdown();
  impl_->http.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace tg::server
