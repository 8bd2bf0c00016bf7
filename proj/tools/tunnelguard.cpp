// tunnelguard: scenario runner, capture reporter and live server.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "tunnelguard/netsim/adversary.hpp"
#include "tunnelguard/netsim/capture.hpp"
#include "tunnelguard/scenario/live.hpp"
#include "tunnelguard/scenario/runner.hpp"
#include "tunnelguard/scenario/scenario.hpp"
#include "tunnelguard/server/api.hpp"
#include "tunnelguard/server/errors.hpp"

#ifndef TG_VERSION
#define TG_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using namespace tg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitEnv = 3;

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

scenario::Scenario load(const std::string& path) {
  auto s = scenario::load_scenario(path);
  if (const char* env = std::getenv("TG_SEED")) {
    std::uint64_t seed = 0;
    std::istringstream in(env);
    if (!(in >> seed) || !in.eof()) throw scenario::ScenarioError("TG_SEED", "expected an unsigned integer");
    scenario::override_seeds(s, seed);
  }
  return s;
}

int run_scenario_cmd(const std::string& path, const std::string& out_opt) {
  scenario::Scenario s;
  try {
    s = load(path);
  } catch (const scenario::ScenarioError& e) {
    std::cerr << path << ": " << e.what() << "\n";
    return kExitInput;
  }
  fs::path out = out_opt.empty() ? fs::path("runs") / s.name : fs::path(out_opt);
  try {
    std::vector<scenario::ArmResult> results;
    for (const auto& arm : s.arms) {
      auto t0 = std::chrono::steady_clock::now();
      results.push_back(scenario::run_arm(s, arm));
      auto wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      const auto& r = results.back();
      scenario::write_arm_outputs(out / arm.name, r);
      std::cout << std::left << std::setw(16) << arm.name << " " << std::setw(10) << scenario::to_string(arm.variant)
                << " recovered " << r.capture.plaintext_lines_recovered << "/" << r.capture.telemetry_lines_emitted
                << " lines, " << r.capture.commands_recovered << "/" << r.capture.commands_emitted << " commands"
                << ", tamper accepted " << r.capture.tamper.accepted << "/" << r.capture.tamper.delivered
                << ", persisted " << r.lines_persisted << std::fixed << std::setprecision(2) << " (" << wall
                << " s)\n";
      std::cout.unsetf(std::ios::fixed);
    }
    std::ofstream summary(out / "summary.json", std::ios::trunc);
    summary << scenario::summary_json(s, results);
    if (!summary) throw std::runtime_error("cannot write " + (out / "summary.json").string());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitEnv;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitEnv;
  }
  std::cout << "reports written to " << out.string() << "\n";
  return kExitOk;
}

int sniff_report_cmd(const std::string& capture_path, bool as_json) {
  std::ifstream in(capture_path);
  if (!in) {
    std::cerr << "error: cannot read " << capture_path << "\n";
    return kExitInput;
  }
  std::vector<netsim::CapturedFrame> frames;
  try {
    frames = netsim::read_capture(in);
  } catch (const std::exception& e) {
    std::cerr << capture_path << ": " << e.what() << "\n";
    return kExitInput;
  }

  fs::path dir = fs::path(capture_path).parent_path();
  netsim::EmissionOracle oracle;
  if (std::ifstream em(dir / "emissions.txt"); em) {
    try {
      oracle = netsim::read_oracle(em);
    } catch (const std::exception& e) {
      std::cerr << (dir / "emissions.txt").string() << ": " << e.what() << "\n";
      return kExitInput;
    }
  } else if (!frames.empty()) {
    std::cerr << "warning: no emissions.txt next to the capture; totals are unknown\n";
  }

  auto report = netsim::analyze_capture(frames, oracle);
  // Tamper verdicts come from the victims, so they only exist in the run report.
  if (std::ifstream cr(dir / "capture_report.json"); cr) {
    try {
      auto doc = nlohmann::json::parse(cr);
      const auto& t = doc.at("tamper");
      report.tamper.attempts = t.at("attempts").get<std::uint64_t>();
      report.tamper.delivered = t.at("delivered").get<std::uint64_t>();
      report.tamper.accepted = t.at("accepted").get<std::uint64_t>();
      report.tamper.rejected_auth = t.at("rejected_auth").get<std::uint64_t>();
      report.tamper.commands_accepted = t.at("commands_accepted").get<std::uint64_t>();
    } catch (const std::exception& e) {
      std::cerr << "warning: ignoring capture_report.json: " << e.what() << "\n";
    }
  }

  if (as_json) {
    std::cout << scenario::capture_report_json(report);
    return kExitOk;
  }
  std::cout << "frames: " << report.frames_seen << " (" << report.data_frames_seen << " data)\n"
            << "recovered: " << report.plaintext_lines_recovered << "/" << report.telemetry_lines_emitted << " lines\n"
            << "commands: " << report.commands_recovered << "/" << report.commands_emitted << " recovered\n"
            << "tamper: " << report.tamper.attempts << " attempts, " << report.tamper.delivered << " delivered, "
            << report.tamper.accepted << " accepted, " << report.tamper.rejected_auth << " auth-rejected, "
            << report.tamper.commands_accepted << " commands accepted\n";
  return kExitOk;
}

struct ServeOptions {
  std::string path;
  std::string bind = "127.0.0.1:8080";
  bool fast = false;
  std::string arm;
  std::string static_dir;
  std::string out;
};

int serve_cmd(const ServeOptions& opt) {
  scenario::Scenario s;
  try {
    s = load(opt.path);
  } catch (const scenario::ScenarioError& e) {
    std::cerr << opt.path << ": " << e.what() << "\n";
    return kExitInput;
  }
  const scenario::ArmDef* arm = &s.arms.front();
  if (!opt.arm.empty()) {
    arm = nullptr;
    for (const auto& a : s.arms)
      if (a.name == opt.arm) arm = &a;
    if (!arm) {
      std::cerr << "error: no arm named " << opt.arm << "\n";
      return kExitInput;
    }
  }
  auto colon = opt.bind.rfind(':');
  int port = -1;
  if (colon != std::string::npos) {
    try {
      std::size_t used = 0;
      port = std::stoi(opt.bind.substr(colon + 1), &used);
      if (used != opt.bind.size() - colon - 1) port = -1;
    } catch (const std::exception&) {
      port = -1;
    }
  }
  if (port < 0 || port > 65535) {
    std::cerr << "error: --bind expects HOST:PORT\n";
    return kExitInput;
  }
  std::string host = opt.bind.substr(0, colon);

  fs::path out = opt.out.empty() ? fs::path("serve") / s.name : fs::path(opt.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  std::ofstream telemetry(out / "telemetry.log", std::ios::app);
  std::ofstream events(out / "events.log", std::ios::app);
  if (ec || !telemetry || !events) {
    std::cerr << "error: cannot write logs under " << out.string() << "\n";
    return kExitEnv;
  }

  scenario::LiveSystem live(s, *arm, &telemetry, &events);
  server::Executor executor;
  server::ApiOptions api_opts;
  api_opts.static_dir = opt.static_dir;
  server::ApiServer api(executor, live, api_opts);
  int bound = 0;
  try {
    bound = api.bind(host, port);
  } catch (const server::ServerError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitEnv;
  }
  api.start();
  std::cout << "serving " << s.name << " arm " << arm->name << " on http://" << host << ":" << bound << std::endl;

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  using clock = std::chrono::steady_clock;
  auto t0 = clock::now();
  VirtualTime target{0};
  while (!g_interrupted) {
    if (opt.fast) {
      target += Millis(1000);
    } else {
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
      target = std::chrono::duration_cast<Millis>(clock::now() - t0);
    }
    executor.submit([&live, target] { live.advance_to(target); }).wait();
  }

  std::cout << "stopping" << std::endl;
  api.stop();
  executor.submit([&] {
    telemetry.flush();
    events.flush();
  }).wait();
  executor.stop();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tunnelguard: tunneled building-control simulator"};
  app.require_subcommand(1);

  std::string scenario_path, out_dir;
  auto* run = app.add_subcommand("run-scenario", "Run every arm of a scenario and write reports");
  run->add_option("file", scenario_path, "Scenario document")->required();
  run->add_option("--out", out_dir, "Output directory (default runs/<name>)");

  std::string capture_path;
  bool as_json = false;
  auto* sniff = app.add_subcommand("sniff-report", "Summarize what a passive observer recovered from a capture");
  sniff->add_option("capture", capture_path, "capture.txt from a run")->required();
  sniff->add_flag("--json", as_json, "Machine-readable output");

  ServeOptions serve_opts;
  auto* serve = app.add_subcommand("serve", "Run one arm live behind the HTTP API");
  serve->add_option("file", serve_opts.path, "Scenario document")->required();
  serve->add_option("--bind", serve_opts.bind, "HOST:PORT (default 127.0.0.1:8080)");
  serve->add_flag("--fast", serve_opts.fast, "Do not pace virtual time to the wall clock");
  serve->add_option("--arm", serve_opts.arm, "Arm to run (default: the first)");
  serve->add_option("--static", serve_opts.static_dir, "Directory served at /");
  serve->add_option("--out", serve_opts.out, "Log directory (default serve/<name>)");

  auto* version = app.add_subcommand("version", "Print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInput;
  }

  if (*run) return run_scenario_cmd(scenario_path, out_dir);
  if (*sniff) return sniff_report_cmd(capture_path, as_json);
  if (*serve) return serve_cmd(serve_opts);
  if (*version) {
    std::cout << "tunnelguard " << TG_VERSION << "\n";
    return kExitOk;
  }
  return kExitInput;
}
