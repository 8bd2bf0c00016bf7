#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <type_traits>

#include "tunnelguard/server/control_server.hpp"

namespace tg::server {

// One worker thread draining a FIFO of jobs. Everything that touches server
// state is submitted here.
class Executor {
 public:
  Executor();
  ~Executor();
  Executor(const Executor&) = delete;
  Executor& operator=(const Executor&) = delete;

  template <typename F>
  auto submit(F fn) -> std::future<std::invoke_result_t<F>> {
    using R = std::invoke_result_t<F>;
    auto task = std::make_shared<std::packaged_task<R()>>(std::move(fn));
    auto fut = task->get_future();
    push([task] { (*task)(); });
    return fut;
  }

  // Drains queued jobs, then joins. Later submissions are dropped.
  void stop();

 private:
  void push(std::function<void()> job);
  void loop();

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> jobs_;
  bool stopping_ = false;
  std::thread worker_;
};

// What the API needs from its host. Called only on the executor thread.
class ApiBackend {
 public:
  virtual ~ApiBackend() = default;
  virtual ControlServer& control() = 0;
  virtual VirtualTime now() const = 0;
  // Runs `action` inside the host at the current virtual time, where the
  // command transport is usable. Completion callbacks fire later, also on the
  // executor thread.
  virtual void dispatch(std::function<void(VirtualTime)> action) = 0;
};

struct ApiOptions {
  // Wall-clock cap on waiting for a command or sweep to resolve.
  std::chrono::milliseconds command_wait{30000};
  std::chrono::milliseconds long_poll{10000};
  // Served at "/" when set (the operator console bundle).
  std::string static_dir;
};

// HTTP front end:
//   GET  /rooms                    registry listing
//   GET  /rooms/{id}/status        200 | 204 no data yet | 404
//   POST /rooms/{id}/command       {"opcode":"LOCK"} -> 200 | 409 refused | 504 timeout | 503 | 404 | 400
//   POST /admin/rooms              201 | 409 | 400
//   PUT  /admin/rooms/{id}         200 | 404 | 409 | 400
//   DELETE /admin/rooms/{id}       204 | 404
//   GET  /events?since={seq}       long-poll, ordered
//   POST /admin/sweep              sweep report
class ApiServer {
 public:
  ApiServer(Executor& executor, ApiBackend& backend, ApiOptions options = {});
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  // Port 0 picks a free port; returns the bound port. Throws BindFailure.
  int bind(const std::string& host, int port);
  // Serves on a background thread until stop().
  void start();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace tg::server
