#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "tunnelguard/common/time.hpp"

namespace tg::server {

enum class EventKind {
  // alarms
  FireAlarm,
  OccupiedAfterHours,
  LockRefused,
  // audit
  RegistryPut,
  RegistryUpdate,
  RegistryDelete,
  Command,
  Sweep,
};

enum class Origin { Api, Rule, Sweep, Script, Bootstrap };

std::string_view to_string(EventKind k) noexcept;
std::string_view to_string(Origin o) noexcept;
bool is_alarm(EventKind k) noexcept;

struct Event {
  std::uint64_t seq = 0;
  VirtualTime at{0};
  EventKind kind = EventKind::Command;
  std::uint32_t room_id = 0;
  Origin origin = Origin::Api;
  std::string detail;
};

// `<seq> <t_ms> <KIND> room=<id> origin=<origin> <detail>`
std::string format_event(const Event& e);

// Ordered, sequence-numbered event history. Sequence numbers start at 1.
class EventLog {
 public:
  using Listener = std::function<void(const Event&)>;

  void attach_sink(std::ostream* sink) noexcept { sink_ = sink; }
  void set_listener(Listener listener) { listener_ = std::move(listener); }

  const Event& append(VirtualTime at, EventKind kind, std::uint32_t room_id, Origin origin, std::string detail);

  const std::vector<Event>& events() const noexcept { return events_; }
  std::vector<Event> since(std::uint64_t seq) const;
  std::size_t count(EventKind kind) const;

 private:
  std::vector<Event> events_;
  std::ostream* sink_ = nullptr;
  Listener listener_;
};

// Thread-safe mirror of an EventLog for long-polling readers.
class EventFeed {
 public:
  void publish(const Event& e);
  // Events with seq > `since`; blocks up to `timeout` while there are none.
  std::vector<Event> wait_since(std::uint64_t since, std::chrono::milliseconds timeout);
  void shutdown();

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::vector<Event> events_;
  bool closed_ = false;
};

}  // namespace tg::server
