#include "tunnelguard/server/events.hpp"

#include <algorithm>
#include <ostream>

namespace tg::server {

std::string_view to_string(EventKind k) noexcept {
  switch (k) {
    case EventKind::FireAlarm: return "FIRE_ALARM";
    case EventKind::OccupiedAfterHours: return "OCCUPIED_AFTER_HOURS";
    case EventKind::LockRefused: return "LOCK_REFUSED";
    case EventKind::RegistryPut: return "REGISTRY_PUT";
    case EventKind::RegistryUpdate: return "REGISTRY_UPDATE";
    case EventKind::RegistryDelete: return "REGISTRY_DELETE";
    case EventKind::Command: return "COMMAND";
    case EventKind::Sweep: return "SWEEP";
  }
  return "?";
}

std::string_view to_string(Origin o) noexcept {
  switch (o) {
    case Origin::Api: return "api";
    case Origin::Rule: return "rule";
    case Origin::Sweep: return "sweep";
    case Origin::Script: return "script";
    case Origin::Bootstrap: return "bootstrap";
  }
  return "?";
}

bool is_alarm(EventKind k) noexcept {
  return k == EventKind::FireAlarm || k == EventKind::OccupiedAfterHours || k == EventKind::LockRefused;
}

std::string format_event(const Event& e) {
  std::string out = std::to_string(e.seq);
  out += ' ';
  out += std::to_string(to_ms(e.at));
  out += ' ';
  out += to_string(e.kind);
  out += " room=";
  out += std::to_string(e.room_id);
  out += " origin=";
  out += to_string(e.origin);
  if (!e.detail.empty()) {
    out += ' ';
    out += e.detail;
  }
  return out;
}

const Event& EventLog::append(VirtualTime at, EventKind kind, std::uint32_t room_id, Origin origin,
                              std::string detail) {
  Event& e = events_.emplace_back();
  e.seq = events_.size();
  e.at = at;
  e.kind = kind;
  e.room_id = room_id;
  e.origin = origin;
  e.detail = std::move(detail);
  if (sink_ != nullptr) *sink_ << format_event(e) << '\n';
  if (listener_) listener_(e);
  return e;
}

std::vector<Event> EventLog::since(std::uint64_t seq) const {
  if (seq >= events_.size()) return {};
  return {events_.begin() + static_cast<std::ptrdiff_t>(seq), events_.end()};
}

std::size_t EventLog::count(EventKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(events_.begin(), events_.end(), [kind](const Event& e) { return e.kind == kind; }));
}

void EventFeed::publish(const Event& e) {
  {
    std::lock_guard lock(mu_);
    events_.push_back(e);
  }
  cv_.notify_all();
}

std::vector<Event> EventFeed::wait_since(std::uint64_t since, std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, timeout, [&] { return closed_ || (!events_.empty() && events_.back().seq > since); });
  std::vector<Event> out;
  for (const auto& e : events_) {
    if (e.seq > since) out.push_back(e);
  }
  return out;
}

void EventFeed::shutdown() {
  {
    std::lock_guard lock(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

}  // namespace tg::server
