#include "tunnelguard/server/registry.hpp"

#include <algorithm>
#include <string>

namespace tg::server {

void Registry::put(const RegistryEntry& entry) {
  if (rooms_.count(entry.room_id) != 0) {
    throw ServerError(ServerErrc::DuplicateRoom, "room " + std::to_string(entry.room_id) + " already registered");
  }
  if (by_session_.count(entry.session_id) != 0) {
    throw ServerError(ServerErrc::DuplicateSession, "session " + std::to_string(entry.session_id) + " already mapped");
  }
  rooms_.emplace(entry.room_id, entry);
  by_session_.emplace(entry.session_id, entry.room_id);
}

void Registry::update(std::uint32_t room_id, const RegistryEntry& entry) {
  const auto it = rooms_.find(room_id);
  if (it == rooms_.end()) throw ServerError(ServerErrc::NotFound, "room " + std::to_string(room_id) + " not found");
  if (entry.room_id != room_id && rooms_.count(entry.room_id) != 0) {
    throw ServerError(ServerErrc::DuplicateRoom, "room " + std::to_string(entry.room_id) + " already registered");
  }
  const auto s = by_session_.find(entry.session_id);
  if (s != by_session_.end() && s->second != room_id) {
    throw ServerError(ServerErrc::DuplicateSession, "session " + std::to_string(entry.session_id) + " already mapped");
  }
  by_session_.erase(it->second.session_id);
  rooms_.erase(it);
  rooms_.emplace(entry.room_id, entry);
  by_session_[entry.session_id] = entry.room_id;
}

void Registry::remove(std::uint32_t room_id) {
  const auto it = rooms_.find(room_id);
  if (it == rooms_.end()) throw ServerError(ServerErrc::NotFound, "room " + std::to_string(room_id) + " not found");
  by_session_.erase(it->second.session_id);
  rooms_.erase(it);
}

const RegistryEntry* Registry::find(std::uint32_t room_id) const {
  const auto it = rooms_.find(room_id);
  return it == rooms_.end() ? nullptr : &it->second;
}

const RegistryEntry* Registry::find_by_session(std::uint32_t session_id) const {
  const auto it = by_session_.find(session_id);
  return it == by_session_.end() ? nullptr : find(it->second);
}

std::vector<RegistryEntry> Registry::list() const {
  std::vector<RegistryEntry> out;
  out.reserve(rooms_.size());
  for (const auto& [id, entry] : rooms_) out.push_back(entry);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.room_id < b.room_id; });
  return out;
}

}  // namespace tg::server
