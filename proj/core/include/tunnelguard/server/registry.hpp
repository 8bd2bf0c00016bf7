#pragma once

#include <cstdint>
#include <map>
#include <unordered_map>
#include <vector>

#include "tunnelguard/server/errors.hpp"
#include "tunnelguard/tunnel/server.hpp"

namespace tg::server {

using tunnel::PeerAddress;

// Room id -> where its traffic goes: the secure router's tunnel endpoint,
// the session carrying the room, and the port forwarded to the device.
struct RegistryEntry {
  std::uint32_t room_id = 0;
  PeerAddress peer;
  std::uint32_t session_id = 0;
  std::uint16_t device_port = 0;

  friend bool operator==(const RegistryEntry&, const RegistryEntry&) = default;
};

class Registry {
 public:
  // Throws DuplicateRoom / DuplicateSession.
  void put(const RegistryEntry& entry);
  // May rename the room. Throws NotFound, DuplicateRoom, DuplicateSession.
  void update(std::uint32_t room_id, const RegistryEntry& entry);
  // Throws NotFound.
  void remove(std::uint32_t room_id);

  const RegistryEntry* find(std::uint32_t room_id) const;
  const RegistryEntry* find_by_session(std::uint32_t session_id) const;
  // Ordered by room id.
  std::vector<RegistryEntry> list() const;
  std::size_t size() const noexcept { return rooms_.size(); }

 private:
  std::unordered_map<std::uint32_t, RegistryEntry> rooms_;
  std::unordered_map<std::uint32_t, std::uint32_t> by_session_;
};

}  // namespace tg::server
