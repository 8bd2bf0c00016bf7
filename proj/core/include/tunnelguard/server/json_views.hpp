#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tunnelguard/server/control_server.hpp"

namespace tg::server {

// Serialized JSON documents shared by the HTTP API and the run reports.
// `indent` < 0 gives compact output.
std::string to_json(const RegistryEntry& e, int indent = -1);
std::string to_json(const std::vector<RegistryEntry>& entries, int indent = -1);
std::string to_json(const RoomStatus& s, int indent = -1);
std::string to_json(const SweepReport& r, int indent = -1);
std::string to_json(const Event& e, int indent = -1);
std::string to_json(const std::vector<Event>& events, int indent = -1);
std::string to_json(const CommandOutcome& o, int indent = -1);

// Throws std::invalid_argument naming the missing or bad field.
// `room_id` fills in a body that omits it.
RegistryEntry registry_entry_from_json(const std::string& body, std::optional<std::uint32_t> room_id = std::nullopt);

}  // namespace tg::server
