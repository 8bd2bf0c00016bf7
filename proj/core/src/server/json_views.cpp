#include "tunnelguard/server/json_views.hpp"

#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "tunnelguard/device/command.hpp"

namespace tg::server {

using nlohmann::json;

namespace {

json entry_json(const RegistryEntry& e) {
  return {{"room_id", e.room_id},
          {"peer", {{"node", e.peer.node}, {"port", e.peer.port}}},
          {"session_id", e.session_id},
          {"device_port", e.device_port}};
}

json event_json(const Event& e) {
  return {{"seq", e.seq},
          {"at_ms", to_ms(e.at)},
          {"kind", to_string(e.kind)},
          {"alarm", is_alarm(e.kind)},
          {"room_id", e.room_id},
          {"origin", to_string(e.origin)},
          {"detail", e.detail}};
}

std::string dump(const json& j, int indent) { return j.dump(indent); }

template <typename T>
T bounded(const json& j, const char* field) {
  if (!j.contains(field)) throw std::invalid_argument(std::string("missing field '") + field + "'");
  const json& v = j.at(field);
  if (!v.is_number_unsigned() || v.get<std::uint64_t>() > std::numeric_limits<T>::max()) {
    throw std::invalid_argument(std::string("field '") + field + "' must be an unsigned integer in range");
  }
  return static_cast<T>(v.get<std::uint64_t>());
}

}  // namespace

std::string to_json(const RegistryEntry& e, int indent) { return dump(entry_json(e), indent); }

std::string to_json(const std::vector<RegistryEntry>& entries, int indent) {
  json arr = json::array();
  for (const auto& e : entries) arr.push_back(entry_json(e));
  return dump(arr, indent);
}

std::string to_json(const RoomStatus& s, int indent) {
  json j = {{"room_id", s.room_id},
            {"lock", to_string(s.lock)},
            {"servo_angle", s.servo_angle},
            {"appliance_on", s.appliance_on},
            {"occupied", s.occupied},
            {"temperature", device::format_temperature(s.temperature)},
            {"humidity", nullptr},
            {"last_seen_ms", to_ms(s.last_seen)},
            {"staleness_ms", s.staleness.count()},
            {"text", format_status(s)}};
  if (s.humidity) j["humidity"] = *s.humidity;
  return dump(j, indent);
}

std::string to_json(const SweepReport& r, int indent) {
  json failed = json::array();
  for (const auto& [room, reason] : r.failed) failed.push_back({{"room_id", room}, {"reason", reason}});
  const json j = {{"id", r.id},
                  {"origin", to_string(r.origin)},
                  {"started_at_ms", to_ms(r.started_at)},
                  {"completed_at_ms", to_ms(r.completed_at)},
                  {"locked", r.locked},
                  {"notified", r.notified},
                  {"failed", failed}};
  return dump(j, indent);
}

std::string to_json(const Event& e, int indent) { return dump(event_json(e), indent); }

std::string to_json(const std::vector<Event>& events, int indent) {
  json arr = json::array();
  for (const auto& e : events) arr.push_back(event_json(e));
  return dump(arr, indent);
}

std::string to_json(const CommandOutcome& o, int indent) {
  const std::string op = device::is_known_opcode(o.opcode)
                             ? std::string(device::to_string(static_cast<device::Opcode>(o.opcode)))
                             : std::to_string(o.opcode);
  const json j = {{"request_id", o.request_id},   {"room_id", o.room_id},
                  {"opcode", op},                 {"status", to_string(o.status)},
                  {"servo_angle", o.servo_angle}, {"appliance_on", o.appliance_on},
                  {"attempts", o.attempts},       {"completed_at_ms", to_ms(o.completed_at)}};
  return dump(j, indent);
}

RegistryEntry registry_entry_from_json(const std::string& body, std::optional<std::uint32_t> room_id) {
  const json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw std::invalid_argument("body is not a JSON object");
  RegistryEntry e;
  if (room_id && !j.contains("room_id")) {
    e.room_id = *room_id;
  } else {
    e.room_id = bounded<std::uint32_t>(j, "room_id");
  }
  e.session_id = bounded<std::uint32_t>(j, "session_id");
  e.device_port = bounded<std::uint16_t>(j, "device_port");
  if (!j.contains("peer") || !j.at("peer").is_object()) throw std::invalid_argument("missing object 'peer'");
  e.peer.node = bounded<std::uint32_t>(j.at("peer"), "node");
  e.peer.port = bounded<std::uint16_t>(j.at("peer"), "port");
  return e;
}

}  // namespace tg::server
