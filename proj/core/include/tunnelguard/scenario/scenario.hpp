#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tunnelguard/device/room.hpp"
#include "tunnelguard/netsim/adversary.hpp"
#include "tunnelguard/netsim/topology.hpp"
#include "tunnelguard/server/control_server.hpp"
#include "tunnelguard/tunnel/endpoint.hpp"

namespace tg::scenario {

using netsim::NodeId;

enum class Variant { None, L2tpLite, PptpLite };
enum class NodeRole { Server, SecureRouter, Router, Room };

std::string_view to_string(Variant v) noexcept;
std::string_view to_string(NodeRole r) noexcept;

// A document that failed validation. `field` is a JSON path such as
// "rooms[3].script[0].t_ms", or "line 4, column 7" for syntax errors.
class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

struct NodeDef {
  NodeId id = 0;
  std::string name;
  NodeRole role = NodeRole::Router;
  bool tappable = false;
  std::uint32_t tunnel_id = 0;  // secure routers; defaults to the node id
};

struct LinkDef {
  NodeId a = 0;
  NodeId b = 0;
  double loss = 0.0;
  Millis latency{1};
  std::optional<std::uint64_t> seed;
  std::string name;
};

struct RoomDef {
  std::uint32_t room_id = 0;
  NodeId node = 0;
  NodeId gateway = 0;  // the secure router in front of the room
  std::uint32_t session_id = 0;
  std::uint16_t device_port = 0;
  bool appliance_on = false;
  bool locked = false;
  std::vector<device::SetPoint> script;
};

struct CommandDef {
  VirtualTime at{0};
  std::uint32_t room_id = 0;
  device::Opcode opcode = device::Opcode::Lock;
};

struct ArmDef {
  std::string name;
  Variant variant = Variant::L2tpLite;
  std::optional<netsim::AdversaryPolicy> adversary;
  std::map<std::string, double> link_loss;  // by link name
};

struct TunnelSettings {
  tunnel::SecretKey secret;
  std::uint16_t mtu = tunnel::kDefaultMtu;
  tunnel::TimerPolicy timers;
};

struct Scenario {
  std::string name;
  std::uint64_t seed = 0;
  std::uint32_t duration_s = 0;
  // Extra virtual time after the last tick so in-flight traffic and command
  // retries settle.
  Millis drain{5000};
  Millis start_time{8 * 60 * 60 * 1000};
  server::RuleConfig rules;
  device::DeviceConfig device;
  TunnelSettings tunnel;
  std::vector<NodeDef> nodes;
  std::vector<LinkDef> links;
  std::vector<RoomDef> rooms;
  std::vector<CommandDef> commands;
  std::vector<ArmDef> arms;

  const NodeDef* node(NodeId id) const;
  const NodeDef& server_node() const;
};

// Throws ScenarioError.
Scenario parse_scenario(const std::string& text);
// Throws ScenarioError; an unreadable file is reported against field "file".
Scenario load_scenario(const std::filesystem::path& path);

// Replaces the master seed and drops per-link seeds, so every random stream
// derives from `seed`.
void override_seeds(Scenario& s, std::uint64_t seed);

// The network for one arm: link losses overridden per the arm, link seeds
// derived from the master seed where not given.
netsim::Topology build_topology(const Scenario& s, const ArmDef& arm);

}  // namespace tg::scenario
