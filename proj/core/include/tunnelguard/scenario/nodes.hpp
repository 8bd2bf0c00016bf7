#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <vector>

#include "tunnelguard/netsim/capture.hpp"
#include "tunnelguard/netsim/network.hpp"
#include "tunnelguard/scenario/scenario.hpp"
#include "tunnelguard/server/control_server.hpp"
#include "tunnelguard/tunnel/server.hpp"

namespace tg::scenario {

using netsim::Context;
using netsim::Delivery;
using netsim::Packet;

inline constexpr std::uint16_t kL2tpPort = 1701;
inline constexpr std::uint16_t kPptpPort = 1723;
inline constexpr std::uint16_t kPlainServerPort = 9000;
inline constexpr std::uint16_t kLacStreamPort = 40000;
inline constexpr Millis kTickInterval{1000};

// Appends to the emission oracle; commands are kept once per encoding.
class OracleRecorder {
 public:
  void line(const std::string& l) { oracle_.telemetry_lines.push_back(l); }
  void command(const Bytes& c) {
    if (seen_.insert(c).second) oracle_.commands.push_back(c);
  }
  const netsim::EmissionOracle& oracle() const noexcept { return oracle_; }

 private:
  netsim::EmissionOracle oracle_;
  std::set<Bytes> seen_;
};

// A room controller: one telemetry line per second to its secure router,
// actuator commands answered in place.
class RoomNode : public netsim::NodeHandler {
 public:
  // Ticks at 1 s, 2 s, ... up to `last_tick` (forever when unset).
  RoomNode(const RoomDef& def, device::DeviceConfig config, OracleRecorder* oracle,
           std::optional<VirtualTime> last_tick);

  void start(Context& ctx) override;
  Delivery on_packet(Context& ctx, const Packet& packet) override;
  void on_wake(Context& ctx) override;

  const device::RoomState& state() const noexcept { return state_; }
  std::uint64_t lines_sent() const noexcept { return lines_; }
  std::uint64_t commands_handled() const noexcept { return commands_; }

 private:
  RoomDef def_;
  device::SensorScript script_;
  device::DeviceConfig config_;
  device::RoomState state_;
  OracleRecorder* oracle_;
  std::optional<VirtualTime> last_tick_;
  VirtualTime next_tick_{kTickInterval};
  std::uint64_t lines_ = 0;
  std::uint64_t commands_ = 0;
};

struct RouterStats {
  std::uint64_t upstream = 0;    // payloads from rooms sent on
  std::uint64_t downstream = 0;  // payloads delivered to rooms
  std::uint64_t dropped_no_session = 0;
  std::uint64_t rejected = 0;
};

// The secure router in front of a group of rooms. With a tunnel variant it
// is the LAC; with NONE it forwards ports in the clear.
class SecureRouterNode : public netsim::NodeHandler {
 public:
  SecureRouterNode(const Scenario& s, const ArmDef& arm, const NodeDef& self);

  void start(Context& ctx) override;
  Delivery on_packet(Context& ctx, const Packet& packet) override;
  void on_stream(Context& ctx, netsim::Address from, std::uint16_t local_port, ByteView chunk) override;
  void on_stream_reset(Context& ctx, netsim::Address peer) override;
  void on_wake(Context& ctx) override;

  const tunnel::TunnelEndpoint* lac() const noexcept { return lac_.get(); }
  const RouterStats& stats() const noexcept { return stats_; }

 private:
  Delivery handle(Context& ctx, const Packet* cause, tunnel::Outputs outs);
  void reschedule(Context& ctx);
  const RoomDef* room_by_port(std::uint16_t port) const;
  const RoomDef* room_by_session(std::uint32_t session) const;

  Variant variant_;
  NodeId server_;
  std::vector<RoomDef> rooms_;
  std::map<std::uint32_t, std::uint32_t> renumbered_;  // requested -> assigned
  std::unique_ptr<tunnel::TunnelEndpoint> lac_;
  RouterStats stats_;
};

// The control server host: LNS (or plain UDP listener), the control core and
// the scenario's scripted commands.
class ServerNode : public netsim::NodeHandler, public server::CommandTransport {
 public:
  ServerNode(const Scenario& s, const ArmDef& arm, OracleRecorder* oracle);

  void start(Context& ctx) override;
  Delivery on_packet(Context& ctx, const Packet& packet) override;
  void on_stream(Context& ctx, netsim::Address from, std::uint16_t local_port, ByteView chunk) override;
  void on_stream_reset(Context& ctx, netsim::Address peer) override;
  void on_wake(Context& ctx) override;

  bool session_up(const server::RegistryEntry& entry) const override;
  void deliver(const server::RegistryEntry& entry, Bytes payload) override;

  // Runs `fn` with the transport usable, then re-arms timers.
  void run(Context& ctx, const std::function<void()>& fn);

  server::ControlServer& control() noexcept { return control_; }
  const server::ControlServer& control() const noexcept { return control_; }
  const tunnel::TunnelServer* lns() const noexcept { return lns_.get(); }
  const std::vector<server::CommandOutcome>& scripted_outcomes() const noexcept { return outcomes_; }

  static server::RegistryEntry registry_entry(const RoomDef& room, Variant variant);

 private:
  Delivery handle(tunnel::ServerOutputs outs);
  Delivery on_session_payload(std::uint32_t session, ByteView payload);
  void fire_scripted();
  void reschedule();

  const Scenario& scenario_;
  Variant variant_;
  OracleRecorder* oracle_;
  server::ControlServer control_;
  std::unique_ptr<tunnel::TunnelServer> lns_;
  std::vector<CommandDef> script_;  // sorted by time
  std::size_t script_next_ = 0;
  std::vector<server::CommandOutcome> outcomes_;
  Context* ctx_ = nullptr;
};

}  // namespace tg::scenario
