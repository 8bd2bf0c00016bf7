#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "tunnelguard/netsim/capture.hpp"
#include "tunnelguard/netsim/network.hpp"
#include "tunnelguard/scenario/nodes.hpp"
#include "tunnelguard/scenario/scenario.hpp"
#include "tunnelguard/server/control_server.hpp"

namespace tg::scenario {

struct RunOptions {
  // Rooms keep ticking past the scenario duration (serve mode).
  bool live = false;
  // Where the control server writes its logs; in-memory buffers when unset.
  std::ostream* telemetry_sink = nullptr;
  std::ostream* event_sink = nullptr;
};

struct TunnelSummary {
  std::uint64_t tunnels_established = 0;
  std::uint64_t sessions_established = 0;
  std::uint64_t control_retransmits = 0;
  std::uint64_t auth_failures = 0;  // LAC and LNS together
  std::uint64_t dropped_no_session = 0;
};

struct ArmResult {
  std::string arm;
  Variant variant = Variant::None;
  std::optional<netsim::AdversaryPolicy> adversary;
  VirtualTime ended_at{0};

  netsim::EmissionOracle oracle;
  std::vector<netsim::CapturedFrame> frames;
  netsim::CaptureReport capture;
  netsim::NetStats net;
  server::ServerStats server;
  TunnelSummary tunnel;

  std::uint64_t lines_emitted = 0;
  std::uint64_t lines_persisted = 0;
  std::vector<server::SweepReport> sweeps;
  std::vector<server::CommandOutcome> commands;  // scripted ones
  std::vector<server::RoomStatus> statuses;      // at ended_at, rooms with data
  std::vector<device::RoomState> rooms;          // device ground truth at ended_at

  std::string telemetry_log;
  std::string event_log;
  std::vector<std::string> trace;
};

// One arm of a scenario on its own network.
class ArmRun {
 public:
  ArmRun(const Scenario& scenario, const ArmDef& arm, RunOptions options = {});
  ArmRun(const ArmRun&) = delete;
  ArmRun& operator=(const ArmRun&) = delete;

  void run_until(VirtualTime t);
  // Runs to duration + drain.
  void run();
  VirtualTime end_time() const;

  // Runs `fn` as the server node at the current time.
  void invoke_server(const std::function<void(VirtualTime)>& fn);

  netsim::Network& network() noexcept { return *net_; }
  ServerNode& server() noexcept { return *server_; }
  const ServerNode& server() const noexcept { return *server_; }
  const std::vector<std::shared_ptr<RoomNode>>& rooms() const noexcept { return rooms_; }
  const std::vector<std::shared_ptr<SecureRouterNode>>& routers() const noexcept { return routers_; }
  const netsim::EmissionOracle& oracle() const noexcept { return oracle_.oracle(); }

  ArmResult result() const;

 private:
  const Scenario& scenario_;
  ArmDef arm_;
  OracleRecorder oracle_;
  std::ostringstream telemetry_buf_;
  std::ostringstream event_buf_;
  bool own_logs_ = true;
  std::unique_ptr<netsim::Network> net_;
  std::shared_ptr<ServerNode> server_;
  std::vector<std::shared_ptr<RoomNode>> rooms_;
  std::vector<std::shared_ptr<SecureRouterNode>> routers_;
};

ArmResult run_arm(const Scenario& scenario, const ArmDef& arm);

// arm_report.json and friends. Everything here is a pure function of the
// result, so two runs with the same seeds produce identical files.
std::string capture_report_json(const netsim::CaptureReport& report);
std::string arm_report_json(const ArmResult& result);
void write_arm_outputs(const std::filesystem::path& dir, const ArmResult& result);
std::string summary_json(const Scenario& scenario, const std::vector<ArmResult>& results);

// Runs every arm and writes `<out>/<arm>/...` plus `<out>/summary.json`.
// Throws ScenarioError for an invalid document.
std::vector<ArmResult> run_scenario(const Scenario& scenario, const std::filesystem::path& out);

}  // namespace tg::scenario
