#include "tunnelguard/scenario/runner.hpp"

#include <fstream>

#include <json.hpp>

#include "tunnelguard/netsim/adversary.hpp"
#include "tunnelguard/server/errors.hpp"
#include "tunnelguard/server/json_views.hpp"

namespace tg::scenario {

using nlohmann::json;

ArmRun::ArmRun(const Scenario& scenario, const ArmDef& arm, RunOptions options) : scenario_(scenario), arm_(arm) {
  net_ = std::make_unique<netsim::Network>(build_topology(scenario, arm));
  server_ = std::make_shared<ServerNode>(scenario, arm, &oracle_);
  if (options.telemetry_sink || options.event_sink) own_logs_ = false;
  server_->control().attach_logs(options.telemetry_sink ? options.telemetry_sink : &telemetry_buf_,
                                 options.event_sink ? options.event_sink : &event_buf_);
  net_->attach(scenario.server_node().id, server_);

  std::optional<VirtualTime> last_tick;
  if (!options.live) last_tick = Millis(std::int64_t(scenario.duration_s) * 1000);
  for (const auto& n : scenario.nodes) {
    if (n.role == NodeRole::SecureRouter) {
      auto h = std::make_shared<SecureRouterNode>(scenario, arm, n);
      routers_.push_back(h);
      net_->attach(n.id, h);
    }
  }
  for (const auto& r : scenario.rooms) {
    auto h = std::make_shared<RoomNode>(r, scenario.device, &oracle_, last_tick);
    rooms_.push_back(h);
    net_->attach(r.node, h);
  }
  if (arm.adversary) {
    for (const auto& n : scenario.nodes)
      if (n.tappable) net_->attach_adversary(n.id, *arm.adversary);
  }
}

VirtualTime ArmRun::end_time() const { return Millis(std::int64_t(scenario_.duration_s) * 1000) + scenario_.drain; }

void ArmRun::run_until(VirtualTime t) { net_->run_until(t); }

void ArmRun::run() { run_until(end_time()); }

void ArmRun::invoke_server(const std::function<void(VirtualTime)>& fn) {
  net_->invoke(scenario_.server_node().id, [&](netsim::Context& ctx) { server_->run(ctx, [&] { fn(ctx.now()); }); });
}

ArmResult ArmRun::result() const {
  ArmResult r;
  r.arm = arm_.name;
  r.variant = arm_.variant;
  r.adversary = arm_.adversary;
  r.ended_at = net_->now();
  r.oracle = oracle_.oracle();
  if (const auto* tap = net_->tap()) {
    r.frames = tap->frames();
    r.capture = netsim::analyze_capture(*tap, r.oracle);
  } else {
    r.capture = netsim::analyze_capture(std::vector<netsim::CapturedFrame>{}, r.oracle);
  }
  r.net = net_->stats();

  const auto& control = server_->control();
  r.server = control.stats();
  r.lines_persisted = control.log_store().size();
  r.sweeps = control.sweeps();
  r.commands = server_->scripted_outcomes();
  for (const auto& e : control.registry().list()) {
    try {
      r.statuses.push_back(control.get_status(e.room_id, r.ended_at));
    } catch (const server::ServerError&) {
    }
  }
  for (const auto& room : rooms_) {
    r.lines_emitted += room->lines_sent();
    r.rooms.push_back(room->state());
  }

  for (const auto& router : routers_) {
    r.tunnel.dropped_no_session += router->stats().dropped_no_session;
    if (const auto* lac = router->lac()) {
      if (lac->phase() == tunnel::TunnelPhase::Established) ++r.tunnel.tunnels_established;
      r.tunnel.sessions_established += lac->established_sessions();
      r.tunnel.control_retransmits += lac->stats().control_retransmits;
      r.tunnel.auth_failures += lac->stats().auth_failures;
    }
  }
  if (const auto* lns = server_->lns()) {
    for (auto id : lns->tunnel_ids()) {
      const auto* ep = lns->tunnel(id);
      r.tunnel.control_retransmits += ep->stats().control_retransmits;
      r.tunnel.auth_failures += ep->stats().auth_failures;
    }
  }

  if (own_logs_) {
    r.telemetry_log = telemetry_buf_.str();
    r.event_log = event_buf_.str();
  }
  r.trace = net_->trace();
  return r;
}

ArmResult run_arm(const Scenario& scenario, const ArmDef& arm) {
  ArmRun run(scenario, arm);
  run.run();
  return run.result();
}

namespace {

json tamper_json(const netsim::TamperStats& t) {
  return {{"attempts", t.attempts},
          {"delivered", t.delivered},
          {"accepted", t.accepted},
          {"rejected_auth", t.rejected_auth},
          {"commands_accepted", t.commands_accepted}};
}

json capture_json(const netsim::CaptureReport& c) {
  return {{"frames_seen", c.frames_seen},
          {"data_frames_seen", c.data_frames_seen},
          {"telemetry_lines_emitted", c.telemetry_lines_emitted},
          {"plaintext_lines_recovered", c.plaintext_lines_recovered},
          {"recovered_lines", c.recovered_lines},
          {"commands_emitted", c.commands_emitted},
          {"commands_recovered", c.commands_recovered},
          {"tamper", tamper_json(c.tamper)}};
}

json adversary_json(const std::optional<netsim::AdversaryPolicy>& a) {
  if (!a) return {{"mode", "none"}};
  return {{"mode", a->mode == netsim::AdversaryMode::Mitm ? "mitm" : "passive"},
          {"every_nth", a->tamper.every_nth},
          {"xor_mask", a->tamper.xor_mask}};
}

json arm_json(const ArmResult& r) {
  json commands = json::array();
  for (const auto& o : r.commands) commands.push_back(json::parse(server::to_json(o)));
  return {
      {"arm", r.arm},
      {"variant", to_string(r.variant)},
      {"adversary", adversary_json(r.adversary)},
      {"ended_at_ms", to_ms(r.ended_at)},
      {"lines_emitted", r.lines_emitted},
      {"lines_persisted", r.lines_persisted},
      {"capture", capture_json(r.capture)},
      {"network",
       {{"originated", r.net.originated},
        {"delivered", r.net.delivered},
        {"dropped_loss", r.net.dropped_loss},
        {"dropped_adversary", r.net.dropped_adversary},
        {"stream_resets", r.net.stream_resets}}},
      {"server",
       {{"telemetry_ingested", r.server.telemetry_ingested},
        {"malformed_lines", r.server.malformed_lines},
        {"unmapped_payloads", r.server.unmapped_payloads},
        {"results_matched", r.server.results_matched},
        {"stale_results", r.server.stale_results},
        {"commands_sent", r.server.commands_sent},
        {"command_retries", r.server.command_retries},
        {"command_timeouts", r.server.command_timeouts}}},
      {"tunnel",
       {{"tunnels_established", r.tunnel.tunnels_established},
        {"sessions_established", r.tunnel.sessions_established},
        {"control_retransmits", r.tunnel.control_retransmits},
        {"auth_failures", r.tunnel.auth_failures},
        {"dropped_no_session", r.tunnel.dropped_no_session}}},
      {"scripted_commands", commands},
      {"sweeps", r.sweeps.size()},
  };
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

std::string capture_report_json(const netsim::CaptureReport& report) { return capture_json(report).dump(2) + "\n"; }

std::string arm_report_json(const ArmResult& result) { return arm_json(result).dump(2) + "\n"; }

void write_arm_outputs(const std::filesystem::path& dir, const ArmResult& r) {
  std::filesystem::create_directories(dir);
  write_file(dir / "telemetry.log", r.telemetry_log);
  write_file(dir / "events.log", r.event_log);

  std::ostringstream capture, emissions, trace;
  netsim::write_capture(capture, r.frames);
  netsim::write_oracle(emissions, r.oracle);
  for (const auto& line : r.trace) trace << line << '\n';
  write_file(dir / "capture.txt", capture.str());
  write_file(dir / "emissions.txt", emissions.str());
  write_file(dir / "trace.log", trace.str());

  write_file(dir / "capture_report.json", capture_report_json(r.capture));
  json sweeps = json::array();
  for (const auto& s : r.sweeps) sweeps.push_back(json::parse(server::to_json(s)));
  write_file(dir / "sweep_report.json", sweeps.dump(2) + "\n");
  json statuses = json::array();
  for (const auto& s : r.statuses) statuses.push_back(json::parse(server::to_json(s)));
  write_file(dir / "status.json", statuses.dump(2) + "\n");
  write_file(dir / "arm_report.json", arm_report_json(r));
}

std::string summary_json(const Scenario& scenario, const std::vector<ArmResult>& results) {
  json arms = json::array();
  for (const auto& r : results) {
    arms.push_back({{"arm", r.arm},
                    {"variant", to_string(r.variant)},
                    {"adversary", adversary_json(r.adversary)},
                    {"lines_emitted", r.lines_emitted},
                    {"lines_persisted", r.lines_persisted},
                    {"plaintext_lines_recovered", r.capture.plaintext_lines_recovered},
                    {"commands_emitted", r.capture.commands_emitted},
                    {"commands_recovered", r.capture.commands_recovered},
                    {"tamper", tamper_json(r.capture.tamper)},
                    {"auth_failures", r.tunnel.auth_failures}});
  }
  json doc = {{"scenario", scenario.name},
              {"seed", scenario.seed},
              {"duration_s", scenario.duration_s},
              {"rooms", scenario.rooms.size()},
              {"arms", arms}};
  return doc.dump(2) + "\n";
}

std::vector<ArmResult> run_scenario(const Scenario& scenario, const std::filesystem::path& out) {
  std::vector<ArmResult> results;
  for (const auto& arm : scenario.arms) {
    results.push_back(run_arm(scenario, arm));
    write_arm_outputs(out / arm.name, results.back());
  }
  write_file(out / "summary.json", summary_json(scenario, results));
  return results;
}

}  // namespace tg::scenario
