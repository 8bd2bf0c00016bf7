#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "tunnelguard/scenario/runner.hpp"
#include "tunnelguard/scenario/scenario.hpp"
#include "tunnelguard/server/log_store.hpp"

namespace tg::scenario {
namespace {

const char* kSecret = "000102030405060708090a0b0c0d0e0f101112131415161718191a1b1c1d1e1f";

// server(1) - campus(2, tappable) - sr(3) - rooms 11, 12
std::string small_doc(const std::string& variant = "L2TP_LITE", const std::string& extra = "") {
  std::ostringstream o;
  o << R"({
  "name": "small", "seed": 7, "duration_s": 10, "drain_ms": 3000, "start_time": "12:00:00",
  "tunnel": {"secret": ")" << kSecret << R"("},
  "topology": {
    "nodes": [
      {"id": 1, "role": "server"}, {"id": 2, "role": "router", "tappable": true},
      {"id": 3, "role": "secure_router"}, {"id": 11, "role": "room"}, {"id": 12, "role": "room"}
    ],
    "links": [
      {"name": "up", "a": 1, "b": 2, "latency_ms": 3}, {"name": "sr", "a": 2, "b": 3, "latency_ms": 3},
      {"name": "l11", "a": 3, "b": 11}, {"name": "l12", "a": 3, "b": 12}
    ]
  },
  "rooms": [
    {"room_id": 501, "node": 11, "gateway": 3, "device_port": 6001, "appliance_on": true,
     "script": [{"t_ms": 0, "motion": true, "temp": 21.5, "humidity": 40}]},
    {"room_id": 502, "node": 12, "gateway": 3, "device_port": 6002,
     "script": [{"t_ms": 0, "motion": false, "temp": 19.0, "humidity": 55}]}
  ],
  "commands": [{"at_ms": 4000, "room_id": 501, "opcode": "LOCK"}, {"at_ms": 5000, "room_id": 502, "opcode": "LOCK"}],
  "variant": ")" << variant << R"(", "adversary": {"mode": "passive"})" << extra << "\n}";
  return o.str();
}

std::string expect_error(const std::string& doc) {
  try {
    parse_scenario(doc);
  } catch (const ScenarioError& e) {
    return e.field();
  }
  return "<no error>";
}

std::string replace(std::string s, const std::string& from, const std::string& to) {
  auto p = s.find(from);
  EXPECT_NE(p, std::string::npos) << from;
  if (p != std::string::npos) s.replace(p, from.size(), to);
  return s;
}

TEST(ScenarioLoad, SmallDocument) {
  auto s = parse_scenario(small_doc());
  EXPECT_EQ(s.name, "small");
  EXPECT_EQ(s.duration_s, 10u);
  EXPECT_EQ(s.start_time, Millis(12 * 3600 * 1000));
  ASSERT_EQ(s.rooms.size(), 2u);
  EXPECT_EQ(s.rooms[0].session_id, 501u);  // defaults to the room id
  EXPECT_EQ(s.rooms[0].script[0].temperature, 215);
  ASSERT_EQ(s.arms.size(), 1u);
  EXPECT_EQ(s.arms[0].name, "default");
  EXPECT_EQ(s.arms[0].variant, Variant::L2tpLite);
  ASSERT_TRUE(s.arms[0].adversary);
  EXPECT_EQ(s.commands[1].opcode, device::Opcode::Lock);
}

TEST(ScenarioLoad, NegativeDurationNamesTheField) {
  EXPECT_EQ(expect_error(replace(small_doc(), "\"duration_s\": 10", "\"duration_s\": -1")), "duration_s");
}

TEST(ScenarioLoad, FieldPathsReachIntoArrays) {
  EXPECT_EQ(expect_error(replace(small_doc(), "\"humidity\": 55", "\"humidity\": 101")), "rooms[1].script[0].humidity");
  EXPECT_EQ(expect_error(replace(small_doc(), "\"gateway\": 3, \"device_port\": 6002", "\"gateway\": 2, \"device_port\": 6002")),
            "rooms[1].gateway");
  EXPECT_EQ(expect_error(replace(small_doc(), "\"opcode\": \"LOCK\"}]", "\"opcode\": \"OPEN\"}]")), "commands[1].opcode");
  EXPECT_EQ(expect_error(replace(small_doc(), "\"device_port\": 6002", "\"device_port\": 6001")), "rooms[1].device_port");
  EXPECT_EQ(expect_error(replace(small_doc(), "\"latency_ms\": 3}, {\"name\": \"sr\"", "\"latency_ms\": 3}, {\"name\": \"up\"")),
            "topology.links[1].name");
  EXPECT_EQ(expect_error(replace(small_doc(), "L2TP_LITE", "IPSEC")), "variant");
}

TEST(ScenarioLoad, SyntaxErrorGivesLineAndColumn) {
  auto field = expect_error("{\n  \"seed\": 1,\n  \"x\": ]\n}");
  EXPECT_EQ(field, "line 3, column 8");
}

TEST(ScenarioLoad, TopologyErrorsSurface) {
  // a cycle through the campus router
  auto doc = replace(small_doc(), "{\"name\": \"l12\", \"a\": 3, \"b\": 12}",
                     "{\"name\": \"l12\", \"a\": 3, \"b\": 12}, {\"name\": \"loop\", \"a\": 1, \"b\": 3}");
  EXPECT_EQ(expect_error(doc), "topology");
}

TEST(ScenarioLoad, TunnelSecretRequiredOnlyForTunnelArms) {
  auto doc = replace(small_doc("NONE"), std::string("\"tunnel\": {\"secret\": \"") + kSecret + "\"},", "");
  EXPECT_NO_THROW(parse_scenario(doc));
  doc = replace(small_doc(), std::string("\"tunnel\": {\"secret\": \"") + kSecret + "\"},", "");
  EXPECT_EQ(expect_error(doc), "tunnel");
  doc = replace(small_doc(), kSecret, "abcd");
  EXPECT_EQ(expect_error(doc), "tunnel.secret");
}

TEST(ScenarioLoad, ArmsAndOverrides) {
  auto doc = replace(small_doc(), "\"variant\": \"L2TP_LITE\", \"adversary\": {\"mode\": \"passive\"}",
                     R"("arms": [{"name": "a", "variant": "NONE"},
                                 {"name": "b", "variant": "PPTP_LITE", "adversary": {"mode": "mitm", "every_nth": 3},
                                  "link_loss": {"up": 0.5}}])");
  auto s = parse_scenario(doc);
  ASSERT_EQ(s.arms.size(), 2u);
  EXPECT_FALSE(s.arms[0].adversary);
  EXPECT_EQ(s.arms[1].adversary->tamper.every_nth, 3u);
  auto t = build_topology(s, s.arms[1]);
  EXPECT_DOUBLE_EQ(t.links[0].loss, 0.5);
  EXPECT_DOUBLE_EQ(build_topology(s, s.arms[0]).links[0].loss, 0.0);

  EXPECT_EQ(expect_error(replace(doc, "{\"up\": 0.5}", "{\"nope\": 0.5}")), "arms[1].link_loss.nope");
  EXPECT_EQ(expect_error(replace(doc, "\"name\": \"b\"", "\"name\": \"a\"")), "arms[1].name");
}

TEST(ScenarioLoad, SeedOverrideRederivesLinkSeeds) {
  auto doc = replace(small_doc(), "{\"name\": \"up\", \"a\": 1, \"b\": 2, \"latency_ms\": 3}",
                     "{\"name\": \"up\", \"a\": 1, \"b\": 2, \"latency_ms\": 3, \"seed\": 99}");
  auto s = parse_scenario(doc);
  EXPECT_EQ(build_topology(s, s.arms[0]).links[0].seed, 99u);
  auto before = build_topology(s, s.arms[0]).links[1].seed;
  override_seeds(s, 1234);
  EXPECT_NE(build_topology(s, s.arms[0]).links[0].seed, 99u);
  EXPECT_NE(build_topology(s, s.arms[0]).links[1].seed, before);
}

// --- runs ---

TEST(ScenarioRun, PlaintextArmLeaksEverything) {
  auto s = parse_scenario(small_doc("NONE"));
  auto r = run_arm(s, s.arms[0]);
  EXPECT_EQ(r.lines_emitted, 20u);
  EXPECT_EQ(r.lines_persisted, 20u);
  EXPECT_EQ(r.capture.telemetry_lines_emitted, 20u);
  EXPECT_EQ(r.capture.plaintext_lines_recovered, 20u);
  EXPECT_EQ(r.capture.commands_emitted, 2u);
  EXPECT_EQ(r.capture.commands_recovered, 2u);
}

TEST(ScenarioRun, TunneledArmsLeakNothing) {
  for (auto v : {"L2TP_LITE", "PPTP_LITE"}) {
    SCOPED_TRACE(v);
    auto s = parse_scenario(small_doc(v));
    auto r = run_arm(s, s.arms[0]);
    EXPECT_EQ(r.tunnel.tunnels_established, 1u);
    EXPECT_EQ(r.tunnel.sessions_established, 2u);
    EXPECT_EQ(r.lines_persisted, 20u);
    EXPECT_EQ(r.capture.plaintext_lines_recovered, 0u);
    EXPECT_EQ(r.capture.commands_recovered, 0u);
    EXPECT_GT(r.capture.frames_seen, 20u);
  }
}

TEST(ScenarioRun, ScriptedCommandsReachTheDevices) {
  auto s = parse_scenario(small_doc());
  auto r = run_arm(s, s.arms[0]);
  ASSERT_EQ(r.commands.size(), 2u);
  EXPECT_EQ(r.commands[0].room_id, 501u);
  EXPECT_EQ(r.commands[0].status, server::CommandStatus::RefusedOccupied);
  EXPECT_EQ(r.commands[1].status, server::CommandStatus::Ok);
  EXPECT_FALSE(r.rooms[0].locked());
  EXPECT_TRUE(r.rooms[1].locked());
  EXPECT_NE(r.event_log.find("LOCK_REFUSED room=501 origin=script"), std::string::npos);
}

TEST(ScenarioRun, MitmOnPlaintextIsAccepted) {
  auto doc = replace(small_doc("NONE"), "{\"mode\": \"passive\"}", "{\"mode\": \"mitm\", \"every_nth\": 2}");
  auto s = parse_scenario(doc);
  auto r = run_arm(s, s.arms[0]);
  EXPECT_GT(r.capture.tamper.delivered, 0u);
  EXPECT_EQ(r.capture.tamper.accepted, r.capture.tamper.delivered);
  EXPECT_EQ(r.capture.tamper.rejected_auth, 0u);
}

TEST(ScenarioRun, MitmOnTunnelIsRejected) {
  for (auto v : {"L2TP_LITE", "PPTP_LITE"}) {
    SCOPED_TRACE(v);
    auto doc = replace(small_doc(v), "{\"mode\": \"passive\"}", "{\"mode\": \"mitm\", \"every_nth\": 2}");
    auto s = parse_scenario(doc);
    auto r = run_arm(s, s.arms[0]);
    EXPECT_GT(r.capture.tamper.delivered, 0u);
    EXPECT_EQ(r.capture.tamper.accepted, 0u);
    EXPECT_EQ(r.capture.tamper.rejected_auth, r.capture.tamper.delivered);
    EXPECT_EQ(r.tunnel.auth_failures, r.capture.tamper.delivered);
  }
}

TEST(ScenarioRun, SameSeedsSameBytes) {
  for (auto v : {"NONE", "L2TP_LITE", "PPTP_LITE"}) {
    auto doc = replace(small_doc(v), "\"links\": [\n      {\"name\": \"up\", \"a\": 1, \"b\": 2, \"latency_ms\": 3}",
                       "\"links\": [\n      {\"name\": \"up\", \"a\": 1, \"b\": 2, \"latency_ms\": 3, \"loss\": 0.2}");
    auto s = parse_scenario(doc);
    auto a = run_arm(s, s.arms[0]);
    auto b = run_arm(s, s.arms[0]);
    EXPECT_EQ(arm_report_json(a), arm_report_json(b)) << v;
    EXPECT_EQ(a.telemetry_log, b.telemetry_log);
    EXPECT_EQ(a.event_log, b.event_log);
    EXPECT_EQ(a.trace, b.trace);
    EXPECT_EQ(a.frames, b.frames);
  }
}

TEST(ScenarioRun, DifferentSeedsDiverge) {
  auto doc = replace(small_doc(), "{\"name\": \"up\", \"a\": 1, \"b\": 2, \"latency_ms\": 3}",
                     "{\"name\": \"up\", \"a\": 1, \"b\": 2, \"latency_ms\": 3, \"loss\": 0.3}");
  auto s = parse_scenario(doc);
  auto a = run_arm(s, s.arms[0]);
  override_seeds(s, 8);
  auto b = run_arm(s, s.arms[0]);
  EXPECT_NE(a.trace, b.trace);
}

TEST(ScenarioRun, ReplayedLogMatchesLiveStatus) {
  auto s = parse_scenario(small_doc());
  ArmRun run(s, s.arms[0]);
  run.run();
  auto r = run.result();
  std::istringstream in(r.telemetry_log);
  auto store = server::LogStore::replay(in);
  EXPECT_EQ(store.size(), r.lines_persisted);
  for (const auto& status : r.statuses) {
    const auto* rec = store.latest(status.room_id);
    ASSERT_NE(rec, nullptr);
    EXPECT_EQ(server::derive_status(*rec, r.ended_at), status);
  }
}

TEST(ScenarioRun, InvokeServerUsesTheTransport) {
  auto s = parse_scenario(small_doc());
  ArmRun run(s, s.arms[0]);
  run.run_until(Millis(2000));
  std::optional<server::CommandOutcome> got;
  run.invoke_server([&](VirtualTime now) {
    run.server().control().send_command(now, 502, static_cast<std::uint8_t>(device::Opcode::BuzzerOn),
                                        server::Origin::Api, [&](const server::CommandOutcome& o) { got = o; });
  });
  run.run_until(Millis(3000));
  ASSERT_TRUE(got);
  EXPECT_EQ(got->status, server::CommandStatus::Ok);
  EXPECT_TRUE(run.rooms()[1]->state().buzzer_on);
}

TEST(ScenarioRun, TotalLossTimesOutAtThirtyOneSeconds) {
  auto doc = replace(small_doc(), "{\"name\": \"up\", \"a\": 1, \"b\": 2, \"latency_ms\": 3}",
                     "{\"name\": \"up\", \"a\": 1, \"b\": 2, \"latency_ms\": 3, \"loss\": 1.0}");
  auto s = parse_scenario(doc);
  s.duration_s = 40;
  auto r = run_arm(s, s.arms[0]);
  EXPECT_EQ(r.tunnel.tunnels_established, 0u);
  EXPECT_NE(std::find(r.trace.begin(), r.trace.end(), "31000 3 tunnel 3 down Timeout"), r.trace.end());
  EXPECT_EQ(r.lines_persisted, 0u);
}

}  // namespace
}  // namespace tg::scenario
