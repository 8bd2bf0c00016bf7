#include <gtest/gtest.h>

#include "tunnelguard/netsim/network.hpp"

using namespace tg;
using namespace tg::netsim;

namespace {

// Records every packet and stream chunk it receives.
struct Sink : NodeHandler {
  std::vector<std::pair<VirtualTime, Packet>> packets;
  std::vector<std::pair<VirtualTime, Bytes>> chunks;
  std::vector<Address> resets;
  Delivery verdict = Delivery::Accepted;

  Delivery on_packet(Context& ctx, const Packet& p) override {
    packets.emplace_back(ctx.now(), p);
    return verdict;
  }
  void on_stream(Context& ctx, Address, std::uint16_t, ByteView chunk) override {
    chunks.emplace_back(ctx.now(), Bytes(chunk.begin(), chunk.end()));
  }
  void on_stream_reset(Context&, Address peer) override { resets.push_back(peer); }
};

// Sends `count` datagrams to `dst`, one every `gap`.
struct Source : NodeHandler {
  Address dst;
  int count;
  Millis gap;
  int sent = 0;
  Protocol proto = Protocol::Udp;
  std::uint16_t port = 5000;
  Source(Address d, int n, Millis g) : dst(d), count(n), gap(g) {}

  void start(Context& ctx) override { ctx.wake_at(ctx.now()); }
  void on_wake(Context& ctx) override {
    if (sent >= count) return;
    const std::string body = "frame-" + std::to_string(sent++);
    ctx.send(proto, port, dst, to_bytes(body));
    ctx.wake_at(ctx.now() + gap);
  }
  Delivery on_packet(Context&, const Packet&) override { return Delivery::Ignored; }
};

Topology line_topology(double loss = 0.0, std::uint64_t seed = 1) {
  // room(1) - secure(2) - open(3) - server(4)
  Topology t;
  t.nodes = {{1, "room", false}, {2, "secure", false}, {3, "open", true}, {4, "server", false}};
  t.links = {{1, 2, 0.0, Millis{2}, 11, "lan"},
             {2, 3, 0.0, Millis{5}, 12, "uplink"},
             {3, 4, loss, Millis{10}, seed, "wan"}};
  return t;
}

NetErrc build_error(const Topology& t) {
  try {
    Network n(t);
  } catch (const NetError& e) {
    return e.code();
  }
  return NetErrc::NoRoute;
}

void expect_conserved(const NetStats& s) {
  EXPECT_EQ(s.originated, s.delivered + s.dropped_loss + s.dropped_adversary + s.in_flight);
}

}  // namespace

TEST(Topology, TwoWingShapeBuilds) {
  Topology t;
  t.nodes = {{1, "room-a"}, {2, "room-b"}, {3, "secure"}, {4, "open", true}, {5, "server"}};
  t.links = {{1, 3}, {2, 3}, {3, 4}, {4, 5}};
  Network n(t);
  EXPECT_EQ(n.topology().nodes.size(), 5u);
  EXPECT_EQ(n.topology().links.size(), 4u);
  EXPECT_EQ(n.route(1, 5), (std::vector<NodeId>{1, 3, 4, 5}));
  EXPECT_EQ(n.route(5, 2), (std::vector<NodeId>{5, 4, 3, 2}));
  EXPECT_NO_THROW(n.attach_adversary(4, {}));
}

TEST(Topology, ValidationErrors) {
  Topology dangling = line_topology();
  dangling.links.push_back({4, 9});
  EXPECT_EQ(build_error(dangling), NetErrc::DanglingLink);

  Topology dup = line_topology();
  dup.nodes.push_back({2, "again"});
  EXPECT_EQ(build_error(dup), NetErrc::DuplicateNodeId);

  Topology cycle = line_topology();
  cycle.links.push_back({1, 4});
  EXPECT_EQ(build_error(cycle), NetErrc::CyclicTopology);

  Topology bad_loss = line_topology();
  bad_loss.links[0].loss = 1.5;
  EXPECT_EQ(build_error(bad_loss), NetErrc::InvalidLink);

  Topology two_taps = line_topology();
  two_taps.nodes[1].tappable = true;
  EXPECT_EQ(build_error(two_taps), NetErrc::MultipleTapPoints);

  Topology split;
  split.nodes = {{1}, {2}};
  Network n(split);
  try {
    n.route(1, 2);
    FAIL();
  } catch (const NetError& e) {
    EXPECT_EQ(e.code(), NetErrc::NoRoute);
  }
}

TEST(Topology, TapRefusedOffTheOpenHop) {
  Network n(line_topology());
  try {
    n.attach_adversary(2, {});
    FAIL();
  } catch (const NetError& e) {
    EXPECT_EQ(e.code(), NetErrc::TapRefused);
  }
}

TEST(Network, DeliversAfterPathLatency) {
  Network n(line_topology());
  auto sink = std::make_shared<Sink>();
  n.attach(4, sink);
  n.attach(1, std::make_shared<Source>(Address{4, 5000}, 1, Millis{1000}));
  n.run_until(VirtualTime{100});
  ASSERT_EQ(sink->packets.size(), 1u);
  EXPECT_EQ(sink->packets[0].first, VirtualTime{17});
  EXPECT_EQ(sink->packets[0].second.src, (Address{1, 5000}));
  EXPECT_EQ(as_string_view(sink->packets[0].second.payload), "frame-0");
  EXPECT_EQ(n.now(), VirtualTime{100});
}

TEST(Network, FullLossDeliversNothing) {
  Network n(line_topology(1.0));
  auto sink = std::make_shared<Sink>();
  n.attach(4, sink);
  n.attach(1, std::make_shared<Source>(Address{4, 5000}, 100, Millis{10}));
  n.run_until(VirtualTime{5000});
  EXPECT_TRUE(sink->packets.empty());
  EXPECT_EQ(n.stats().dropped_loss, 100u);
  expect_conserved(n.stats());
}

// Reference count from tests/oracles/loss_oracle.py.
TEST(Network, SeededHalfLossMatchesReference) {
  Network n(line_topology(0.5, 42));
  auto sink = std::make_shared<Sink>();
  n.attach(4, sink);
  n.attach(1, std::make_shared<Source>(Address{4, 5000}, 1000, Millis{1}));
  n.run_until(VirtualTime{5000});
  EXPECT_EQ(sink->packets.size(), 499u);
  EXPECT_GE(sink->packets.size(), 400u);
  EXPECT_LE(sink->packets.size(), 600u);
}

TEST(Network, LossDrawIsCounterBased) {
  EXPECT_EQ(loss_draw(7, false, 123, 0.3), loss_draw(7, false, 123, 0.3));
  int delivered = 0;
  for (std::uint64_t i = 0; i < 1000; ++i) delivered += !loss_draw(7, false, i, 0.3);
  EXPECT_EQ(delivered, 694);
  EXPECT_FALSE(loss_draw(7, true, 0, 0.0));
  EXPECT_TRUE(loss_draw(7, true, 0, 1.0));
}

TEST(Network, ConservationHoldsMidFlight) {
  Network n(line_topology(0.3, 9));
  n.attach(4, std::make_shared<Sink>());
  n.attach(1, std::make_shared<Source>(Address{4, 5000}, 200, Millis{3}));
  for (int t = 0; t <= 1000; t += 7) {
    n.run_until(VirtualTime{t});
    expect_conserved(n.stats());
  }
  EXPECT_GT(n.stats().in_flight + n.stats().delivered, 0u);
}

TEST(Network, SameTimeEventsOrderByNodeThenFifo) {
  struct Recorder : NodeHandler {
    std::vector<std::string>* log;
    explicit Recorder(std::vector<std::string>* l) : log(l) {}
    void start(Context& ctx) override {
      ctx.wake_at(VirtualTime{5});
      ctx.wake_at(VirtualTime{5});  // deduplicated
    }
    void on_wake(Context& ctx) override { log->push_back(std::to_string(ctx.self())); }
    Delivery on_packet(Context&, const Packet&) override { return Delivery::Ignored; }
  };
  std::vector<std::string> log;
  Network n(line_topology());
  for (NodeId id : {4u, 2u, 3u, 1u}) n.attach(id, std::make_shared<Recorder>(&log));
  n.run_until(VirtualTime{10});
  EXPECT_EQ(log, (std::vector<std::string>{"1", "2", "3", "4"}));
}

TEST(Network, RunsAreDeterministic) {
  auto run = [] {
    Network n(line_topology(0.4, 77));
    n.attach(4, std::make_shared<Sink>());
    n.attach(1, std::make_shared<Source>(Address{4, 5000}, 300, Millis{2}));
    n.run_until(VirtualTime{2000});
    return n.trace();
  };
  const auto a = run();
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, run());
}

TEST(Adversary, PassiveTapIsTransparent) {
  auto run = [](bool tapped) {
    Network n(line_topology(0.2, 5));
    n.attach(4, std::make_shared<Sink>());
    n.attach(1, std::make_shared<Source>(Address{4, 5000}, 1200, Millis{1}));
    if (tapped) n.attach_adversary(3, {AdversaryMode::PassiveSniff, {}});
    n.run_until(VirtualTime{3000});
    return std::make_pair(n.trace(), n.tap() ? n.tap()->frames().size() : 0u);
  };
  const auto [plain_trace, none] = run(false);
  const auto [tapped_trace, seen] = run(true);
  EXPECT_EQ(plain_trace, tapped_trace);
  EXPECT_EQ(seen, 1200u);
}

TEST(Adversary, MitmTampersEveryTenthDataFrame) {
  Network n(line_topology());
  auto sink = std::make_shared<Sink>();
  sink->verdict = Delivery::AuthRejected;
  n.attach(4, sink);
  n.attach(1, std::make_shared<Source>(Address{4, 5000}, 1234, Millis{1}));
  Tap& tap = n.attach_adversary(3, {AdversaryMode::Mitm, {}});
  n.run_until(VirtualTime{3000});
  EXPECT_EQ(tap.tamper().attempts, 123u);
  EXPECT_EQ(tap.tamper().delivered, 123u);
  EXPECT_EQ(tap.tamper().rejected_auth, 123u);
  EXPECT_EQ(tap.tamper().accepted, 0u);
  // The 10th frame (frame-9) arrives with its last byte flipped; the capture
  // keeps the original.
  EXPECT_EQ(as_string_view(sink->packets[9].second.payload), "frame-8");
  EXPECT_TRUE(sink->packets[9].second.tamper_id.has_value());
  EXPECT_FALSE(sink->packets[8].second.tamper_id.has_value());
  const Bytes& captured = tap.frames()[9].bytes;
  EXPECT_EQ(std::string(captured.begin() + kCaptureHeaderSize, captured.end()), "frame-9");
}

TEST(Adversary, LossAfterTapReducesTamperDelivered) {
  Topology t = line_topology(0.5, 3);
  Network n(t);
  n.attach(4, std::make_shared<Sink>());
  n.attach(1, std::make_shared<Source>(Address{4, 5000}, 1000, Millis{1}));
  Tap& tap = n.attach_adversary(3, {AdversaryMode::Mitm, {}});
  n.run_until(VirtualTime{3000});
  EXPECT_EQ(tap.tamper().attempts, 100u);
  EXPECT_LT(tap.tamper().delivered, 100u);
  EXPECT_EQ(tap.tamper().accepted, tap.tamper().delivered);
}

TEST(Adversary, ControlAndStreamTrafficIsNotData) {
  Packet l2tp_ctl{Protocol::Udp, {2, 1701}, {4, 1701}, Bytes{0xC2, 0, 15}, std::nullopt};
  Packet l2tp_data{Protocol::Udp, {2, 1701}, {4, 1701}, Bytes{0x62, 0, 15}, std::nullopt};
  Packet gre{Protocol::Gre, {2, 0}, {4, 0}, Bytes{0x30, 0x01}, std::nullopt};
  Packet tcp{Protocol::Tcp, {2, 40000}, {4, 1723}, Bytes{0, 2}, std::nullopt};
  Packet plain{Protocol::Udp, {1, 8101}, {4, 5000}, to_bytes("101-1,1,90,26.0,40"), std::nullopt};
  EXPECT_FALSE(is_data_frame(l2tp_ctl));
  EXPECT_TRUE(is_data_frame(l2tp_data));
  EXPECT_TRUE(is_data_frame(gre));
  EXPECT_FALSE(is_data_frame(tcp));
  EXPECT_TRUE(is_data_frame(plain));
  EXPECT_TRUE(is_data_frame(capture_bytes(l2tp_data)));
  EXPECT_FALSE(is_data_frame(capture_bytes(l2tp_ctl)));
}

TEST(Stream, DeliversInOrderDespiteLoss) {
  Network n(line_topology(0.4, 21));
  auto sink = std::make_shared<Sink>();
  n.attach(4, sink);
  n.invoke(1, [](Context& ctx) {
    for (int i = 0; i < 50; ++i) ctx.stream_send(40000, Address{4, 1723}, Bytes{static_cast<std::uint8_t>(i)});
  });
  n.run_until(VirtualTime{120000});
  ASSERT_EQ(sink->chunks.size(), 50u);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sink->chunks[i].second[0], i);
  EXPECT_TRUE(sink->resets.empty());
  expect_conserved(n.stats());
}

TEST(Stream, ResetsAfterMaxAttempts) {
  Network n(line_topology(1.0));
  auto sink = std::make_shared<Sink>();
  auto client = std::make_shared<Sink>();
  n.attach(4, sink);
  n.attach(1, client);
  n.invoke(1, [](Context& ctx) { ctx.stream_send(40000, Address{4, 1723}, Bytes{1}); });
  n.run_until(VirtualTime{100000});
  EXPECT_TRUE(sink->chunks.empty());
  ASSERT_EQ(client->resets.size(), 1u);
  EXPECT_EQ(client->resets[0], (Address{4, 1723}));
  ASSERT_EQ(sink->resets.size(), 1u);
  EXPECT_EQ(sink->resets[0], (Address{1, 40000}));
  EXPECT_EQ(n.stats().stream_resets, 1u);
  EXPECT_EQ(n.stats().dropped_loss, 8u);
}

TEST(Stream, TapSeesSegments) {
  Network n(line_topology());
  n.attach(4, std::make_shared<Sink>());
  Tap& tap = n.attach_adversary(3, {AdversaryMode::Mitm, {}});
  n.invoke(1, [](Context& ctx) {
    for (int i = 0; i < 20; ++i) ctx.stream_send(40000, Address{4, 1723}, Bytes{1, 2, 3});
  });
  n.run_until(VirtualTime{10000});
  EXPECT_EQ(tap.frames().size(), 20u);
  EXPECT_EQ(tap.data_frames_seen(), 0u);
  EXPECT_EQ(tap.tamper().attempts, 0u);
}
