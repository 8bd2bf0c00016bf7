#include <gtest/gtest.h>

#include <deque>

#include "endpoint_pair.hpp"
#include "tunnelguard/tunnel/errors.hpp"
#include "tunnelguard/tunnel/server.hpp"

using namespace tg;
using namespace tg::tunnel;
using tg::testing::make_config;

namespace {

// Several LACs (node ids 1..n) talking to one TunnelServer with zero latency.
struct Fabric {
  explicit Fabric(ProtocolVariant v, std::size_t max_tunnels = 64) : server(listener(v, max_tunnels)) {}

  static ListenerConfig listener(ProtocolVariant v, std::size_t max_tunnels) {
    ListenerConfig c;
    c.variant = v;
    c.shared_secret = make_config(v, TunnelRole::Lns).shared_secret;
    c.nonce_seed = 77;
    c.max_tunnels = max_tunnels;
    return c;
  }

  TunnelEndpoint& add_lac(std::uint32_t tunnel_id) {
    lacs.push_back(std::make_unique<TunnelEndpoint>(make_config(server.variant(), TunnelRole::Lac, tunnel_id,
                                                                tunnel_id)));
    return *lacs.back();
  }

  PeerAddress address(std::size_t lac_index) const {
    const auto port = server.variant() == ProtocolVariant::L2tpLite ? kL2tpPort : std::uint16_t{40000};
    return PeerAddress{static_cast<std::uint32_t>(lac_index + 1), port};
  }

  void from_lac(std::size_t i, Outputs outs) {
    for (auto& o : outs) {
      if (auto* t = std::get_if<Transmit>(&o)) {
        to_server.push_back({i, *t});
      } else {
        lac_events.emplace_back(i, std::move(o));
      }
    }
  }

  void from_server(ServerOutputs outs) {
    for (auto& so : outs) {
      if (auto* t = std::get_if<Transmit>(&so.output)) {
        to_lac.push_back({so.peer.node - 1, *t});
      } else {
        server_events.push_back(std::move(so));
      }
    }
  }

  void pump(VirtualTime now) {
    while (!to_server.empty() || !to_lac.empty()) {
      while (!to_server.empty()) {
        auto [i, t] = to_server.front();
        to_server.pop_front();
        if (t.channel == Channel::Stream) {
          from_server(server.on_stream(now, address(i), t.bytes));
        } else {
          from_server(server.on_datagram(now, address(i), t.bytes));
        }
      }
      while (!to_lac.empty()) {
        auto [i, t] = to_lac.front();
        to_lac.pop_front();
        from_lac(i, lacs[i]->step(now, Incoming{t.channel, t.bytes}));
      }
    }
  }

  TunnelServer server;
  std::vector<std::unique_ptr<TunnelEndpoint>> lacs;
  std::deque<std::pair<std::size_t, Transmit>> to_server;
  std::deque<std::pair<std::size_t, Transmit>> to_lac;
  std::vector<std::pair<std::size_t, Output>> lac_events;
  ServerOutputs server_events;
};

class ServerVariants : public ::testing::TestWithParam<ProtocolVariant> {};

}  // namespace

TEST_P(ServerVariants, AcceptsSeveralTunnelsAndRoutesBySession) {
  Fabric f(GetParam());
  const VirtualTime t0{0};
  for (std::uint32_t tid : {10u, 20u, 30u}) f.add_lac(tid);
  for (std::size_t i = 0; i < 3; ++i) f.from_lac(i, f.lacs[i]->open(t0));
  f.pump(t0);
  EXPECT_EQ(f.server.tunnel_ids(), (std::vector<std::uint32_t>{10, 20, 30}));
  for (std::size_t i = 0; i < 3; ++i) {
    ASSERT_EQ(f.lacs[i]->phase(), TunnelPhase::Established);
    f.from_lac(i, f.lacs[i]->open_session(t0, static_cast<std::uint32_t>(100 + i)));
  }
  f.pump(t0);
  EXPECT_EQ(f.server.tunnel_for_session(101), 20u);
  EXPECT_FALSE(f.server.tunnel_for_session(999).has_value());

  f.from_server(f.server.send_payload(t0, 102, Bytes{1, 0, 0, 0, 1}));
  f.pump(t0);
  int received = 0;
  for (auto& [i, o] : f.lac_events) {
    if (auto* r = std::get_if<PayloadReceived>(&o)) {
      EXPECT_EQ(i, 2u);
      EXPECT_EQ(r->session_id, 102u);
      ++received;
    }
  }
  EXPECT_EQ(received, 1);
  EXPECT_THROW(f.server.send_payload(t0, 999, Bytes{1}), TunnelError);

  f.from_lac(0, f.lacs[0]->send_payload(t0, 100, to_bytes("100-0,0,0,21.0,40")));
  f.pump(t0);
  bool got = false;
  for (auto& so : f.server_events) {
    if (auto* r = std::get_if<PayloadReceived>(&so.output)) {
      EXPECT_EQ(so.tunnel_id, 10u);
      EXPECT_EQ(as_string_view(r->payload), "100-0,0,0,21.0,40");
      got = true;
    }
  }
  EXPECT_TRUE(got);
}

TEST_P(ServerVariants, CapacityOverflowIsRejected) {
  Fabric f(GetParam(), 1);
  const VirtualTime t0{0};
  f.add_lac(1);
  f.add_lac(2);
  f.from_lac(0, f.lacs[0]->open(t0));
  f.pump(t0);
  f.from_lac(1, f.lacs[1]->open(t0));
  f.pump(t0);
  EXPECT_EQ(f.lacs[0]->phase(), TunnelPhase::Established);
  EXPECT_EQ(f.lacs[1]->phase(), TunnelPhase::Closed);
  bool rejected = false;
  for (auto& [i, o] : f.lac_events) {
    if (auto* d = std::get_if<TunnelDown>(&o)) rejected = i == 1 && d->reason == DownReason::HandshakeRejected;
  }
  EXPECT_TRUE(rejected);
}

TEST_P(ServerVariants, UnknownTrafficIsCountedNotRouted) {
  Fabric f(GetParam());
  Bytes junk = encode_frame(Frame{FrameKind::Control, false, 5, 0, 0, 0, encode_control({MessageType::HELLO, {}})});
  EXPECT_TRUE(f.server.on_datagram(VirtualTime{0}, PeerAddress{9, kL2tpPort}, junk).empty());
  EXPECT_EQ(f.server.unroutable(), 1u);
}

TEST(Server, L2tpRejectsTunnelIdFromAnotherPeer) {
  Fabric f(ProtocolVariant::L2tpLite);
  const VirtualTime t0{0};
  f.add_lac(10);
  f.from_lac(0, f.lacs[0]->open(t0));
  f.pump(t0);
  TunnelEndpoint intruder(make_config(ProtocolVariant::L2tpLite, TunnelRole::Lac, 10, 5));
  const Outputs out = intruder.open(t0);
  EXPECT_TRUE(f.server.on_datagram(t0, PeerAddress{42, kL2tpPort}, std::get<Transmit>(out[0]).bytes).empty());
  EXPECT_EQ(f.server.unroutable(), 1u);
}

TEST(Server, PptpStreamResetDropsTunnel) {
  Fabric f(ProtocolVariant::PptpLite);
  const VirtualTime t0{0};
  f.add_lac(10);
  f.from_lac(0, f.lacs[0]->open(t0));
  f.pump(t0);
  ASSERT_EQ(f.server.tunnel(10)->phase(), TunnelPhase::Established);
  const ServerOutputs out = f.server.on_stream_reset(t0, f.address(0));
  ASSERT_FALSE(out.empty());
  EXPECT_EQ(std::get<TunnelDown>(out.back().output).reason, DownReason::TransportReset);
  EXPECT_EQ(f.server.tunnel(10)->phase(), TunnelPhase::Closed);
}

INSTANTIATE_TEST_SUITE_P(Variants, ServerVariants,
                         ::testing::Values(ProtocolVariant::L2tpLite, ProtocolVariant::PptpLite),
                         [](const auto& info) {
                           return info.param == ProtocolVariant::L2tpLite ? std::string("L2tp") : std::string("Pptp");
                         });
