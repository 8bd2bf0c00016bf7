#include <gtest/gtest.h>

#include "endpoint_pair.hpp"
#include "tunnelguard/tunnel/errors.hpp"

using namespace tg;
using namespace tg::tunnel;
using tg::testing::EndpointPair;
using tg::testing::make_config;

namespace {

std::optional<MessageType> control_type(const Transmit& t) {
  try {
    if (t.channel == Channel::Stream) {
      StreamReassembler r;
      r.feed(t.bytes);
      return decode_control(*r.next()).type;
    }
    const Frame f = decode_frame(t.bytes);
    if (f.kind != FrameKind::Control || f.is_zlb()) return std::nullopt;
    return decode_control(f.payload).type;
  } catch (const TunnelError&) {
    return std::nullopt;
  }
}

EndpointPair make_pair(ProtocolVariant v) {
  return EndpointPair(make_config(v, TunnelRole::Lac), make_config(v, TunnelRole::Lns));
}

void open_tunnel(EndpointPair& p) {
  p.handle(true, p.now(), p.lac.open(p.now()));
  p.run_until(p.now() + Millis{500});
  ASSERT_EQ(p.lac.phase(), TunnelPhase::Established);
  ASSERT_EQ(p.lns.phase(), TunnelPhase::Established);
}

class BothVariants : public ::testing::TestWithParam<ProtocolVariant> {};

}  // namespace

TEST(Endpoint, L2tpHandshakeSequence) {
  auto p = make_pair(ProtocolVariant::L2tpLite);
  open_tunnel(p);
  ASSERT_GE(p.wire_from_lac.size(), 2u);
  EXPECT_EQ(control_type(p.wire_from_lac[0].second), MessageType::SCCRQ);
  EXPECT_EQ(control_type(p.wire_from_lns[0].second), MessageType::SCCRP);
  EXPECT_EQ(control_type(p.wire_from_lac[1].second), MessageType::SCCCN);
  // The LNS acknowledges SCCCN with a ZLB.
  const Frame zlb = decode_frame(p.wire_from_lns.back().second.bytes);
  EXPECT_TRUE(zlb.is_zlb());
  EXPECT_EQ(zlb.nr, 2);
  EXPECT_EQ(p.lac.pending_control(), 0u);
  EXPECT_EQ(p.lns.pending_control(), 0u);
  EXPECT_EQ(p.of<TunnelUp>(p.events.lac).size(), 1u);
  EXPECT_EQ(p.of<TunnelUp>(p.events.lns).size(), 1u);
}

TEST(Endpoint, OnlyLacOpens) {
  TunnelEndpoint lns(make_config(ProtocolVariant::L2tpLite, TunnelRole::Lns));
  try {
    lns.open(VirtualTime{0});
    FAIL();
  } catch (const TunnelError& e) {
    EXPECT_EQ(e.code(), TunnelErrc::WrongRole);
  }
  TunnelEndpoint lac(make_config(ProtocolVariant::L2tpLite, TunnelRole::Lac));
  lac.open(VirtualTime{0});
  EXPECT_THROW(lac.open(VirtualTime{0}), TunnelError);
  EXPECT_THROW(lac.open_session(VirtualTime{0}, 1), TunnelError);
}

TEST_P(BothVariants, SessionsCarryPayloadBothWays) {
  auto p = make_pair(GetParam());
  open_tunnel(p);
  for (std::uint32_t id = 101; id <= 120; ++id) p.handle(true, p.now(), p.lac.open_session(p.now(), id));
  p.run_until(p.now() + Millis{500});
  EXPECT_EQ(p.lac.established_sessions(), 20u);
  EXPECT_EQ(p.lns.established_sessions(), 20u);

  p.handle(true, p.now(), p.lac.send_payload(p.now(), 105, to_bytes("105-1,1,0,22.1,40")));
  p.handle(false, p.now(), p.lns.send_payload(p.now(), 105, Bytes{1, 0, 0, 0, 9}));
  p.run_until(p.now() + Millis{100});
  auto at_lns = p.of<PayloadReceived>(p.events.lns);
  auto at_lac = p.of<PayloadReceived>(p.events.lac);
  ASSERT_EQ(at_lns.size(), 1u);
  ASSERT_EQ(at_lac.size(), 1u);
  EXPECT_EQ(at_lns[0].second.session_id, 105u);
  EXPECT_EQ(as_string_view(at_lns[0].second.payload), "105-1,1,0,22.1,40");
  EXPECT_EQ(at_lac[0].second.payload, (Bytes{1, 0, 0, 0, 9}));
}

TEST_P(BothVariants, CiphertextHidesPlaintext) {
  auto p = make_pair(GetParam());
  open_tunnel(p);
  p.handle(true, p.now(), p.lac.open_session(p.now(), 7));
  p.run_until(p.now() + Millis{200});
  const std::string line = "7-1,1,0,23.5,41";
  p.handle(true, p.now(), p.lac.send_payload(p.now(), 7, to_bytes(line)));
  const Bytes& wire = p.wire_from_lac.back().second.bytes;
  EXPECT_EQ(std::string_view(reinterpret_cast<const char*>(wire.data()), wire.size()).find(line),
            std::string_view::npos);
}

TEST_P(BothVariants, TimeoutAfterThirtyOneSecondsOfSilence) {
  auto p = make_pair(GetParam());
  p.drop = [](bool, std::uint64_t, const Transmit&) { return true; };
  p.handle(true, p.now(), p.lac.open(p.now()));
  p.run_until(VirtualTime{60000});
  auto downs = p.of<TunnelDown>(p.events.lac);
  ASSERT_EQ(downs.size(), 1u);
  EXPECT_EQ(downs[0].first, VirtualTime{31000});
  EXPECT_EQ(downs[0].second.reason, DownReason::Timeout);
  EXPECT_EQ(p.lac.phase(), TunnelPhase::Closed);
  if (GetParam() == ProtocolVariant::L2tpLite) {
    // Initial send plus retransmissions at 1, 3, 7 and 15 s.
    ASSERT_EQ(p.wire_from_lac.size(), 5u);
    const VirtualTime expect[] = {VirtualTime{0}, VirtualTime{1000}, VirtualTime{3000}, VirtualTime{7000},
                                  VirtualTime{15000}};
    for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(p.wire_from_lac[i].first, expect[i]);
  }
}

TEST_P(BothVariants, IdleTunnelSendsOneHelloPerInterval) {
  auto p = make_pair(GetParam());
  open_tunnel(p);
  const auto up = p.of<TunnelUp>(p.events.lac).front().first;
  p.run_until(up + Millis{30000});
  EXPECT_EQ(p.lac.stats().hello_sent, 3u);
  p.run_until(up + Millis{39999});
  EXPECT_EQ(p.lac.stats().hello_sent, 3u);
  EXPECT_EQ(p.lac.phase(), TunnelPhase::Established);
}

TEST_P(BothVariants, WrongSecretFailsHandshake) {
  auto lac_cfg = make_config(GetParam(), TunnelRole::Lac);
  lac_cfg.shared_secret = SecretKey(Bytes(32, 0x42));
  EndpointPair p(lac_cfg, make_config(GetParam(), TunnelRole::Lns));
  p.handle(true, p.now(), p.lac.open(p.now()));
  p.run_until(VirtualTime{5000});
  auto lac_down = p.of<TunnelDown>(p.events.lac);
  auto lns_down = p.of<TunnelDown>(p.events.lns);
  ASSERT_EQ(lac_down.size(), 1u);
  EXPECT_EQ(lac_down[0].second.reason, DownReason::AuthFailure);
  ASSERT_EQ(lns_down.size(), 1u);
  EXPECT_EQ(lns_down[0].second.reason, DownReason::HandshakeRejected);
  EXPECT_TRUE(p.of<TunnelUp>(p.events.lac).empty());
  EXPECT_TRUE(p.of<TunnelUp>(p.events.lns).empty());
}

TEST_P(BothVariants, RejectedHandshake) {
  auto lns_cfg = make_config(GetParam(), TunnelRole::Lns);
  lns_cfg.reject_with = ResultCode::Capacity;
  EndpointPair p(make_config(GetParam(), TunnelRole::Lac), lns_cfg);
  p.handle(true, p.now(), p.lac.open(p.now()));
  p.run_until(VirtualTime{5000});
  auto downs = p.of<TunnelDown>(p.events.lac);
  ASSERT_EQ(downs.size(), 1u);
  EXPECT_EQ(downs[0].second.reason, DownReason::HandshakeRejected);
  EXPECT_EQ(p.lns.phase(), TunnelPhase::Closed);
}

TEST_P(BothVariants, SimultaneousSessionRequestRenumbersLac) {
  auto p = make_pair(GetParam());
  open_tunnel(p);
  p.handle(true, p.now(), p.lac.open_session(p.now(), 5));
  p.handle(false, p.now(), p.lns.open_session(p.now(), 5));
  p.run_until(p.now() + Millis{500});

  auto renumbered = p.of<SessionRenumbered>(p.events.lac);
  ASSERT_EQ(renumbered.size(), 1u);
  EXPECT_EQ(renumbered[0].second.requested, 5u);
  EXPECT_EQ(renumbered[0].second.assigned, 6u);
  EXPECT_EQ(p.lac.session_ids(), (std::vector<std::uint32_t>{5, 6}));
  EXPECT_EQ(p.lns.session_ids(), (std::vector<std::uint32_t>{5, 6}));
  EXPECT_EQ(p.lac.established_sessions(), 2u);
  EXPECT_EQ(p.lns.established_sessions(), 2u);
  EXPECT_FALSE(p.lac.session(5)->initiator);
  EXPECT_TRUE(p.lac.session(6)->initiator);
}

TEST_P(BothVariants, DuplicateAndInvalidSessionIds) {
  auto p = make_pair(GetParam());
  open_tunnel(p);
  p.handle(true, p.now(), p.lac.open_session(p.now(), 9));
  auto code = [&](std::uint32_t id) {
    try {
      p.lac.open_session(p.now(), id);
    } catch (const TunnelError& e) {
      return e.code();
    }
    return TunnelErrc::InvalidState;
  };
  EXPECT_EQ(code(9), TunnelErrc::DuplicateSession);
  EXPECT_EQ(code(0), TunnelErrc::InvalidSessionId);
}

TEST_P(BothVariants, TamperedAndReplayedDataAreRejected) {
  auto p = make_pair(GetParam());
  open_tunnel(p);
  p.handle(true, p.now(), p.lac.open_session(p.now(), 3));
  p.run_until(p.now() + Millis{200});

  const Outputs sent = p.lac.send_payload(p.now(), 3, to_bytes("3-0,0,0,20.0,50"));
  const Bytes wire = std::get<Transmit>(sent[0]).bytes;

  Bytes tampered = wire;
  tampered.back() ^= 0x01;
  p.handle(false, p.now(), p.lns.step(p.now(), Incoming{Channel::Datagram, tampered}));
  p.handle(false, p.now(), p.lns.step(p.now(), Incoming{Channel::Datagram, wire}));
  p.handle(false, p.now(), p.lns.step(p.now(), Incoming{Channel::Datagram, wire}));

  auto rejected = p.of<PayloadRejected>(p.events.lns);
  ASSERT_EQ(rejected.size(), 2u);
  EXPECT_EQ(rejected[0].second.reason, TunnelErrc::AuthFailure);
  EXPECT_EQ(rejected[1].second.reason, TunnelErrc::ReplayedCounter);
  EXPECT_EQ(p.of<PayloadReceived>(p.events.lns).size(), 1u);
  EXPECT_EQ(p.lns.stats().auth_failures, 1u);
  EXPECT_EQ(p.lns.stats().replays, 1u);
}

TEST_P(BothVariants, DataBeforeSessionEstablishedIsHeldBack) {
  auto p = make_pair(GetParam());
  open_tunnel(p);
  // Lose the LNS's ICCN so the LAC stays in REQUESTED.
  p.drop = [](bool from_lac, std::uint64_t, const Transmit& t) {
    return !from_lac && control_type(t) == MessageType::ICCN;
  };
  p.handle(false, p.now(), p.lns.open_session(p.now(), 11));
  p.run_until(p.now() + Millis{100});
  ASSERT_EQ(p.lns.session(11)->state, SessionPhase::Established);
  ASSERT_EQ(p.lac.session(11)->state, SessionPhase::Requested);

  const Outputs sent = p.lns.send_payload(p.now(), 11, Bytes{1, 0, 0, 0, 1});
  Bytes forged = std::get<Transmit>(sent[0]).bytes;
  forged[forged.size() - 3] ^= 0x80;
  p.handle(true, p.now(), p.lac.step(p.now(), Incoming{Channel::Datagram, std::get<Transmit>(sent[0]).bytes}));
  p.handle(true, p.now(), p.lac.step(p.now(), Incoming{Channel::Datagram, forged}));
  auto rejected = p.of<PayloadRejected>(p.events.lac);
  ASSERT_EQ(rejected.size(), 2u);
  EXPECT_EQ(rejected[0].second.reason, TunnelErrc::SessionNotEstablished);
  EXPECT_EQ(rejected[1].second.reason, TunnelErrc::AuthFailure);
}

TEST_P(BothVariants, OversizePayloadIsRejectedBeforeSealing) {
  auto p = make_pair(GetParam());
  open_tunnel(p);
  p.handle(true, p.now(), p.lac.open_session(p.now(), 1));
  p.run_until(p.now() + Millis{200});
  EXPECT_NO_THROW(p.lac.send_payload(p.now(), 1, Bytes(p.lac.max_plaintext(), 0)));
  try {
    p.lac.send_payload(p.now(), 1, Bytes(p.lac.max_plaintext() + 1, 0));
    FAIL();
  } catch (const TunnelError& e) {
    EXPECT_EQ(e.code(), TunnelErrc::OversizePayload);
  }
  EXPECT_THROW(p.lac.send_payload(p.now(), 2, Bytes{1}), TunnelError);
}

TEST_P(BothVariants, CloseTearsDownBothEnds) {
  auto p = make_pair(GetParam());
  open_tunnel(p);
  p.handle(true, p.now(), p.lac.open_session(p.now(), 1));
  p.run_until(p.now() + Millis{200});
  p.handle(true, p.now(), p.lac.close(p.now()));
  p.run_until(p.now() + Millis{500});
  EXPECT_EQ(p.lac.phase(), TunnelPhase::Closed);
  EXPECT_EQ(p.lns.phase(), TunnelPhase::Closed);
  EXPECT_EQ(p.of<TunnelDown>(p.events.lac).at(0).second.reason, DownReason::LocalClose);
  EXPECT_EQ(p.of<TunnelDown>(p.events.lns).at(0).second.reason, DownReason::PeerClose);
  EXPECT_EQ(p.of<SessionDown>(p.events.lns).size(), 1u);
  EXPECT_EQ(p.lns.session(1), nullptr);
}

TEST_P(BothVariants, CloseSessionNotifiesPeer) {
  auto p = make_pair(GetParam());
  open_tunnel(p);
  p.handle(true, p.now(), p.lac.open_session(p.now(), 4));
  p.run_until(p.now() + Millis{200});
  p.handle(true, p.now(), p.lac.close_session(p.now(), 4));
  p.run_until(p.now() + Millis{200});
  EXPECT_EQ(p.lac.session(4), nullptr);
  EXPECT_EQ(p.lns.session(4), nullptr);
  EXPECT_EQ(p.of<SessionDown>(p.events.lns).size(), 1u);
  EXPECT_EQ(p.lac.phase(), TunnelPhase::Established);
}

TEST(Endpoint, PptpTransportResetClosesTunnel) {
  auto p = make_pair(ProtocolVariant::PptpLite);
  open_tunnel(p);
  Outputs out = p.lac.transport_reset(p.now());
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(std::get<TunnelDown>(out[0]).reason, DownReason::TransportReset);
  EXPECT_TRUE(p.lac.transport_reset(p.now()).empty());
}

TEST(Endpoint, L2tpRecoversFromLossyHandshake) {
  // Drop every other frame in both directions; cumulative acks and
  // retransmission still converge.
  auto p = make_pair(ProtocolVariant::L2tpLite);
  p.drop = [](bool, std::uint64_t i, const Transmit&) { return i % 2 == 0; };
  p.handle(true, p.now(), p.lac.open(p.now()));
  p.run_until(VirtualTime{20000});
  EXPECT_EQ(p.lac.phase(), TunnelPhase::Established);
  EXPECT_EQ(p.lns.phase(), TunnelPhase::Established);
  EXPECT_GT(p.lac.stats().control_retransmits + p.lns.stats().control_retransmits, 0u);
}

TEST(Endpoint, L2tpDuplicateControlIsReacked) {
  auto p = make_pair(ProtocolVariant::L2tpLite);
  open_tunnel(p);
  const Bytes sccrq = p.wire_from_lac.front().second.bytes;
  const Outputs out = p.lns.step(p.now(), Incoming{Channel::Datagram, sccrq});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_TRUE(decode_frame(std::get<Transmit>(out[0]).bytes).is_zlb());
  EXPECT_EQ(p.lns.stats().duplicates, 1u);
}

TEST(Endpoint, ForeignTunnelIdIsADecodeError) {
  auto p = make_pair(ProtocolVariant::L2tpLite);
  open_tunnel(p);
  Bytes hello = encode_frame(Frame{FrameKind::Control, false, 99, 0, 0, 0, encode_control({MessageType::HELLO, {}})});
  const Outputs out = p.lns.step(p.now(), Incoming{Channel::Datagram, hello});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(std::get<DecodeErrorEvent>(out[0]).reason, TunnelErrc::UnknownTunnel);
}

INSTANTIATE_TEST_SUITE_P(Variants, BothVariants,
                         ::testing::Values(ProtocolVariant::L2tpLite, ProtocolVariant::PptpLite),
                         [](const auto& info) {
                           return info.param == ProtocolVariant::L2tpLite ? std::string("L2tp") : std::string("Pptp");
                         });
