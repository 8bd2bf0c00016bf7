#include <gtest/gtest.h>

#include <random>
#include <set>

#include "tunnelguard/tunnel/envelope.hpp"
#include "tunnelguard/tunnel/errors.hpp"
#include "tunnelguard/tunnel/frame.hpp"

using namespace tg;
using namespace tg::tunnel;

namespace {

// Reference values from tests/oracles/tunnel_vectors.py (pyca/cryptography).
const SecretKey kSecret = SecretKey::from_hex("000102030405060708090a0b0c0d0e0f101112131415161718191a1b1c1d1e1f");
constexpr std::uint32_t kTunnel = 7;
constexpr std::uint32_t kSession = 0x01020304;
constexpr const char* kLacToLns = "3b6207f221e6d42f0d7e5604f77d964da64e4702834749309618d73ce0bf4318";
constexpr const char* kLnsToLac = "8901131bfda0915c546d9939910da07c3d8dd8d60c0352f758a0ab39e9e4f6f2";
constexpr const char* kSccrpTag = "41a19b5f4250b3ba36d5698b456036445f8d5687ff2f262b102c452d7eccb0b5";
constexpr const char* kScccnTag = "0a4f39fd3322b3511ab4dcf26f0df1f6654f0b46b7d8d11cf2939b1bedd5fb32";
constexpr const char* kHeader = "620039000000070102030400000000";
constexpr const char* kSealed =
    "00000000000000007a6f980eac4a61d05929e83ea47943e6192e66f3624e12aaa670db6bc5b8e0eed180";

HandshakeNonce nonce_from(std::uint8_t first) {
  HandshakeNonce n{};
  for (std::size_t i = 0; i < n.size(); ++i) n[i] = static_cast<std::uint8_t>(first + i);
  return n;
}

const HandshakeNonce kNonceLac = nonce_from(0x10);
const HandshakeNonce kNonceLns = nonce_from(0xA0);

std::pair<SessionState, SessionState> established_pair() {
  const SessionKeys keys = derive_session_keys(kSecret, kTunnel, kSession, kNonceLac, kNonceLns);
  SessionState lac = make_session(kSession, keys, true);
  SessionState lns = make_session(kSession, keys, false);
  lac.state = lns.state = SessionPhase::Established;
  return {lac, lns};
}

TunnelErrc open_error(SessionState& s, ByteView sealed, ByteView aad) {
  try {
    open_payload(s, sealed, aad);
  } catch (const TunnelError& e) {
    return e.code();
  }
  return TunnelErrc::InvalidState;
}

}  // namespace

// RFC 5869 appendix A.1.
TEST(Hkdf, Rfc5869Case1) {
  const Bytes ikm(22, 0x0b);
  const Bytes salt = from_hex("000102030405060708090a0b0c");
  const Bytes info = from_hex("f0f1f2f3f4f5f6f7f8f9");
  EXPECT_EQ(to_hex(hkdf_sha256(salt, ikm, info, 42)),
            "3cb25f25faacd57a90434f64d0362f2a2d2d0a90cf1a5a4c5db02d56ecc4c5bf34007208d5b887185865");
}

// RFC 5869 appendix A.3: empty salt and info.
TEST(Hkdf, Rfc5869Case3) {
  const Bytes ikm(22, 0x0b);
  EXPECT_EQ(to_hex(hkdf_sha256({}, ikm, {}, 42)),
            "8da4e775a563c18f715f802a063c5a31b8a11f5c5ee1879ec3454e5f3c738d2d9d201395faa4b61a96c8");
}

TEST(SessionKeys, MatchReference) {
  const SessionKeys keys = derive_session_keys(kSecret, kTunnel, kSession, kNonceLac, kNonceLns);
  EXPECT_EQ(to_hex(keys.lac_to_lns.view()), kLacToLns);
  EXPECT_EQ(to_hex(keys.lns_to_lac.view()), kLnsToLac);
}

TEST(SessionKeys, DependOnEveryInput) {
  const SessionKeys base = derive_session_keys(kSecret, kTunnel, kSession, kNonceLac, kNonceLns);
  EXPECT_FALSE(derive_session_keys(kSecret, kTunnel + 1, kSession, kNonceLac, kNonceLns).lac_to_lns ==
               base.lac_to_lns);
  EXPECT_FALSE(derive_session_keys(kSecret, kTunnel, kSession + 1, kNonceLac, kNonceLns).lac_to_lns ==
               base.lac_to_lns);
  EXPECT_FALSE(derive_session_keys(kSecret, kTunnel, kSession, kNonceLns, kNonceLac).lac_to_lns ==
               base.lac_to_lns);
  EXPECT_FALSE(base.lac_to_lns == base.lns_to_lac);
}

TEST(HandshakeTag, MatchesReference) {
  EXPECT_EQ(to_hex(handshake_tag(kSecret, "SCCRP", kTunnel, kNonceLac, kNonceLns)), kSccrpTag);
  EXPECT_EQ(to_hex(handshake_tag(kSecret, "SCCCN", kTunnel, kNonceLac, kNonceLns)), kScccnTag);
}

TEST(Envelope, SealMatchesReference) {
  auto [lac, lns] = established_pair();
  const Bytes plaintext = to_bytes("101-1,1,90,23.5,41");
  Frame f{FrameKind::Data, true, kTunnel, kSession, 0, 0, {}};
  const auto header = frame_header(f, plaintext.size() + kEnvelopeOverhead);
  EXPECT_EQ(to_hex(header), kHeader);
  const Bytes sealed = seal_payload(lac, plaintext, header);
  EXPECT_EQ(to_hex(sealed), kSealed);
  EXPECT_EQ(open_payload(lns, sealed, header), plaintext);
  EXPECT_EQ(sealed_counter(sealed), 0u);
}

TEST(Envelope, CountersAdvanceAndDirectionsDiffer) {
  auto [lac, lns] = established_pair();
  const Bytes p = to_bytes("hello");
  const Bytes a = seal_payload(lac, p, {});
  const Bytes b = seal_payload(lac, p, {});
  const Bytes c = seal_payload(lns, p, {});
  EXPECT_EQ(sealed_counter(a), 0u);
  EXPECT_EQ(sealed_counter(b), 1u);
  EXPECT_NE(a, b);
  EXPECT_NE(Bytes(a.begin() + 8, a.end()), Bytes(c.begin() + 8, c.end()));
  // The LNS cannot open its own outbound frame; the LAC can.
  EXPECT_EQ(open_error(lns, c, {}), TunnelErrc::AuthFailure);
  EXPECT_EQ(open_payload(lac, c, {}), p);
}

TEST(Envelope, ReplayIsReportedOnlyForGenuineDuplicates) {
  auto [lac, lns] = established_pair();
  const Bytes sealed = seal_payload(lac, to_bytes("x"), {});
  EXPECT_NO_THROW(open_payload(lns, sealed, {}));
  EXPECT_EQ(open_error(lns, sealed, {}), TunnelErrc::ReplayedCounter);
  Bytes forged = sealed;
  forged.back() ^= 1;
  EXPECT_EQ(open_error(lns, forged, {}), TunnelErrc::AuthFailure);
}

TEST(Envelope, RequiresEstablishedSession) {
  auto [lac, lns] = established_pair();
  lac.state = SessionPhase::Requested;
  try {
    seal_payload(lac, to_bytes("x"), {});
    FAIL();
  } catch (const TunnelError& e) {
    EXPECT_EQ(e.code(), TunnelErrc::SessionClosed);
  }
}

TEST(Envelope, ErasedKeysNoLongerOpen) {
  auto [lac, lns] = established_pair();
  const Bytes sealed = seal_payload(lac, to_bytes("x"), {});
  lns.erase_keys();
  EXPECT_EQ(lns.rx_key, SecretKey());
  EXPECT_EQ(open_error(lns, sealed, {}), TunnelErrc::AuthFailure);
}

// Property: flipping any single bit of header or sealed envelope is an
// AuthFailure, never an acceptance.
TEST(EnvelopeProperty, EveryBitFlipIsDetected) {
  auto [lac, lns] = established_pair();
  const Bytes plaintext = to_bytes("101-1,1,90,23.5,41,xyz");
  Frame f{FrameKind::Data, true, kTunnel, kSession, 0, 0, {}};
  const auto header = frame_header(f, plaintext.size() + kEnvelopeOverhead);
  const Bytes sealed = seal_payload(lac, plaintext, header);
  Bytes wire(header.begin(), header.end());
  wire.insert(wire.end(), sealed.begin(), sealed.end());

  for (std::size_t bit = 0; bit < wire.size() * 8; ++bit) {
    Bytes w = wire;
    w[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    const auto aad = ByteView(w).first(kFrameHeaderSize);
    const auto body = ByteView(w).subspan(kFrameHeaderSize);
    SessionState fresh = lns;
    EXPECT_EQ(open_error(fresh, body, aad), TunnelErrc::AuthFailure) << "bit " << bit;
  }
}

TEST(ReplayWindow, SlidesOverSixtyFourCounters) {
  ReplayWindow w;
  EXPECT_FALSE(w.seen(0));
  w.accept(0);
  EXPECT_TRUE(w.seen(0));
  w.accept(100);
  EXPECT_TRUE(w.seen(36));  // left of the window
  EXPECT_FALSE(w.seen(37));
  w.accept(37);
  EXPECT_TRUE(w.seen(37));
  EXPECT_FALSE(w.seen(99));
  EXPECT_EQ(w.highest(), 100u);
}

TEST(ReplayWindowProperty, AcceptsEachCounterAtMostOnce) {
  std::mt19937_64 rng(5);
  ReplayWindow w;
  std::set<std::uint64_t> accepted;
  for (int i = 0; i < 20000; ++i) {
    const std::uint64_t c = rng() % 3000;
    if (!w.seen(c)) {
      EXPECT_TRUE(accepted.insert(c).second) << c;
      w.accept(c);
    }
  }
}
