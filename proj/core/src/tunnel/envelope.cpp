#include "tunnelguard/tunnel/envelope.hpp"

#include <sodium.h>

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "tunnelguard/tunnel/errors.hpp"

namespace tg::tunnel {

namespace {

void ensure_sodium() {
  static const bool ready = [] { return sodium_init() >= 0; }();
  if (!ready) throw std::runtime_error("libsodium initialisation failed");
}

constexpr std::string_view kSessionInfo = "tunnelguard session v1";

using Mac = std::array<std::uint8_t, crypto_auth_hmacsha256_BYTES>;

Mac hmac(ByteView key, std::initializer_list<ByteView> parts) {
  crypto_auth_hmacsha256_state st;
  crypto_auth_hmacsha256_init(&st, key.data(), key.size());
  for (auto p : parts) crypto_auth_hmacsha256_update(&st, p.data(), p.size());
  Mac out{};
  crypto_auth_hmacsha256_final(&st, out.data());
  sodium_memzero(&st, sizeof st);
  return out;
}

std::array<std::uint8_t, crypto_aead_chacha20poly1305_ietf_NPUBBYTES> make_nonce(std::uint32_t session_id,
                                                                                  std::uint64_t counter) {
  static_assert(crypto_aead_chacha20poly1305_ietf_NPUBBYTES == 12);
  ByteWriter w(12);
  w.u32(session_id).u64(counter);
  std::array<std::uint8_t, 12> n{};
  std::copy(w.view().begin(), w.view().end(), n.begin());
  return n;
}

}  // namespace

SecretKey::SecretKey(ByteView bytes) {
  if (bytes.size() != kKeySize) throw std::invalid_argument("secret key must be 32 bytes");
  std::copy(bytes.begin(), bytes.end(), bytes_.begin());
}

SecretKey& SecretKey::operator=(const SecretKey& other) {
  if (this != &other) {
    wipe();
    bytes_ = other.bytes_;
  }
  return *this;
}

SecretKey::~SecretKey() { wipe(); }

SecretKey SecretKey::from_hex(std::string_view hex) { return SecretKey(tg::from_hex(hex)); }

void SecretKey::wipe() noexcept { sodium_memzero(bytes_.data(), bytes_.size()); }

bool operator==(const SecretKey& a, const SecretKey& b) noexcept {
  return sodium_memcmp(a.bytes_.data(), b.bytes_.data(), kKeySize) == 0;
}

Bytes hkdf_sha256(ByteView salt, ByteView ikm, ByteView info, std::size_t length) {
  ensure_sodium();
  if (length > 255 * crypto_auth_hmacsha256_BYTES) throw std::invalid_argument("hkdf output too long");
  const std::array<std::uint8_t, crypto_auth_hmacsha256_BYTES> zero_salt{};
  const ByteView effective_salt = salt.empty() ? ByteView(zero_salt) : salt;
  Mac prk = hmac(effective_salt, {ikm});

  Bytes okm;
  okm.reserve(length);
  Mac block{};
  std::size_t block_len = 0;
  for (std::uint8_t counter = 1; okm.size() < length; ++counter) {
    const std::uint8_t c[1] = {counter};
    block = hmac(prk, {ByteView(block.data(), block_len), info, ByteView(c, 1)});
    block_len = block.size();
    const std::size_t take = std::min(block.size(), length - okm.size());
    okm.insert(okm.end(), block.begin(), block.begin() + static_cast<std::ptrdiff_t>(take));
  }
  sodium_memzero(prk.data(), prk.size());
  sodium_memzero(block.data(), block.size());
  return okm;
}

SessionKeys derive_session_keys(const SecretKey& shared_secret, std::uint32_t tunnel_id,
                                std::uint32_t session_id, const HandshakeNonce& nonce_lac,
                                const HandshakeNonce& nonce_lns) {
  ByteWriter salt(2 * kNonceSize);
  salt.bytes(nonce_lac).bytes(nonce_lns);
  ByteWriter info;
  info.bytes(to_bytes(kSessionInfo)).u32(tunnel_id).u32(session_id);

  Bytes okm = hkdf_sha256(salt.view(), shared_secret.view(), info.view(), 2 * kKeySize);
  SessionKeys keys{SecretKey(ByteView(okm).first(kKeySize)), SecretKey(ByteView(okm).last(kKeySize))};
  sodium_memzero(okm.data(), okm.size());
  return keys;
}

std::array<std::uint8_t, 32> handshake_tag(const SecretKey& shared_secret, std::string_view label,
                                           std::uint32_t tunnel_id, const HandshakeNonce& nonce_lac,
                                           const HandshakeNonce& nonce_lns) {
  ensure_sodium();
  ByteWriter msg;
  msg.bytes(to_bytes(label)).u32(tunnel_id).bytes(nonce_lac).bytes(nonce_lns);
  return hmac(shared_secret.view(), {msg.view()});
}

bool ReplayWindow::seen(std::uint64_t counter) const noexcept {
  if (!highest_ || counter > *highest_) return false;
  const std::uint64_t age = *highest_ - counter;
  if (age >= kReplayWindowSize) return true;
  return (bitmap_ >> age) & 1U;
}

void ReplayWindow::accept(std::uint64_t counter) noexcept {
  if (!highest_) {
    highest_ = counter;
    bitmap_ = 1;
    return;
  }
  if (counter > *highest_) {
    const std::uint64_t shift = counter - *highest_;
    bitmap_ = shift >= kReplayWindowSize ? 0 : bitmap_ << shift;
    bitmap_ |= 1;
    highest_ = counter;
    return;
  }
  const std::uint64_t age = *highest_ - counter;
  if (age < kReplayWindowSize) bitmap_ |= (std::uint64_t{1} << age);
}

std::string_view to_string(SessionPhase phase) noexcept {
  switch (phase) {
    case SessionPhase::Idle: return "IDLE";
    case SessionPhase::Requested: return "REQUESTED";
    case SessionPhase::Established: return "ESTABLISHED";
    case SessionPhase::Closed: return "CLOSED";
  }
  return "?";
}

void SessionState::erase_keys() noexcept {
  tx_key.wipe();
  rx_key.wipe();
}

SessionState make_session(std::uint32_t session_id, const SessionKeys& keys, bool local_is_lac) {
  SessionState s;
  s.session_id = session_id;
  s.tx_key = local_is_lac ? keys.lac_to_lns : keys.lns_to_lac;
  s.rx_key = local_is_lac ? keys.lns_to_lac : keys.lac_to_lns;
  return s;
}

Bytes seal_payload(SessionState& session, ByteView plaintext, ByteView header_aad) {
  ensure_sodium();
  if (session.state != SessionPhase::Established) {
    throw TunnelError(TunnelErrc::SessionClosed, "session is not established");
  }
  if (session.send_counter == std::numeric_limits<std::uint64_t>::max()) {
    throw TunnelError(TunnelErrc::CounterExhausted, "send counter exhausted");
  }
  const std::uint64_t counter = session.send_counter++;
  const auto nonce = make_nonce(session.session_id, counter);

  Bytes out(kCounterSize + plaintext.size() + kTagSize);
  ByteWriter cw(kCounterSize);
  cw.u64(counter);
  std::copy(cw.view().begin(), cw.view().end(), out.begin());
  unsigned long long tag_len = 0;
  crypto_aead_chacha20poly1305_ietf_encrypt_detached(
      out.data() + kCounterSize, out.data() + kCounterSize + plaintext.size(), &tag_len, plaintext.data(),
      plaintext.size(), header_aad.data(), header_aad.size(), nullptr, nonce.data(), session.tx_key.data());
  return out;
}

std::optional<Bytes> open_sealed(const SecretKey& key, std::uint32_t session_id, ByteView sealed,
                                 ByteView header_aad) {
  ensure_sodium();
  if (sealed.size() < kEnvelopeOverhead) return std::nullopt;
  const std::uint64_t counter = *sealed_counter(sealed);
  const auto nonce = make_nonce(session_id, counter);
  const std::size_t ct_len = sealed.size() - kEnvelopeOverhead;
  Bytes plain(ct_len);
  const int rc = crypto_aead_chacha20poly1305_ietf_decrypt_detached(
      plain.data(), nullptr, sealed.data() + kCounterSize, ct_len, sealed.data() + kCounterSize + ct_len,
      header_aad.data(), header_aad.size(), nonce.data(), key.data());
  if (rc != 0) return std::nullopt;
  return plain;
}

Bytes open_payload(SessionState& session, ByteView sealed, ByteView header_aad) {
  if (session.state != SessionPhase::Established) {
    throw TunnelError(TunnelErrc::SessionClosed, "session is not established");
  }
  auto plain = open_sealed(session.rx_key, session.session_id, sealed, header_aad);
  if (!plain) throw TunnelError(TunnelErrc::AuthFailure, "payload failed authentication");
  const std::uint64_t counter = *sealed_counter(sealed);
  if (session.recv_window.seen(counter)) {
    throw TunnelError(TunnelErrc::ReplayedCounter, "counter " + std::to_string(counter) + " already accepted");
  }
  session.recv_window.accept(counter);
  return std::move(*plain);
}

std::optional<std::uint64_t> sealed_counter(ByteView sealed) noexcept {
  if (sealed.size() < kCounterSize) return std::nullopt;
  ByteReader r(sealed);
  return r.u64();
}

}  // namespace tg::tunnel
