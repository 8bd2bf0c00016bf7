#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

#include "tunnelguard/common/bytes.hpp"
#include "tunnelguard/tunnel/control.hpp"

namespace tg::tunnel {

inline constexpr std::size_t kKeySize = 32;
inline constexpr std::size_t kCounterSize = 8;
inline constexpr std::size_t kTagSize = 16;
inline constexpr std::size_t kEnvelopeOverhead = kCounterSize + kTagSize;
inline constexpr std::size_t kReplayWindowSize = 64;

// 32-byte symmetric key, wiped on destruction and on reassignment.
class SecretKey {
 public:
  SecretKey() = default;
  explicit SecretKey(ByteView bytes);
  SecretKey(const SecretKey&) = default;
  SecretKey& operator=(const SecretKey& other);
  ~SecretKey();

  static SecretKey from_hex(std::string_view hex);

  const std::uint8_t* data() const noexcept { return bytes_.data(); }
  ByteView view() const noexcept { return bytes_; }
  void wipe() noexcept;

  friend bool operator==(const SecretKey& a, const SecretKey& b) noexcept;

 private:
  std::array<std::uint8_t, kKeySize> bytes_{};
};

// RFC 5869 HKDF with HMAC-SHA-256.
Bytes hkdf_sha256(ByteView salt, ByteView ikm, ByteView info, std::size_t length);

// Directional traffic keys for one session.
struct SessionKeys {
  SecretKey lac_to_lns;
  SecretKey lns_to_lac;
};

// salt = nonce_lac || nonce_lns, ikm = shared secret,
// info = "tunnelguard session v1" || tunnel_id || session_id. The 64-byte output
// splits into the LAC->LNS key followed by the LNS->LAC key.
SessionKeys derive_session_keys(const SecretKey& shared_secret, std::uint32_t tunnel_id,
                                std::uint32_t session_id, const HandshakeNonce& nonce_lac,
                                const HandshakeNonce& nonce_lns);

// HMAC-SHA-256 over label || tunnel_id || nonce_lac || nonce_lns, keyed by the
// shared secret. Proves knowledge of the secret during tunnel setup.
std::array<std::uint8_t, 32> handshake_tag(const SecretKey& shared_secret, std::string_view label,
                                           std::uint32_t tunnel_id, const HandshakeNonce& nonce_lac,
                                           const HandshakeNonce& nonce_lns);

// Sliding anti-replay window over the last kReplayWindowSize counters.
class ReplayWindow {
 public:
  bool seen(std::uint64_t counter) const noexcept;  // also true for counters left of the window
  void accept(std::uint64_t counter) noexcept;
  std::optional<std::uint64_t> highest() const noexcept { return highest_; }

 private:
  std::optional<std::uint64_t> highest_;
  std::uint64_t bitmap_ = 0;  // bit i set => (highest - i) accepted
};

enum class SessionPhase { Idle, Requested, Established, Closed };

std::string_view to_string(SessionPhase phase) noexcept;

struct SessionState {
  std::uint32_t session_id = 0;
  SessionPhase state = SessionPhase::Idle;
  bool initiator = false;
  std::uint64_t send_counter = 0;
  ReplayWindow recv_window;
  SecretKey tx_key;
  SecretKey rx_key;

  void erase_keys() noexcept;
};

// Builds the session state for one side of a tunnel. `local_is_lac` selects
// which directional key is used for sealing.
SessionState make_session(std::uint32_t session_id, const SessionKeys& keys, bool local_is_lac);

// Output: counter (u64) || ciphertext || tag. Nonce is session_id || counter.
// Throws TunnelError: SessionClosed unless Established, CounterExhausted.
Bytes seal_payload(SessionState& session, ByteView plaintext, ByteView header_aad);

// Authenticates before the replay check, so any modified bit is an
// AuthFailure and only genuine duplicates report ReplayedCounter.
Bytes open_payload(SessionState& session, ByteView sealed, ByteView header_aad);

// Tag verification without state or replay bookkeeping.
std::optional<Bytes> open_sealed(const SecretKey& key, std::uint32_t session_id, ByteView sealed,
                                 ByteView header_aad);

// Reads the clear-text counter from a sealed envelope.
std::optional<std::uint64_t> sealed_counter(ByteView sealed) noexcept;

}  // namespace tg::tunnel
