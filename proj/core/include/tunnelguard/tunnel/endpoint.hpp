#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string_view>
#include <variant>
#include <vector>

#include "tunnelguard/common/bytes.hpp"
#include "tunnelguard/common/time.hpp"
#include "tunnelguard/tunnel/control.hpp"
#include "tunnelguard/tunnel/envelope.hpp"
#include "tunnelguard/tunnel/errors.hpp"
#include "tunnelguard/tunnel/frame.hpp"
#include "tunnelguard/tunnel/gre.hpp"

namespace tg::tunnel {

enum class ProtocolVariant { L2tpLite, PptpLite };
enum class TunnelRole { Lac, Lns };
enum class TunnelPhase { Idle, WaitReply, Established, Stopping, Closed };
enum class Channel { Datagram, Stream };
enum class DownReason { Timeout, HandshakeRejected, AuthFailure, LocalClose, PeerClose, TransportReset };

std::string_view to_string(ProtocolVariant v) noexcept;
std::string_view to_string(TunnelRole r) noexcept;
std::string_view to_string(TunnelPhase p) noexcept;
std::string_view to_string(DownReason r) noexcept;

struct TimerPolicy {
  Millis rto{1000};
  int max_retransmits = 5;
  Millis hello_interval{10000};
};

struct TunnelConfig {
  ProtocolVariant variant = ProtocolVariant::L2tpLite;
  TunnelRole role = TunnelRole::Lac;
  std::uint32_t tunnel_id = 1;
  SecretKey shared_secret;
  std::uint16_t mtu = kDefaultMtu;
  TimerPolicy timers;
  // Deterministic handshake nonces for simulation; random when unset.
  std::optional<std::uint64_t> nonce_seed;
  // LNS only: answer the SCCRQ with STOPCCN carrying this result code.
  std::optional<ResultCode> reject_with;
};

struct Transmit {
  Channel channel = Channel::Datagram;
  Bytes bytes;
};
struct TunnelUp {};
struct TunnelDown {
  DownReason reason;
};
struct SessionUp {
  std::uint32_t session_id;
};
struct SessionDown {
  std::uint32_t session_id;
};
// Our session request lost a collision; the peer-proposed id replaces it.
struct SessionRenumbered {
  std::uint32_t requested;
  std::uint32_t assigned;
};
struct PayloadReceived {
  std::uint32_t session_id;
  Bytes payload;
};
struct PayloadRejected {
  std::uint32_t session_id;
  TunnelErrc reason;
};
struct DecodeErrorEvent {
  TunnelErrc reason;
};

using Output = std::variant<Transmit, TunnelUp, TunnelDown, SessionUp, SessionDown, SessionRenumbered,
                            PayloadReceived, PayloadRejected, DecodeErrorEvent>;
using Outputs = std::vector<Output>;

struct Incoming {
  Channel channel = Channel::Datagram;
  Bytes bytes;
};

struct EndpointStats {
  std::uint64_t control_sent = 0;  // first transmissions, ZLB excluded
  std::uint64_t control_retransmits = 0;
  std::uint64_t zlb_sent = 0;
  std::uint64_t hello_sent = 0;
  std::uint64_t data_sent = 0;
  std::uint64_t data_delivered = 0;
  std::uint64_t duplicates = 0;
  std::uint64_t decode_errors = 0;
  std::uint64_t auth_failures = 0;
  std::uint64_t replays = 0;
};

// One end of a tunnel: a single-owner state machine. Every entry point takes
// the current virtual time and returns the frames to put on the wire plus the
// events it produced; nothing happens between calls.
//
// L2TP-lite carries control and data on the datagram transport; control
// messages are sequenced (ns/nr), acknowledged (piggyback or ZLB) and
// retransmitted with exponential backoff. PPTP-lite sends control on the
// stream connection (which is reliable, so there is no ns/nr) and data in
// GRE-style datagrams; only reply deadlines are tracked.
class TunnelEndpoint {
 public:
  explicit TunnelEndpoint(TunnelConfig config);

  // LAC only, from Idle: starts the SCCRQ/SCCRP/SCCCN exchange.
  Outputs open(VirtualTime now);

  // Tunnel must be Established. Either role may initiate.
  Outputs open_session(VirtualTime now, std::uint32_t session_id);

  // Seals and emits one data frame. Never retransmitted.
  Outputs send_payload(VirtualTime now, std::uint32_t session_id, ByteView payload);

  // No-op for unknown sessions.
  Outputs close_session(VirtualTime now, std::uint32_t session_id);

  // No-op once Stopping or Closed.
  Outputs close(VirtualTime now);

  // Feeds one received unit (a datagram, or a chunk of the stream) and runs
  // any expired timers.
  Outputs step(VirtualTime now, std::optional<Incoming> incoming = std::nullopt);

  // The stream connection under a PPTP-lite tunnel was reset.
  Outputs transport_reset(VirtualTime now);

  std::optional<VirtualTime> next_deadline() const;

  TunnelPhase phase() const noexcept { return phase_; }
  TunnelRole role() const noexcept { return config_.role; }
  ProtocolVariant variant() const noexcept { return config_.variant; }
  std::uint32_t tunnel_id() const noexcept { return config_.tunnel_id; }
  std::uint16_t mtu() const noexcept { return config_.mtu; }
  std::size_t max_plaintext() const noexcept { return config_.mtu - kEnvelopeOverhead; }

  const SessionState* session(std::uint32_t session_id) const;
  std::vector<std::uint32_t> session_ids() const;
  std::size_t established_sessions() const;
  std::size_t pending_control() const noexcept { return retransmit_.size() + awaiting_.size(); }
  const EndpointStats& stats() const noexcept { return stats_; }

 private:
  struct Unacked {
    std::uint16_t ns;
    std::uint32_t session_id;
    ControlMessage msg;
    int expiries = 0;
    Millis interval;
    VirtualTime deadline;
  };
  struct AwaitingReply {
    MessageType expect;
    std::uint32_t session_id;
    int expiries = 0;
    Millis interval;
    VirtualTime deadline;
  };
  struct Outgoing {
    std::uint16_t ns;
    std::uint32_t session_id;
    ControlMessage msg;
  };

  bool is_l2tp() const noexcept { return config_.variant == ProtocolVariant::L2tpLite; }

  HandshakeNonce fresh_nonce();
  void queue_control(VirtualTime now, ControlMessage msg, std::uint32_t session_id);
  void flush(Outputs& out);
  void run_timers(VirtualTime now, Outputs& out);
  void send_hello_if_due(VirtualTime now);

  void on_datagram(VirtualTime now, const Bytes& bytes, Outputs& out);
  void on_stream_chunk(VirtualTime now, const Bytes& bytes, Outputs& out);
  void on_l2tp_control(VirtualTime now, Frame frame, Outputs& out);
  void on_data(VirtualTime now, std::uint32_t session_id, ByteView sealed, ByteView aad, Outputs& out);
  void process_control(VirtualTime now, const ControlMessage& msg, Outputs& out);
  void process_session_control(VirtualTime now, const ControlMessage& msg, Outputs& out);
  void acknowledge(std::uint16_t nr, Outputs& out);
  void clear_awaiting(MessageType expect, std::uint32_t session_id);

  SessionState& create_session(std::uint32_t session_id, bool initiator);
  std::uint32_t propose_free_id(std::uint32_t from) const;
  void drop_all_sessions(Outputs& out);
  void report_down(DownReason reason, Outputs& out);
  void enter_closed(DownReason reason, Outputs& out);

  TunnelConfig config_;
  TunnelPhase phase_ = TunnelPhase::Idle;
  std::optional<std::mt19937_64> nonce_rng_;
  std::optional<HandshakeNonce> nonce_lac_;
  std::optional<HandshakeNonce> nonce_lns_;

  std::uint16_t ns_next_ = 0;
  std::uint16_t nr_next_ = 0;
  std::deque<Unacked> retransmit_;
  std::map<std::uint16_t, Frame> reorder_;
  std::vector<AwaitingReply> awaiting_;
  std::vector<Outgoing> outbox_;
  bool ack_owed_ = false;

  std::map<std::uint32_t, SessionState> sessions_;
  std::set<std::uint32_t> superseded_;

  VirtualTime last_activity_{0};
  VirtualTime last_hello_{0};
  bool down_reported_ = false;

  StreamReassembler stream_;
  EndpointStats stats_;
};

}  // namespace tg::tunnel
