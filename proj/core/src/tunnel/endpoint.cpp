#include "tunnelguard/tunnel/endpoint.hpp"

#include <sodium.h>

#include <algorithm>
#include <stdexcept>

namespace tg::tunnel {

namespace {

constexpr std::string_view kSccrpLabel = "SCCRP";
constexpr std::string_view kScccnLabel = "SCCCN";
constexpr int kReorderWindow = 64;

// Serial-number distance a - b over the 16-bit sequence space.
int serial_diff(std::uint16_t a, std::uint16_t b) noexcept { return static_cast<std::int16_t>(a - b); }

std::optional<MessageType> expected_reply(MessageType sent) noexcept {
  switch (sent) {
    case MessageType::SCCRQ: return MessageType::SCCRP;
    case MessageType::SCCRP: return MessageType::SCCCN;
    case MessageType::ICRQ: return MessageType::ICRP;
    case MessageType::ICRP: return MessageType::ICCN;
    default: return std::nullopt;
  }
}

std::optional<HandshakeNonce> nonce_attr(const ControlMessage& msg) {
  const Bytes* v = msg.find(attr::kNonce);
  if (v == nullptr || v->size() != kNonceSize) return std::nullopt;
  HandshakeNonce n{};
  std::copy(v->begin(), v->end(), n.begin());
  return n;
}

bool tag_matches(const ControlMessage& msg, const std::array<std::uint8_t, 32>& expected) {
  const Bytes* v = msg.find(attr::kAuthTag);
  if (v == nullptr || v->size() != expected.size()) return false;
  return sodium_memcmp(v->data(), expected.data(), expected.size()) == 0;
}

ControlMessage session_message(MessageType type, std::uint32_t session_id) {
  ControlMessage m{type, {}};
  m.add_u32(attr::kSessionId, session_id);
  return m;
}

}  // namespace

std::string_view to_string(ProtocolVariant v) noexcept {
  return v == ProtocolVariant::L2tpLite ? "L2TP_LITE" : "PPTP_LITE";
}

std::string_view to_string(TunnelRole r) noexcept { return r == TunnelRole::Lac ? "LAC" : "LNS"; }

std::string_view to_string(TunnelPhase p) noexcept {
  switch (p) {
    case TunnelPhase::Idle: return "IDLE";
    case TunnelPhase::WaitReply: return "WAIT_REPLY";
    case TunnelPhase::Established: return "ESTABLISHED";
    case TunnelPhase::Stopping: return "STOPPING";
    case TunnelPhase::Closed: return "CLOSED";
  }
  return "?";
}

std::string_view to_string(DownReason r) noexcept {
  switch (r) {
    case DownReason::Timeout: return "Timeout";
    case DownReason::HandshakeRejected: return "HandshakeRejected";
    case DownReason::AuthFailure: return "AuthFailure";
    case DownReason::LocalClose: return "LocalClose";
    case DownReason::PeerClose: return "PeerClose";
    case DownReason::TransportReset: return "TransportReset";
  }
  return "?";
}

TunnelEndpoint::TunnelEndpoint(TunnelConfig config) : config_(std::move(config)) {
  if (config_.mtu <= kEnvelopeOverhead) throw std::invalid_argument("mtu too small for the sealed envelope");
  if (config_.timers.max_retransmits < 1) throw std::invalid_argument("max_retransmits must be >= 1");
  if (config_.nonce_seed) nonce_rng_.emplace(*config_.nonce_seed);
}

HandshakeNonce TunnelEndpoint::fresh_nonce() {
  HandshakeNonce n{};
  if (nonce_rng_) {
    ByteWriter w(kNonceSize);
    w.u64((*nonce_rng_)()).u64((*nonce_rng_)());
    std::copy(w.view().begin(), w.view().end(), n.begin());
  } else {
    if (sodium_init() < 0) throw std::runtime_error("libsodium initialisation failed");
    randombytes_buf(n.data(), n.size());
  }
  return n;
}

// ---------------------------------------------------------------------------
// Public entry points

Outputs TunnelEndpoint::open(VirtualTime now) {
  if (config_.role != TunnelRole::Lac) throw TunnelError(TunnelErrc::WrongRole, "only the LAC opens tunnels");
  if (phase_ != TunnelPhase::Idle) throw TunnelError(TunnelErrc::InvalidState, "tunnel already opened");

  nonce_lac_ = fresh_nonce();
  ControlMessage m{MessageType::SCCRQ, {}};
  m.add(attr::kNonce, Bytes(nonce_lac_->begin(), nonce_lac_->end()));
  m.add_u32(attr::kTunnelId, config_.tunnel_id);
  phase_ = TunnelPhase::WaitReply;
  queue_control(now, std::move(m), 0);

  Outputs out;
  flush(out);
  return out;
}

Outputs TunnelEndpoint::open_session(VirtualTime now, std::uint32_t session_id) {
  if (phase_ != TunnelPhase::Established) {
    throw TunnelError(TunnelErrc::TunnelNotEstablished, "tunnel is not established");
  }
  if (session_id == 0) throw TunnelError(TunnelErrc::InvalidSessionId, "session id 0 is reserved");
  if (sessions_.contains(session_id) || superseded_.contains(session_id)) {
    throw TunnelError(TunnelErrc::DuplicateSession, "session " + std::to_string(session_id) + " already exists");
  }
  create_session(session_id, true);
  queue_control(now, session_message(MessageType::ICRQ, session_id), session_id);

  Outputs out;
  flush(out);
  return out;
}

Outputs TunnelEndpoint::send_payload(VirtualTime now, std::uint32_t session_id, ByteView payload) {
  (void)now;
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) {
    throw TunnelError(TunnelErrc::NoSuchSession, "no session " + std::to_string(session_id));
  }
  SessionState& s = it->second;
  if (s.state != SessionPhase::Established) {
    throw TunnelError(TunnelErrc::SessionNotEstablished, "session " + std::to_string(session_id) + " not established");
  }
  if (payload.size() > max_plaintext()) {
    throw TunnelError(TunnelErrc::OversizePayload, "payload of " + std::to_string(payload.size()) +
                                                       " bytes exceeds " + std::to_string(max_plaintext()));
  }
  const std::size_t sealed_size = payload.size() + kEnvelopeOverhead;

  Bytes wire;
  if (is_l2tp()) {
    Frame f{FrameKind::Data, true, config_.tunnel_id, session_id, 0, 0, {}};
    const auto header = frame_header(f, sealed_size);
    f.payload = seal_payload(s, payload, header);
    wire = encode_frame(f, config_.mtu);
  } else {
    const auto header = gre_header(session_id, sealed_size);
    wire = encode_gre({session_id, seal_payload(s, payload, header)}, config_.mtu);
  }
  ++stats_.data_sent;

  Outputs out;
  out.push_back(Transmit{Channel::Datagram, std::move(wire)});
  return out;
}

Outputs TunnelEndpoint::close_session(VirtualTime now, std::uint32_t session_id) {
  Outputs out;
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) return out;

  if (phase_ == TunnelPhase::Established) {
    ControlMessage m = session_message(MessageType::CDN, session_id);
    m.add_u16(attr::kResultCode, static_cast<std::uint16_t>(ResultCode::GeneralClear));
    queue_control(now, std::move(m), session_id);
  }
  std::erase_if(awaiting_, [&](const AwaitingReply& a) { return a.session_id == session_id; });
  it->second.state = SessionPhase::Closed;
  it->second.erase_keys();
  sessions_.erase(it);
  out.push_back(SessionDown{session_id});
  flush(out);
  return out;
}

Outputs TunnelEndpoint::close(VirtualTime now) {
  Outputs out;
  if (phase_ == TunnelPhase::Stopping || phase_ == TunnelPhase::Closed) return out;
  if (phase_ == TunnelPhase::Idle) {
    phase_ = TunnelPhase::Closed;
    report_down(DownReason::LocalClose, out);
    return out;
  }

  drop_all_sessions(out);
  ControlMessage m{MessageType::STOPCCN, {}};
  m.add_u16(attr::kResultCode, static_cast<std::uint16_t>(ResultCode::AdminClose));
  queue_control(now, std::move(m), 0);
  awaiting_.clear();
  if (is_l2tp()) {
    phase_ = TunnelPhase::Stopping;
  } else {
    enter_closed(DownReason::LocalClose, out);
  }
  flush(out);
  return out;
}

Outputs TunnelEndpoint::step(VirtualTime now, std::optional<Incoming> incoming) {
  Outputs out;
  if (incoming) {
    if (incoming->channel == Channel::Datagram) {
      on_datagram(now, incoming->bytes, out);
    } else {
      on_stream_chunk(now, incoming->bytes, out);
    }
  }
  if (phase_ != TunnelPhase::Closed) run_timers(now, out);
  send_hello_if_due(now);
  flush(out);
  return out;
}

Outputs TunnelEndpoint::transport_reset(VirtualTime now) {
  (void)now;
  Outputs out;
  if (is_l2tp() || phase_ == TunnelPhase::Closed) return out;
  enter_closed(DownReason::TransportReset, out);
  return out;
}

std::optional<VirtualTime> TunnelEndpoint::next_deadline() const {
  if (phase_ == TunnelPhase::Closed) return std::nullopt;
  std::optional<VirtualTime> best;
  auto consider = [&](VirtualTime t) {
    if (!best || t < *best) best = t;
  };
  for (const auto& e : retransmit_) consider(e.deadline);
  for (const auto& a : awaiting_) consider(a.deadline);
  if (phase_ == TunnelPhase::Established) {
    const bool hello_pending = std::any_of(retransmit_.begin(), retransmit_.end(),
                                           [](const Unacked& e) { return e.msg.type == MessageType::HELLO; });
    if (!hello_pending) consider(std::max(last_activity_, last_hello_) + config_.timers.hello_interval);
  }
  return best;
}

const SessionState* TunnelEndpoint::session(std::uint32_t session_id) const {
  auto it = sessions_.find(session_id);
  return it == sessions_.end() ? nullptr : &it->second;
}

std::vector<std::uint32_t> TunnelEndpoint::session_ids() const {
  std::vector<std::uint32_t> ids;
  ids.reserve(sessions_.size());
  for (const auto& [id, s] : sessions_) ids.push_back(id);
  return ids;
}

std::size_t TunnelEndpoint::established_sessions() const {
  return static_cast<std::size_t>(std::count_if(sessions_.begin(), sessions_.end(), [](const auto& kv) {
    return kv.second.state == SessionPhase::Established;
  }));
}

// ---------------------------------------------------------------------------
// Control channel plumbing

void TunnelEndpoint::queue_control(VirtualTime now, ControlMessage msg, std::uint32_t session_id) {
  ++stats_.control_sent;
  if (msg.type == MessageType::HELLO) ++stats_.hello_sent;
  if (auto reply = expected_reply(msg.type)) {
    awaiting_.push_back({*reply, session_id, 0, config_.timers.rto, now + config_.timers.rto});
  }
  if (is_l2tp()) {
    const std::uint16_t ns = ns_next_++;
    retransmit_.push_back({ns, session_id, msg, 0, config_.timers.rto, now + config_.timers.rto});
    outbox_.push_back({ns, session_id, std::move(msg)});
  } else {
    outbox_.push_back({0, session_id, std::move(msg)});
  }
}

void TunnelEndpoint::flush(Outputs& out) {
  if (is_l2tp()) {
    for (auto& o : outbox_) {
      Frame f{FrameKind::Control, false, config_.tunnel_id, o.session_id, o.ns, nr_next_, encode_control(o.msg)};
      out.push_back(Transmit{Channel::Datagram, encode_frame(f, config_.mtu)});
    }
    if (outbox_.empty() && ack_owed_) {
      Frame zlb{FrameKind::Control, false, config_.tunnel_id, 0, ns_next_, nr_next_, {}};
      out.push_back(Transmit{Channel::Datagram, encode_frame(zlb, config_.mtu)});
      ++stats_.zlb_sent;
    }
  } else {
    for (auto& o : outbox_) {
      out.push_back(Transmit{Channel::Stream, frame_stream_message(encode_control(o.msg))});
    }
  }
  outbox_.clear();
  ack_owed_ = false;
}

void TunnelEndpoint::run_timers(VirtualTime now, Outputs& out) {
  const int limit = config_.timers.max_retransmits;
  for (auto& e : retransmit_) {
    while (e.deadline <= now) {
      if (++e.expiries >= limit) {
        enter_closed(phase_ == TunnelPhase::Stopping ? DownReason::LocalClose : DownReason::Timeout, out);
        return;
      }
      Frame f{FrameKind::Control, false, config_.tunnel_id, e.session_id, e.ns, nr_next_, encode_control(e.msg)};
      out.push_back(Transmit{Channel::Datagram, encode_frame(f, config_.mtu)});
      ++stats_.control_retransmits;
      e.interval *= 2;
      e.deadline += e.interval;
    }
  }
  for (auto& a : awaiting_) {
    while (a.deadline <= now) {
      if (++a.expiries >= limit) {
        enter_closed(DownReason::Timeout, out);
        return;
      }
      a.interval *= 2;
      a.deadline += a.interval;
    }
  }
}

void TunnelEndpoint::send_hello_if_due(VirtualTime now) {
  if (phase_ != TunnelPhase::Established) return;
  const bool outstanding = std::any_of(retransmit_.begin(), retransmit_.end(),
                                       [](const Unacked& e) { return e.msg.type == MessageType::HELLO; });
  if (outstanding) return;
  const VirtualTime due = std::max(last_activity_, last_hello_) + config_.timers.hello_interval;
  if (now < due) return;
  last_hello_ = due;
  queue_control(now, ControlMessage{MessageType::HELLO, {}}, 0);
}

void TunnelEndpoint::acknowledge(std::uint16_t nr, Outputs& out) {
  if (serial_diff(nr, ns_next_) > 0) return;  // acknowledges something never sent
  std::erase_if(retransmit_, [&](const Unacked& e) { return serial_diff(e.ns, nr) < 0; });
  if (phase_ == TunnelPhase::Stopping && retransmit_.empty()) {
    phase_ = TunnelPhase::Closed;
    report_down(DownReason::LocalClose, out);
  }
}

void TunnelEndpoint::clear_awaiting(MessageType expect, std::uint32_t session_id) {
  std::erase_if(awaiting_,
                [&](const AwaitingReply& a) { return a.expect == expect && a.session_id == session_id; });
}

// ---------------------------------------------------------------------------
// Receive paths

void TunnelEndpoint::on_datagram(VirtualTime now, const Bytes& bytes, Outputs& out) {
  if (!is_l2tp()) {
    GreFrame g;
    try {
      g = decode_gre(bytes);
    } catch (const TunnelError& e) {
      ++stats_.decode_errors;
      out.push_back(DecodeErrorEvent{e.code()});
      return;
    }
    on_data(now, g.call_id, g.sealed, ByteView(bytes).first(kGreHeaderSize), out);
    return;
  }

  Frame f;
  try {
    f = decode_frame(bytes);
  } catch (const TunnelError& e) {
    ++stats_.decode_errors;
    out.push_back(DecodeErrorEvent{e.code()});
    return;
  }
  if (f.tunnel_id != config_.tunnel_id) {
    ++stats_.decode_errors;
    out.push_back(DecodeErrorEvent{TunnelErrc::UnknownTunnel});
    return;
  }
  if (f.kind == FrameKind::Control) {
    on_l2tp_control(now, std::move(f), out);
    return;
  }
  if (!f.encrypted) {
    ++stats_.auth_failures;
    out.push_back(PayloadRejected{f.session_id, TunnelErrc::AuthFailure});
    return;
  }
  on_data(now, f.session_id, f.payload, ByteView(bytes).first(kFrameHeaderSize), out);
}

void TunnelEndpoint::on_l2tp_control(VirtualTime now, Frame frame, Outputs& out) {
  acknowledge(frame.nr, out);
  if (frame.is_zlb()) return;

  const int d = serial_diff(frame.ns, nr_next_);
  ack_owed_ = true;
  if (d < 0) {
    ++stats_.duplicates;
    return;
  }
  if (d > 0) {
    if (d <= kReorderWindow) reorder_.try_emplace(frame.ns, std::move(frame));
    return;
  }

  auto deliver = [&](const Frame& f) {
    ++nr_next_;
    ControlMessage msg;
    try {
      msg = decode_control(f.payload);
    } catch (const TunnelError& e) {
      ++stats_.decode_errors;
      out.push_back(DecodeErrorEvent{e.code()});
      return;
    }
    if (msg.type != MessageType::HELLO) last_activity_ = now;
    process_control(now, msg, out);
  };

  deliver(frame);
  for (auto it = reorder_.find(nr_next_); it != reorder_.end(); it = reorder_.find(nr_next_)) {
    Frame next = std::move(it->second);
    reorder_.erase(it);
    deliver(next);
  }
}

void TunnelEndpoint::on_stream_chunk(VirtualTime now, const Bytes& bytes, Outputs& out) {
  stream_.feed(bytes);
  while (auto raw = stream_.next()) {
    ControlMessage msg;
    try {
      msg = decode_control(*raw);
    } catch (const TunnelError& e) {
      ++stats_.decode_errors;
      out.push_back(DecodeErrorEvent{e.code()});
      continue;
    }
    if (msg.type != MessageType::HELLO) last_activity_ = now;
    process_control(now, msg, out);
  }
}

void TunnelEndpoint::on_data(VirtualTime now, std::uint32_t session_id, ByteView sealed, ByteView aad,
                             Outputs& out) {
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) {
    out.push_back(PayloadRejected{session_id, TunnelErrc::NoSuchSession});
    return;
  }
  SessionState& s = it->second;
  if (s.state != SessionPhase::Established) {
    // Keys exist from the moment the session is requested, so forgeries are
    // still told apart from early genuine traffic.
    if (!open_sealed(s.rx_key, session_id, sealed, aad)) {
      ++stats_.auth_failures;
      out.push_back(PayloadRejected{session_id, TunnelErrc::AuthFailure});
    } else {
      out.push_back(PayloadRejected{session_id, TunnelErrc::SessionNotEstablished});
    }
    return;
  }
  try {
    Bytes plain = open_payload(s, sealed, aad);
    last_activity_ = now;
    ++stats_.data_delivered;
    out.push_back(PayloadReceived{session_id, std::move(plain)});
  } catch (const TunnelError& e) {
    if (e.code() == TunnelErrc::AuthFailure) ++stats_.auth_failures;
    if (e.code() == TunnelErrc::ReplayedCounter) ++stats_.replays;
    out.push_back(PayloadRejected{session_id, e.code()});
  }
}

// ---------------------------------------------------------------------------
// Message handling

void TunnelEndpoint::process_control(VirtualTime now, const ControlMessage& msg, Outputs& out) {
  if (phase_ == TunnelPhase::Closed) return;

  switch (msg.type) {
    case MessageType::SCCRQ: {
      if (config_.role != TunnelRole::Lns || phase_ != TunnelPhase::Idle) return;
      nonce_lac_ = nonce_attr(msg);
      nonce_lns_ = fresh_nonce();
      if (config_.reject_with) {
        ControlMessage stop{MessageType::STOPCCN, {}};
        stop.add_u16(attr::kResultCode, static_cast<std::uint16_t>(*config_.reject_with));
        queue_control(now, std::move(stop), 0);
        report_down(DownReason::HandshakeRejected, out);
        if (is_l2tp()) {
          phase_ = TunnelPhase::Stopping;
        } else {
          enter_closed(DownReason::HandshakeRejected, out);
        }
        return;
      }
      ControlMessage reply{MessageType::SCCRP, {}};
      reply.add(attr::kNonce, Bytes(nonce_lns_->begin(), nonce_lns_->end()));
      const auto tag = handshake_tag(config_.shared_secret, kSccrpLabel, config_.tunnel_id, *nonce_lac_, *nonce_lns_);
      reply.add(attr::kAuthTag, Bytes(tag.begin(), tag.end()));
      phase_ = TunnelPhase::WaitReply;
      queue_control(now, std::move(reply), 0);
      return;
    }

    case MessageType::SCCRP: {
      if (config_.role != TunnelRole::Lac || phase_ != TunnelPhase::WaitReply) return;
      clear_awaiting(MessageType::SCCRP, 0);
      nonce_lns_ = nonce_attr(msg);
      const auto expected =
          handshake_tag(config_.shared_secret, kSccrpLabel, config_.tunnel_id, *nonce_lac_, *nonce_lns_);
      if (!tag_matches(msg, expected)) {
        ControlMessage stop{MessageType::STOPCCN, {}};
        stop.add_u16(attr::kResultCode, static_cast<std::uint16_t>(ResultCode::AuthFailed));
        queue_control(now, std::move(stop), 0);
        awaiting_.clear();
        report_down(DownReason::AuthFailure, out);
        if (is_l2tp()) {
          phase_ = TunnelPhase::Stopping;
        } else {
          enter_closed(DownReason::AuthFailure, out);
        }
        return;
      }
      ControlMessage confirm{MessageType::SCCCN, {}};
      const auto tag = handshake_tag(config_.shared_secret, kScccnLabel, config_.tunnel_id, *nonce_lac_, *nonce_lns_);
      confirm.add(attr::kAuthTag, Bytes(tag.begin(), tag.end()));
      queue_control(now, std::move(confirm), 0);
      phase_ = TunnelPhase::Established;
      last_activity_ = now;
      last_hello_ = now;
      out.push_back(TunnelUp{});
      return;
    }

    case MessageType::SCCCN: {
      if (config_.role != TunnelRole::Lns || phase_ != TunnelPhase::WaitReply) return;
      clear_awaiting(MessageType::SCCCN, 0);
      const auto expected =
          handshake_tag(config_.shared_secret, kScccnLabel, config_.tunnel_id, *nonce_lac_, *nonce_lns_);
      if (!tag_matches(msg, expected)) {
        ControlMessage stop{MessageType::STOPCCN, {}};
        stop.add_u16(attr::kResultCode, static_cast<std::uint16_t>(ResultCode::AuthFailed));
        queue_control(now, std::move(stop), 0);
        awaiting_.clear();
        report_down(DownReason::AuthFailure, out);
        if (is_l2tp()) {
          phase_ = TunnelPhase::Stopping;
        } else {
          enter_closed(DownReason::AuthFailure, out);
        }
        return;
      }
      phase_ = TunnelPhase::Established;
      last_activity_ = now;
      last_hello_ = now;
      out.push_back(TunnelUp{});
      return;
    }

    case MessageType::STOPCCN: {
      const bool during_setup = phase_ == TunnelPhase::Idle || phase_ == TunnelPhase::WaitReply;
      enter_closed(during_setup ? DownReason::HandshakeRejected : DownReason::PeerClose, out);
      return;
    }

    case MessageType::HELLO:
      return;

    case MessageType::ICRQ:
    case MessageType::ICRP:
    case MessageType::ICCN:
    case MessageType::CDN:
      if (phase_ == TunnelPhase::Established) process_session_control(now, msg, out);
      return;
  }
}

void TunnelEndpoint::process_session_control(VirtualTime now, const ControlMessage& msg, Outputs& out) {
  const auto sid = msg.u32_attr(attr::kSessionId);
  if (!sid || *sid == 0) {
    ++stats_.decode_errors;
    out.push_back(DecodeErrorEvent{TunnelErrc::MalformedControl});
    return;
  }
  const std::uint32_t id = *sid;
  auto it = sessions_.find(id);

  switch (msg.type) {
    case MessageType::ICRQ: {
      if (it != sessions_.end()) {
        const bool own_request = it->second.initiator && it->second.state == SessionPhase::Requested;
        if (config_.role == TunnelRole::Lac && own_request) {
          // Simultaneous request for the same id: the LNS assignment wins.
          // Our request stays parked until the LNS proposes a replacement id.
          superseded_.insert(id);
          clear_awaiting(MessageType::ICRP, id);
          sessions_.erase(it);
        } else {
          ControlMessage reject = session_message(MessageType::CDN, id);
          reject.add_u16(attr::kResultCode, static_cast<std::uint16_t>(ResultCode::SessionCollision));
          if (config_.role == TunnelRole::Lns) reject.add_u32(attr::kProposedSessionId, propose_free_id(id));
          queue_control(now, std::move(reject), id);
          return;
        }
      }
      create_session(id, false);
      queue_control(now, session_message(MessageType::ICRP, id), id);
      return;
    }

    case MessageType::ICRP: {
      if (it == sessions_.end() || !it->second.initiator || it->second.state != SessionPhase::Requested) return;
      clear_awaiting(MessageType::ICRP, id);
      it->second.state = SessionPhase::Established;
      queue_control(now, session_message(MessageType::ICCN, id), id);
      out.push_back(SessionUp{id});
      return;
    }

    case MessageType::ICCN: {
      if (it == sessions_.end() || it->second.initiator || it->second.state != SessionPhase::Requested) return;
      clear_awaiting(MessageType::ICCN, id);
      it->second.state = SessionPhase::Established;
      out.push_back(SessionUp{id});
      return;
    }

    case MessageType::CDN: {
      const auto result = msg.u16_attr(attr::kResultCode);
      if (result == static_cast<std::uint16_t>(ResultCode::SessionCollision)) {
        // Rejects one of our requests; never tears down an existing session.
        bool own_pending = superseded_.erase(id) > 0;
        if (!own_pending && it != sessions_.end() && it->second.initiator &&
            it->second.state == SessionPhase::Requested) {
          own_pending = true;
          clear_awaiting(MessageType::ICRP, id);
          sessions_.erase(it);
        }
        if (!own_pending) return;
        const auto proposed = msg.u32_attr(attr::kProposedSessionId);
        if (proposed && *proposed != 0 && !sessions_.contains(*proposed) && !superseded_.contains(*proposed)) {
          out.push_back(SessionRenumbered{id, *proposed});
          create_session(*proposed, true);
          queue_control(now, session_message(MessageType::ICRQ, *proposed), *proposed);
        } else {
          out.push_back(SessionDown{id});
        }
        return;
      }
      if (it == sessions_.end()) return;
      std::erase_if(awaiting_, [&](const AwaitingReply& a) { return a.session_id == id; });
      it->second.state = SessionPhase::Closed;
      it->second.erase_keys();
      sessions_.erase(it);
      out.push_back(SessionDown{id});
      return;
    }

    default:
      return;
  }
}

SessionState& TunnelEndpoint::create_session(std::uint32_t session_id, bool initiator) {
  const SessionKeys keys =
      derive_session_keys(config_.shared_secret, config_.tunnel_id, session_id, *nonce_lac_, *nonce_lns_);
  SessionState s = make_session(session_id, keys, config_.role == TunnelRole::Lac);
  s.state = SessionPhase::Requested;
  s.initiator = initiator;
  auto [it, inserted] = sessions_.insert_or_assign(session_id, std::move(s));
  return it->second;
}

std::uint32_t TunnelEndpoint::propose_free_id(std::uint32_t from) const {
  std::uint32_t candidate = from;
  do {
    ++candidate;
    if (candidate == 0) candidate = 1;
  } while (sessions_.contains(candidate));
  return candidate;
}

void TunnelEndpoint::drop_all_sessions(Outputs& out) {
  for (auto& [id, s] : sessions_) {
    s.state = SessionPhase::Closed;
    s.erase_keys();
    out.push_back(SessionDown{id});
  }
  sessions_.clear();
  superseded_.clear();
}

void TunnelEndpoint::report_down(DownReason reason, Outputs& out) {
  if (down_reported_) return;
  down_reported_ = true;
  out.push_back(TunnelDown{reason});
}

void TunnelEndpoint::enter_closed(DownReason reason, Outputs& out) {
  phase_ = TunnelPhase::Closed;
  drop_all_sessions(out);
  retransmit_.clear();
  awaiting_.clear();
  reorder_.clear();
  report_down(reason, out);
}

}  // namespace tg::tunnel
