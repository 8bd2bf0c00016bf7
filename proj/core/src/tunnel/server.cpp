#include "tunnelguard/tunnel/server.hpp"

#include <algorithm>

#include "tunnelguard/common/rng.hpp"

namespace tg::tunnel {

namespace {

std::optional<ControlMessage> try_decode_control(ByteView raw) {
  try {
    return decode_control(raw);
  } catch (const TunnelError&) {
    return std::nullopt;
  }
}

bool is_sccrq_frame(ByteView bytes) {
  try {
    const Frame f = decode_frame(bytes);
    if (f.kind != FrameKind::Control || f.is_zlb()) return false;
    return decode_control(f.payload).type == MessageType::SCCRQ;
  } catch (const TunnelError&) {
    return false;
  }
}

void append(ServerOutputs& to, ServerOutputs&& from) {
  to.insert(to.end(), std::make_move_iterator(from.begin()), std::make_move_iterator(from.end()));
}

}  // namespace

TunnelServer::TunnelServer(ListenerConfig config) : config_(std::move(config)) {}

std::size_t TunnelServer::live_tunnels() const {
  return static_cast<std::size_t>(std::count_if(tunnels_.begin(), tunnels_.end(), [](const auto& kv) {
    return kv.second.endpoint->phase() != TunnelPhase::Closed;
  }));
}

TunnelServer::Tunnel* TunnelServer::accept(std::uint32_t tunnel_id, PeerAddress peer) {
  auto it = tunnels_.find(tunnel_id);
  if (it != tunnels_.end() && it->second.endpoint->phase() != TunnelPhase::Closed) return nullptr;

  TunnelConfig tc;
  tc.variant = config_.variant;
  tc.role = TunnelRole::Lns;
  tc.tunnel_id = tunnel_id;
  tc.shared_secret = config_.shared_secret;
  tc.mtu = config_.mtu;
  tc.timers = config_.timers;
  if (config_.nonce_seed) tc.nonce_seed = mix_seed(*config_.nonce_seed, tunnel_id);
  if (live_tunnels() >= config_.max_tunnels) tc.reject_with = ResultCode::Capacity;

  Tunnel& t = tunnels_[tunnel_id];
  t.peer = peer;
  t.endpoint = std::make_unique<TunnelEndpoint>(std::move(tc));
  return &t;
}

ServerOutputs TunnelServer::wrap(std::uint32_t tunnel_id, const PeerAddress& peer, Outputs outputs) const {
  ServerOutputs out;
  out.reserve(outputs.size());
  for (auto& o : outputs) out.push_back(ServerOutput{tunnel_id, peer, std::move(o)});
  return out;
}

ServerOutputs TunnelServer::on_datagram(VirtualTime now, PeerAddress from, ByteView bytes) {
  if (config_.variant == ProtocolVariant::PptpLite) {
    auto g = gre_peers_.find(from.node);
    if (g == gre_peers_.end()) {
      ++unroutable_;
      return {};
    }
    auto it = tunnels_.find(g->second);
    if (it == tunnels_.end() || it->second.endpoint->phase() == TunnelPhase::Closed) {
      ++unroutable_;
      return {};
    }
    return wrap(it->first, it->second.peer,
                it->second.endpoint->step(now, Incoming{Channel::Datagram, Bytes(bytes.begin(), bytes.end())}));
  }

  if (bytes.size() < kFrameHeaderSize) {
    ++unroutable_;
    return {};
  }
  ByteReader r(bytes.subspan(3, 4));
  const std::uint32_t tunnel_id = r.u32();

  auto it = tunnels_.find(tunnel_id);
  Tunnel* t = nullptr;
  if (it == tunnels_.end() || it->second.endpoint->phase() == TunnelPhase::Closed) {
    if (!is_sccrq_frame(bytes)) {
      ++unroutable_;
      return {};
    }
    t = accept(tunnel_id, from);
  } else if (it->second.peer == from) {
    t = &it->second;
  }
  if (t == nullptr) {
    ++unroutable_;
    return {};
  }
  return wrap(tunnel_id, t->peer, t->endpoint->step(now, Incoming{Channel::Datagram, Bytes(bytes.begin(), bytes.end())}));
}

ServerOutputs TunnelServer::on_stream(VirtualTime now, PeerAddress from, ByteView chunk) {
  if (config_.variant != ProtocolVariant::PptpLite) {
    ++unroutable_;
    return {};
  }
  ServerOutputs out;
  StreamReassembler& r = pending_streams_[from];
  r.feed(chunk);
  while (auto raw = r.next()) {
    Tunnel* t = nullptr;
    std::uint32_t tunnel_id = 0;
    if (auto bound = stream_peers_.find(from); bound != stream_peers_.end()) {
      auto it = tunnels_.find(bound->second);
      if (it != tunnels_.end() && it->second.endpoint->phase() != TunnelPhase::Closed) {
        t = &it->second;
        tunnel_id = it->first;
      }
    }
    if (t == nullptr) {
      const auto msg = try_decode_control(*raw);
      const auto requested = msg ? msg->u32_attr(attr::kTunnelId) : std::nullopt;
      if (!msg || msg->type != MessageType::SCCRQ || !requested) {
        ++unroutable_;
        continue;
      }
      t = accept(*requested, from);
      if (t == nullptr) {
        ++unroutable_;
        continue;
      }
      tunnel_id = *requested;
      stream_peers_[from] = tunnel_id;
      gre_peers_[from.node] = tunnel_id;
    }
    append(out, wrap(tunnel_id, t->peer, t->endpoint->step(now, Incoming{Channel::Stream, frame_stream_message(*raw)})));
  }
  return out;
}

ServerOutputs TunnelServer::on_stream_reset(VirtualTime now, PeerAddress from) {
  pending_streams_.erase(from);
  auto bound = stream_peers_.find(from);
  if (bound == stream_peers_.end()) return {};
  const std::uint32_t tunnel_id = bound->second;
  stream_peers_.erase(bound);
  auto it = tunnels_.find(tunnel_id);
  if (it == tunnels_.end()) return {};
  return wrap(tunnel_id, it->second.peer, it->second.endpoint->transport_reset(now));
}

ServerOutputs TunnelServer::step(VirtualTime now) {
  ServerOutputs out;
  for (auto& [id, t] : tunnels_) {
    const auto deadline = t.endpoint->next_deadline();
    if (deadline && *deadline <= now) append(out, wrap(id, t.peer, t.endpoint->step(now)));
  }
  return out;
}

ServerOutputs TunnelServer::send_payload(VirtualTime now, std::uint32_t session_id, ByteView payload) {
  const auto tunnel_id = tunnel_for_session(session_id);
  if (!tunnel_id) throw TunnelError(TunnelErrc::NoSuchSession, "no session " + std::to_string(session_id));
  Tunnel& t = tunnels_.at(*tunnel_id);
  return wrap(*tunnel_id, t.peer, t.endpoint->send_payload(now, session_id, payload));
}

ServerOutputs TunnelServer::open_session(VirtualTime now, std::uint32_t tunnel_id, std::uint32_t session_id) {
  auto it = tunnels_.find(tunnel_id);
  if (it == tunnels_.end()) throw TunnelError(TunnelErrc::UnknownTunnel, "no tunnel " + std::to_string(tunnel_id));
  return wrap(tunnel_id, it->second.peer, it->second.endpoint->open_session(now, session_id));
}

ServerOutputs TunnelServer::close_session(VirtualTime now, std::uint32_t session_id) {
  const auto tunnel_id = tunnel_for_session(session_id);
  if (!tunnel_id) return {};
  Tunnel& t = tunnels_.at(*tunnel_id);
  return wrap(*tunnel_id, t.peer, t.endpoint->close_session(now, session_id));
}

ServerOutputs TunnelServer::close_tunnel(VirtualTime now, std::uint32_t tunnel_id) {
  auto it = tunnels_.find(tunnel_id);
  if (it == tunnels_.end()) return {};
  return wrap(tunnel_id, it->second.peer, it->second.endpoint->close(now));
}

std::optional<VirtualTime> TunnelServer::next_deadline() const {
  std::optional<VirtualTime> best;
  for (const auto& [id, t] : tunnels_) {
    const auto d = t.endpoint->next_deadline();
    if (d && (!best || *d < *best)) best = d;
  }
  return best;
}

const TunnelEndpoint* TunnelServer::tunnel(std::uint32_t tunnel_id) const {
  auto it = tunnels_.find(tunnel_id);
  return it == tunnels_.end() ? nullptr : it->second.endpoint.get();
}

std::optional<std::uint32_t> TunnelServer::tunnel_for_session(std::uint32_t session_id) const {
  for (const auto& [id, t] : tunnels_) {
    if (t.endpoint->phase() != TunnelPhase::Closed && t.endpoint->session(session_id) != nullptr) return id;
  }
  return std::nullopt;
}

std::vector<std::uint32_t> TunnelServer::tunnel_ids() const {
  std::vector<std::uint32_t> ids;
  for (const auto& [id, t] : tunnels_) ids.push_back(id);
  return ids;
}

}  // namespace tg::tunnel
