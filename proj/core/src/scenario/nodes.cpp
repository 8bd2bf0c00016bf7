#include "tunnelguard/scenario/nodes.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "tunnelguard/common/rng.hpp"
#include "tunnelguard/device/command.hpp"
#include "tunnelguard/server/errors.hpp"

namespace tg::scenario {

using netsim::Address;
using netsim::Protocol;

namespace {

tunnel::ProtocolVariant protocol_of(Variant v) {
  return v == Variant::PptpLite ? tunnel::ProtocolVariant::PptpLite : tunnel::ProtocolVariant::L2tpLite;
}

VirtualTime later(VirtualTime deadline, VirtualTime now) { return std::max(deadline, now + Millis(1)); }

}  // namespace

// --- RoomNode ---------------------------------------------------------------

RoomNode::RoomNode(const RoomDef& def, device::DeviceConfig config, OracleRecorder* oracle,
                   std::optional<VirtualTime> last_tick)
    : def_(def),
      script_(def.script),
      config_(config),
      state_(device::initial_state(def.room_id, script_, def.appliance_on, def.locked)),
      oracle_(oracle),
      last_tick_(last_tick) {}

void RoomNode::start(Context& ctx) {
  if (!last_tick_ || next_tick_ <= *last_tick_) ctx.wake_at(next_tick_);
}

void RoomNode::on_wake(Context& ctx) {
  if (ctx.now() < next_tick_) return;
  auto line = device::tick(state_, script_, ctx.now(), config_);
  if (oracle_) oracle_->line(line);
  ctx.send(Protocol::Udp, def_.device_port, {def_.gateway, def_.device_port}, to_bytes(line));
  ++lines_;
  next_tick_ += kTickInterval;
  if (!last_tick_ || next_tick_ <= *last_tick_) ctx.wake_at(next_tick_);
}

Delivery RoomNode::on_packet(Context& ctx, const Packet& packet) {
  if (packet.proto != Protocol::Udp || packet.dst.port != def_.device_port) return Delivery::Ignored;
  device::Command cmd;
  try {
    cmd = device::decode_command(packet.payload);
  } catch (const device::DeviceError&) {
    return Delivery::Rejected;
  }
  auto result = device::handle_command(state_, cmd);
  ++commands_;
  ctx.send(Protocol::Udp, def_.device_port, packet.src, device::encode_result(result));
  return Delivery::AcceptedCommand;
}

// --- SecureRouterNode -------------------------------------------------------

SecureRouterNode::SecureRouterNode(const Scenario& s, const ArmDef& arm, const NodeDef& self)
    : variant_(arm.variant), server_(s.server_node().id) {
  for (const auto& r : s.rooms)
    if (r.gateway == self.id) rooms_.push_back(r);
  if (variant_ == Variant::None) return;
  tunnel::TunnelConfig cfg;
  cfg.variant = protocol_of(variant_);
  cfg.role = tunnel::TunnelRole::Lac;
  cfg.tunnel_id = self.tunnel_id;
  cfg.shared_secret = s.tunnel.secret;
  cfg.mtu = s.tunnel.mtu;
  cfg.timers = s.tunnel.timers;
  cfg.nonce_seed = mix_seed(s.seed, 0x2000 + self.id);
  lac_ = std::make_unique<tunnel::TunnelEndpoint>(std::move(cfg));
}

const RoomDef* SecureRouterNode::room_by_port(std::uint16_t port) const {
  for (const auto& r : rooms_)
    if (r.device_port == port) return &r;
  return nullptr;
}

const RoomDef* SecureRouterNode::room_by_session(std::uint32_t session) const {
  for (const auto& r : rooms_) {
    auto it = renumbered_.find(r.session_id);
    if ((it == renumbered_.end() ? r.session_id : it->second) == session) return &r;
  }
  return nullptr;
}

void SecureRouterNode::start(Context& ctx) {
  if (!lac_) return;
  handle(ctx, nullptr, lac_->open(ctx.now()));
  reschedule(ctx);
}

Delivery SecureRouterNode::on_packet(Context& ctx, const Packet& packet) {
  if (const RoomDef* room = room_by_port(packet.dst.port);
      room && packet.proto == Protocol::Udp && packet.src.node == room->node) {
    ++stats_.upstream;
    if (!lac_) {
      ctx.forward(packet, Protocol::Udp, room->device_port, {server_, kPlainServerPort}, packet.payload);
      return Delivery::Forwarded;
    }
    auto it = renumbered_.find(room->session_id);
    auto session = it == renumbered_.end() ? room->session_id : it->second;
    const auto* state = lac_->session(session);
    if (!state || state->state != tunnel::SessionPhase::Established) {
      ++stats_.dropped_no_session;
      return Delivery::Rejected;
    }
    handle(ctx, &packet, lac_->send_payload(ctx.now(), session, packet.payload));
    reschedule(ctx);
    return Delivery::Accepted;
  }

  if (packet.src.node != server_) return Delivery::Ignored;
  if (!lac_) {
    const RoomDef* room = room_by_port(packet.dst.port);
    if (!room || packet.proto != Protocol::Udp) return Delivery::Ignored;
    ++stats_.downstream;
    ctx.forward(packet, Protocol::Udp, room->device_port, {room->node, room->device_port}, packet.payload);
    return Delivery::Forwarded;
  }
  bool ours = variant_ == Variant::L2tpLite ? packet.proto == Protocol::Udp && packet.dst.port == kL2tpPort
                                            : packet.proto == Protocol::Gre;
  if (!ours) return Delivery::Ignored;
  auto verdict = handle(ctx, &packet, lac_->step(ctx.now(), tunnel::Incoming{tunnel::Channel::Datagram, packet.payload}));
  reschedule(ctx);
  return verdict;
}

void SecureRouterNode::on_stream(Context& ctx, Address from, std::uint16_t, ByteView chunk) {
  if (!lac_ || from.node != server_) return;
  handle(ctx, nullptr, lac_->step(ctx.now(), tunnel::Incoming{tunnel::Channel::Stream, Bytes(chunk.begin(), chunk.end())}));
  reschedule(ctx);
}

void SecureRouterNode::on_stream_reset(Context& ctx, Address peer) {
  if (!lac_ || peer.node != server_) return;
  handle(ctx, nullptr, lac_->transport_reset(ctx.now()));
  reschedule(ctx);
}

void SecureRouterNode::on_wake(Context& ctx) {
  if (!lac_) return;
  handle(ctx, nullptr, lac_->step(ctx.now()));
  reschedule(ctx);
}

void SecureRouterNode::reschedule(Context& ctx) {
  if (auto d = lac_->next_deadline()) ctx.wake_at(later(*d, ctx.now()));
}

Delivery SecureRouterNode::handle(Context& ctx, const Packet* cause, tunnel::Outputs outs) {
  Delivery verdict = Delivery::Accepted;
  for (std::size_t i = 0; i < outs.size(); ++i) {
    auto out = std::move(outs[i]);  // TunnelUp appends to outs
    std::visit(
        [&](auto& o) {
          using T = std::decay_t<decltype(o)>;
          if constexpr (std::is_same_v<T, tunnel::Transmit>) {
            if (o.channel == tunnel::Channel::Stream) {
              ctx.stream_send(kLacStreamPort, {server_, kPptpPort}, std::move(o.bytes));
            } else if (variant_ == Variant::L2tpLite) {
              ctx.send(Protocol::Udp, kL2tpPort, {server_, kL2tpPort}, std::move(o.bytes));
            } else {
              ctx.send(Protocol::Gre, 0, {server_, 0}, std::move(o.bytes));
            }
          } else if constexpr (std::is_same_v<T, tunnel::TunnelUp>) {
            ctx.trace("tunnel " + std::to_string(lac_->tunnel_id()) + " up");
            for (const auto& r : rooms_) {
              auto more = lac_->open_session(ctx.now(), r.session_id);
              outs.insert(outs.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
            }
          } else if constexpr (std::is_same_v<T, tunnel::TunnelDown>) {
            ctx.trace("tunnel " + std::to_string(lac_->tunnel_id()) + " down " + std::string(tunnel::to_string(o.reason)));
          } else if constexpr (std::is_same_v<T, tunnel::SessionUp>) {
            ctx.trace("session " + std::to_string(o.session_id) + " up");
          } else if constexpr (std::is_same_v<T, tunnel::SessionDown>) {
            ctx.trace("session " + std::to_string(o.session_id) + " down");
          } else if constexpr (std::is_same_v<T, tunnel::SessionRenumbered>) {
            renumbered_[o.requested] = o.assigned;
          } else if constexpr (std::is_same_v<T, tunnel::PayloadReceived>) {
            const RoomDef* room = room_by_session(o.session_id);
            if (!room) {
              verdict = Delivery::Rejected;
              return;
            }
            ++stats_.downstream;
            Address dst{room->node, room->device_port};
            if (cause) {
              ctx.forward(*cause, Protocol::Udp, room->device_port, dst, std::move(o.payload));
            } else {
              ctx.send(Protocol::Udp, room->device_port, dst, std::move(o.payload));
            }
            verdict = Delivery::Forwarded;
          } else if constexpr (std::is_same_v<T, tunnel::PayloadRejected>) {
            ++stats_.rejected;
            verdict = o.reason == tunnel::TunnelErrc::AuthFailure ? Delivery::AuthRejected : Delivery::Rejected;
          } else if constexpr (std::is_same_v<T, tunnel::DecodeErrorEvent>) {
            ++stats_.rejected;
            verdict = o.reason == tunnel::TunnelErrc::AuthFailure ? Delivery::AuthRejected : Delivery::Rejected;
          }
        },
        out);
  }
  return verdict;
}

// --- ServerNode -------------------------------------------------------------

namespace {

server::ServerConfig server_config(const Scenario& s) {
  server::ServerConfig c;
  c.rules = s.rules;
  c.clock_origin = s.start_time;
  return c;
}

// Makes the network context reachable from CommandTransport calls for the
// duration of one callback.
class ContextScope {
 public:
  ContextScope(Context*& slot, Context& ctx) : slot_(slot), saved_(slot) { slot_ = &ctx; }
  ~ContextScope() { slot_ = saved_; }

 private:
  Context*& slot_;
  Context* saved_;
};

}  // namespace

ServerNode::ServerNode(const Scenario& s, const ArmDef& arm, OracleRecorder* oracle)
    : scenario_(s), variant_(arm.variant), oracle_(oracle), control_(server_config(s), *this), script_(s.commands) {
  std::stable_sort(script_.begin(), script_.end(), [](const auto& a, const auto& b) { return a.at < b.at; });
  if (variant_ == Variant::None) return;
  tunnel::ListenerConfig cfg;
  cfg.variant = protocol_of(variant_);
  cfg.shared_secret = s.tunnel.secret;
  cfg.mtu = s.tunnel.mtu;
  cfg.timers = s.tunnel.timers;
  cfg.nonce_seed = mix_seed(s.seed, 0x3000);
  lns_ = std::make_unique<tunnel::TunnelServer>(std::move(cfg));
}

server::RegistryEntry ServerNode::registry_entry(const RoomDef& room, Variant variant) {
  std::uint16_t port = variant == Variant::L2tpLite ? kL2tpPort : variant == Variant::PptpLite ? kPptpPort : 0;
  return {room.room_id, {room.gateway, port}, room.session_id, room.device_port};
}

void ServerNode::run(Context& ctx, const std::function<void()>& fn) {
  ContextScope scope(ctx_, ctx);
  fn();
  reschedule();
}

void ServerNode::start(Context& ctx) {
  run(ctx, [&] {
    for (const auto& r : scenario_.rooms)
      control_.registry_put(ctx.now(), registry_entry(r, variant_), server::Origin::Bootstrap);
  });
}

Delivery ServerNode::on_packet(Context& ctx, const Packet& packet) {
  Delivery verdict = Delivery::Ignored;
  run(ctx, [&] {
    if (!lns_) {
      if (packet.proto != Protocol::Udp || packet.dst.port != kPlainServerPort) return;
      for (const auto& e : control_.registry().list()) {
        if (e.peer.node == packet.src.node && e.device_port == packet.src.port) {
          verdict = on_session_payload(e.session_id, packet.payload);
          return;
        }
      }
      verdict = Delivery::Rejected;
      return;
    }
    tunnel::PeerAddress from{packet.src.node, packet.src.port};
    if (variant_ == Variant::L2tpLite && packet.proto == Protocol::Udp && packet.dst.port == kL2tpPort) {
      verdict = handle(lns_->on_datagram(ctx.now(), from, packet.payload));
    } else if (variant_ == Variant::PptpLite && packet.proto == Protocol::Gre) {
      verdict = handle(lns_->on_datagram(ctx.now(), from, packet.payload));
    }
  });
  return verdict;
}

void ServerNode::on_stream(Context& ctx, Address from, std::uint16_t local_port, ByteView chunk) {
  if (!lns_ || local_port != kPptpPort) return;
  run(ctx, [&] { handle(lns_->on_stream(ctx.now(), {from.node, from.port}, chunk)); });
}

void ServerNode::on_stream_reset(Context& ctx, Address peer) {
  if (!lns_) return;
  run(ctx, [&] { handle(lns_->on_stream_reset(ctx.now(), {peer.node, peer.port})); });
}

void ServerNode::on_wake(Context& ctx) {
  run(ctx, [&] {
    if (lns_) handle(lns_->step(ctx.now()));
    fire_scripted();
    control_.poll(ctx.now());
  });
}

void ServerNode::fire_scripted() {
  auto now = ctx_->now();
  while (script_next_ < script_.size() && script_[script_next_].at <= now) {
    const auto& c = script_[script_next_++];
    auto op = static_cast<std::uint8_t>(c.opcode);
    try {
      control_.send_command(now, c.room_id, op, server::Origin::Script,
                            [this](const server::CommandOutcome& o) { outcomes_.push_back(o); });
    } catch (const server::ServerError& e) {
      server::CommandOutcome o;
      o.room_id = c.room_id;
      o.opcode = op;
      o.status = e.code() == server::ServerErrc::SessionDown ? server::CommandStatus::SessionDown
                                                              : server::CommandStatus::Timeout;
      o.completed_at = now;
      outcomes_.push_back(o);
      ctx_->trace("scripted " + std::string(device::to_string(c.opcode)) + " room=" + std::to_string(c.room_id) +
                  " failed: " + e.what());
    }
  }
}

void ServerNode::reschedule() {
  auto now = ctx_->now();
  std::optional<VirtualTime> next;
  auto take = [&](std::optional<VirtualTime> t) {
    if (t && (!next || *t < *next)) next = t;
  };
  if (lns_) take(lns_->next_deadline());
  take(control_.next_deadline());
  if (script_next_ < script_.size()) take(script_[script_next_].at);
  if (next) ctx_->wake_at(later(*next, now));
}

bool ServerNode::session_up(const server::RegistryEntry& entry) const {
  if (!lns_) return true;
  auto tid = lns_->tunnel_for_session(entry.session_id);
  if (!tid) return false;
  const auto* ep = lns_->tunnel(*tid);
  const auto* s = ep ? ep->session(entry.session_id) : nullptr;
  return s && s->state == tunnel::SessionPhase::Established;
}

void ServerNode::deliver(const server::RegistryEntry& entry, Bytes payload) {
  if (!ctx_) throw std::logic_error("command transport used outside a network callback");
  if (oracle_) oracle_->command(payload);
  if (!lns_) {
    ctx_->send(Protocol::Udp, kPlainServerPort, {entry.peer.node, entry.device_port}, std::move(payload));
    return;
  }
  try {
    handle(lns_->send_payload(ctx_->now(), entry.session_id, payload));
  } catch (const tunnel::TunnelError& e) {
    ctx_->trace("deliver room=" + std::to_string(entry.room_id) + " failed: " + e.what());
  }
}

Delivery ServerNode::on_session_payload(std::uint32_t session, ByteView payload) {
  switch (control_.on_payload(ctx_->now(), session, payload)) {
    case server::PayloadKind::Telemetry:
    case server::PayloadKind::Result:
      return Delivery::Accepted;
    default:
      return Delivery::Rejected;
  }
}

Delivery ServerNode::handle(tunnel::ServerOutputs outs) {
  Delivery verdict = Delivery::Accepted;
  for (auto& so : outs) {
    std::visit(
        [&](auto& o) {
          using T = std::decay_t<decltype(o)>;
          if constexpr (std::is_same_v<T, tunnel::Transmit>) {
            if (o.channel == tunnel::Channel::Stream) {
              ctx_->stream_send(kPptpPort, {so.peer.node, so.peer.port}, std::move(o.bytes));
            } else if (variant_ == Variant::L2tpLite) {
              ctx_->send(Protocol::Udp, kL2tpPort, {so.peer.node, so.peer.port}, std::move(o.bytes));
            } else {
              ctx_->send(Protocol::Gre, 0, {so.peer.node, 0}, std::move(o.bytes));
            }
          } else if constexpr (std::is_same_v<T, tunnel::TunnelUp>) {
            ctx_->trace("lns tunnel " + std::to_string(so.tunnel_id) + " up");
          } else if constexpr (std::is_same_v<T, tunnel::TunnelDown>) {
            ctx_->trace("lns tunnel " + std::to_string(so.tunnel_id) + " down " + std::string(tunnel::to_string(o.reason)));
          } else if constexpr (std::is_same_v<T, tunnel::PayloadReceived>) {
            verdict = on_session_payload(o.session_id, o.payload);
          } else if constexpr (std::is_same_v<T, tunnel::PayloadRejected> ||
                               std::is_same_v<T, tunnel::DecodeErrorEvent>) {
            verdict = o.reason == tunnel::TunnelErrc::AuthFailure ? Delivery::AuthRejected : Delivery::Rejected;
          }
        },
        so.output);
  }
  return verdict;
}

}  // namespace tg::scenario
