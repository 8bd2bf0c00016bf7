#include "tunnelguard/netsim/network.hpp"

#include <algorithm>
#include <deque>

namespace tg::netsim {

// --- Context ----------------------------------------------------------------

VirtualTime Context::now() const noexcept { return net_.now_; }

void Context::send(Protocol proto, std::uint16_t src_port, Address dst, Bytes payload) {
  net_.originate(self_, Packet{proto, Address{self_, src_port}, dst, std::move(payload), std::nullopt}, std::nullopt);
}

void Context::forward(const Packet& cause, Protocol proto, std::uint16_t src_port, Address dst, Bytes payload) {
  net_.originate(self_, Packet{proto, Address{self_, src_port}, dst, std::move(payload), cause.tamper_id},
                 std::nullopt);
}

void Context::stream_send(std::uint16_t src_port, Address dst, Bytes chunk) {
  const Network::ConnKey key{Address{self_, src_port}, dst};
  auto& sender = net_.senders_[key];
  sender.queue.push_back(std::move(chunk));
  if (!sender.busy) net_.launch_segment(key);
}

void Context::wake_at(VirtualTime at) {
  if (at < net_.now_) at = net_.now_;
  if (!net_.pending_wakes_.emplace(at, self_).second) return;
  Network::Event ev;
  ev.kind = Network::EventKind::Wake;
  net_.schedule(at, self_, std::move(ev));
}

void Context::trace(std::string_view line) { net_.add_trace(self_, line); }

// --- Network ----------------------------------------------------------------

Network::Network(Topology topology, StreamPolicy stream)
    : topology_(std::move(topology)), stream_policy_(stream) {
  validate(topology_);
  for (std::size_t i = 0; i < topology_.nodes.size(); ++i) {
    node_index_[topology_.nodes[i].id] = i;
    adjacency_[topology_.nodes[i].id];
  }
  for (const auto& l : topology_.links) {
    if (link_index_.contains({l.a, l.b}) || link_index_.contains({l.b, l.a})) {
      throw NetError(NetErrc::InvalidLink, "duplicate link between " + std::to_string(l.a) + " and " +
                                               std::to_string(l.b));
    }
    link_index_[{l.a, l.b}] = links_.size();
    links_.push_back(LinkState{l, {0, 0}});
    adjacency_[l.a].push_back(l.b);
    adjacency_[l.b].push_back(l.a);
  }
}

Network::~Network() = default;

void Network::attach(NodeId node, std::shared_ptr<NodeHandler> handler) {
  if (!node_index_.contains(node)) throw NetError(NetErrc::UnknownNode, "no node " + std::to_string(node));
  handlers_[node] = std::move(handler);
}

Tap& Network::attach_adversary(NodeId node, AdversaryPolicy policy) {
  auto it = node_index_.find(node);
  if (it == node_index_.end()) throw NetError(NetErrc::UnknownNode, "no node " + std::to_string(node));
  if (!topology_.nodes[it->second].tappable) {
    throw NetError(NetErrc::TapRefused, "node " + std::to_string(node) + " is not the tappable hop");
  }
  tap_ = std::make_unique<Tap>(node, policy);
  return *tap_;
}

std::vector<NodeId> Network::route(NodeId from, NodeId to) const {
  if (!node_index_.contains(from) || !node_index_.contains(to)) {
    throw NetError(NetErrc::UnknownNode, "route between unknown nodes");
  }
  if (auto it = route_cache_.find({from, to}); it != route_cache_.end()) return it->second;

  std::map<NodeId, NodeId> prev;
  std::deque<NodeId> frontier{from};
  prev[from] = from;
  while (!frontier.empty()) {
    const NodeId n = frontier.front();
    frontier.pop_front();
    if (n == to) break;
    for (NodeId next : adjacency_.at(n)) {
      if (prev.emplace(next, n).second) frontier.push_back(next);
    }
  }
  if (!prev.contains(to)) {
    throw NetError(NetErrc::NoRoute, "no route from " + std::to_string(from) + " to " + std::to_string(to));
  }
  std::vector<NodeId> path{to};
  while (path.back() != from) path.push_back(prev[path.back()]);
  std::reverse(path.begin(), path.end());
  route_cache_[{from, to}] = path;
  return path;
}

Millis Network::path_latency(NodeId from, NodeId to) const {
  Millis total{0};
  const auto path = route(from, to);
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    auto it = link_index_.find({path[i], path[i + 1]});
    if (it == link_index_.end()) it = link_index_.find({path[i + 1], path[i]});
    total += links_[it->second].spec.latency;
  }
  return total;
}

std::pair<Network::LinkState*, bool> Network::link_between(NodeId a, NodeId b) {
  if (auto it = link_index_.find({a, b}); it != link_index_.end()) return {&links_[it->second], false};
  auto it = link_index_.find({b, a});
  return {&links_[it->second], true};
}

std::optional<VirtualTime> Network::next_event_time() const {
  if (queue_.empty()) return std::nullopt;
  return std::get<0>(queue_.begin()->first);
}

void Network::schedule(VirtualTime at, NodeId node, Event ev) {
  queue_.emplace(std::make_tuple(at, node, seq_++), std::move(ev));
}

void Network::add_trace(NodeId node, std::string_view line) {
  std::string s = std::to_string(to_ms(now_));
  s += ' ';
  s += std::to_string(node);
  s += ' ';
  s += line;
  trace_.push_back(std::move(s));
}

void Network::start_handlers() {
  if (started_) return;
  started_ = true;
  for (auto& [id, h] : handlers_) {
    Context ctx(*this, id);
    h->start(ctx);
  }
}

void Network::run_until(VirtualTime t_end) {
  start_handlers();
  while (!queue_.empty() && std::get<0>(queue_.begin()->first) <= t_end) {
    auto node = queue_.extract(queue_.begin());
    const auto [at, id, seq] = node.key();
    now_ = at;
    Event& ev = node.mapped();
    switch (ev.kind) {
      case EventKind::Arrive: arrive(id, std::move(ev)); break;
      case EventKind::Wake: {
        pending_wakes_.erase({at, id});
        if (auto h = handlers_.find(id); h != handlers_.end()) {
          Context ctx(*this, id);
          h->second->on_wake(ctx);
        }
        break;
      }
      case EventKind::StreamTimer: on_stream_timer(*ev.segment); break;
      case EventKind::StreamAcked: on_stream_acked(*ev.segment); break;
    }
  }
  if (t_end > now_) now_ = t_end;
}

void Network::invoke(NodeId node, const std::function<void(Context&)>& fn) {
  if (!node_index_.contains(node)) throw NetError(NetErrc::UnknownNode, "no node " + std::to_string(node));
  start_handlers();
  Context ctx(*this, node);
  fn(ctx);
}

void Network::originate(NodeId from, Packet packet, std::optional<StreamSegment> segment) {
  Event ev;
  ev.kind = EventKind::Arrive;
  ev.path = route(from, packet.dst.node);
  ev.packet = std::move(packet);
  ev.segment = std::move(segment);
  ev.hop = 0;
  ++stats_.originated;
  ++stats_.in_flight;
  if (ev.path.size() == 1) {
    // Loopback: delivered without touching any link.
    schedule(now_, from, std::move(ev));
    return;
  }
  transmit_hop(std::move(ev));
}

void Network::transmit_hop(Event ev) {
  const NodeId here = ev.path[ev.hop];
  const NodeId next = ev.path[ev.hop + 1];
  auto [link, reverse] = link_between(here, next);
  const std::uint64_t index = link->sent[reverse ? 1 : 0]++;
  if (loss_draw(link->spec.seed, reverse, index, link->spec.loss)) {
    ++stats_.dropped_loss;
    --stats_.in_flight;
    add_trace(here, "drop " + std::string(to_string(ev.packet.proto)) + " " + to_string(ev.packet.src) + "->" +
                        to_string(ev.packet.dst) + " next=" + std::to_string(next));
    return;
  }
  ++ev.hop;
  schedule(now_ + link->spec.latency, next, std::move(ev));
}

void Network::arrive(NodeId node, Event ev) {
  if (tap_ && tap_->node() == node && ev.hop + 1 < ev.path.size()) {
    if (tap_->observe(now_, ev.packet)) ev.packet.tamper_id = next_tamper_id_++;
  }
  if (ev.hop + 1 < ev.path.size()) {
    transmit_hop(std::move(ev));
    return;
  }
  deliver(node, std::move(ev));
}

void Network::deliver(NodeId node, Event ev) {
  ++stats_.delivered;
  --stats_.in_flight;
  const Packet& p = ev.packet;
  add_trace(node, "rx " + std::string(to_string(p.proto)) + " " + to_string(p.src) + "->" + to_string(p.dst) +
                      " len=" + std::to_string(p.payload.size()));

  auto h = handlers_.find(node);
  if (ev.segment) {
    const StreamSegment& seg = *ev.segment;
    auto& expected = receivers_[seg.conn];
    if (seg.seq == expected) {
      ++expected;
      if (h != handlers_.end()) {
        Context ctx(*this, node);
        h->second->on_stream(ctx, seg.conn.first, seg.conn.second.port, p.payload);
      }
    }
    Event ack;
    ack.kind = EventKind::StreamAcked;
    ack.segment = seg;
    schedule(now_ + path_latency(node, seg.conn.first.node), seg.conn.first.node, std::move(ack));
    return;
  }

  Delivery verdict = Delivery::Ignored;
  if (h != handlers_.end()) {
    Context ctx(*this, node);
    verdict = h->second->on_packet(ctx, p);
  }
  if (p.tamper_id && tap_) {
    const bool first = tamper_delivered_.insert(*p.tamper_id).second;
    if (verdict == Delivery::Forwarded) {
      if (first) tap_->record_verdict(true, verdict);
    } else if (tamper_resolved_.insert(*p.tamper_id).second) {
      tap_->record_verdict(first, verdict);
    }
  }
}

void Network::launch_segment(const ConnKey& key) {
  Sender& s = senders_[key];
  if (s.queue.empty()) {
    s.busy = false;
    return;
  }
  if (!s.busy) {
    s.busy = true;
    s.attempt = 0;
    s.rto = stream_policy_.rto;
  }
  ++s.attempt;
  const StreamSegment seg{key, s.next_seq, s.attempt};
  Packet p{Protocol::Tcp, key.first, key.second, s.queue.front(), std::nullopt};
  originate(key.first.node, std::move(p), seg);

  Event timer;
  timer.kind = EventKind::StreamTimer;
  timer.segment = seg;
  schedule(now_ + s.rto, key.first.node, std::move(timer));
}

void Network::on_stream_timer(const StreamSegment& seg) {
  auto it = senders_.find(seg.conn);
  if (it == senders_.end()) return;
  Sender& s = it->second;
  if (!s.busy || s.next_seq != seg.seq || s.attempt != seg.attempt) return;
  if (s.attempt >= stream_policy_.max_attempts) {
    reset_stream(seg.conn);
    return;
  }
  s.rto *= 2;
  launch_segment(seg.conn);
}

void Network::on_stream_acked(const StreamSegment& seg) {
  auto it = senders_.find(seg.conn);
  if (it == senders_.end()) return;
  Sender& s = it->second;
  if (!s.busy || s.next_seq != seg.seq) return;
  s.queue.erase(s.queue.begin());
  ++s.next_seq;
  s.busy = false;
  launch_segment(seg.conn);
}

void Network::reset_stream(const ConnKey& key) {
  ++stats_.stream_resets;
  const Address a = key.first;
  const Address b = key.second;
  senders_.erase({a, b});
  senders_.erase({b, a});
  receivers_.erase({a, b});
  receivers_.erase({b, a});
  add_trace(a.node, "stream-reset " + to_string(a) + "<->" + to_string(b));
  for (auto [self, peer] : {std::pair{a, b}, std::pair{b, a}}) {
    if (auto h = handlers_.find(self.node); h != handlers_.end()) {
      Context ctx(*this, self.node);
      h->second->on_stream_reset(ctx, peer);
    }
  }
}

}  // namespace tg::netsim
