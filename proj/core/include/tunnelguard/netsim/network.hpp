#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "tunnelguard/netsim/adversary.hpp"
#include "tunnelguard/netsim/packet.hpp"
#include "tunnelguard/netsim/topology.hpp"

namespace tg::netsim {

class Network;

// Handle a node handler uses to act on the network. Only valid during the
// callback it was passed to.
class Context {
 public:
  VirtualTime now() const noexcept;
  NodeId self() const noexcept { return self_; }

  void send(Protocol proto, std::uint16_t src_port, Address dst, Bytes payload);
  // Like send, but the new packet inherits `cause`'s tamper attribution.
  void forward(const Packet& cause, Protocol proto, std::uint16_t src_port, Address dst, Bytes payload);
  // Reliable, ordered byte stream to `dst` (emulated, see Network).
  void stream_send(std::uint16_t src_port, Address dst, Bytes chunk);
  void wake_at(VirtualTime at);
  void trace(std::string_view line);

 private:
  friend class Network;
  Context(Network& net, NodeId self) : net_(net), self_(self) {}
  Network& net_;
  NodeId self_;
};

class NodeHandler {
 public:
  virtual ~NodeHandler() = default;
  virtual void start(Context&) {}
  virtual Delivery on_packet(Context& ctx, const Packet& packet) = 0;
  virtual void on_stream(Context&, Address /*from*/, std::uint16_t /*local_port*/, ByteView /*chunk*/) {}
  virtual void on_stream_reset(Context&, Address /*peer*/) {}
  virtual void on_wake(Context&) {}
};

struct NetStats {
  std::uint64_t originated = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped_loss = 0;
  std::uint64_t dropped_adversary = 0;
  std::uint64_t in_flight = 0;
  std::uint64_t stream_resets = 0;
};

// Stop-and-wait stream emulation: each segment crosses the same lossy links
// as datagrams and is retried with doubling timeout; after `max_attempts`
// failed tries the connection resets on both ends.
struct StreamPolicy {
  Millis rto{200};
  int max_attempts = 8;
};

// Discrete-event network over a tree of nodes. Events are ordered by
// (time, node id, insertion order); loss is a counter-based draw per link
// direction, so runs are a pure function of topology, seeds and handlers.
class Network {
 public:
  explicit Network(Topology topology, StreamPolicy stream = {});
  ~Network();
  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  // Throws NetError(UnknownNode).
  void attach(NodeId node, std::shared_ptr<NodeHandler> handler);
  // Throws NetError(TapRefused) unless the node is the tappable hop.
  Tap& attach_adversary(NodeId node, AdversaryPolicy policy);

  // Processes every event at or before `t_end`; afterwards now() == t_end.
  void run_until(VirtualTime t_end);
  // Runs `fn` as node `node` at the current time.
  void invoke(NodeId node, const std::function<void(Context&)>& fn);

  VirtualTime now() const noexcept { return now_; }
  std::optional<VirtualTime> next_event_time() const;
  const Topology& topology() const noexcept { return topology_; }
  const NetStats& stats() const noexcept { return stats_; }
  const std::vector<std::string>& trace() const noexcept { return trace_; }
  const Tap* tap() const noexcept { return tap_.get(); }
  // Hop sequence from `from` to `to`, both included. Throws NetError(NoRoute).
  std::vector<NodeId> route(NodeId from, NodeId to) const;
  Millis path_latency(NodeId from, NodeId to) const;

 private:
  friend class Context;

  using ConnKey = std::pair<Address, Address>;  // (sender, receiver)

  struct StreamSegment {
    ConnKey conn;
    std::uint64_t seq = 0;
    int attempt = 0;
  };
  enum class EventKind { Arrive, Wake, StreamTimer, StreamAcked };
  struct Event {
    EventKind kind = EventKind::Arrive;
    Packet packet;
    std::vector<NodeId> path;
    std::size_t hop = 0;
    std::optional<StreamSegment> segment;
  };
  struct LinkState {
    LinkSpec spec;
    std::uint64_t sent[2] = {0, 0};
  };
  struct Sender {
    std::vector<Bytes> queue;  // front is in flight while `busy`
    std::uint64_t next_seq = 0;
    bool busy = false;
    int attempt = 0;
    Millis rto{0};
  };

  void schedule(VirtualTime at, NodeId node, Event ev);
  void originate(NodeId from, Packet packet, std::optional<StreamSegment> segment);
  void transmit_hop(Event ev);
  void arrive(NodeId node, Event ev);
  void deliver(NodeId node, Event ev);
  void launch_segment(const ConnKey& key);
  void on_stream_timer(const StreamSegment& seg);
  void on_stream_acked(const StreamSegment& seg);
  void reset_stream(const ConnKey& key);
  void start_handlers();
  void add_trace(NodeId node, std::string_view line);
  std::pair<LinkState*, bool> link_between(NodeId a, NodeId b);

  Topology topology_;
  StreamPolicy stream_policy_;
  std::map<NodeId, std::size_t> node_index_;
  std::map<NodeId, std::vector<NodeId>> adjacency_;
  std::vector<LinkState> links_;
  std::map<std::pair<NodeId, NodeId>, std::size_t> link_index_;
  mutable std::map<std::pair<NodeId, NodeId>, std::vector<NodeId>> route_cache_;
  std::map<NodeId, std::shared_ptr<NodeHandler>> handlers_;
  std::unique_ptr<Tap> tap_;

  std::map<std::tuple<VirtualTime, NodeId, std::uint64_t>, Event> queue_;
  std::set<std::pair<VirtualTime, NodeId>> pending_wakes_;
  std::uint64_t seq_ = 0;
  VirtualTime now_{0};
  bool started_ = false;

  std::map<ConnKey, Sender> senders_;
  std::map<ConnKey, std::uint64_t> receivers_;  // next expected seq

  std::uint64_t next_tamper_id_ = 0;
  std::set<std::uint64_t> tamper_delivered_;
  std::set<std::uint64_t> tamper_resolved_;
  NetStats stats_;
  std::vector<std::string> trace_;
};

}  // namespace tg::netsim
