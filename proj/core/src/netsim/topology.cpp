#include "tunnelguard/netsim/topology.hpp"

#include <cmath>
#include <map>
#include <set>

#include "tunnelguard/common/rng.hpp"

namespace tg::netsim {

std::string_view to_string(NetErrc e) noexcept {
  switch (e) {
    case NetErrc::DuplicateNodeId: return "DuplicateNodeId";
    case NetErrc::DanglingLink: return "DanglingLink";
    case NetErrc::InvalidLink: return "InvalidLink";
    case NetErrc::CyclicTopology: return "CyclicTopology";
    case NetErrc::MultipleTapPoints: return "MultipleTapPoints";
    case NetErrc::TapRefused: return "TapRefused";
    case NetErrc::UnknownNode: return "UnknownNode";
    case NetErrc::NoRoute: return "NoRoute";
  }
  return "?";
}

void validate(const Topology& topology) {
  std::set<NodeId> ids;
  int tappable = 0;
  for (const auto& n : topology.nodes) {
    if (!ids.insert(n.id).second) {
      throw NetError(NetErrc::DuplicateNodeId, "duplicate node id " + std::to_string(n.id));
    }
    if (n.tappable) ++tappable;
  }
  if (tappable > 1) throw NetError(NetErrc::MultipleTapPoints, "more than one node is flagged tappable");

  // Union-find: a link joining two already-connected nodes closes a cycle.
  std::map<NodeId, NodeId> parent;
  for (NodeId id : ids) parent[id] = id;
  auto find = [&](NodeId x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };

  for (const auto& l : topology.links) {
    const std::string label = l.name.empty() ? std::to_string(l.a) + "-" + std::to_string(l.b) : l.name;
    if (!ids.contains(l.a) || !ids.contains(l.b)) {
      throw NetError(NetErrc::DanglingLink, "link " + label + " references an unknown node");
    }
    if (l.a == l.b) throw NetError(NetErrc::InvalidLink, "link " + label + " is a self loop");
    if (!(l.loss >= 0.0 && l.loss <= 1.0) || !std::isfinite(l.loss)) {
      throw NetError(NetErrc::InvalidLink, "link " + label + " loss must be within [0, 1]");
    }
    if (l.latency.count() < 0) throw NetError(NetErrc::InvalidLink, "link " + label + " has negative latency");
    const NodeId ra = find(l.a);
    const NodeId rb = find(l.b);
    if (ra == rb) throw NetError(NetErrc::CyclicTopology, "link " + label + " closes a cycle");
    parent[ra] = rb;
  }
}

bool loss_draw(std::uint64_t link_seed, bool reverse, std::uint64_t index, double loss) noexcept {
  if (loss <= 0.0) return false;
  if (loss >= 1.0) return true;
  const std::uint64_t stream = mix_seed(link_seed, reverse ? 1 : 0);
  return unit_interval(splitmix64(stream + index)) < loss;
}

}  // namespace tg::netsim
