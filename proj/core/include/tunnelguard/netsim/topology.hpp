#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "tunnelguard/common/error.hpp"
#include "tunnelguard/common/time.hpp"

namespace tg::netsim {

using NodeId = std::uint32_t;

enum class NetErrc {
  DuplicateNodeId,
  DanglingLink,
  InvalidLink,
  CyclicTopology,
  MultipleTapPoints,
  TapRefused,
  UnknownNode,
  NoRoute,
};

std::string_view to_string(NetErrc e) noexcept;
using NetError = CodedError<NetErrc>;

struct NodeSpec {
  NodeId id = 0;
  std::string name;
  bool tappable = false;  // the open-router hop an adversary may sit on
};

// Bidirectional link. Each direction draws loss independently from its own
// counter stream derived from `seed`.
struct LinkSpec {
  NodeId a = 0;
  NodeId b = 0;
  double loss = 0.0;
  Millis latency{1};
  std::uint64_t seed = 0;
  std::string name;
};

struct Topology {
  std::vector<NodeSpec> nodes;
  std::vector<LinkSpec> links;
};

// Throws NetError: DuplicateNodeId, DanglingLink, InvalidLink (self loop,
// duplicate pair, loss outside [0,1], negative latency), CyclicTopology,
// MultipleTapPoints.
void validate(const Topology& topology);

// Loss decision for the `index`-th frame sent over one direction of a link.
bool loss_draw(std::uint64_t link_seed, bool reverse, std::uint64_t index, double loss) noexcept;

}  // namespace tg::netsim
