#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "tunnelguard/common/bytes.hpp"
#include "tunnelguard/common/time.hpp"
#include "tunnelguard/netsim/packet.hpp"

namespace tg::netsim {

enum class AdversaryMode { PassiveSniff, Mitm };

std::string_view to_string(AdversaryMode m) noexcept;

// Rewrites every `every_nth` data frame seen at the tap by xoring the last
// payload byte with `xor_mask`.
struct TamperRule {
  std::uint32_t every_nth = 10;
  std::uint8_t xor_mask = 0x01;
};

struct AdversaryPolicy {
  AdversaryMode mode = AdversaryMode::PassiveSniff;
  TamperRule tamper;
};

// One frame as seen by the tap: pseudo-header followed by the payload,
// before any rewrite.
struct CapturedFrame {
  VirtualTime at{0};
  NodeId src = 0;
  NodeId dst = 0;
  Bytes bytes;

  friend bool operator==(const CapturedFrame&, const CapturedFrame&) = default;
};

struct TamperStats {
  std::uint64_t attempts = 0;
  std::uint64_t delivered = 0;  // tampered frames that reached their destination
  std::uint64_t accepted = 0;   // destination took the payload as genuine
  std::uint64_t rejected_auth = 0;
  std::uint64_t commands_accepted = 0;
};

// Data frames are the ones a tamper rule targets: GRE, L2TP-lite data (UDP
// 1701 with the T bit clear) and any other UDP. Stream segments and tunnel
// control are left alone.
bool is_data_frame(const Packet& p) noexcept;
bool is_data_frame(ByteView capture_bytes) noexcept;

class Tap {
 public:
  Tap(NodeId node, AdversaryPolicy policy) : node_(node), policy_(policy) {}

  NodeId node() const noexcept { return node_; }
  const AdversaryPolicy& policy() const noexcept { return policy_; }
  const std::vector<CapturedFrame>& frames() const noexcept { return frames_; }
  std::uint64_t data_frames_seen() const noexcept { return data_frames_; }
  const TamperStats& tamper() const noexcept { return stats_; }

  // Records the frame; returns true when the policy rewrote it in place.
  bool observe(VirtualTime now, Packet& packet);
  void record_verdict(bool first_delivery, Delivery verdict);

 private:
  NodeId node_;
  AdversaryPolicy policy_;
  std::vector<CapturedFrame> frames_;
  std::uint64_t data_frames_ = 0;
  TamperStats stats_;
};

// Capture file: one frame per line, `<t_ms> <src>-><dst> <hex>`.
void write_capture(std::ostream& out, const std::vector<CapturedFrame>& frames);

// Throws std::runtime_error naming the offending line.
std::vector<CapturedFrame> read_capture(std::istream& in);

}  // namespace tg::netsim
