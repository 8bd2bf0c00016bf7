#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tunnelguard/netsim/adversary.hpp"

namespace tg::netsim {

// What the devices and server actually emitted during a run: the ground
// truth a capture is scored against.
struct EmissionOracle {
  std::vector<std::string> telemetry_lines;  // one entry per emission, duplicates kept
  std::vector<Bytes> commands;               // distinct command encodings sent
};

// emitted.txt: `T <line>` and `C <hex>` records.
void write_oracle(std::ostream& out, const EmissionOracle& oracle);
EmissionOracle read_oracle(std::istream& in);

struct CaptureReport {
  std::uint64_t frames_seen = 0;
  std::uint64_t data_frames_seen = 0;
  std::uint64_t telemetry_lines_emitted = 0;
  std::uint64_t plaintext_lines_recovered = 0;
  std::vector<std::string> recovered_lines;  // distinct, sorted
  std::uint64_t commands_emitted = 0;
  std::uint64_t commands_recovered = 0;
  TamperStats tamper;
};

// Scans the payload part of every frame for complete telemetry lines and
// command encodings. A line counts only where it is not embedded in a longer
// numeric token; a line emitted k times is credited at most k times.
CaptureReport analyze_capture(const std::vector<CapturedFrame>& frames, const EmissionOracle& oracle);
CaptureReport analyze_capture(const Tap& tap, const EmissionOracle& oracle);

}  // namespace tg::netsim
