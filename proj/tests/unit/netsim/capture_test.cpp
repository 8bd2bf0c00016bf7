#include <gtest/gtest.h>

#include <sstream>

#include "tunnelguard/netsim/capture.hpp"

using namespace tg;
using namespace tg::netsim;

namespace {

CapturedFrame frame(std::string_view payload, Protocol proto = Protocol::Udp, VirtualTime at = VirtualTime{0}) {
  Packet p{proto, {1, 8101}, {4, 5000}, to_bytes(payload), std::nullopt};
  return CapturedFrame{at, 1, 4, capture_bytes(p)};
}

}  // namespace

TEST(Capture, RecoversPlaintextLines) {
  EmissionOracle oracle{{"101-1,1,90,26.0,40", "102-0,0,0,21.5,35"}, {}};
  const auto r = analyze_capture({frame("101-1,1,90,26.0,40"), frame("102-0,0,0,21.5,35")}, oracle);
  EXPECT_EQ(r.frames_seen, 2u);
  EXPECT_EQ(r.data_frames_seen, 2u);
  EXPECT_EQ(r.telemetry_lines_emitted, 2u);
  EXPECT_EQ(r.plaintext_lines_recovered, 2u);
  EXPECT_EQ(r.recovered_lines, (std::vector<std::string>{"101-1,1,90,26.0,40", "102-0,0,0,21.5,35"}));
}

TEST(Capture, RepeatedLinesCreditedUpToEmissionCount) {
  EmissionOracle oracle{{"7-0,0,0,0.0,0", "7-0,0,0,0.0,0"}, {}};
  std::vector<CapturedFrame> frames(3, frame("7-0,0,0,0.0,0"));
  EXPECT_EQ(analyze_capture(frames, oracle).plaintext_lines_recovered, 2u);
  frames.resize(1);
  EXPECT_EQ(analyze_capture(frames, oracle).plaintext_lines_recovered, 1u);
}

TEST(Capture, EmbeddedLinesDoNotCount) {
  // "1-0,0,0,2.0,4" is a prefix/suffix of a longer line, never a match.
  EmissionOracle oracle{{"1-0,0,0,2.0,4"}, {}};
  const auto r = analyze_capture({frame("101-0,0,0,2.0,4"), frame("1-0,0,0,2.0,45"), frame("1-0,0,0,2.0,4.5")},
                                 oracle);
  EXPECT_EQ(r.plaintext_lines_recovered, 0u);
  const auto hit = analyze_capture({frame("xx1-0,0,0,2.0,4\n")}, oracle);
  EXPECT_EQ(hit.plaintext_lines_recovered, 1u);
}

TEST(Capture, HeaderBytesAreNotScanned) {
  // The pseudo-header alone never produces a hit.
  EmissionOracle oracle{{}, {Bytes{0x11, 0x00, 0x00, 0x00, 0x01}}};
  const auto r = analyze_capture({frame("")}, oracle);
  EXPECT_EQ(r.commands_recovered, 0u);
}

TEST(Capture, FindsCommandEncodings) {
  const Bytes lock{0x01, 0x00, 0x00, 0x00, 0x09};
  const Bytes unlock{0x02, 0x00, 0x00, 0x00, 0x0A};
  EmissionOracle oracle{{}, {lock, unlock, lock}};
  std::string payload = "..";
  payload.append(reinterpret_cast<const char*>(lock.data()), lock.size());
  const auto r = analyze_capture({frame(payload)}, oracle);
  EXPECT_EQ(r.commands_emitted, 2u);
  EXPECT_EQ(r.commands_recovered, 1u);
}

TEST(Capture, EmptyCapture) {
  const auto r = analyze_capture({}, EmissionOracle{});
  EXPECT_EQ(r.frames_seen, 0u);
  EXPECT_EQ(r.plaintext_lines_recovered, 0u);
  EXPECT_EQ(r.telemetry_lines_emitted, 0u);
}

TEST(CaptureFile, RoundTrip) {
  std::vector<CapturedFrame> frames{frame("abc", Protocol::Udp, VirtualTime{15}),
                                    frame("", Protocol::Tcp, VirtualTime{20})};
  std::stringstream ss;
  write_capture(ss, frames);
  EXPECT_EQ(ss.str().substr(0, 9), "15 1->4 1");
  EXPECT_EQ(read_capture(ss), frames);
}

TEST(CaptureFile, ErrorsNameTheLine) {
  std::istringstream bad("15 1->4 11000000011f9d0000000413880a\n16 1-4 00\n");
  try {
    read_capture(bad);
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  std::istringstream short_frame("1 1->4 0011\n");
  EXPECT_THROW(read_capture(short_frame), std::runtime_error);
  std::istringstream empty("");
  EXPECT_TRUE(read_capture(empty).empty());
}

TEST(Oracle, RoundTrip) {
  EmissionOracle o{{"101-1,1,90,26.0,40", "7-0,0,0,-3.5,0"}, {Bytes{1, 0, 0, 0, 1}}};
  std::stringstream ss;
  write_oracle(ss, o);
  const auto back = read_oracle(ss);
  EXPECT_EQ(back.telemetry_lines, o.telemetry_lines);
  EXPECT_EQ(back.commands, o.commands);
  std::istringstream bad("X nope\n");
  EXPECT_THROW(read_oracle(bad), std::runtime_error);
}
