#include "tunnelguard/netsim/adversary.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace tg::netsim {

namespace {

constexpr std::uint16_t kL2tpPort = 1701;
constexpr std::uint8_t kL2tpControlBit = 0x80;

bool classify(Protocol proto, std::uint16_t src_port, std::uint16_t dst_port, ByteView payload) noexcept {
  switch (proto) {
    case Protocol::Gre: return true;
    case Protocol::Tcp: return false;
    case Protocol::Udp:
      if (src_port == kL2tpPort || dst_port == kL2tpPort) {
        return !payload.empty() && (payload[0] & kL2tpControlBit) == 0;
      }
      return true;
  }
  return false;
}

}  // namespace

std::string_view to_string(AdversaryMode m) noexcept {
  return m == AdversaryMode::PassiveSniff ? "PASSIVE_SNIFF" : "MITM";
}

bool is_data_frame(const Packet& p) noexcept { return classify(p.proto, p.src.port, p.dst.port, p.payload); }

bool is_data_frame(ByteView capture) noexcept {
  if (capture.size() < kCaptureHeaderSize) return false;
  ByteReader r(capture);
  const auto proto = static_cast<Protocol>(r.u8());
  r.u32();
  const std::uint16_t src_port = r.u16();
  r.u32();
  const std::uint16_t dst_port = r.u16();
  if (proto != Protocol::Tcp && proto != Protocol::Udp && proto != Protocol::Gre) return false;
  return classify(proto, src_port, dst_port, r.rest());
}

bool Tap::observe(VirtualTime now, Packet& packet) {
  frames_.push_back(CapturedFrame{now, packet.src.node, packet.dst.node, capture_bytes(packet)});
  if (!is_data_frame(packet)) return false;
  ++data_frames_;
  if (policy_.mode != AdversaryMode::Mitm || policy_.tamper.every_nth == 0) return false;
  if (data_frames_ % policy_.tamper.every_nth != 0 || packet.payload.empty()) return false;
  packet.payload.back() ^= policy_.tamper.xor_mask;
  ++stats_.attempts;
  return true;
}

void Tap::record_verdict(bool first_delivery, Delivery verdict) {
  if (first_delivery) ++stats_.delivered;
  switch (verdict) {
    case Delivery::Accepted: ++stats_.accepted; break;
    case Delivery::AcceptedCommand:
      ++stats_.accepted;
      ++stats_.commands_accepted;
      break;
    case Delivery::AuthRejected: ++stats_.rejected_auth; break;
    default: break;
  }
}

void write_capture(std::ostream& out, const std::vector<CapturedFrame>& frames) {
  for (const auto& f : frames) {
    out << to_ms(f.at) << ' ' << f.src << "->" << f.dst << ' ' << to_hex(f.bytes) << '\n';
  }
}

std::vector<CapturedFrame> read_capture(std::istream& in) {
  std::vector<CapturedFrame> frames;
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& why) {
    throw std::runtime_error("capture line " + std::to_string(lineno) + ": " + why);
  };
  auto parse_u = [&](std::string_view s, auto& value) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || p != s.data() + s.size()) fail("bad number '" + std::string(s) + "'");
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string t, dir, hex, extra;
    if (!(fields >> t >> dir >> hex) || (fields >> extra)) fail("expected '<t_ms> <src>-><dst> <hex>'");
    CapturedFrame f;
    std::int64_t ms = 0;
    parse_u(t, ms);
    f.at = VirtualTime{ms};
    const auto arrow = dir.find("->");
    if (arrow == std::string::npos) fail("missing '->' in direction");
    parse_u(std::string_view(dir).substr(0, arrow), f.src);
    parse_u(std::string_view(dir).substr(arrow + 2), f.dst);
    try {
      f.bytes = from_hex(hex);
    } catch (const std::invalid_argument&) {
      fail("bad hex payload");
    }
    if (f.bytes.size() < kCaptureHeaderSize) fail("frame shorter than the capture header");
    frames.push_back(std::move(f));
  }
  return frames;
}

}  // namespace tg::netsim
