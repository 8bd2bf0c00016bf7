#include "tunnelguard/tunnel/gre.hpp"

#include <string>

#include "tunnelguard/tunnel/errors.hpp"

namespace tg::tunnel {

std::array<std::uint8_t, kGreHeaderSize> gre_header(std::uint32_t call_id, std::size_t sealed_size) {
  ByteWriter w(kGreHeaderSize);
  w.u16(kGreMagic).u16(kGreProtocolType).u16(static_cast<std::uint16_t>(sealed_size)).u32(call_id);
  std::array<std::uint8_t, kGreHeaderSize> out{};
  std::copy(w.view().begin(), w.view().end(), out.begin());
  return out;
}

Bytes encode_gre(const GreFrame& frame, std::uint16_t mtu) {
  if (frame.sealed.size() > mtu) {
    throw TunnelError(TunnelErrc::OversizePayload,
                      "GRE payload of " + std::to_string(frame.sealed.size()) + " bytes exceeds mtu");
  }
  ByteWriter w(kGreHeaderSize + frame.sealed.size());
  w.bytes(gre_header(frame.call_id, frame.sealed.size())).bytes(frame.sealed);
  return std::move(w).take();
}

GreFrame decode_gre(ByteView bytes) {
  if (bytes.size() < kGreHeaderSize) throw TunnelError(TunnelErrc::Truncated, "GRE frame shorter than header");
  ByteReader r(bytes);
  if (r.u16() != kGreMagic || r.u16() != kGreProtocolType) {
    throw TunnelError(TunnelErrc::BadFlags, "GRE magic or protocol type mismatch");
  }
  const std::uint16_t len = r.u16();
  GreFrame f;
  f.call_id = r.u32();
  if (len > r.remaining()) throw TunnelError(TunnelErrc::Truncated, "GRE length exceeds received bytes");
  if (len < r.remaining()) throw TunnelError(TunnelErrc::LengthMismatch, "trailing bytes after GRE frame");
  auto rest = r.rest();
  f.sealed.assign(rest.begin(), rest.end());
  return f;
}

Bytes frame_stream_message(ByteView control_message) {
  ByteWriter w(control_message.size() + 2);
  w.u16(static_cast<std::uint16_t>(control_message.size())).bytes(control_message);
  return std::move(w).take();
}

void StreamReassembler::feed(ByteView chunk) { buffer_.insert(buffer_.end(), chunk.begin(), chunk.end()); }

std::optional<Bytes> StreamReassembler::next() {
  if (buffer_.size() < 2) return std::nullopt;
  const std::size_t len = (static_cast<std::size_t>(buffer_[0]) << 8) | buffer_[1];
  if (buffer_.size() < 2 + len) return std::nullopt;
  Bytes msg(buffer_.begin() + 2, buffer_.begin() + 2 + static_cast<std::ptrdiff_t>(len));
  buffer_.erase(buffer_.begin(), buffer_.begin() + 2 + static_cast<std::ptrdiff_t>(len));
  return msg;
}

}  // namespace tg::tunnel
