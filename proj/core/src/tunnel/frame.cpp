#include "tunnelguard/tunnel/frame.hpp"

#include <string>

#include "tunnelguard/tunnel/errors.hpp"

namespace tg::tunnel {

std::array<std::uint8_t, kFrameHeaderSize> frame_header(const Frame& frame, std::size_t payload_size) {
  std::uint8_t flags = kFlagSequence | kProtocolVersion;
  if (frame.kind == FrameKind::Control) flags |= kFlagControl;
  if (frame.encrypted) flags |= kFlagEncrypted;
  const auto total = static_cast<std::uint16_t>(kFrameHeaderSize + payload_size);

  ByteWriter w(kFrameHeaderSize);
  w.u8(flags).u16(total).u32(frame.tunnel_id).u32(frame.session_id).u16(frame.ns).u16(frame.nr);
  std::array<std::uint8_t, kFrameHeaderSize> out{};
  std::copy(w.view().begin(), w.view().end(), out.begin());
  return out;
}

Bytes encode_frame(const Frame& frame, std::uint16_t mtu) {
  if (frame.payload.size() > mtu) {
    throw TunnelError(TunnelErrc::OversizePayload,
                      "payload of " + std::to_string(frame.payload.size()) + " bytes exceeds mtu " +
                          std::to_string(mtu));
  }
  if (frame.kind == FrameKind::Control && frame.encrypted) {
    throw TunnelError(TunnelErrc::BadFlags, "control frames are never encrypted");
  }
  auto header = frame_header(frame, frame.payload.size());
  Bytes out;
  out.reserve(header.size() + frame.payload.size());
  out.insert(out.end(), header.begin(), header.end());
  out.insert(out.end(), frame.payload.begin(), frame.payload.end());
  return out;
}

Frame decode_frame(ByteView bytes) {
  if (bytes.size() < kFrameHeaderSize) {
    throw TunnelError(TunnelErrc::Truncated, "frame shorter than header");
  }
  ByteReader r(bytes);
  const std::uint8_t flags = r.u8();
  if ((flags & kVersionMask) != kProtocolVersion) {
    throw TunnelError(TunnelErrc::BadVersion, "unsupported version " + std::to_string(flags & kVersionMask));
  }
  if ((flags & kFlagSequence) == 0 || (flags & kFlagReserved) != 0) {
    throw TunnelError(TunnelErrc::BadFlags, "sequence bit clear or reserved bit set");
  }
  const bool control = (flags & kFlagControl) != 0;
  const bool encrypted = (flags & kFlagEncrypted) != 0;
  if (control && encrypted) {
    throw TunnelError(TunnelErrc::BadFlags, "encrypted control frame");
  }

  const std::uint16_t total = r.u16();
  if (total < kFrameHeaderSize) {
    throw TunnelError(TunnelErrc::LengthMismatch, "length field smaller than header");
  }
  if (total > bytes.size()) {
    throw TunnelError(TunnelErrc::Truncated, "length field exceeds received bytes");
  }
  if (total < bytes.size()) {
    throw TunnelError(TunnelErrc::LengthMismatch, "trailing bytes after frame");
  }

  Frame f;
  f.kind = control ? FrameKind::Control : FrameKind::Data;
  f.encrypted = encrypted;
  f.tunnel_id = r.u32();
  f.session_id = r.u32();
  f.ns = r.u16();
  f.nr = r.u16();
  auto rest = r.rest();
  f.payload.assign(rest.begin(), rest.end());
  return f;
}

}  // namespace tg::tunnel
