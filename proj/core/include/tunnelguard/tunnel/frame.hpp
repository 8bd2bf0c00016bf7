#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

#include "tunnelguard/common/bytes.hpp"

namespace tg::tunnel {

inline constexpr std::size_t kFrameHeaderSize = 15;
inline constexpr std::uint8_t kProtocolVersion = 2;
inline constexpr std::uint16_t kDefaultMtu = 1400;

inline constexpr std::uint16_t kL2tpPort = 1701;
inline constexpr std::uint16_t kPptpControlPort = 1723;

// Flag bits in header byte 0.
inline constexpr std::uint8_t kFlagControl = 0x80;
inline constexpr std::uint8_t kFlagSequence = 0x40;
inline constexpr std::uint8_t kFlagEncrypted = 0x20;
inline constexpr std::uint8_t kFlagReserved = 0x10;
inline constexpr std::uint8_t kVersionMask = 0x0F;

enum class FrameKind : std::uint8_t { Control, Data };

// One tunnel unit on the datagram transport.
//
// Layout (big-endian):
//   0      flags/version  T S E 0 | version(4) = 2
//   1..2   total length, header included
//   3..6   tunnel id
//   7..10  session id (0 = tunnel-level control)
//   11..12 ns
//   13..14 nr
//   15..   payload
struct Frame {
  FrameKind kind = FrameKind::Control;
  bool encrypted = false;
  std::uint32_t tunnel_id = 0;
  std::uint32_t session_id = 0;
  std::uint16_t ns = 0;
  std::uint16_t nr = 0;
  Bytes payload;

  bool is_zlb() const noexcept { return kind == FrameKind::Control && payload.empty(); }

  friend bool operator==(const Frame&, const Frame&) = default;
};

// Header bytes for `frame` carrying `payload_size` payload bytes. Sealed data
// frames bind these bytes as associated data.
std::array<std::uint8_t, kFrameHeaderSize> frame_header(const Frame& frame, std::size_t payload_size);

// Throws TunnelError: OversizePayload if the payload exceeds `mtu`, BadFlags
// for an encrypted control frame.
Bytes encode_frame(const Frame& frame, std::uint16_t mtu = kDefaultMtu);

// Total over arbitrary input. Throws TunnelError with Truncated, BadVersion,
// BadFlags or LengthMismatch.
Frame decode_frame(ByteView bytes);

}  // namespace tg::tunnel
