#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "tunnelguard/common/bytes.hpp"

namespace tg::tunnel {

// PPTP-lite data framing, GRE style (big-endian):
//   0..1  magic 0x3001
//   2..3  protocol type 0x880B
//   4..5  length of the sealed envelope that follows
//   6..9  call (session) id
//   10..  sealed envelope: counter (u64) || ciphertext || tag
inline constexpr std::uint16_t kGreMagic = 0x3001;
inline constexpr std::uint16_t kGreProtocolType = 0x880B;
inline constexpr std::size_t kGreHeaderSize = 10;

struct GreFrame {
  std::uint32_t call_id = 0;
  Bytes sealed;

  friend bool operator==(const GreFrame&, const GreFrame&) = default;
};

std::array<std::uint8_t, kGreHeaderSize> gre_header(std::uint32_t call_id, std::size_t sealed_size);

// Throws TunnelError(OversizePayload) when `sealed` exceeds `mtu`.
Bytes encode_gre(const GreFrame& frame, std::uint16_t mtu);

// Throws TunnelError: Truncated, BadFlags (magic/protocol), LengthMismatch.
GreFrame decode_gre(ByteView bytes);

// Length-prefixed control messages on the PPTP-lite stream connection.
Bytes frame_stream_message(ByteView control_message);

// Reassembles u16 length-prefixed messages from arbitrary stream chunks.
class StreamReassembler {
 public:
  void feed(ByteView chunk);
  std::optional<Bytes> next();
  std::size_t buffered() const noexcept { return buffer_.size(); }

 private:
  Bytes buffer_;
};

}  // namespace tg::tunnel
