#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "tunnelguard/common/bytes.hpp"

namespace tg::tunnel {

enum class MessageType : std::uint16_t {
  SCCRQ = 1,
  SCCRP = 2,
  SCCCN = 3,
  STOPCCN = 4,
  HELLO = 6,
  ICRQ = 10,
  ICRP = 11,
  ICCN = 12,
  CDN = 14,
};

std::string_view to_string(MessageType type) noexcept;
bool is_known_message_type(std::uint16_t raw) noexcept;

namespace attr {
inline constexpr std::uint16_t kNonce = 1;              // 16 bytes, SCCRQ/SCCRP
inline constexpr std::uint16_t kResultCode = 2;         // u16
inline constexpr std::uint16_t kSessionId = 3;          // u32
inline constexpr std::uint16_t kAuthTag = 4;            // 32 bytes, SCCRP/SCCCN
inline constexpr std::uint16_t kTunnelId = 5;           // u32
inline constexpr std::uint16_t kProposedSessionId = 6;  // u32, CDN on collision
}  // namespace attr

inline constexpr std::size_t kNonceSize = 16;
using HandshakeNonce = std::array<std::uint8_t, kNonceSize>;

enum class ResultCode : std::uint16_t {
  GeneralClear = 1,
  AuthFailed = 2,
  Capacity = 3,
  TunnelIdInUse = 4,
  SessionCollision = 5,
  AdminClose = 6,
};

struct Attribute {
  std::uint16_t id = 0;
  Bytes value;

  friend bool operator==(const Attribute&, const Attribute&) = default;
};

struct ControlMessage {
  MessageType type = MessageType::HELLO;
  std::vector<Attribute> attributes;

  const Bytes* find(std::uint16_t id) const noexcept;
  std::optional<std::uint16_t> u16_attr(std::uint16_t id) const noexcept;
  std::optional<std::uint32_t> u32_attr(std::uint16_t id) const noexcept;

  ControlMessage& add(std::uint16_t id, Bytes value);
  ControlMessage& add_u16(std::uint16_t id, std::uint16_t value);
  ControlMessage& add_u32(std::uint16_t id, std::uint32_t value);

  friend bool operator==(const ControlMessage&, const ControlMessage&) = default;
};

// msg_type (u16) || { id (u16) || length (u16) || value }*
Bytes encode_control(const ControlMessage& msg);

// Throws TunnelError: Truncated, UnknownMessageType, or MalformedControl when
// SCCRQ/SCCRP do not carry exactly one 16-byte nonce.
ControlMessage decode_control(ByteView bytes);

}  // namespace tg::tunnel
