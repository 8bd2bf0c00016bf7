#include "tunnelguard/tunnel/control.hpp"

#include <string>

#include "tunnelguard/tunnel/errors.hpp"

namespace tg::tunnel {

std::string_view to_string(MessageType type) noexcept {
  switch (type) {
    case MessageType::SCCRQ: return "SCCRQ";
    case MessageType::SCCRP: return "SCCRP";
    case MessageType::SCCCN: return "SCCCN";
    case MessageType::STOPCCN: return "STOPCCN";
    case MessageType::HELLO: return "HELLO";
    case MessageType::ICRQ: return "ICRQ";
    case MessageType::ICRP: return "ICRP";
    case MessageType::ICCN: return "ICCN";
    case MessageType::CDN: return "CDN";
  }
  return "?";
}

bool is_known_message_type(std::uint16_t raw) noexcept {
  switch (raw) {
    case 1: case 2: case 3: case 4: case 6: case 10: case 11: case 12: case 14:
      return true;
    default:
      return false;
  }
}

const Bytes* ControlMessage::find(std::uint16_t id) const noexcept {
  for (const auto& a : attributes) {
    if (a.id == id) return &a.value;
  }
  return nullptr;
}

std::optional<std::uint16_t> ControlMessage::u16_attr(std::uint16_t id) const noexcept {
  const Bytes* v = find(id);
  if (v == nullptr || v->size() != 2) return std::nullopt;
  return static_cast<std::uint16_t>(((*v)[0] << 8) | (*v)[1]);
}

std::optional<std::uint32_t> ControlMessage::u32_attr(std::uint16_t id) const noexcept {
  const Bytes* v = find(id);
  if (v == nullptr || v->size() != 4) return std::nullopt;
  ByteReader r(*v);
  return r.u32();
}

ControlMessage& ControlMessage::add(std::uint16_t id, Bytes value) {
  attributes.push_back({id, std::move(value)});
  return *this;
}

ControlMessage& ControlMessage::add_u16(std::uint16_t id, std::uint16_t value) {
  return add(id, ByteWriter(2).u16(value).view());
}

ControlMessage& ControlMessage::add_u32(std::uint16_t id, std::uint32_t value) {
  return add(id, ByteWriter(4).u32(value).view());
}

Bytes encode_control(const ControlMessage& msg) {
  ByteWriter w;
  w.u16(static_cast<std::uint16_t>(msg.type));
  for (const auto& a : msg.attributes) {
    w.u16(a.id).u16(static_cast<std::uint16_t>(a.value.size())).bytes(a.value);
  }
  return std::move(w).take();
}

ControlMessage decode_control(ByteView bytes) {
  ControlMessage msg;
  try {
    ByteReader r(bytes);
    const std::uint16_t raw_type = r.u16();
    if (!is_known_message_type(raw_type)) {
      throw TunnelError(TunnelErrc::UnknownMessageType, "unknown control message type " + std::to_string(raw_type));
    }
    msg.type = static_cast<MessageType>(raw_type);
    while (r.remaining() > 0) {
      Attribute a;
      a.id = r.u16();
      const std::uint16_t len = r.u16();
      auto value = r.bytes(len);
      a.value.assign(value.begin(), value.end());
      msg.attributes.push_back(std::move(a));
    }
  } catch (const TruncatedInput&) {
    throw TunnelError(TunnelErrc::Truncated, "control message truncated");
  }

  if (msg.type == MessageType::SCCRQ || msg.type == MessageType::SCCRP) {
    int nonces = 0;
    for (const auto& a : msg.attributes) {
      if (a.id != attr::kNonce) continue;
      if (a.value.size() != kNonceSize) {
        throw TunnelError(TunnelErrc::MalformedControl, "handshake nonce must be 16 bytes");
      }
      ++nonces;
    }
    if (nonces != 1) {
      throw TunnelError(TunnelErrc::MalformedControl, "handshake message needs exactly one nonce");
    }
  }
  return msg;
}

}  // namespace tg::tunnel
