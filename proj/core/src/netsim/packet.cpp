#include "tunnelguard/netsim/packet.hpp"

namespace tg::netsim {

std::string_view to_string(Protocol p) noexcept {
  switch (p) {
    case Protocol::Tcp: return "tcp";
    case Protocol::Udp: return "udp";
    case Protocol::Gre: return "gre";
  }
  return "?";
}

std::string to_string(const Address& a) { return std::to_string(a.node) + ":" + std::to_string(a.port); }

std::string_view to_string(Delivery d) noexcept {
  switch (d) {
    case Delivery::Accepted: return "accepted";
    case Delivery::AcceptedCommand: return "accepted-command";
    case Delivery::Rejected: return "rejected";
    case Delivery::AuthRejected: return "auth-rejected";
    case Delivery::Forwarded: return "forwarded";
    case Delivery::Ignored: return "ignored";
  }
  return "?";
}

Bytes capture_bytes(const Packet& p) {
  ByteWriter w(kCaptureHeaderSize + p.payload.size());
  w.u8(static_cast<std::uint8_t>(p.proto)).u32(p.src.node).u16(p.src.port).u32(p.dst.node).u16(p.dst.port);
  w.bytes(p.payload);
  return std::move(w).take();
}

}  // namespace tg::netsim
