#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>

#include "tunnelguard/common/bytes.hpp"
#include "tunnelguard/netsim/topology.hpp"

namespace tg::netsim {

enum class Protocol : std::uint8_t { Tcp = 6, Udp = 17, Gre = 47 };

std::string_view to_string(Protocol p) noexcept;

struct Address {
  NodeId node = 0;
  std::uint16_t port = 0;

  friend auto operator<=>(const Address&, const Address&) = default;
};

std::string to_string(const Address& a);

struct Packet {
  Protocol proto = Protocol::Udp;
  Address src;
  Address dst;
  Bytes payload;
  // Set when an adversary rewrote this packet, or the packet it was
  // forwarded from. Lets the network attribute the victim's verdict.
  std::optional<std::uint64_t> tamper_id;
};

// What the destination did with a packet; the network only interprets it for
// tampered packets.
enum class Delivery {
  Accepted,         // payload taken as genuine
  AcceptedCommand,  // payload taken as a genuine actuator command
  Rejected,         // malformed or otherwise refused
  AuthRejected,     // failed authentication
  Forwarded,        // relayed on via Context::forward; verdict comes later
  Ignored,
};

std::string_view to_string(Delivery d) noexcept;

// Capture pseudo-header: proto u8 || src node u32 || src port u16 ||
// dst node u32 || dst port u16.
inline constexpr std::size_t kCaptureHeaderSize = 13;

Bytes capture_bytes(const Packet& p);

}  // namespace tg::netsim
