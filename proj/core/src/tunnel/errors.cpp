#include "tunnelguard/tunnel/errors.hpp"

namespace tg::tunnel {

std::string_view to_string(TunnelErrc code) noexcept {
  switch (code) {
    case TunnelErrc::OversizePayload: return "OversizePayload";
    case TunnelErrc::Truncated: return "Truncated";
    case TunnelErrc::BadVersion: return "BadVersion";
    case TunnelErrc::BadFlags: return "BadFlags";
    case TunnelErrc::LengthMismatch: return "LengthMismatch";
    case TunnelErrc::UnknownMessageType: return "UnknownMessageType";
    case TunnelErrc::MalformedControl: return "MalformedControl";
    case TunnelErrc::UnknownTunnel: return "UnknownTunnel";
    case TunnelErrc::TunnelNotEstablished: return "TunnelNotEstablished";
    case TunnelErrc::InvalidSessionId: return "InvalidSessionId";
    case TunnelErrc::DuplicateSession: return "DuplicateSession";
    case TunnelErrc::NoSuchSession: return "NoSuchSession";
    case TunnelErrc::SessionNotEstablished: return "SessionNotEstablished";
    case TunnelErrc::SessionClosed: return "SessionClosed";
    case TunnelErrc::CounterExhausted: return "CounterExhausted";
    case TunnelErrc::AuthFailure: return "AuthFailure";
    case TunnelErrc::ReplayedCounter: return "ReplayedCounter";
    case TunnelErrc::WrongRole: return "WrongRole";
    case TunnelErrc::InvalidState: return "InvalidState";
  }
  return "Unknown";
}

}  // namespace tg::tunnel
