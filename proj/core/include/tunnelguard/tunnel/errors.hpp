#pragma once

#include <string_view>

#include "tunnelguard/common/error.hpp"

namespace tg::tunnel {

enum class TunnelErrc {
  OversizePayload,
  Truncated,
  BadVersion,
  BadFlags,
  LengthMismatch,
  UnknownMessageType,
  MalformedControl,
  UnknownTunnel,
  TunnelNotEstablished,
  InvalidSessionId,
  DuplicateSession,
  NoSuchSession,
  SessionNotEstablished,
  SessionClosed,
  CounterExhausted,
  AuthFailure,
  ReplayedCounter,
  WrongRole,
  InvalidState,
};

std::string_view to_string(TunnelErrc code) noexcept;

using TunnelError = CodedError<TunnelErrc>;

}  // namespace tg::tunnel
