#pragma once

#include <string_view>

#include "tunnelguard/common/error.hpp"

namespace tg::server {

enum class ServerErrc {
  UnknownRoom,
  NoDataYet,
  DuplicateRoom,
  DuplicateSession,
  NotFound,
  UnmappedSession,
  RoomMismatch,
  SessionDown,
  BindFailure,
};

std::string_view to_string(ServerErrc e) noexcept;

using ServerError = CodedError<ServerErrc>;

}  // namespace tg::server
