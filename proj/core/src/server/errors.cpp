#include "tunnelguard/server/errors.hpp"

namespace tg::server {

std::string_view to_string(ServerErrc e) noexcept {
  switch (e) {
    case ServerErrc::UnknownRoom: return "UnknownRoom";
    case ServerErrc::NoDataYet: return "NoDataYet";
    case ServerErrc::DuplicateRoom: return "DuplicateRoom";
    case ServerErrc::DuplicateSession: return "DuplicateSession";
    case ServerErrc::NotFound: return "NotFound";
    case ServerErrc::UnmappedSession: return "UnmappedSession";
    case ServerErrc::RoomMismatch: return "RoomMismatch";
    case ServerErrc::SessionDown: return "SessionDown";
    case ServerErrc::BindFailure: return "BindFailure";
  }
  return "?";
}

}  // namespace tg::server
