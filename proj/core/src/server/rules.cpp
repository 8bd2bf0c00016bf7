#include "tunnelguard/server/rules.hpp"

#include <cstdio>
#include <stdexcept>

namespace tg::server {

Millis parse_time_of_day(std::string_view text) {
  const auto field = [&](std::size_t at, unsigned max) {
    if (text[at] < '0' || text[at] > '9' || text[at + 1] < '0' || text[at + 1] > '9') return max + 1;
    return static_cast<unsigned>((text[at] - '0') * 10 + (text[at + 1] - '0'));
  };
  if (text.size() != 8 || text[2] != ':' || text[5] != ':') {
    throw std::invalid_argument("expected HH:MM:SS, got '" + std::string(text) + "'");
  }
  const unsigned h = field(0, 23), m = field(3, 59), s = field(6, 59);
  if (h > 23 || m > 59 || s > 59) throw std::invalid_argument("expected HH:MM:SS, got '" + std::string(text) + "'");
  return Millis{((h * 60 + m) * 60 + s) * 1000LL};
}

std::string format_time_of_day(Millis t) {
  const auto total = ((t.count() % kDay.count()) + kDay.count()) % kDay.count() / 1000;
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02lld:%02lld:%02lld", static_cast<long long>(total / 3600),
                static_cast<long long>(total / 60 % 60), static_cast<long long>(total % 60));
  return buf;
}

std::vector<AlarmEvent> RuleEngine::evaluate(const TelemetryRecord& record) {
  const auto room = record.fields.room_id;
  if (record.fields.temperature <= config_.fire_threshold) {
    burning_.erase(room);
    return {};
  }
  if (!burning_.insert(room).second) return {};
  return {{EventKind::FireAlarm, room, record.received_at,
           "temperature=" + device::format_temperature(record.fields.temperature) +
               " threshold=" + device::format_temperature(config_.fire_threshold)}};
}

}  // namespace tg::server
