#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tunnelguard/common/time.hpp"
#include "tunnelguard/server/events.hpp"
#include "tunnelguard/server/telemetry.hpp"

namespace tg::server {

inline constexpr Millis kDay{24 * 60 * 60 * 1000};

struct RuleConfig {
  DeciCelsius fire_threshold = 500;
  // Time of day at which the sweep runs.
  Millis end_of_day{18 * 60 * 60 * 1000};
};

// "HH:MM:SS" -> offset into the day. Throws std::invalid_argument.
Millis parse_time_of_day(std::string_view text);
std::string format_time_of_day(Millis t);

struct AlarmEvent {
  EventKind kind = EventKind::FireAlarm;
  std::uint32_t room_id = 0;
  VirtualTime at{0};
  std::string detail;
};

// Fire alarm rule: strictly above the threshold, once per episode. An episode
// ends when a reading drops back to or below the threshold.
class RuleEngine {
 public:
  explicit RuleEngine(RuleConfig config = {}) : config_(config) {}

  std::vector<AlarmEvent> evaluate(const TelemetryRecord& record);

  bool in_episode(std::uint32_t room_id) const { return burning_.count(room_id) != 0; }
  const RuleConfig& config() const noexcept { return config_; }

 private:
  RuleConfig config_;
  std::set<std::uint32_t> burning_;
};

}  // namespace tg::server
