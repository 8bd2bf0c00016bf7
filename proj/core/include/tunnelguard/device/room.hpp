#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tunnelguard/common/time.hpp"
#include "tunnelguard/device/command.hpp"

namespace tg::device {

// Temperature in tenths of a degree Celsius.
using DeciCelsius = std::int32_t;

inline constexpr std::uint8_t kServoUnlocked = 0;
inline constexpr std::uint8_t kServoLocked = 90;

struct RoomState {
  std::uint32_t room_id = 0;
  bool motion = false;
  DeciCelsius temperature = 0;
  std::uint8_t humidity = 0;
  std::uint8_t servo_angle = kServoUnlocked;
  bool appliance_on = false;
  bool buzzer_on = false;
  std::optional<VirtualTime> vacancy_since;

  bool locked() const noexcept { return servo_angle == kServoLocked; }
  friend bool operator==(const RoomState&, const RoomState&) = default;
};

struct SetPoint {
  VirtualTime at{0};
  bool motion = false;
  DeciCelsius temperature = 0;
  std::uint8_t humidity = 0;
};

struct SensorSample {
  bool motion = false;
  DeciCelsius temperature = 0;
  std::uint8_t humidity = 0;
};

// Sensor stimulus for one room. Motion holds its last set-point value;
// temperature and humidity move linearly between set-points (rounded to the
// nearest tenth / percent) and hold flat outside the scripted range.
class SensorScript {
 public:
  SensorScript() = default;
  // Throws DeviceError(InvalidScript): empty, times not strictly increasing,
  // humidity above 100.
  explicit SensorScript(std::vector<SetPoint> points);

  SensorSample sample(VirtualTime t) const;
  const std::vector<SetPoint>& points() const noexcept { return points_; }

 private:
  std::vector<SetPoint> points_;
};

struct DeviceConfig {
  Millis vacancy_debounce{30000};
};

// Room state at t = 0: sensors from the script, actuators as given.
RoomState initial_state(std::uint32_t room_id, const SensorScript& script, bool appliance_on, bool locked);

// Samples the script, applies the auto-off rule and returns the telemetry
// line for this second.
std::string tick(RoomState& room, const SensorScript& script, VirtualTime now, const DeviceConfig& config = {});

// `<room_id>-<motion>,<appliance>,<servo>,<temp>,<humidity>`
std::string format_telemetry(const RoomState& room);
std::string format_temperature(DeciCelsius t);

CommandResult handle_command(RoomState& room, const Command& cmd);

}  // namespace tg::device
