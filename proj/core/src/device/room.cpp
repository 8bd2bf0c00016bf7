#include "tunnelguard/device/room.hpp"

#include <cstdlib>

namespace tg::device {

namespace {

// Rounds num/den to the nearest integer, halves away from zero. den > 0.
std::int64_t rounded_div(std::int64_t num, std::int64_t den) {
  return num >= 0 ? (2 * num + den) / (2 * den) : -((-2 * num + den) / (2 * den));
}

std::int64_t lerp(std::int64_t a, std::int64_t b, std::int64_t t, std::int64_t t0, std::int64_t t1) {
  return a + rounded_div((b - a) * (t - t0), t1 - t0);
}

}  // namespace

SensorScript::SensorScript(std::vector<SetPoint> points) : points_(std::move(points)) {
  if (points_.empty()) throw DeviceError(DeviceErrc::InvalidScript, "sensor script needs at least one set-point");
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (points_[i].humidity > 100) {
      throw DeviceError(DeviceErrc::InvalidScript, "set-point " + std::to_string(i) + ": humidity above 100");
    }
    if (i > 0 && points_[i].at <= points_[i - 1].at) {
      throw DeviceError(DeviceErrc::InvalidScript, "set-point " + std::to_string(i) + ": times must strictly increase");
    }
  }
}

SensorSample SensorScript::sample(VirtualTime t) const {
  if (points_.empty()) return {};
  if (t <= points_.front().at) {
    const auto& p = points_.front();
    return {p.motion, p.temperature, p.humidity};
  }
  for (std::size_t i = 1; i < points_.size(); ++i) {
    const auto& b = points_[i];
    if (t < b.at) {
      const auto& a = points_[i - 1];
      const auto tt = t.count(), t0 = a.at.count(), t1 = b.at.count();
      return {a.motion, static_cast<DeciCelsius>(lerp(a.temperature, b.temperature, tt, t0, t1)),
              static_cast<std::uint8_t>(lerp(a.humidity, b.humidity, tt, t0, t1))};
    }
  }
  const auto& p = points_.back();
  return {p.motion, p.temperature, p.humidity};
}

RoomState initial_state(std::uint32_t room_id, const SensorScript& script, bool appliance_on, bool locked) {
  const SensorSample s = script.sample(VirtualTime{0});
  RoomState r;
  r.room_id = room_id;
  r.motion = s.motion;
  r.temperature = s.temperature;
  r.humidity = s.humidity;
  r.appliance_on = appliance_on;
  r.servo_angle = locked ? kServoLocked : kServoUnlocked;
  if (!r.motion) r.vacancy_since = VirtualTime{0};
  return r;
}

std::string tick(RoomState& room, const SensorScript& script, VirtualTime now, const DeviceConfig& config) {
  const SensorSample s = script.sample(now);
  room.motion = s.motion;
  room.temperature = s.temperature;
  room.humidity = s.humidity;
  if (room.motion) {
    room.vacancy_since.reset();
  } else if (!room.vacancy_since) {
    room.vacancy_since = now;
  }
  if (!room.motion && room.appliance_on && now - *room.vacancy_since >= config.vacancy_debounce) {
    room.appliance_on = false;
  }
  return format_telemetry(room);
}

std::string format_temperature(DeciCelsius t) {
  const std::int64_t mag = std::llabs(static_cast<std::int64_t>(t));
  std::string s = t < 0 ? "-" : "";
  s += std::to_string(mag / 10);
  s += '.';
  s += static_cast<char>('0' + mag % 10);
  return s;
}

std::string format_telemetry(const RoomState& room) {
  std::string line = std::to_string(room.room_id);
  line += '-';
  line += room.motion ? '1' : '0';
  line += ',';
  line += room.appliance_on ? '1' : '0';
  line += ',';
  line += std::to_string(room.servo_angle);
  line += ',';
  line += format_temperature(room.temperature);
  line += ',';
  line += std::to_string(room.humidity);
  return line;
}

CommandResult handle_command(RoomState& room, const Command& cmd) {
  CommandResult res{cmd.opcode, cmd.request_id, CommandStatus::Ok, 0, false};
  if (!is_known_opcode(cmd.opcode)) {
    res.status = CommandStatus::UnknownCommand;
  } else {
    switch (static_cast<Opcode>(cmd.opcode)) {
      case Opcode::Lock:
        if (room.motion) {
          res.status = CommandStatus::RefusedOccupied;
        } else {
          room.servo_angle = kServoLocked;
        }
        break;
      case Opcode::Unlock: room.servo_angle = kServoUnlocked; break;
      case Opcode::ApplianceOn: room.appliance_on = true; break;
      case Opcode::ApplianceOff: room.appliance_on = false; break;
      case Opcode::BuzzerOn: room.buzzer_on = true; break;
      case Opcode::BuzzerOff: room.buzzer_on = false; break;
    }
  }
  res.servo_angle = room.servo_angle;
  res.appliance_on = room.appliance_on;
  return res;
}

}  // namespace tg::device
