#include "tunnelguard/device/command.hpp"

#include <array>

namespace tg::device {

namespace {

constexpr std::array<std::pair<Opcode, std::string_view>, 6> kOpcodeNames{{
    {Opcode::Lock, "LOCK"},
    {Opcode::Unlock, "UNLOCK"},
    {Opcode::ApplianceOn, "APPLIANCE_ON"},
    {Opcode::ApplianceOff, "APPLIANCE_OFF"},
    {Opcode::BuzzerOn, "BUZZER_ON"},
    {Opcode::BuzzerOff, "BUZZER_OFF"},
}};

}  // namespace

std::string_view to_string(DeviceErrc e) noexcept {
  switch (e) {
    case DeviceErrc::MalformedCommand: return "MalformedCommand";
    case DeviceErrc::MalformedResult: return "MalformedResult";
    case DeviceErrc::InvalidScript: return "InvalidScript";
  }
  return "?";
}

std::string_view to_string(Opcode op) noexcept {
  for (const auto& [code, name] : kOpcodeNames) {
    if (code == op) return name;
  }
  return "UNKNOWN";
}

std::optional<Opcode> opcode_from_string(std::string_view name) noexcept {
  for (const auto& [code, n] : kOpcodeNames) {
    if (n == name) return code;
  }
  return std::nullopt;
}

bool is_known_opcode(std::uint8_t raw) noexcept { return raw >= 0x01 && raw <= 0x06; }

std::string_view to_string(CommandStatus s) noexcept {
  switch (s) {
    case CommandStatus::Ok: return "OK";
    case CommandStatus::RefusedOccupied: return "REFUSED_OCCUPIED";
    case CommandStatus::UnknownCommand: return "UNKNOWN_COMMAND";
  }
  return "?";
}

Bytes encode_command(const Command& cmd) {
  ByteWriter w(kCommandSize);
  w.u8(cmd.opcode).u32(cmd.request_id);
  return std::move(w).take();
}

Command decode_command(ByteView bytes) {
  if (bytes.size() != kCommandSize) {
    throw DeviceError(DeviceErrc::MalformedCommand,
                      "command must be " + std::to_string(kCommandSize) + " bytes, got " + std::to_string(bytes.size()));
  }
  ByteReader r(bytes);
  Command c;
  c.opcode = r.u8();
  c.request_id = r.u32();
  return c;
}

Bytes encode_result(const CommandResult& result) {
  ByteWriter w(kResultSize);
  w.u8(result.opcode)
      .u32(result.request_id)
      .u8(static_cast<std::uint8_t>(result.status))
      .u8(result.servo_angle)
      .u8(result.appliance_on ? 1 : 0);
  return std::move(w).take();
}

CommandResult decode_result(ByteView bytes) {
  if (bytes.size() != kResultSize) {
    throw DeviceError(DeviceErrc::MalformedResult,
                      "result must be " + std::to_string(kResultSize) + " bytes, got " + std::to_string(bytes.size()));
  }
  ByteReader r(bytes);
  CommandResult res;
  res.opcode = r.u8();
  res.request_id = r.u32();
  const std::uint8_t status = r.u8();
  if (status > static_cast<std::uint8_t>(CommandStatus::UnknownCommand)) {
    throw DeviceError(DeviceErrc::MalformedResult, "unknown status " + std::to_string(status));
  }
  res.status = static_cast<CommandStatus>(status);
  res.servo_angle = r.u8();
  if (res.servo_angle > 180) throw DeviceError(DeviceErrc::MalformedResult, "servo angle out of range");
  const std::uint8_t appliance = r.u8();
  if (appliance > 1) throw DeviceError(DeviceErrc::MalformedResult, "appliance flag must be 0 or 1");
  res.appliance_on = appliance == 1;
  return res;
}

}  // namespace tg::device
