#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "tunnelguard/common/bytes.hpp"
#include "tunnelguard/common/error.hpp"

namespace tg::device {

enum class DeviceErrc { MalformedCommand, MalformedResult, InvalidScript };

std::string_view to_string(DeviceErrc e) noexcept;
using DeviceError = CodedError<DeviceErrc>;

enum class Opcode : std::uint8_t {
  Lock = 0x01,
  Unlock = 0x02,
  ApplianceOn = 0x03,
  ApplianceOff = 0x04,
  BuzzerOn = 0x05,
  BuzzerOff = 0x06,
};

std::string_view to_string(Opcode op) noexcept;
std::optional<Opcode> opcode_from_string(std::string_view name) noexcept;
bool is_known_opcode(std::uint8_t raw) noexcept;

// The opcode is kept raw so an unknown value can reach the device and be
// answered with UNKNOWN_COMMAND.
struct Command {
  std::uint8_t opcode = 0;
  std::uint32_t request_id = 0;

  friend bool operator==(const Command&, const Command&) = default;
};

enum class CommandStatus : std::uint8_t { Ok = 0, RefusedOccupied = 1, UnknownCommand = 2 };

std::string_view to_string(CommandStatus s) noexcept;

struct CommandResult {
  std::uint8_t opcode = 0;
  std::uint32_t request_id = 0;
  CommandStatus status = CommandStatus::Ok;
  std::uint8_t servo_angle = 0;
  bool appliance_on = false;

  friend bool operator==(const CommandResult&, const CommandResult&) = default;
};

inline constexpr std::size_t kCommandSize = 5;  // opcode u8 || request_id u32
inline constexpr std::size_t kResultSize = 8;   // + status u8 || servo u8 || appliance u8

Bytes encode_command(const Command& cmd);
// Throws DeviceError(MalformedCommand) unless exactly kCommandSize bytes.
Command decode_command(ByteView bytes);

Bytes encode_result(const CommandResult& result);
// Throws DeviceError(MalformedResult): wrong size, status or flag out of range.
CommandResult decode_result(ByteView bytes);

}  // namespace tg::device
