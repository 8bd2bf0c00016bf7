#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "tunnelguard/common/error.hpp"
#include "tunnelguard/common/time.hpp"
#include "tunnelguard/device/room.hpp"

namespace tg::server {

using device::DeciCelsius;

enum class LineErrc { MalformedLine, RangeViolation };

std::string_view to_string(LineErrc e) noexcept;

class LineParseError : public CodedError<LineErrc> {
 public:
  LineParseError(LineErrc code, std::size_t position, const std::string& what)
      : CodedError(code, what), position_(position) {}

  // Byte offset into the line where parsing stopped.
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

// The fields carried by one log line.
struct TelemetryFields {
  std::uint32_t room_id = 0;
  bool motion = false;
  bool appliance_on = false;
  std::uint16_t servo_angle = 0;
  DeciCelsius temperature = 0;
  std::optional<std::uint8_t> humidity;

  friend bool operator==(const TelemetryFields&, const TelemetryFields&) = default;
};

struct TelemetryRecord {
  VirtualTime received_at{0};
  TelemetryFields fields;

  friend bool operator==(const TelemetryRecord&, const TelemetryRecord&) = default;
};

// `room "-" motion "," appliance "," servo "," temp ["," humidity]`. Total:
// throws LineParseError for anything else.
TelemetryFields parse_log_line(std::string_view line);

}  // namespace tg::server
