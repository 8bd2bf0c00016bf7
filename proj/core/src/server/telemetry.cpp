#include "tunnelguard/server/telemetry.hpp"

#include <limits>

namespace tg::server {

std::string_view to_string(LineErrc e) noexcept {
  switch (e) {
    case LineErrc::MalformedLine: return "MalformedLine";
    case LineErrc::RangeViolation: return "RangeViolation";
  }
  return "?";
}

namespace {

class Scanner {
 public:
  explicit Scanner(std::string_view s) : s_(s) {}

  [[noreturn]] void fail(const char* what) const {
    throw LineParseError(LineErrc::MalformedLine, pos_,
                         std::string(what) + " at offset " + std::to_string(pos_));
  }
  [[noreturn]] void out_of_range(std::size_t at, const char* what) const {
    throw LineParseError(LineErrc::RangeViolation, at, std::string(what) + " at offset " + std::to_string(at));
  }

  bool done() const noexcept { return pos_ == s_.size(); }
  std::size_t pos() const noexcept { return pos_; }

  bool peek(char c) const noexcept { return pos_ < s_.size() && s_[pos_] == c; }

  void expect(char c, const char* what) {
    if (!peek(c)) fail(what);
    ++pos_;
  }

  // Unsigned decimal, at most `max_digits` digits.
  std::uint64_t number(std::size_t max_digits, const char* what) {
    const std::size_t start = pos_;
    std::uint64_t v = 0;
    while (pos_ < s_.size() && s_[pos_] >= '0' && s_[pos_] <= '9') {
      if (pos_ - start == max_digits) fail(what);
      v = v * 10 + static_cast<std::uint64_t>(s_[pos_] - '0');
      ++pos_;
    }
    if (pos_ == start) fail(what);
    return v;
  }

  bool flag(const char* what) {
    if (peek('0') || peek('1')) return s_[pos_++] == '1';
    fail(what);
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

TelemetryFields parse_log_line(std::string_view line) {
  Scanner in(line);
  TelemetryFields f;

  std::size_t at = in.pos();
  const std::uint64_t room = in.number(10, "expected room id");
  if (room > std::numeric_limits<std::uint32_t>::max()) in.out_of_range(at, "room id exceeds 32 bits");
  f.room_id = static_cast<std::uint32_t>(room);
  in.expect('-', "expected '-' after room id");

  f.motion = in.flag("motion flag must be 0 or 1");
  in.expect(',', "expected ','");
  f.appliance_on = in.flag("appliance flag must be 0 or 1");
  in.expect(',', "expected ','");

  at = in.pos();
  const std::uint64_t servo = in.number(3, "expected servo angle");
  if (servo > 180) in.out_of_range(at, "servo angle above 180");
  f.servo_angle = static_cast<std::uint16_t>(servo);
  in.expect(',', "expected ','");

  at = in.pos();
  const bool negative = in.peek('-');
  if (negative) in.expect('-', "");
  const std::uint64_t whole = in.number(6, "expected temperature");
  in.expect('.', "temperature needs one fraction digit");
  const std::uint64_t tenth = in.number(1, "temperature needs one fraction digit");
  const auto magnitude = static_cast<DeciCelsius>(whole * 10 + tenth);
  f.temperature = negative ? -magnitude : magnitude;

  if (!in.done()) {
    in.expect(',', "expected ',' or end of line");
    at = in.pos();
    const std::uint64_t humidity = in.number(3, "expected humidity");
    if (humidity > 100) in.out_of_range(at, "humidity above 100");
    f.humidity = static_cast<std::uint8_t>(humidity);
  }
  if (!in.done()) in.fail("trailing bytes");
  return f;
}

}  // namespace tg::server
