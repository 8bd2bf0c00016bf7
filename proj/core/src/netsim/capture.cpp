#include "tunnelguard/netsim/capture.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>

namespace tg::netsim {

namespace {

bool is_digit(std::uint8_t c) noexcept { return c >= '0' && c <= '9'; }

// A recovered line must not continue into a longer number or field list.
bool continues_token(std::uint8_t c) noexcept { return is_digit(c) || c == ',' || c == '.'; }

std::string_view payload_of(const CapturedFrame& f) {
  const ByteView b(f.bytes);
  const auto p = b.subspan(std::min(b.size(), kCaptureHeaderSize));
  return {reinterpret_cast<const char*>(p.data()), p.size()};
}

}  // namespace

void write_oracle(std::ostream& out, const EmissionOracle& oracle) {
  for (const auto& line : oracle.telemetry_lines) out << "T " << line << '\n';
  for (const auto& cmd : oracle.commands) out << "C " << to_hex(cmd) << '\n';
}

EmissionOracle read_oracle(std::istream& in) {
  EmissionOracle oracle;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.size() < 3 || line[1] != ' ' || (line[0] != 'T' && line[0] != 'C')) {
      throw std::runtime_error("oracle line " + std::to_string(lineno) + ": expected 'T <line>' or 'C <hex>'");
    }
    if (line[0] == 'T') {
      oracle.telemetry_lines.push_back(line.substr(2));
    } else {
      try {
        oracle.commands.push_back(from_hex(std::string_view(line).substr(2)));
      } catch (const std::invalid_argument&) {
        throw std::runtime_error("oracle line " + std::to_string(lineno) + ": bad hex command");
      }
    }
  }
  return oracle;
}

CaptureReport analyze_capture(const std::vector<CapturedFrame>& frames, const EmissionOracle& oracle) {
  CaptureReport report;
  report.frames_seen = frames.size();
  report.telemetry_lines_emitted = oracle.telemetry_lines.size();

  std::unordered_map<std::string, std::uint64_t> emitted;
  std::set<std::size_t> lengths;
  for (const auto& line : oracle.telemetry_lines) {
    ++emitted[line];
    if (!line.empty()) lengths.insert(line.size());
  }
  const std::set<Bytes> commands(oracle.commands.begin(), oracle.commands.end());
  report.commands_emitted = commands.size();

  std::map<std::string, std::uint64_t> found;
  std::set<Bytes> commands_seen;
  for (const auto& f : frames) {
    if (is_data_frame(f.bytes)) ++report.data_frames_seen;
    const std::string_view p = payload_of(f);
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (i > 0 && is_digit(static_cast<std::uint8_t>(p[i - 1]))) continue;
      for (std::size_t len : lengths) {
        if (i + len > p.size()) break;
        if (i + len < p.size() && continues_token(static_cast<std::uint8_t>(p[i + len]))) continue;
        std::string candidate(p.substr(i, len));
        if (emitted.contains(candidate)) ++found[std::move(candidate)];
      }
    }
    for (const auto& cmd : commands) {
      if (commands_seen.contains(cmd)) continue;
      const std::string_view needle(reinterpret_cast<const char*>(cmd.data()), cmd.size());
      if (!needle.empty() && p.find(needle) != std::string_view::npos) commands_seen.insert(cmd);
    }
  }

  for (const auto& [line, count] : found) {
    report.plaintext_lines_recovered += std::min(count, emitted[line]);
    report.recovered_lines.push_back(line);
  }
  report.commands_recovered = commands_seen.size();
  return report;
}

CaptureReport analyze_capture(const Tap& tap, const EmissionOracle& oracle) {
  CaptureReport report = analyze_capture(tap.frames(), oracle);
  report.tamper = tap.tamper();
  return report;
}

}  // namespace tg::netsim
