#include "tunnelguard/server/log_store.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace tg::server {

void LogStore::append(const TelemetryRecord& record, std::string raw) {
  if (sink_ != nullptr) *sink_ << to_ms(record.received_at) << ' ' << raw << '\n';
  latest_[record.fields.room_id] = entries_.size();
  entries_.push_back({record, std::move(raw)});
}

const TelemetryRecord* LogStore::latest(std::uint32_t room_id) const {
  const auto it = latest_.find(room_id);
  return it == latest_.end() ? nullptr : &entries_[it->second].record;
}

LogStore LogStore::replay(std::istream& in) {
  LogStore store;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto space = line.find(' ');
    std::int64_t ms = 0;
    const auto [ptr, ec] = std::from_chars(line.data(), line.data() + (space == std::string::npos ? 0 : space), ms);
    if (space == std::string::npos || ec != std::errc() || ptr != line.data() + space) {
      throw std::runtime_error("telemetry log line " + std::to_string(lineno) + ": bad timestamp");
    }
    std::string raw = line.substr(space + 1);
    TelemetryFields fields;
    try {
      fields = parse_log_line(raw);
    } catch (const LineParseError& e) {
      throw std::runtime_error("telemetry log line " + std::to_string(lineno) + ": " + e.what());
    }
    store.append({VirtualTime{ms}, fields}, std::move(raw));
  }
  return store;
}

}  // namespace tg::server
