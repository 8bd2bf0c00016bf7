#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "tunnelguard/server/telemetry.hpp"

namespace tg::server {

// Append-only telemetry store. With a sink attached, every append is written
// as `<virtual-time-ms> <raw line>`.
class LogStore {
 public:
  struct Entry {
    TelemetryRecord record;
    std::string raw;
  };

  void attach_sink(std::ostream* sink) noexcept { sink_ = sink; }
  void append(const TelemetryRecord& record, std::string raw);

  const TelemetryRecord* latest(std::uint32_t room_id) const;
  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

  // Rebuilds a store from a sink file. Throws std::runtime_error naming the
  // offending line.
  static LogStore replay(std::istream& in);

 private:
  std::vector<Entry> entries_;
  std::map<std::uint32_t, std::size_t> latest_;
  std::ostream* sink_ = nullptr;
};

}  // namespace tg::server
