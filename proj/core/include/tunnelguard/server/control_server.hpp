#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tunnelguard/common/bytes.hpp"
#include "tunnelguard/device/command.hpp"
#include "tunnelguard/server/events.hpp"
#include "tunnelguard/server/log_store.hpp"
#include "tunnelguard/server/registry.hpp"
#include "tunnelguard/server/rules.hpp"

namespace tg::server {

struct ServerConfig {
  RuleConfig rules;
  Millis command_timeout{2000};
  int command_retries = 1;
  // Time of day at virtual t = 0.
  Millis clock_origin{8 * 60 * 60 * 1000};
  bool auto_sweep = true;
};

// How the server reaches a room. Implemented by the host (tunnel or plain).
class CommandTransport {
 public:
  virtual ~CommandTransport() = default;
  virtual bool session_up(const RegistryEntry& entry) const = 0;
  virtual void deliver(const RegistryEntry& entry, Bytes payload) = 0;
};

enum class LockState { Unlocked, Locked, Intermediate };
std::string_view to_string(LockState s) noexcept;

struct RoomStatus {
  std::uint32_t room_id = 0;
  LockState lock = LockState::Unlocked;
  std::uint16_t servo_angle = 0;
  bool appliance_on = false;
  bool occupied = false;
  DeciCelsius temperature = 0;
  std::optional<std::uint8_t> humidity;
  VirtualTime last_seen{0};
  Millis staleness{0};

  friend bool operator==(const RoomStatus&, const RoomStatus&) = default;
};

// Projection of one record; the whole of get_status.
RoomStatus derive_status(const TelemetryRecord& record, VirtualTime now);
std::string format_status(const RoomStatus& s);

enum class CommandStatus { Ok, RefusedOccupied, UnknownCommand, Timeout, SessionDown };
std::string_view to_string(CommandStatus s) noexcept;

struct CommandOutcome {
  std::uint32_t request_id = 0;
  std::uint32_t room_id = 0;
  std::uint8_t opcode = 0;
  CommandStatus status = CommandStatus::Timeout;
  std::uint8_t servo_angle = 0;
  bool appliance_on = false;
  int attempts = 0;
  VirtualTime completed_at{0};
};

struct SweepReport {
  std::uint64_t id = 0;
  Origin origin = Origin::Sweep;
  VirtualTime started_at{0};
  VirtualTime completed_at{0};
  std::vector<std::uint32_t> locked;
  std::vector<std::uint32_t> notified;
  std::vector<std::pair<std::uint32_t, std::string>> failed;
};

enum class PayloadKind { Telemetry, Result, StaleResult, Malformed, Unmapped };

struct ServerStats {
  std::uint64_t telemetry_ingested = 0;
  std::uint64_t malformed_lines = 0;
  std::uint64_t unmapped_payloads = 0;
  std::uint64_t results_matched = 0;
  std::uint64_t stale_results = 0;
  std::uint64_t commands_sent = 0;
  std::uint64_t command_retries = 0;
  std::uint64_t command_timeouts = 0;
};

struct IngestOutcome {
  TelemetryRecord record;
  std::vector<AlarmEvent> alarms;
};

// The estate-management core. Single-threaded: the host calls it from one
// logical executor and feeds it virtual time.
class ControlServer {
 public:
  using CommandCallback = std::function<void(const CommandOutcome&)>;
  using SweepCallback = std::function<void(const SweepReport&)>;

  ControlServer(ServerConfig config, CommandTransport& transport);
  ControlServer(const ControlServer&) = delete;
  ControlServer& operator=(const ControlServer&) = delete;

  void attach_logs(std::ostream* telemetry, std::ostream* events);
  EventLog& event_log() noexcept { return events_; }
  const EventLog& event_log() const noexcept { return events_; }

  // Registry CRUD; each mutation writes one audit event.
  void registry_put(VirtualTime now, const RegistryEntry& entry, Origin origin = Origin::Api);
  void registry_update(VirtualTime now, std::uint32_t room_id, const RegistryEntry& entry, Origin origin = Origin::Api);
  void registry_delete(VirtualTime now, std::uint32_t room_id, Origin origin = Origin::Api);
  const Registry& registry() const noexcept { return registry_; }

  // Demuxes a session payload: 8 bytes is a command result, anything else a
  // telemetry line. Never throws; failures are counted.
  PayloadKind on_payload(VirtualTime now, std::uint32_t session_id, ByteView payload);

  // Throws UnmappedSession, RoomMismatch, LineParseError.
  IngestOutcome ingest(VirtualTime now, std::uint32_t session_id, std::string_view line);

  // Throws UnknownRoom, NoDataYet.
  RoomStatus get_status(std::uint32_t room_id, VirtualTime now) const;

  // Sends now, retries once after command_timeout with the same request id,
  // reports Timeout after the second expiry. Throws UnknownRoom, SessionDown.
  std::uint32_t send_command(VirtualTime now, std::uint32_t room_id, std::uint8_t opcode, Origin origin,
                             CommandCallback done = {});

  // Partitions every registered room into locked / notified / failed. The
  // callback runs once every LOCK has resolved.
  std::uint64_t start_sweep(VirtualTime now, Origin origin, SweepCallback done = {});

  // Expires command deadlines and fires the end-of-day sweep.
  void poll(VirtualTime now);
  std::optional<VirtualTime> next_deadline() const;

  Millis time_of_day(VirtualTime now) const;
  const LogStore& log_store() const noexcept { return store_; }
  const RuleEngine& rules() const noexcept { return rules_; }
  const std::vector<SweepReport>& sweeps() const noexcept { return sweeps_done_; }
  std::size_t pending_commands() const noexcept { return pending_.size(); }
  const ServerStats& stats() const noexcept { return stats_; }
  const ServerConfig& config() const noexcept { return config_; }

 private:
  struct Pending {
    std::uint32_t room_id = 0;
    std::uint8_t opcode = 0;
    Origin origin = Origin::Api;
    int attempts = 0;
    VirtualTime deadline{0};
    CommandCallback done;
  };
  struct SweepState {
    SweepReport report;
    std::size_t outstanding = 0;
    bool issued = false;
    SweepCallback done;
  };

  void transmit(std::uint32_t request_id, const Pending& p);
  void complete(std::uint32_t request_id, CommandOutcome outcome);
  PayloadKind on_result(VirtualTime now, std::uint32_t session_id, ByteView payload);
  void on_sweep_lock(std::uint64_t sweep_id, const CommandOutcome& outcome);
  void maybe_finish_sweep(std::uint64_t sweep_id, VirtualTime now);
  void apply_alarms(VirtualTime now, const std::vector<AlarmEvent>& alarms);

  ServerConfig config_;
  CommandTransport& transport_;
  Registry registry_;
  LogStore store_;
  EventLog events_;
  RuleEngine rules_;
  std::map<std::uint32_t, Pending> pending_;
  std::uint32_t next_request_id_ = 1;
  std::map<std::uint64_t, SweepState> sweeps_;
  std::vector<SweepReport> sweeps_done_;
  std::uint64_t next_sweep_id_ = 1;
  VirtualTime next_auto_sweep_{0};
  ServerStats stats_;
};

}  // namespace tg::server
