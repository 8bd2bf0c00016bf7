#include "tunnelguard/server/control_server.hpp"

#include <algorithm>

#include "tunnelguard/device/command.hpp"

namespace tg::server {

namespace {

std::string describe(const RegistryEntry& e) {
  return "peer=" + std::to_string(e.peer.node) + ":" + std::to_string(e.peer.port) +
         " session=" + std::to_string(e.session_id) + " device_port=" + std::to_string(e.device_port);
}

std::string opcode_name(std::uint8_t op) {
  if (device::is_known_opcode(op)) return std::string(device::to_string(static_cast<device::Opcode>(op)));
  return "0x" + to_hex(ByteView(&op, 1));
}

CommandStatus from_device(device::CommandStatus s) {
  switch (s) {
    case device::CommandStatus::Ok: return CommandStatus::Ok;
    case device::CommandStatus::RefusedOccupied: return CommandStatus::RefusedOccupied;
    case device::CommandStatus::UnknownCommand: return CommandStatus::UnknownCommand;
  }
  return CommandStatus::UnknownCommand;
}

}  // namespace

std::string_view to_string(LockState s) noexcept {
  switch (s) {
    case LockState::Unlocked: return "unlocked";
    case LockState::Locked: return "locked";
    case LockState::Intermediate: return "intermediate";
  }
  return "?";
}

std::string_view to_string(CommandStatus s) noexcept {
  switch (s) {
    case CommandStatus::Ok: return "OK";
    case CommandStatus::RefusedOccupied: return "REFUSED_OCCUPIED";
    case CommandStatus::UnknownCommand: return "UNKNOWN_COMMAND";
    case CommandStatus::Timeout: return "TIMEOUT";
    case CommandStatus::SessionDown: return "SESSION_DOWN";
  }
  return "?";
}

RoomStatus derive_status(const TelemetryRecord& record, VirtualTime now) {
  const auto& f = record.fields;
  RoomStatus s;
  s.room_id = f.room_id;
  s.servo_angle = f.servo_angle;
  s.lock = f.servo_angle == device::kServoLocked     ? LockState::Locked
           : f.servo_angle == device::kServoUnlocked ? LockState::Unlocked
                                                     : LockState::Intermediate;
  s.appliance_on = f.appliance_on;
  s.occupied = f.motion;
  s.temperature = f.temperature;
  s.humidity = f.humidity;
  s.last_seen = record.received_at;
  s.staleness = now - record.received_at;
  return s;
}

std::string format_status(const RoomStatus& s) {
  std::string out = "room " + std::to_string(s.room_id) + ": " + std::string(to_string(s.lock));
  if (s.lock == LockState::Intermediate) out += " (servo " + std::to_string(s.servo_angle) + ")";
  out += s.appliance_on ? ", appliances on" : ", appliances off";
  out += s.occupied ? ", occupied" : ", vacant";
  out += ", " + device::format_temperature(s.temperature) + " C";
  if (s.humidity) out += ", humidity " + std::to_string(*s.humidity) + "%";
  out += ", last seen " + std::to_string(to_ms(s.last_seen)) + " ms (" + std::to_string(s.staleness.count()) +
         " ms ago)";
  return out;
}

ControlServer::ControlServer(ServerConfig config, CommandTransport& transport)
    : config_(config), transport_(transport), rules_(config.rules) {
  auto first = (config_.rules.end_of_day - config_.clock_origin) % kDay;
  if (first <= Millis{0}) first += kDay;
  next_auto_sweep_ = first;
}

void ControlServer::attach_logs(std::ostream* telemetry, std::ostream* events) {
  store_.attach_sink(telemetry);
  events_.attach_sink(events);
}

void ControlServer::registry_put(VirtualTime now, const RegistryEntry& entry, Origin origin) {
  registry_.put(entry);
  events_.append(now, EventKind::RegistryPut, entry.room_id, origin, describe(entry));
}

void ControlServer::registry_update(VirtualTime now, std::uint32_t room_id, const RegistryEntry& entry,
                                    Origin origin) {
  registry_.update(room_id, entry);
  events_.append(now, EventKind::RegistryUpdate, entry.room_id, origin,
                 "was=" + std::to_string(room_id) + " " + describe(entry));
}

void ControlServer::registry_delete(VirtualTime now, std::uint32_t room_id, Origin origin) {
  registry_.remove(room_id);
  events_.append(now, EventKind::RegistryDelete, room_id, origin, "");
}

PayloadKind ControlServer::on_payload(VirtualTime now, std::uint32_t session_id, ByteView payload) {
  if (payload.size() == device::kResultSize) return on_result(now, session_id, payload);
  try {
    ingest(now, session_id, as_string_view(payload));
    return PayloadKind::Telemetry;
  } catch (const ServerError& e) {
    return e.code() == ServerErrc::UnmappedSession ? PayloadKind::Unmapped : PayloadKind::Malformed;
  } catch (const LineParseError&) {
    return PayloadKind::Malformed;
  }
}

IngestOutcome ControlServer::ingest(VirtualTime now, std::uint32_t session_id, std::string_view line) {
  const RegistryEntry* entry = registry_.find_by_session(session_id);
  if (entry == nullptr) {
    ++stats_.unmapped_payloads;
    throw ServerError(ServerErrc::UnmappedSession, "no room mapped to session " + std::to_string(session_id));
  }
  TelemetryFields fields;
  try {
    fields = parse_log_line(line);
  } catch (const LineParseError&) {
    ++stats_.malformed_lines;
    throw;
  }
  if (fields.room_id != entry->room_id) {
    ++stats_.malformed_lines;
    throw ServerError(ServerErrc::RoomMismatch, "line names room " + std::to_string(fields.room_id) +
                                                    " on the session of room " + std::to_string(entry->room_id));
  }
  IngestOutcome out;
  out.record = {now, fields};
  store_.append(out.record, std::string(line));
  ++stats_.telemetry_ingested;
  out.alarms = rules_.evaluate(out.record);
  apply_alarms(now, out.alarms);
  return out;
}

void ControlServer::apply_alarms(VirtualTime now, const std::vector<AlarmEvent>& alarms) {
  for (const auto& alarm : alarms) {
    std::string detail = alarm.detail;
    if (alarm.kind == EventKind::FireAlarm) {
      try {
        const auto id = send_command(now, alarm.room_id, static_cast<std::uint8_t>(device::Opcode::BuzzerOn),
                                     Origin::Rule);
        detail += " buzzer_request=" + std::to_string(id);
      } catch (const ServerError& e) {
        detail += " buzzer=" + std::string(to_string(e.code()));
      }
    }
    events_.append(alarm.at, alarm.kind, alarm.room_id, Origin::Rule, std::move(detail));
  }
}

PayloadKind ControlServer::on_result(VirtualTime now, std::uint32_t session_id, ByteView payload) {
  const RegistryEntry* entry = registry_.find_by_session(session_id);
  if (entry == nullptr) {
    ++stats_.unmapped_payloads;
    return PayloadKind::Unmapped;
  }
  device::CommandResult result;
  try {
    result = device::decode_result(payload);
  } catch (const device::DeviceError&) {
    ++stats_.malformed_lines;
    return PayloadKind::Malformed;
  }
  const auto it = pending_.find(result.request_id);
  if (it == pending_.end() || it->second.room_id != entry->room_id || it->second.opcode != result.opcode) {
    ++stats_.stale_results;
    return PayloadKind::StaleResult;
  }
  ++stats_.results_matched;
  CommandOutcome outcome;
  outcome.request_id = result.request_id;
  outcome.room_id = entry->room_id;
  outcome.opcode = result.opcode;
  outcome.status = from_device(result.status);
  outcome.servo_angle = result.servo_angle;
  outcome.appliance_on = result.appliance_on;
  outcome.completed_at = now;
  complete(result.request_id, outcome);
  return PayloadKind::Result;
}

std::uint32_t ControlServer::send_command(VirtualTime now, std::uint32_t room_id, std::uint8_t opcode, Origin origin,
                                          CommandCallback done) {
  const RegistryEntry* entry = registry_.find(room_id);
  if (entry == nullptr) throw ServerError(ServerErrc::UnknownRoom, "room " + std::to_string(room_id) + " not registered");
  if (!transport_.session_up(*entry)) {
    throw ServerError(ServerErrc::SessionDown, "session for room " + std::to_string(room_id) + " is down");
  }
  const std::uint32_t id = next_request_id_++;
  Pending& p = pending_[id];
  p.room_id = room_id;
  p.opcode = opcode;
  p.origin = origin;
  p.attempts = 1;
  p.deadline = now + config_.command_timeout;
  p.done = std::move(done);
  ++stats_.commands_sent;
  transmit(id, p);
  return id;
}

void ControlServer::transmit(std::uint32_t request_id, const Pending& p) {
  const RegistryEntry* entry = registry_.find(p.room_id);
  if (entry == nullptr || !transport_.session_up(*entry)) return;  // the deadline still runs
  transport_.deliver(*entry, device::encode_command({p.opcode, request_id}));
}

void ControlServer::complete(std::uint32_t request_id, CommandOutcome outcome) {
  auto node = pending_.extract(request_id);
  if (node.empty()) return;
  Pending& p = node.mapped();
  outcome.attempts = p.attempts;
  events_.append(outcome.completed_at, EventKind::Command, p.room_id, p.origin,
                 "op=" + opcode_name(p.opcode) + " request=" + std::to_string(request_id) +
                     " status=" + std::string(to_string(outcome.status)) +
                     " attempts=" + std::to_string(p.attempts));
  if (outcome.status == CommandStatus::RefusedOccupied) {
    events_.append(outcome.completed_at, EventKind::LockRefused, p.room_id, p.origin,
                   "request=" + std::to_string(request_id) + " room occupied, security check needed");
  }
  if (p.done) p.done(outcome);
}

std::uint64_t ControlServer::start_sweep(VirtualTime now, Origin origin, SweepCallback done) {
  const std::uint64_t id = next_sweep_id_++;
  SweepState& st = sweeps_[id];
  st.report.id = id;
  st.report.origin = origin;
  st.report.started_at = now;
  st.done = std::move(done);

  for (const auto& entry : registry_.list()) {
    const TelemetryRecord* latest = store_.latest(entry.room_id);
    if (latest == nullptr) {
      sweeps_[id].report.failed.emplace_back(entry.room_id, "NoDataYet");
    } else if (latest->fields.motion) {
      sweeps_[id].report.notified.push_back(entry.room_id);
      events_.append(now, EventKind::OccupiedAfterHours, entry.room_id, Origin::Sweep, "sweep=" + std::to_string(id));
    } else {
      try {
        ++sweeps_[id].outstanding;
        send_command(now, entry.room_id, static_cast<std::uint8_t>(device::Opcode::Lock), Origin::Sweep,
                     [this, id](const CommandOutcome& o) { on_sweep_lock(id, o); });
      } catch (const ServerError& e) {
        --sweeps_[id].outstanding;
        sweeps_[id].report.failed.emplace_back(entry.room_id, std::string(to_string(e.code())));
      }
    }
  }
  sweeps_[id].issued = true;
  maybe_finish_sweep(id, now);
  return id;
}

void ControlServer::on_sweep_lock(std::uint64_t sweep_id, const CommandOutcome& outcome) {
  const auto it = sweeps_.find(sweep_id);
  if (it == sweeps_.end()) return;
  SweepReport& r = it->second.report;
  --it->second.outstanding;
  switch (outcome.status) {
    case CommandStatus::Ok:
      r.locked.push_back(outcome.room_id);
      break;
    case CommandStatus::RefusedOccupied:
      r.notified.push_back(outcome.room_id);
      events_.append(outcome.completed_at, EventKind::OccupiedAfterHours, outcome.room_id, Origin::Sweep,
                     "sweep=" + std::to_string(sweep_id) + " lock refused");
      break;
    default:
      r.failed.emplace_back(outcome.room_id, std::string(to_string(outcome.status)));
      break;
  }
  maybe_finish_sweep(sweep_id, outcome.completed_at);
}

void ControlServer::maybe_finish_sweep(std::uint64_t sweep_id, VirtualTime now) {
  auto node = sweeps_.extract(sweep_id);
  if (node.empty()) return;
  SweepState& st = node.mapped();
  if (!st.issued || st.outstanding != 0) {
    sweeps_.insert(std::move(node));
    return;
  }
  SweepReport& r = st.report;
  r.completed_at = now;
  std::sort(r.locked.begin(), r.locked.end());
  std::sort(r.notified.begin(), r.notified.end());
  std::sort(r.failed.begin(), r.failed.end());
  events_.append(now, EventKind::Sweep, 0, r.origin,
                 "sweep=" + std::to_string(r.id) + " locked=" + std::to_string(r.locked.size()) +
                     " notified=" + std::to_string(r.notified.size()) + " failed=" + std::to_string(r.failed.size()));
  sweeps_done_.push_back(r);
  if (st.done) st.done(sweeps_done_.back());
}

void ControlServer::poll(VirtualTime now) {
  std::vector<std::uint32_t> expired;
  for (const auto& [id, p] : pending_) {
    if (p.deadline <= now) expired.push_back(id);
  }
  for (const auto id : expired) {
    const auto it = pending_.find(id);
    if (it == pending_.end()) continue;
    Pending& p = it->second;
    if (p.attempts <= config_.command_retries) {
      ++p.attempts;
      ++stats_.command_retries;
      p.deadline = now + config_.command_timeout;
      transmit(id, p);
    } else {
      ++stats_.command_timeouts;
      CommandOutcome outcome;
      outcome.request_id = id;
      outcome.room_id = p.room_id;
      outcome.opcode = p.opcode;
      outcome.status = CommandStatus::Timeout;
      outcome.completed_at = now;
      complete(id, outcome);
    }
  }
  if (config_.auto_sweep && now >= next_auto_sweep_) {
    while (next_auto_sweep_ <= now) next_auto_sweep_ += kDay;
    start_sweep(now, Origin::Sweep);
  }
}

std::optional<VirtualTime> ControlServer::next_deadline() const {
  std::optional<VirtualTime> next;
  if (config_.auto_sweep) next = next_auto_sweep_;
  for (const auto& [id, p] : pending_) {
    if (!next || p.deadline < *next) next = p.deadline;
  }
  return next;
}

RoomStatus ControlServer::get_status(std::uint32_t room_id, VirtualTime now) const {
  if (registry_.find(room_id) == nullptr) {
    throw ServerError(ServerErrc::UnknownRoom, "room " + std::to_string(room_id) + " not registered");
  }
  const TelemetryRecord* latest = store_.latest(room_id);
  if (latest == nullptr) throw ServerError(ServerErrc::NoDataYet, "no telemetry from room " + std::to_string(room_id));
  return derive_status(*latest, now);
}

Millis ControlServer::time_of_day(VirtualTime now) const { return (config_.clock_origin + now) % kDay; }

}  // namespace tg::server
