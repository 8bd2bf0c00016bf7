#include "tunnelguard/scenario/live.hpp"

namespace tg::scenario {

LiveSystem::LiveSystem(const Scenario& scenario, const ArmDef& arm, std::ostream* telemetry, std::ostream* events)
    : run_(scenario, arm, RunOptions{true, telemetry, events}) {}

void LiveSystem::dispatch(std::function<void(VirtualTime)> action) { run_.invoke_server(action); }

void LiveSystem::advance_to(VirtualTime t) {
  if (t <= now_) return;
  run_.run_until(t);
  now_ = t;
}

}  // namespace tg::scenario
