#pragma once

#include <iosfwd>

#include "tunnelguard/scenario/runner.hpp"
#include "tunnelguard/server/api.hpp"

namespace tg::scenario {

// One arm running open-ended behind the HTTP API. Every method must be called
// on the API executor thread; the clock driver advances time by submitting
// advance_to jobs there too.
class LiveSystem : public server::ApiBackend {
 public:
  LiveSystem(const Scenario& scenario, const ArmDef& arm, std::ostream* telemetry, std::ostream* events);

  server::ControlServer& control() override { return run_.server().control(); }
  VirtualTime now() const override { return now_; }
  void dispatch(std::function<void(VirtualTime)> action) override;

  void advance_to(VirtualTime t);

 private:
  ArmRun run_;
  VirtualTime now_{0};
};

}  // namespace tg::scenario
