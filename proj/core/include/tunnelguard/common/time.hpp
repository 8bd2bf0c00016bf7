#pragma once

#include <chrono>
#include <cstdint>

namespace tg {

// Virtual time, measured from the start of a simulation run.
using VirtualTime = std::chrono::milliseconds;
using Millis = std::chrono::milliseconds;

inline constexpr std::int64_t to_ms(VirtualTime t) noexcept { return t.count(); }

}  // namespace tg
