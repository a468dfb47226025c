#pragma once

#include <chrono>
#include <cstdint>
#include <functional>

namespace sentimill {

// Milliseconds since the Unix epoch.
using Millis = std::int64_t;

// Injectable time source; tests pass a fake so nothing sleeps.
using Clock = std::function<Millis()>;

inline Millis system_now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

inline Clock system_clock() { return &system_now_ms; }

}  // namespace sentimill
