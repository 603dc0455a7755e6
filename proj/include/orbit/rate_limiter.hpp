#pragma once

#include <chrono>
#include <map>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "orbit/clock.hpp"

namespace orbit {

/// Per-host minimum spacing between request starts. Grants are serialized
/// under one lock; the wait itself happens outside it.
class HostRateLimiter {
 public:
  HostRateLimiter(Clock& clock, std::chrono::milliseconds interval) : clock_(clock), interval_(interval) {}

  /// Blocks until `host` may start a request; returns the granted start time.
  Clock::time_point acquire(const std::string& host);

  std::vector<std::pair<std::string, Clock::time_point>> grants() const;
  std::chrono::milliseconds interval() const { return interval_; }

 private:
  Clock& clock_;
  std::chrono::milliseconds interval_;
  mutable std::mutex mu_;
  std::map<std::string, Clock::time_point> next_;
  std::vector<std::pair<std::string, Clock::time_point>> grants_;
};

}  // namespace orbit
