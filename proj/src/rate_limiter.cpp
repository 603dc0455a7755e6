#include "orbit/rate_limiter.hpp"

namespace orbit {

Clock::time_point HostRateLimiter::acquire(const std::string& host) {
  Clock::time_point slot;
  Clock::time_point now;
  {
    std::lock_guard lock(mu_);
    now = clock_.now();
    auto it = next_.find(host);
    slot = (it == next_.end() || it->second < now) ? now : it->second;
    next_[host] = slot + interval_;
    grants_.emplace_back(host, slot);
  }
  if (slot > now) clock_.sleep_for(std::chrono::duration_cast<std::chrono::milliseconds>(slot - now));
  return slot;
}

std::vector<std::pair<std::string, Clock::time_point>> HostRateLimiter::grants() const {
  std::lock_guard lock(mu_);
  return grants_;
}

}  // namespace orbit
