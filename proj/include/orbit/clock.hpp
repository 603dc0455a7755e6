#pragma once

#include <chrono>
#include <mutex>
#include <string>
#include <vector>

namespace orbit {

/// Time source for everything that waits or stamps. Tests substitute
/// ManualClock so backoff and pacing never sleep for real.
class Clock {
 public:
  using time_point = std::chrono::system_clock::time_point;
  virtual ~Clock() = default;
  virtual time_point now() const = 0;
  virtual void sleep_for(std::chrono::milliseconds d) = 0;
};

class SystemClock final : public Clock {
 public:
  time_point now() const override { return std::chrono::system_clock::now(); }
  void sleep_for(std::chrono::milliseconds d) override;
};

/// Deterministic clock: sleeping advances time instantly and is recorded.
class ManualClock final : public Clock {
 public:
  explicit ManualClock(time_point start = time_point{}) : now_(start) {}
  time_point now() const override;
  void sleep_for(std::chrono::milliseconds d) override;
  void advance(std::chrono::milliseconds d);
  std::vector<std::chrono::milliseconds> sleeps() const;

 private:
  mutable std::mutex mu_;
  time_point now_;
  std::vector<std::chrono::milliseconds> sleeps_;
};

/// Wall clock for waiting, but stamps a fixed instant. Used for replay runs
/// whose outputs must be byte-identical.
class FrozenStampClock final : public Clock {
 public:
  explicit FrozenStampClock(time_point stamp) : stamp_(stamp) {}
  time_point now() const override { return stamp_; }
  void sleep_for(std::chrono::milliseconds d) override;

 private:
  time_point stamp_;
};

/// "2025-01-02T03:04:05Z"
std::string format_utc(Clock::time_point t);
/// Parses the format above; throws Error(InvalidArgument).
Clock::time_point parse_utc(const std::string& s);

}  // namespace orbit
