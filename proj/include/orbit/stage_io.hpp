#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "orbit/parallel.hpp"

namespace orbit {

/// Runs `compute` on a worker pool in fixed-size chunks and hands each result
/// to `commit` in input order once its chunk has finished. Output files thus
/// grow in a deterministic order and an interrupted run loses at most one
/// chunk of work.
class ChunkedRunner {
 public:
  explicit ChunkedRunner(int workers, std::size_t chunk = 0)
      : workers_(std::max(1, workers)), chunk_(chunk ? chunk : static_cast<std::size_t>(workers_) * 4) {}

  template <typename R>
  void run(std::size_t n, const std::function<R(std::size_t)>& compute,
           const std::function<void(std::size_t, R&)>& commit) const {
    for (std::size_t base = 0; base < n; base += chunk_) {
      const std::size_t len = std::min(chunk_, n - base);
      std::vector<R> results(len);
      parallel_for(len, workers_, [&](std::size_t k) { results[k] = compute(base + k); });
      for (std::size_t k = 0; k < len; ++k) commit(base + k, results[k]);
    }
  }

 private:
  int workers_;
  std::size_t chunk_;
};

/// {"version","stage","error","item"} for items parked after an
/// unrecoverable failure.
std::string render_dead_letter(std::string_view stage, const nlohmann::ordered_json& item, std::string_view error);

}  // namespace orbit
