#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <thread>
#include <vector>

namespace gamedp {

// Worker count: GAMEDP_THREADS environment variable, clamped to
// [1, hardware_concurrency]. Anything unparsable falls back to hardware.
inline unsigned worker_count() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("GAMEDP_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1)
      return static_cast<unsigned>(std::min<long>(v, hw));
  }
  return hw;
}

// Runs f(block_index, begin, end) over [0, count) in fixed-size blocks.
// Block boundaries depend only on count and block_size, never on the
// worker count, so per-block results combined in block order give
// identical output no matter how many threads ran.
template <typename F>
void parallel_blocks(std::size_t count, std::size_t block_size, F&& f) {
  if (count == 0) return;
  const std::size_t n_blocks = (count + block_size - 1) / block_size;
  const std::size_t workers =
      std::min<std::size_t>(worker_count(), n_blocks);
  if (workers <= 1) {
    for (std::size_t b = 0; b < n_blocks; ++b)
      f(b, b * block_size, std::min(count, (b + 1) * block_size));
    return;
  }
  std::atomic<std::size_t> next{0};
  auto run = [&] {
    for (;;) {
      std::size_t b = next.fetch_add(1);
      if (b >= n_blocks) return;
      f(b, b * block_size, std::min(count, (b + 1) * block_size));
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
}

// Compensated (Kahan) accumulator; the caller fixes the summation order.
class KahanSum {
 public:
  void add(double x) {
    double y = x - c_;
    double t = s_ + y;
    c_ = (t - s_) - y;
    s_ = t;
  }
  double value() const { return s_; }

 private:
  double s_ = 0.0;
  double c_ = 0.0;
};

}  // namespace gamedp
