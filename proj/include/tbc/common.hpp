#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace tbc {

// Error hierarchy. The CLI maps these onto exit codes: config/parameter and
// format problems -> 2, I/O -> 3, internal integrity/numerics -> 4.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct format_error : error {
  using error::error;
};
struct bounds_error : error {
  using error::error;
};
struct param_error : error {
  using error::error;
};
struct size_error : error {
  using error::error;
};
struct io_error : error {
  using error::error;
};
struct integrity_error : error {
  using error::error;
};
struct numeric_error : error {
  using error::error;
};

// Inclusive pixel rectangle: covers columns x0..x1 and rows y0..y1.
struct Rect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0 + 1; }
  int height() const { return y1 - y0 + 1; }
  long long area() const { return static_cast<long long>(width()) * height(); }
  bool contains(double x, double y) const {
    return x >= x0 && x <= x1 && y >= y0 && y <= y1;
  }
  bool operator==(const Rect&) const = default;
};

inline Rect clip_rect(Rect r, int w, int h) {
  r.x0 = std::clamp(r.x0, 0, w - 1);
  r.y0 = std::clamp(r.y0, 0, h - 1);
  r.x1 = std::clamp(r.x1, 0, w - 1);
  r.y1 = std::clamp(r.y1, 0, h - 1);
  return r;
}

// Intersection-over-union of two inclusive pixel rects.
inline double rect_iou(const Rect& a, const Rect& b) {
  const int ix0 = std::max(a.x0, b.x0);
  const int iy0 = std::max(a.y0, b.y0);
  const int ix1 = std::min(a.x1, b.x1);
  const int iy1 = std::min(a.y1, b.y1);
  if (ix0 > ix1 || iy0 > iy1) return 0.0;
  const double inter =
      static_cast<double>(ix1 - ix0 + 1) * static_cast<double>(iy1 - iy0 + 1);
  const double uni = static_cast<double>(a.area()) + static_cast<double>(b.area()) - inter;
  return inter / uni;
}

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

inline double dist2d(const Point2& a, const Point2& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

// Parallelism degree: TBC_THREADS overrides hardware concurrency.
inline unsigned thread_count() {
  if (const char* env = std::getenv("TBC_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n >= 1) return static_cast<unsigned>(n);
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1u : hc;
}

// Runs fn(i) for i in [0, n). Work is split into contiguous chunks; callers
// must write results into disjoint slots so the output is schedule-independent.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const unsigned threads = std::min<std::size_t>(thread_count(), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  const std::size_t chunk = (n + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t lo = t * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

// Deterministic 64-bit generator (splitmix64). Used everywhere randomness is
// needed so results do not depend on the standard library's distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Uniform integer in [lo, hi] inclusive.
  long long uniform_int(long long lo, long long hi) {
    return lo + static_cast<long long>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
  }

  // Standard normal via Box-Muller.
  double normal() {
    const double u1 = std::max(next_double(), 1e-300);
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  std::uint64_t state_;
};

}  // namespace tbc
