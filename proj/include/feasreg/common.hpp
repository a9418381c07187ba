#pragma once

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace feasreg {

// Fixed-capacity vector for states (dim <= 4) and actions (dim <= 2).
// Plain value type, no heap traffic in the hot loops.
struct Vec {
  std::array<double, 4> a{0, 0, 0, 0};
  int n = 0;

  Vec() = default;
  Vec(std::initializer_list<double> xs) {
    n = static_cast<int>(xs.size());
    int i = 0;
    for (double x : xs) a[static_cast<size_t>(i++)] = x;
  }
  static Vec zeros(int dim) {
    Vec v;
    v.n = dim;
    return v;
  }
  double& operator[](int i) { return a[static_cast<size_t>(i)]; }
  double operator[](int i) const { return a[static_cast<size_t>(i)]; }
  int size() const { return n; }

  bool finite() const {
    for (int i = 0; i < n; ++i)
      if (!std::isfinite(a[static_cast<size_t>(i)])) return false;
    return true;
  }
  double norm() const {
    double s = 0;
    for (int i = 0; i < n; ++i) s += a[static_cast<size_t>(i)] * a[static_cast<size_t>(i)];
    return std::sqrt(s);
  }
};

inline Vec operator+(Vec x, const Vec& y) {
  for (int i = 0; i < x.n; ++i) x[i] += y[i];
  return x;
}
inline Vec operator-(Vec x, const Vec& y) {
  for (int i = 0; i < x.n; ++i) x[i] -= y[i];
  return x;
}
inline Vec operator*(double s, Vec x) {
  for (int i = 0; i < x.n; ++i) x[i] *= s;
  return x;
}

using State = Vec;
using Action = Vec;

struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// splitmix64: deterministic, seedable, good enough for restarts and sampling.
struct Rng {
  uint64_t s;
  explicit Rng(uint64_t seed) : s(seed) {}
  uint64_t next_u64() {
    uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  // uniform in [0, 1)
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }
  // standard normal via Box-Muller (deterministic pair consumption)
  double normal() {
    double u1 = next_double(), u2 = next_double();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }
};

inline uint64_t mix_seed(uint64_t a, uint64_t b) {
  Rng r(a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
  return r.next_u64();
}

// Runs fn(i) for i in [0, count) on `jobs` threads. Each index is handled exactly
// once and results must go to disjoint slots, so the outcome is independent of
// the thread count and interleaving.
inline void parallel_for(int jobs, std::size_t count, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= count) break;
      fn(i);
    }
  };
  std::vector<std::thread> pool;
  int nthreads = std::min<int>(jobs, static_cast<int>(count));
  pool.reserve(static_cast<size_t>(nthreads));
  for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

// signed power: keeps fractional powers of negative bases real-valued
inline double spow(double x, double p) {
  if (x >= 0) return std::pow(x, p);
  return -std::pow(-x, p);
}

}  // namespace feasreg
