#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "bracketdyn/mat.hpp"

namespace bracketdyn {

// Seeded generator with hand-rolled distributions so that sampled streams are
// identical across standard library implementations. One instance per run or
// per thread; never shared.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() { return double(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  int uniform_int(int lo, int hi) { // inclusive bounds
    return lo + int(engine_() % uint64_t(hi - lo + 1));
  }

  // Standard normal via Box-Muller.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 1e-300) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  Mat normal_mat(int r, int c, double stddev = 1.0) {
    Mat m(r, c);
    for (size_t i = 0; i < m.size(); ++i) m.data()[i] = stddev * normal();
    return m;
  }

  Mat uniform_mat(int r, int c, double lo, double hi) {
    Mat m(r, c);
    for (size_t i = 0; i < m.size(); ++i) m.data()[i] = uniform(lo, hi);
    return m;
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

} // namespace bracketdyn
