#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace bitseq {

/// Seeded RNG with fixed-formula draws (no std::*_distribution) so streams are
/// identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform in [0, 1).
  float uniform() {
    return static_cast<float>((gen_() >> 11) * (1.0 / 9007199254740992.0));
  }

  float uniform(float lo, float hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller.
  float normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 1e-12) u1 = (gen_() >> 11) * (1.0 / 9007199254740992.0);
    const double u2 = (gen_() >> 11) * (1.0 / 9007199254740992.0);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = static_cast<float>(r * std::sin(theta));
    have_spare_ = true;
    return static_cast<float>(r * std::cos(theta));
  }

  float normal(float mean, float stddev) { return mean + stddev * normal(); }

  /// Uniform integer in [0, n).
  int uniform_int(int n) { return static_cast<int>(gen_() % static_cast<std::uint64_t>(n)); }

  /// Index draw from an unnormalized non-negative weight vector (inverse CDF).
  int categorical(const std::vector<float>& weights) {
    double total = 0.0;
    for (float w : weights) total += w;
    double u = uniform() * total;
    for (size_t i = 0; i < weights.size(); ++i) {
      u -= weights[i];
      if (u <= 0.0) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;
  }

  std::uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  float spare_ = 0.0f;
};

}  // namespace bitseq
