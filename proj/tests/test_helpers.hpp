#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "bitseq/autodiff.hpp"
#include "bitseq/rng.hpp"
#include "bitseq/tensor.hpp"

namespace bitseq::testing {

inline Tensor random_tensor(Rng& rng, std::vector<int> shape, float lo = -1.0f, float hi = 1.0f) {
  Tensor t(std::move(shape));
  for (auto& v : t.vec()) v = rng.uniform(lo, hi);
  return t;
}

/// Central finite-difference check of one op. `f` maps tracked leaves to the
/// op output; gradients of a fixed random weighting of the outputs are
/// compared against (g(x+h) - g(x-h)) / 2h elementwise.
/// Returns the max relative error over all checked inputs.
inline double gradcheck(const std::function<Tensor(Tape*, const std::vector<ParamPtr>&)>& f,
                        std::vector<ParamPtr> params, std::uint64_t seed = 1234,
                        float h = 1e-3f) {
  Rng rng(seed);

  // Analytic pass.
  Tape tape;
  Tensor out = f(&tape, params);
  std::vector<float> w(static_cast<size_t>(out.numel()));
  for (auto& v : w) v = rng.uniform(-1.0f, 1.0f);
  for (auto& p : params) p->zero_grad();
  tape.backward_with_seed(out, w);
  std::vector<std::vector<float>> analytic;
  for (auto& p : params) analytic.push_back(p->grad.vec());

  auto eval = [&]() {
    Tensor o = f(nullptr, params);
    double s = 0.0;
    for (std::int64_t i = 0; i < o.numel(); ++i)
      s += static_cast<double>(w[static_cast<size_t>(i)]) * o.at(static_cast<int>(i));
    return s;
  };

  double max_rel = 0.0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto& vals = params[pi]->value.vec();
    for (size_t i = 0; i < vals.size(); ++i) {
      const float orig = vals[i];
      vals[i] = orig + h;
      const double up = eval();
      vals[i] = orig - h;
      const double down = eval();
      vals[i] = orig;
      const double numeric = (up - down) / (2.0 * static_cast<double>(h));
      const double a = analytic[pi][i];
      const double rel = std::fabs(a - numeric) / std::max({1.0, std::fabs(a), std::fabs(numeric)});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace bitseq::testing
