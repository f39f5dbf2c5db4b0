#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace testing {

// Relative error with a small floor so coordinates whose true gradient is ~0
// are judged on an absolute scale of about 1e-10.
inline double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / scale;
}

struct GradCheck {
  double worst = 0.0;
  int checked = 0;
};

// Central differences of `f` at `theta` for `coords` randomly chosen indices.
// The five-point stencil is for tolerances tighter than plain central
// differences can resolve on coordinates with tiny gradients.
inline GradCheck check_gradient(const std::function<double(const std::vector<double>&)>& f,
                                std::vector<double> theta, const std::vector<double>& analytic, int coords,
                                std::uint64_t seed, double h = 1e-5, bool five_point = false) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, theta.size() - 1);
  GradCheck out;
  for (int k = 0; k < coords; ++k) {
    const std::size_t i = pick(rng);
    const double orig = theta[i];
    auto at = [&](double offset) {
      theta[i] = orig + offset;
      const double v = f(theta);
      theta[i] = orig;
      return v;
    };
    const double numeric = five_point ? (at(-2 * h) - 8 * at(-h) + 8 * at(h) - at(2 * h)) / (12 * h)
                                      : (at(h) - at(-h)) / (2 * h);
    out.worst = std::max(out.worst, relative_error(analytic[i], numeric));
    ++out.checked;
  }
  return out;
}

}  // namespace testing
