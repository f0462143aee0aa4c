#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>

#include "cycletime/errors.hpp"

namespace cycletime::metrics {

struct RegressionStats {
  double mse = 0.0;
  double r_value = 0.0;
  std::size_t n = 0;
  double residual_min = 0.0;
  double residual_max = 0.0;
  double residual_mean = 0.0;
};

namespace detail {
inline void check_pair(std::span<const double> actual, std::span<const double> predicted) {
  if (actual.size() != predicted.size()) throw LengthMismatch("actual and predicted lengths differ");
  if (actual.empty()) throw EmptyInput("metric over an empty sample");
}
}  // namespace detail

/// Mean of squared residuals.
inline double mse(std::span<const double> actual, std::span<const double> predicted) {
  detail::check_pair(actual, predicted);
  double sum = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double r = actual[i] - predicted[i];
    sum += r * r;
  }
  return sum / static_cast<double>(actual.size());
}

/// Sample Pearson correlation. Two-pass (centered) so that large offsets do not
/// cancel; clamped to [-1, 1] against rounding overshoot. sqrt(saa * spp) rather
/// than sqrt(saa) * sqrt(spp) makes r(y, y) come out as exactly 1.
inline double pearson_r(std::span<const double> actual, std::span<const double> predicted) {
  detail::check_pair(actual, predicted);
  const std::size_t n = actual.size();
  if (n < 2) throw EmptyInput("pearson_r needs at least two points");

  double mean_a = 0.0, mean_p = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_a += actual[i];
    mean_p += predicted[i];
  }
  mean_a /= static_cast<double>(n);
  mean_p /= static_cast<double>(n);

  double saa = 0.0, spp = 0.0, sap = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = actual[i] - mean_a;
    const double dp = predicted[i] - mean_p;
    saa += da * da;
    spp += dp * dp;
    sap += da * dp;
  }
  if (!(saa > 0.0) || !(spp > 0.0)) throw ConstantInput("correlation undefined for a constant vector");
  const double r = sap / std::sqrt(saa * spp);
  return std::clamp(r, -1.0, 1.0);
}

/// Bundles mse, r and a residual summary (residual = actual - predicted).
inline RegressionStats stats(std::span<const double> actual, std::span<const double> predicted) {
  RegressionStats s;
  s.mse = mse(actual, predicted);
  s.r_value = pearson_r(actual, predicted);
  s.n = actual.size();
  s.residual_min = std::numeric_limits<double>::infinity();
  s.residual_max = -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (std::size_t i = 0; i < s.n; ++i) {
    const double r = actual[i] - predicted[i];
    s.residual_min = std::min(s.residual_min, r);
    s.residual_max = std::max(s.residual_max, r);
    sum += r;
  }
  s.residual_mean = sum / static_cast<double>(s.n);
  return s;
}

}  // namespace cycletime::metrics
