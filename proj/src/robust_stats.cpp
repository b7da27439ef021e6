// Copyright (c) 2026 distreg contributors
// SPDX-License-Identifier: Apache-2.0

#include "distreg/robust_stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "distreg/errors.hpp"

namespace distreg {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

double median(std::span<const double> values) {
  if (values.empty()) throw DomainError("median: empty input");
  std::vector<double> sorted(values.begin(), values.end());
  const std::size_t n = sorted.size();
  const std::size_t mid = (n - 1) / 2;
  std::nth_element(sorted.begin(), sorted.begin() + mid, sorted.end());
  const double lower = sorted[mid];
  if (n % 2 == 1) return lower;
  const double upper = *std::min_element(sorted.begin() + mid + 1, sorted.end());
  return 0.5 * (lower + upper);
}

double mad_sigma(std::span<const double> residuals) {
  const double center = median(residuals);
  std::vector<double> deviations(residuals.size());
  for (std::size_t i = 0; i < residuals.size(); ++i) {
    deviations[i] = std::abs(residuals[i] - center);
  }
  const double mad = median(deviations);
  if (mad <= 0.0) {
    throw DegenerateScaleError("mad_sigma: zero MAD (residual scale degenerate)");
  }
  return kMadConsistency * mad;
}

double mad_sigma(const ResidualSet& residuals) {
  return mad_sigma(std::span<const double>(residuals.residuals));
}

double epsilon_outlier(double sigma, double alpha, std::size_t batch_size) {
  if (sigma <= 0.0) throw DomainError("epsilon_outlier: sigma must be positive");
  if (alpha <= 0.0) throw DomainError("epsilon_outlier: alpha must be positive");
  if (batch_size == 0) throw DomainError("epsilon_outlier: batch size must be positive");
  const double ratio =
      std::sqrt(kTwoPi) * sigma * alpha / static_cast<double>(batch_size);
  if (ratio <= 0.0 || ratio >= 1.0) {
    throw DomainError("epsilon_outlier: sqrt(2 pi) * sigma * alpha / B = " +
                      std::to_string(ratio) + " lies outside (0,1); threshold undefined");
  }
  return sigma * std::sqrt(-2.0 * std::log(ratio));
}

double expected_tail_count(double epsilon, double sigma, std::size_t batch_size) {
  if (sigma <= 0.0) throw DomainError("expected_tail_count: sigma must be positive");
  const double density = std::exp(-epsilon * epsilon / (2.0 * sigma * sigma)) /
                         (sigma * std::sqrt(kTwoPi));
  return static_cast<double>(batch_size) * density;
}

OutlierThreshold OutlierThreshold::compute(double sigma_hat, double alpha,
                                           std::size_t batch_size) {
  OutlierThreshold t;
  t.sigma_hat = sigma_hat;
  t.alpha = alpha;
  t.batch_size = batch_size;
  t.epsilon = epsilon_outlier(sigma_hat, alpha, batch_size);
  return t;
}

}  // namespace distreg
