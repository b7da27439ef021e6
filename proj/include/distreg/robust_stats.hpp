// Copyright (c) 2026 distreg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace distreg {

/// Gaussian consistency constant: sigma = 1.4826 * MAD for normal data.
inline constexpr double kMadConsistency = 1.4826;

/// Residuals (target minus teacher prediction) over one sample set, tagged
/// with where they came from.
struct ResidualSet {
  std::vector<double> residuals;
  std::string source;
};

/// Middle order statistic; mean of the two central ones for even length.
double median(std::span<const double> values);

/// Robust scale: 1.4826 * median(|xi - median(xi)|).
/// Throws DegenerateScaleError when the MAD collapses to zero.
double mad_sigma(std::span<const double> residuals);
double mad_sigma(const ResidualSet& residuals);

/// Residual-magnitude threshold such that the expected count of samples per
/// batch beyond it, under a centered Gaussian of scale sigma, equals alpha:
///   sigma * sqrt(-2 ln(sqrt(2 pi) sigma alpha / B)).
/// Valid only while sqrt(2 pi) sigma alpha / B lies in (0,1).
double epsilon_outlier(double sigma, double alpha, std::size_t batch_size);

/// Inverse diagnostic: expected per-batch count at residual magnitude
/// epsilon, i.e. B * exp(-eps^2 / 2 sigma^2) / (sigma sqrt(2 pi)).
double expected_tail_count(double epsilon, double sigma, std::size_t batch_size);

/// Threshold bundle: the scale estimate and the derived rejection threshold,
/// kept together with the inputs that produced it.
struct OutlierThreshold {
  double sigma_hat = 0.0;
  double alpha = 1.0;
  std::size_t batch_size = 0;
  double epsilon = 0.0;

  static OutlierThreshold compute(double sigma_hat, double alpha, std::size_t batch_size);
};

}  // namespace distreg
