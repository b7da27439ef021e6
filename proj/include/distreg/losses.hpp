// Copyright (c) 2026 distreg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

#include "distreg/matrix.hpp"

namespace distreg {

/// Batch-mean loss value and its gradient w.r.t. the prediction argument.
struct LossValue {
  double value = 0.0;
  Matrix grad;
};

/// Mean absolute error; subgradient 0 at exact ties.
LossValue l1_loss(const Matrix& pred, const Matrix& target);

/// Mean squared error, mean((pred - target)^2).
LossValue mse_loss(const Matrix& pred, const Matrix& target);

/// Penalty applied on the outlier branch of the teacher-outlier-rejection
/// loss: sqrt(|student - teacher|), or a hard zero.
enum class OutlierPenalty { kSqrtAbs, kZero };

struct TorLossConfig {
  double epsilon_outlier = 0.0;
  OutlierPenalty penalty = OutlierPenalty::kSqrtAbs;
};

struct TorLossValue {
  double value = 0.0;
  Matrix grad;  // w.r.t. student predictions only
  std::size_t outlier_count = 0;
};

/// Teacher-outlier-rejection loss. Per sample: squared error to the label
/// while the teacher residual |t - R_t| stays under the threshold, otherwise
/// a weak penalty pulling the student toward the teacher. The branch depends
/// only on (t, R_t, epsilon); ties go to the outlier branch. Neither t nor
/// R_t receives gradient.
TorLossValue tor_loss(const Matrix& student_pred, const Matrix& teacher_pred,
                      const Matrix& target, const TorLossConfig& config);

/// Teacher-bounded regression: squared error charged only while the student's
/// squared error plus the margin exceeds the teacher's.
LossValue tbr_loss(const Matrix& student_pred, const Matrix& teacher_pred,
                   const Matrix& target, double margin);

/// 95%-efficiency cutoff for the biweight.
inline constexpr double kTukeyCutoff = 4.685;

/// Tukey biweight rho on residuals normalized by `scale`; constant plateau
/// (zero gradient) beyond the cutoff.
LossValue tukey_robust_loss(const Matrix& pred, const Matrix& target, double scale,
                            double cutoff = kTukeyCutoff);

struct CompositeWeights {
  double c_tor = 1.0;
  double c_d = 1.0;
};

/// Weighted sum c_tor * L_label + c_d * L_distill.
double composite_loss(double tor_value, double distill_value, const CompositeWeights& weights);

}  // namespace distreg
