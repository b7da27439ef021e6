// Copyright (c) 2026 distreg contributors
// SPDX-License-Identifier: Apache-2.0

#include "distreg/losses.hpp"

#include <cmath>

#include "distreg/errors.hpp"

namespace distreg {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": prediction/target shape mismatch");
  }
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

LossValue l1_loss(const Matrix& pred, const Matrix& target) {
  require_same_shape(pred, target, "l1_loss");
  const double inv_n = 1.0 / static_cast<double>(pred.size());
  LossValue out;
  out.grad = Matrix(pred.rows(), pred.cols());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred.storage()[i] - target.storage()[i];
    out.value += std::abs(d) * inv_n;
    out.grad.storage()[i] = sign(d) * inv_n;
  }
  return out;
}

LossValue mse_loss(const Matrix& pred, const Matrix& target) {
  require_same_shape(pred, target, "mse_loss");
  const double inv_n = 1.0 / static_cast<double>(pred.size());
  LossValue out;
  out.grad = Matrix(pred.rows(), pred.cols());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred.storage()[i] - target.storage()[i];
    out.value += d * d * inv_n;
    out.grad.storage()[i] = 2.0 * d * inv_n;
  }
  return out;
}

TorLossValue tor_loss(const Matrix& student_pred, const Matrix& teacher_pred,
                      const Matrix& target, const TorLossConfig& config) {
  require_same_shape(student_pred, teacher_pred, "tor_loss");
  require_same_shape(student_pred, target, "tor_loss");
  if (config.epsilon_outlier <= 0.0) {
    throw DomainError("tor_loss: outlier threshold not set (epsilon must be positive)");
  }
  const double inv_n = 1.0 / static_cast<double>(student_pred.size());
  TorLossValue out;
  out.grad = Matrix(student_pred.rows(), student_pred.cols());
  for (std::size_t i = 0; i < student_pred.size(); ++i) {
    const double rs = student_pred.storage()[i];
    const double rt = teacher_pred.storage()[i];
    const double t = target.storage()[i];
    if (std::abs(t - rt) < config.epsilon_outlier) {
      const double d = rs - t;
      out.value += d * d * inv_n;
      out.grad.storage()[i] = 2.0 * d * inv_n;
    } else {
      ++out.outlier_count;
      if (config.penalty == OutlierPenalty::kSqrtAbs) {
        const double x = rs - rt;
        const double ax = std::abs(x);
        out.value += std::sqrt(ax) * inv_n;
        // d sqrt(|x|) / dx = sign(x) / (2 sqrt(|x|)); subgradient 0 at x = 0.
        out.grad.storage()[i] = ax > 0.0 ? sign(x) / (2.0 * std::sqrt(ax)) * inv_n : 0.0;
      }
      // kZero: contributes nothing to value or gradient.
    }
  }
  return out;
}

LossValue tbr_loss(const Matrix& student_pred, const Matrix& teacher_pred,
                   const Matrix& target, double margin) {
  require_same_shape(student_pred, teacher_pred, "tbr_loss");
  require_same_shape(student_pred, target, "tbr_loss");
  if (margin < 0.0) throw DomainError("tbr_loss: margin must be non-negative");
  const double inv_n = 1.0 / static_cast<double>(student_pred.size());
  LossValue out;
  out.grad = Matrix(student_pred.rows(), student_pred.cols());
  for (std::size_t i = 0; i < student_pred.size(); ++i) {
    const double ds = student_pred.storage()[i] - target.storage()[i];
    const double dt = teacher_pred.storage()[i] - target.storage()[i];
    if (ds * ds + margin > dt * dt) {
      out.value += ds * ds * inv_n;
      out.grad.storage()[i] = 2.0 * ds * inv_n;
    }
  }
  return out;
}

LossValue tukey_robust_loss(const Matrix& pred, const Matrix& target, double scale,
                            double cutoff) {
  require_same_shape(pred, target, "tukey_robust_loss");
  if (scale <= 0.0) {
    throw DegenerateScaleError("tukey_robust_loss: scale must be positive");
  }
  const double inv_n = 1.0 / static_cast<double>(pred.size());
  const double plateau = cutoff * cutoff / 6.0;
  LossValue out;
  out.grad = Matrix(pred.rows(), pred.cols());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double r = (pred.storage()[i] - target.storage()[i]) / scale;
    if (std::abs(r) <= cutoff) {
      const double u = 1.0 - (r / cutoff) * (r / cutoff);
      out.value += plateau * (1.0 - u * u * u) * inv_n;
      // rho'(r) = r (1 - (r/c)^2)^2, chain rule through the 1/scale.
      out.grad.storage()[i] = r * u * u / scale * inv_n;
    } else {
      out.value += plateau * inv_n;
    }
  }
  return out;
}

double composite_loss(double tor_value, double distill_value, const CompositeWeights& weights) {
  if (weights.c_tor < 0.0 || weights.c_d < 0.0) {
    throw DomainError("composite_loss: weights must be non-negative");
  }
  if (weights.c_tor == 0.0 && weights.c_d == 0.0) {
    throw DomainError("composite_loss: weights must not both be zero");
  }
  return weights.c_tor * tor_value + weights.c_d * distill_value;
}

}  // namespace distreg
