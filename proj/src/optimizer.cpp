// Copyright (c) 2026 distreg contributors
// SPDX-License-Identifier: Apache-2.0

#include "distreg/optimizer.hpp"

#include <cmath>

#include "distreg/errors.hpp"

namespace distreg {

Adam::Adam(const std::vector<ParamView>& params, AdamConfig config) : config_(config) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto& p : params) {
    m_.emplace_back(p.value->rows(), p.value->cols(), 0.0);
    v_.emplace_back(p.value->rows(), p.value->cols(), 0.0);
  }
}

void Adam::step(const std::vector<ParamView>& params, double learning_rate) {
  if (params.size() != m_.size()) {
    throw DimensionError("Adam::step: parameter list size changed");
  }
  ++step_count_;
  const double t = static_cast<double>(step_count_);
  const double bc1 = 1.0 - std::pow(config_.beta1, t);
  const double bc2 = 1.0 - std::pow(config_.beta2, t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& value = *params[i].value;
    const Matrix& grad = *params[i].grad;
    if (!value.same_shape(grad) || !value.same_shape(m_[i])) {
      throw DimensionError("Adam::step: shape mismatch for " + params[i].name);
    }
    auto& mv = m_[i].storage();
    auto& vv = v_[i].storage();
    auto& pv = value.storage();
    const auto& gv = grad.storage();
    for (std::size_t k = 0; k < pv.size(); ++k) {
      mv[k] = config_.beta1 * mv[k] + (1.0 - config_.beta1) * gv[k];
      vv[k] = config_.beta2 * vv[k] + (1.0 - config_.beta2) * gv[k] * gv[k];
      const double m_hat = mv[k] / bc1;
      const double v_hat = vv[k] / bc2;
      pv[k] -= learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
}

}  // namespace distreg
