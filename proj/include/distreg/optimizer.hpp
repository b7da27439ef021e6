// Copyright (c) 2026 distreg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "distreg/layers.hpp"
#include "distreg/matrix.hpp"

namespace distreg {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction. Moment accumulators are laid out parallel to
/// the parameter list the state was created for.
class Adam {
 public:
  Adam(const std::vector<ParamView>& params, AdamConfig config = {});

  /// One update using the gradients currently held by `params`, at the
  /// state's base learning rate.
  void step(const std::vector<ParamView>& params) { step(params, config_.learning_rate); }
  /// One update at an explicit rate (for schedules).
  void step(const std::vector<ParamView>& params, double learning_rate);

  std::uint64_t step_count() const { return step_count_; }
  const AdamConfig& config() const { return config_; }
  const std::vector<Matrix>& first_moments() const { return m_; }
  const std::vector<Matrix>& second_moments() const { return v_; }

 private:
  AdamConfig config_;
  std::uint64_t step_count_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

/// Step decay: effective rate at epoch e is base * factor^(#drop epochs <= e).
struct LrSchedule {
  double base_rate = 1e-3;
  std::vector<std::size_t> drop_epochs;  // ascending
  double drop_factor = 0.1;

  double at(std::size_t epoch) const {
    double rate = base_rate;
    for (std::size_t d : drop_epochs) {
      if (d <= epoch) rate *= drop_factor;
    }
    return rate;
  }
};

}  // namespace distreg
