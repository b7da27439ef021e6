// Copyright (c) 2026 distreg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "distreg/data.hpp"
#include "distreg/models.hpp"
#include "distreg/network.hpp"
#include "distreg/robust_stats.hpp"
#include "distreg/variant.hpp"

namespace distreg {

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 1000;
  double base_lr = 1e-3;
  std::vector<std::size_t> lr_drop_epochs = {70};
  double lr_drop_factor = 0.1;
  double dropout_rate = 0.5;
  std::uint64_t seed = 0;
  MethodVariant variant;
  /// 0 keeps the role default (150 teacher, 40 student).
  std::size_t hidden_width = 0;

  void validate() const;
};

/// Teacher recipe: 100 epochs, rate drops at 40 and 80.
TrainConfig default_teacher_config(std::uint64_t seed);
/// Student recipe: 100 epochs, rate drop at 70.
TrainConfig default_student_config(std::uint64_t seed, MethodVariant variant);

/// One line of the per-epoch training trace.
struct EpochTrace {
  std::size_t epoch = 0;
  double learning_rate = 0.0;
  double loss = 0.0;          // epoch mean of the batch objective
  double loss_label = 0.0;    // label-facing component
  double loss_distill = 0.0;  // teacher-imitation component
  std::size_t outlier_count = 0;  // rejection-branch hits across the epoch
};

struct TrainResult {
  Network network;
  std::vector<EpochTrace> trace;
  /// Present when the recipe evaluates the outlier threshold.
  std::optional<OutlierThreshold> threshold;
};

/// The architecture train_teacher / train_student will build for a config,
/// exposed so checkpoints can record it.
MlpSpec resolved_teacher_spec(const TrainConfig& config);
MlpSpec resolved_student_spec(const TrainConfig& config);

/// Trains the single-head teacher with the default L1 objective.
/// Throws TrainingDiverged when the batch loss stops being finite.
TrainResult train_teacher(const LabeledDataset& data, const TrainConfig& config);

/// Trains a student under config.variant. Teacher predictions come from
/// data.r_t when attached, otherwise from `teacher` (inference mode); recipes
/// that need neither accept teacher = nullptr. The threshold, when the recipe
/// uses one, is resolved from the full training split before the loop.
TrainResult train_student(const LabeledDataset& data, const Network* teacher,
                          const TrainConfig& config);

struct Evaluation {
  double mae_noisy = 0.0;
  /// NaN when the dataset carries no clean targets.
  double mae_clean = 0.0;
  /// Per-head columns, in head order; multi-task models additionally score
  /// the combined output above.
  std::vector<double> head_mae_noisy;
  std::vector<double> head_mae_clean;
  std::size_t sample_count = 0;
};

double mean_absolute_error(const Matrix& pred, const Matrix& target);

/// Inference-mode scoring. Multi-task networks score the head average.
Evaluation evaluate(const Network& network, const LabeledDataset& data);

/// Scale and threshold resolution used by train_student, exposed for tests:
/// sigma is the fixed override or the MAD estimate over t - r_t; epsilon is
/// the fixed override or the closed-form threshold at (sigma, alpha, B).
OutlierThreshold resolve_threshold(const LabeledDataset& data, const MethodVariant& variant,
                                   std::size_t batch_size);

}  // namespace distreg
