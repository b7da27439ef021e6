// Copyright (c) 2026 distreg contributors
// SPDX-License-Identifier: Apache-2.0

#include "distreg/training.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "distreg/errors.hpp"
#include "distreg/losses.hpp"
#include "distreg/optimizer.hpp"
#include "distreg/rng.hpp"

namespace distreg {
namespace {

/// Objective value, gradient per head column, and component breakdown for
/// one batch.
struct BatchLoss {
  double value = 0.0;
  Matrix grad;
  double label_component = 0.0;
  double distill_component = 0.0;
  std::size_t outlier_count = 0;
};

BatchLoss student_batch_loss(const MethodVariant& variant, const Matrix& outputs,
                             const Batch& batch,
                             const std::optional<OutlierThreshold>& threshold) {
  switch (variant.tag) {
    case VariantTag::kStudentL1: {
      LossValue l = l1_loss(outputs, batch.t);
      return {l.value, std::move(l.grad), l.value, 0.0, 0};
    }
    case VariantTag::kStudentMse: {
      LossValue l = mse_loss(outputs, batch.t);
      return {l.value, std::move(l.grad), l.value, 0.0, 0};
    }
    case VariantTag::kOnlyLd: {
      LossValue l = l1_loss(outputs, batch.r_t);
      return {l.value, std::move(l.grad), 0.0, l.value, 0};
    }
    case VariantTag::kOnlyTor: {
      TorLossValue l = tor_loss(outputs, batch.r_t, batch.t,
                                {threshold->epsilon, variant.penalty});
      return {l.value, std::move(l.grad), l.value, 0.0, l.outlier_count};
    }
    case VariantTag::kOursFull: {
      TorLossValue label = tor_loss(outputs.col(0), batch.r_t, batch.t,
                                    {threshold->epsilon, variant.penalty});
      LossValue distill = l1_loss(outputs.col(1), batch.r_t);
      BatchLoss loss;
      loss.value = composite_loss(label.value, distill.value, variant.weights);
      loss.grad = Matrix(outputs.rows(), 2);
      for (std::size_t r = 0; r < outputs.rows(); ++r) {
        loss.grad(r, 0) = variant.weights.c_tor * label.grad(r, 0);
        loss.grad(r, 1) = variant.weights.c_d * distill.grad(r, 0);
      }
      loss.label_component = label.value;
      loss.distill_component = distill.value;
      loss.outlier_count = label.outlier_count;
      return loss;
    }
    case VariantTag::kL1Tbr: {
      LossValue base = l1_loss(outputs, batch.t);
      LossValue bounded = tbr_loss(outputs, batch.r_t, batch.t, variant.margin);
      BatchLoss loss;
      loss.value = base.value + bounded.value;
      loss.grad = base.grad;
      loss.grad += bounded.grad;
      loss.label_component = loss.value;
      return loss;
    }
    case VariantTag::kRobust: {
      std::vector<double> residuals(outputs.rows());
      for (std::size_t r = 0; r < outputs.rows(); ++r) {
        residuals[r] = outputs(r, 0) - batch.t(r, 0);
      }
      const double scale = mad_sigma(residuals);
      LossValue l = tukey_robust_loss(outputs, batch.t, scale);
      return {l.value, std::move(l.grad), l.value, 0.0, 0};
    }
    case VariantTag::kTeacher:
      break;
  }
  throw DomainError("student_batch_loss: not a student recipe");
}

/// Upper bound on the sample used to re-estimate batch-norm statistics.
constexpr std::size_t kStatRefreshCap = 16384;

/// One deterministic dropout-free pass that re-estimates batch-norm running
/// statistics on the inference-time activation distribution. Uses an
/// evenly strided subsample in dataset order so the result is independent
/// of shuffle state.
void refresh_batch_stats(Network& net, const LabeledDataset& data) {
  const std::size_t n = data.size();
  if (n == 0) return;
  const std::size_t stride = (n + kStatRefreshCap - 1) / kStatRefreshCap;
  const std::size_t count = (n + stride - 1) / stride;
  Matrix inputs(count, 1);
  for (std::size_t i = 0; i < count; ++i) inputs(i, 0) = data.x[i * stride];
  net.forward(inputs, Mode::kStatRefresh);
}

/// Shared epoch loop. `loss_fn` maps (outputs, batch) to a BatchLoss.
template <typename LossFn>
void run_epochs(Network& net, const LabeledDataset& data, const TrainConfig& config,
                LossFn&& loss_fn, std::vector<EpochTrace>& trace) {
  Adam adam(net.parameters(), AdamConfig{config.base_lr});
  const LrSchedule schedule{config.base_lr, config.lr_drop_epochs, config.lr_drop_factor};
  BatchIterator batches(data, config.batch_size, derive_seed(config.seed, "shuffle"));
  trace.reserve(config.epochs);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = schedule.at(epoch);
    EpochTrace line;
    line.epoch = epoch;
    line.learning_rate = lr;
    std::size_t batch_count = 0;
    for (Batch& batch : batches.epoch(epoch)) {
      net.zero_grad();
      Matrix outputs = net.forward(batch.x, Mode::kTrain);
      BatchLoss loss = loss_fn(outputs, batch, epoch);
      if (!std::isfinite(loss.value)) {
        throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch) +
                               ", batch " + std::to_string(batch_count));
      }
      net.backward(loss.grad);
      adam.step(net.parameters(), lr);
      line.loss += loss.value;
      line.loss_label += loss.label_component;
      line.loss_distill += loss.distill_component;
      line.outlier_count += loss.outlier_count;
      ++batch_count;
    }
    if (batch_count > 0) {
      line.loss /= static_cast<double>(batch_count);
      line.loss_label /= static_cast<double>(batch_count);
      line.loss_distill /= static_cast<double>(batch_count);
    }
    trace.push_back(line);
  }
  // Zero epochs must leave the freshly initialized network untouched.
  if (config.epochs > 0) refresh_batch_stats(net, data);
}

}  // namespace

void TrainConfig::validate() const {
  // epochs == 0 is allowed: it returns the freshly initialized network.
  if (batch_size == 0) throw DomainError("train config: batch size must be positive");
  if (!(base_lr > 0.0)) throw DomainError("train config: base learning rate must be positive");
  if (!(lr_drop_factor > 0.0)) throw DomainError("train config: drop factor must be positive");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
    throw DomainError("train config: dropout rate must lie in [0, 1)");
  }
}

TrainConfig default_teacher_config(std::uint64_t seed) {
  TrainConfig config;
  config.lr_drop_epochs = {40, 80};
  config.seed = seed;
  config.variant.tag = VariantTag::kTeacher;
  return config;
}

TrainConfig default_student_config(std::uint64_t seed, MethodVariant variant) {
  TrainConfig config;
  config.lr_drop_epochs = {70};
  config.seed = seed;
  config.variant = variant;
  return config;
}

MlpSpec resolved_teacher_spec(const TrainConfig& config) {
  MlpSpec spec = teacher_spec();
  if (config.hidden_width > 0) {
    spec.hidden_widths = {config.hidden_width, config.hidden_width};
  }
  spec.dropout_rate = config.dropout_rate;
  return spec;
}

MlpSpec resolved_student_spec(const TrainConfig& config) {
  MlpSpec spec = student_spec(config.variant.tag);
  if (config.hidden_width > 0) {
    spec.hidden_widths = {config.hidden_width, config.hidden_width};
  }
  spec.dropout_rate = config.dropout_rate;
  return spec;
}

TrainResult train_teacher(const LabeledDataset& data, const TrainConfig& config) {
  config.validate();
  data.ensure_consistent();
  const MlpSpec spec = resolved_teacher_spec(config);
  TrainResult result{build_teacher(derive_seed(config.seed, "init"), spec), {}, {}};
  run_epochs(result.network, data, config,
             [](const Matrix& outputs, const Batch& batch, std::size_t) {
               LossValue l = l1_loss(outputs, batch.t);
               return BatchLoss{l.value, std::move(l.grad), l.value, 0.0, 0};
             },
             result.trace);
  return result;
}

OutlierThreshold resolve_threshold(const LabeledDataset& data, const MethodVariant& variant,
                                   std::size_t batch_size) {
  double sigma = 0.0;
  if (variant.fixed_sigma.has_value()) {
    sigma = *variant.fixed_sigma;
  } else {
    sigma = mad_sigma(data.teacher_residuals());
  }
  if (variant.fixed_epsilon.has_value()) {
    OutlierThreshold threshold;
    threshold.sigma_hat = sigma;
    threshold.alpha = variant.alpha;
    threshold.batch_size = batch_size;
    threshold.epsilon = *variant.fixed_epsilon;
    if (!(threshold.epsilon > 0.0)) {
      throw DomainError("resolve_threshold: fixed epsilon must be positive");
    }
    return threshold;
  }
  return OutlierThreshold::compute(sigma, variant.alpha, batch_size);
}

TrainResult train_student(const LabeledDataset& data, const Network* teacher,
                          const TrainConfig& config) {
  config.validate();
  data.ensure_consistent();
  const MethodVariant& variant = config.variant;
  if (variant.tag == VariantTag::kTeacher) {
    throw DomainError("train_student: use train_teacher for the teacher recipe");
  }

  LabeledDataset working = data;
  if (variant_needs_teacher(variant.tag) && !working.has_teacher()) {
    if (teacher == nullptr) {
      throw StateError(std::string(variant_name(variant.tag)) +
                       " requires teacher predictions but none were supplied");
    }
    working = attach_teacher_predictions(std::move(working), *teacher);
  }

  const MlpSpec spec = resolved_student_spec(config);
  TrainResult result{build_student(variant.tag, derive_seed(config.seed, "init"), spec),
                     {},
                     {}};
  std::optional<OutlierThreshold> threshold;
  if (variant_uses_threshold(variant.tag)) {
    threshold = resolve_threshold(working, variant, config.batch_size);
  }
  std::size_t last_recompute_epoch = 0;
  run_epochs(result.network, working, config,
             [&](const Matrix& outputs, const Batch& batch, std::size_t epoch) {
               if (epoch != last_recompute_epoch && threshold.has_value() &&
                   variant.recompute == SigmaRecompute::kPerEpoch) {
                 // Teacher residuals are fixed, so this reproduces the same
                 // value; kept for configurations that expect the re-estimate.
                 threshold = resolve_threshold(working, variant, config.batch_size);
                 last_recompute_epoch = epoch;
               }
               return student_batch_loss(variant, outputs, batch, threshold);
             },
             result.trace);
  result.threshold = threshold;
  return result;
}

double mean_absolute_error(const Matrix& pred, const Matrix& target) {
  if (pred.rows() != target.rows() || pred.cols() != 1 || target.cols() != 1) {
    throw DimensionError("mean_absolute_error: expected matching column vectors");
  }
  if (pred.rows() == 0) throw DomainError("mean_absolute_error: empty input");
  double total = 0.0;
  for (std::size_t r = 0; r < pred.rows(); ++r) total += std::abs(pred(r, 0) - target(r, 0));
  return total / static_cast<double>(pred.rows());
}

Evaluation evaluate(const Network& network, const LabeledDataset& data) {
  data.ensure_consistent();
  if (data.size() == 0) throw DomainError("evaluate: empty dataset");
  const Matrix outputs = network.predict(data.x_matrix());
  const Matrix scored = final_prediction(outputs);
  Evaluation ev;
  ev.sample_count = data.size();
  const Matrix noisy = data.t_matrix();
  ev.mae_noisy = mean_absolute_error(scored, noisy);
  Matrix clean;
  if (data.has_clean()) {
    clean = data.clean_matrix();
    ev.mae_clean = mean_absolute_error(scored, clean);
  } else {
    ev.mae_clean = std::numeric_limits<double>::quiet_NaN();
  }
  for (std::size_t h = 0; h < outputs.cols(); ++h) {
    const Matrix head = outputs.col(h);
    ev.head_mae_noisy.push_back(mean_absolute_error(head, noisy));
    ev.head_mae_clean.push_back(data.has_clean()
                                    ? mean_absolute_error(head, clean)
                                    : std::numeric_limits<double>::quiet_NaN());
  }
  return ev;
}

}  // namespace distreg
