// Copyright (c) 2026 distreg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "distreg/matrix.hpp"
#include "distreg/rng.hpp"

namespace distreg {

/// kStatRefresh runs a forward pass with stochastic layers inactive while
/// batch-norm layers re-estimate their running statistics from the batch.
/// Training collects those statistics under dropout noise, which inflates
/// them relative to the activations seen at inference; one refresh pass
/// after training removes that mismatch.
enum class Mode { kTrain, kInfer, kStatRefresh };

/// Named view of one parameter tensor and its gradient accumulator.
struct ParamView {
  std::string name;
  Matrix* value;
  Matrix* grad;
};

/// Named view of a persistent non-trainable tensor (BatchNorm running stats).
struct BufferView {
  std::string name;
  Matrix* value;
};

class Layer {
 public:
  virtual ~Layer() = default;

  /// Forward pass. In train mode the layer caches whatever backward needs.
  virtual Matrix forward(const Matrix& input, Mode mode) = 0;
  /// Inference-only forward; never touches caches or RNG state.
  virtual Matrix infer(const Matrix& input) const = 0;
  /// Consumes the cached activations; accumulates parameter gradients and
  /// returns the gradient w.r.t. the layer input.
  virtual Matrix backward(const Matrix& grad_output) = 0;

  virtual std::vector<ParamView> parameters() { return {}; }
  virtual std::vector<BufferView> buffers() { return {}; }
  virtual std::size_t output_width(std::size_t input_width) const { return input_width; }
  virtual std::unique_ptr<Layer> clone() const = 0;

  void zero_grad();
  const std::string& name() const { return name_; }

 protected:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  std::string name_;
};

/// Affine map Y = X W + b, W is in x out.
class DenseLayer final : public Layer {
 public:
  /// He-style uniform fan-in init: W ~ U(-sqrt(6/in), +sqrt(6/in)), b = 0.
  DenseLayer(std::string name, std::size_t in, std::size_t out, std::uint64_t init_seed);
  /// Hand-set parameters (tests, loading).
  DenseLayer(std::string name, Matrix weights, Matrix bias);

  Matrix forward(const Matrix& input, Mode mode) override;
  Matrix infer(const Matrix& input) const override;
  Matrix backward(const Matrix& grad_output) override;
  std::vector<ParamView> parameters() override;
  std::size_t output_width(std::size_t) const override { return weights_.cols(); }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<DenseLayer>(*this); }

  const Matrix& weights() const { return weights_; }
  const Matrix& bias() const { return bias_; }
  Matrix& weights() { return weights_; }
  Matrix& bias() { return bias_; }
  const Matrix& weight_grad() const { return grad_weights_; }
  const Matrix& bias_grad() const { return grad_bias_; }

 private:
  Matrix weights_;      // in x out
  Matrix bias_;         // 1 x out
  Matrix grad_weights_;
  Matrix grad_bias_;
  Matrix cached_input_;
  bool has_cache_ = false;
};

class ReluLayer final : public Layer {
 public:
  explicit ReluLayer(std::string name) : Layer(std::move(name)) {}

  Matrix forward(const Matrix& input, Mode mode) override;
  Matrix infer(const Matrix& input) const override;
  Matrix backward(const Matrix& grad_output) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<ReluLayer>(*this); }

 private:
  Matrix cached_input_;
  bool has_cache_ = false;
};

/// Per-feature batch normalization with learned scale/shift and running
/// statistics for inference.
class BatchNormLayer final : public Layer {
 public:
  BatchNormLayer(std::string name, std::size_t width, double momentum = 0.1,
                 double epsilon = 1e-5);

  Matrix forward(const Matrix& input, Mode mode) override;
  Matrix infer(const Matrix& input) const override;
  Matrix backward(const Matrix& grad_output) override;
  std::vector<ParamView> parameters() override;
  std::vector<BufferView> buffers() override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<BatchNormLayer>(*this); }

  const Matrix& running_mean() const { return running_mean_; }
  const Matrix& running_var() const { return running_var_; }
  double epsilon() const { return epsilon_; }

 private:
  double momentum_;
  double epsilon_;
  Matrix scale_;         // 1 x width
  Matrix shift_;         // 1 x width
  Matrix running_mean_;  // 1 x width
  Matrix running_var_;   // 1 x width
  Matrix grad_scale_;
  Matrix grad_shift_;
  // train-mode caches
  Matrix cached_normalized_;
  Matrix cached_centered_;
  Matrix cached_inv_std_;  // 1 x width
  bool has_cache_ = false;
};

/// Inverted dropout: surviving activations are scaled by 1/(1-rate) so the
/// expected train-mode output equals the input. Identity in inference mode.
class DropoutLayer final : public Layer {
 public:
  /// The mask stream is owned by the network and shared across its dropout
  /// layers so mask order depends only on forward order.
  DropoutLayer(std::string name, double rate, std::shared_ptr<Rng> stream);

  Matrix forward(const Matrix& input, Mode mode) override;
  Matrix infer(const Matrix& input) const override;
  Matrix backward(const Matrix& grad_output) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<DropoutLayer>(*this); }

  double rate() const { return rate_; }
  /// Mask of the most recent train-mode forward (kept values already carry
  /// the 1/(1-rate) scaling). Test hook for deterministic re-application.
  const Matrix& last_mask() const { return mask_; }
  /// Re-applies the cached mask instead of drawing a fresh one.
  Matrix forward_with_last_mask(const Matrix& input) const;

 private:
  double rate_;
  std::shared_ptr<Rng> stream_;
  Matrix mask_;
  bool has_cache_ = false;
};

}  // namespace distreg
