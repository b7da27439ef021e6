// Copyright (c) 2026 distreg contributors
// SPDX-License-Identifier: Apache-2.0

#include "distreg/layers.hpp"

#include <cmath>

#include "distreg/errors.hpp"

namespace distreg {

void Layer::zero_grad() {
  for (auto& p : parameters()) {
    for (double& v : p.grad->storage()) v = 0.0;
  }
}

// ---------------------------------------------------------------------------
// DenseLayer

DenseLayer::DenseLayer(std::string name, std::size_t in, std::size_t out,
                       std::uint64_t init_seed)
    : Layer(std::move(name)),
      weights_(in, out),
      bias_(1, out, 0.0),
      grad_weights_(in, out, 0.0),
      grad_bias_(1, out, 0.0) {
  Rng rng(init_seed);
  // Uniform fan-in init, U(-1/sqrt(in), 1/sqrt(in)), for weights and biases.
  // Biases share the bound so ReLU kinks start spread across the data range;
  // zero biases would pin every kink to x=0 and, on a nonnegative input
  // domain, leave the net linear (or dead) over all of it.
  const double limit = 1.0 / std::sqrt(static_cast<double>(in));
  for (double& w : weights_.storage()) w = rng.uniform(-limit, limit);
  for (double& b : bias_.storage()) b = rng.uniform(-limit, limit);
}

DenseLayer::DenseLayer(std::string name, Matrix weights, Matrix bias)
    : Layer(std::move(name)),
      weights_(std::move(weights)),
      bias_(std::move(bias)),
      grad_weights_(weights_.rows(), weights_.cols(), 0.0),
      grad_bias_(1, bias_.cols(), 0.0) {
  if (bias_.rows() != 1 || bias_.cols() != weights_.cols()) {
    throw DimensionError("DenseLayer: bias must be 1 x out");
  }
}

Matrix DenseLayer::infer(const Matrix& input) const {
  if (input.cols() != weights_.rows()) {
    throw DimensionError("DenseLayer " + name_ + ": input width " +
                         std::to_string(input.cols()) + " != " +
                         std::to_string(weights_.rows()));
  }
  Matrix out = matmul(input, weights_);
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += bias_(0, c);
  return out;
}

Matrix DenseLayer::forward(const Matrix& input, Mode mode) {
  Matrix out = infer(input);
  if (mode == Mode::kTrain) {
    cached_input_ = input;
    has_cache_ = true;
  }
  return out;
}

Matrix DenseLayer::backward(const Matrix& grad_output) {
  if (!has_cache_) {
    throw StateError("DenseLayer " + name_ + ": backward without cached forward");
  }
  grad_weights_ += matmul_tn(cached_input_, grad_output);
  grad_bias_ += grad_output.col_sum();
  return matmul_nt(grad_output, weights_);
}

std::vector<ParamView> DenseLayer::parameters() {
  return {{name_ + ".weight", &weights_, &grad_weights_},
          {name_ + ".bias", &bias_, &grad_bias_}};
}

// ---------------------------------------------------------------------------
// ReluLayer

Matrix ReluLayer::infer(const Matrix& input) const {
  Matrix out = input;
  for (double& v : out.storage()) v = v > 0.0 ? v : 0.0;
  return out;
}

Matrix ReluLayer::forward(const Matrix& input, Mode mode) {
  if (mode == Mode::kTrain) {
    cached_input_ = input;
    has_cache_ = true;
  }
  return infer(input);
}

Matrix ReluLayer::backward(const Matrix& grad_output) {
  if (!has_cache_) {
    throw StateError("ReluLayer " + name_ + ": backward without cached forward");
  }
  Matrix out = grad_output;
  const auto& x = cached_input_.storage();
  auto& g = out.storage();
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (x[i] <= 0.0) g[i] = 0.0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// BatchNormLayer

BatchNormLayer::BatchNormLayer(std::string name, std::size_t width, double momentum,
                               double epsilon)
    : Layer(std::move(name)),
      momentum_(momentum),
      epsilon_(epsilon),
      scale_(1, width, 1.0),
      shift_(1, width, 0.0),
      running_mean_(1, width, 0.0),
      running_var_(1, width, 1.0),
      grad_scale_(1, width, 0.0),
      grad_shift_(1, width, 0.0) {}

Matrix BatchNormLayer::infer(const Matrix& input) const {
  Matrix out(input.rows(), input.cols());
  for (std::size_t c = 0; c < input.cols(); ++c) {
    const double inv_std = 1.0 / std::sqrt(running_var_(0, c) + epsilon_);
    const double mean = running_mean_(0, c);
    for (std::size_t r = 0; r < input.rows(); ++r) {
      out(r, c) = scale_(0, c) * (input(r, c) - mean) * inv_std + shift_(0, c);
    }
  }
  return out;
}

Matrix BatchNormLayer::forward(const Matrix& input, Mode mode) {
  if (mode == Mode::kInfer) return infer(input);

  const std::size_t batch = input.rows();
  const std::size_t width = input.cols();
  Matrix mean(1, width, 0.0);
  Matrix var(1, width, 0.0);
  for (std::size_t c = 0; c < width; ++c) {
    double m = 0.0;
    for (std::size_t r = 0; r < batch; ++r) m += input(r, c);
    m /= static_cast<double>(batch);
    double v = 0.0;
    for (std::size_t r = 0; r < batch; ++r) {
      const double d = input(r, c) - m;
      v += d * d;
    }
    v /= static_cast<double>(batch);
    mean(0, c) = m;
    var(0, c) = v;
  }

  if (mode == Mode::kStatRefresh) {
    // Replace the noisy training-time estimates outright so inference
    // normalizes by the statistics of the activations it will actually see.
    // Downstream layers receive batch-normalized output, which equals the
    // inference output under the freshly assigned statistics.
    Matrix out(batch, width);
    for (std::size_t c = 0; c < width; ++c) {
      running_mean_(0, c) = mean(0, c);
      running_var_(0, c) = var(0, c);
      const double inv_std = 1.0 / std::sqrt(var(0, c) + epsilon_);
      for (std::size_t r = 0; r < batch; ++r) {
        out(r, c) = scale_(0, c) * (input(r, c) - mean(0, c)) * inv_std + shift_(0, c);
      }
    }
    return out;
  }

  cached_centered_ = Matrix(batch, width);
  cached_normalized_ = Matrix(batch, width);
  cached_inv_std_ = Matrix(1, width);
  Matrix out(batch, width);
  for (std::size_t c = 0; c < width; ++c) {
    const double inv_std = 1.0 / std::sqrt(var(0, c) + epsilon_);
    cached_inv_std_(0, c) = inv_std;
    for (std::size_t r = 0; r < batch; ++r) {
      const double centered = input(r, c) - mean(0, c);
      const double normalized = centered * inv_std;
      cached_centered_(r, c) = centered;
      cached_normalized_(r, c) = normalized;
      out(r, c) = scale_(0, c) * normalized + shift_(0, c);
    }
    running_mean_(0, c) = (1.0 - momentum_) * running_mean_(0, c) + momentum_ * mean(0, c);
    running_var_(0, c) = (1.0 - momentum_) * running_var_(0, c) + momentum_ * var(0, c);
  }
  has_cache_ = true;
  return out;
}

Matrix BatchNormLayer::backward(const Matrix& grad_output) {
  if (!has_cache_) {
    throw StateError("BatchNormLayer " + name_ + ": backward without cached forward");
  }
  const std::size_t batch = grad_output.rows();
  const std::size_t width = grad_output.cols();
  const double n = static_cast<double>(batch);
  Matrix grad_input(batch, width);

  for (std::size_t c = 0; c < width; ++c) {
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (std::size_t r = 0; r < batch; ++r) {
      sum_dy += grad_output(r, c);
      sum_dy_xhat += grad_output(r, c) * cached_normalized_(r, c);
    }
    grad_shift_(0, c) += sum_dy;
    grad_scale_(0, c) += sum_dy_xhat;

    const double inv_std = cached_inv_std_(0, c);
    const double s = scale_(0, c);
    for (std::size_t r = 0; r < batch; ++r) {
      // d/dx of (x - mu)/sqrt(var + eps) folded into one expression.
      grad_input(r, c) = s * inv_std / n *
                         (n * grad_output(r, c) - sum_dy -
                          cached_normalized_(r, c) * sum_dy_xhat);
    }
  }
  return grad_input;
}

std::vector<ParamView> BatchNormLayer::parameters() {
  return {{name_ + ".scale", &scale_, &grad_scale_},
          {name_ + ".shift", &shift_, &grad_shift_}};
}

std::vector<BufferView> BatchNormLayer::buffers() {
  return {{name_ + ".running_mean", &running_mean_},
          {name_ + ".running_var", &running_var_}};
}

// ---------------------------------------------------------------------------
// DropoutLayer

DropoutLayer::DropoutLayer(std::string name, double rate, std::shared_ptr<Rng> stream)
    : Layer(std::move(name)), rate_(rate), stream_(std::move(stream)) {
  if (rate_ < 0.0 || rate_ >= 1.0) {
    throw DomainError("DropoutLayer " + name_ + ": rate must be in [0,1)");
  }
}

Matrix DropoutLayer::infer(const Matrix& input) const { return input; }

Matrix DropoutLayer::forward(const Matrix& input, Mode mode) {
  if (mode != Mode::kTrain || rate_ == 0.0) return input;
  const double keep = 1.0 - rate_;
  const double inv_keep = 1.0 / keep;
  mask_ = Matrix(input.rows(), input.cols());
  for (double& m : mask_.storage()) {
    m = stream_->uniform(0.0, 1.0) < keep ? inv_keep : 0.0;
  }
  has_cache_ = true;
  return input.hadamard(mask_);
}

Matrix DropoutLayer::forward_with_last_mask(const Matrix& input) const {
  if (!has_cache_) throw StateError("DropoutLayer " + name_ + ": no cached mask");
  return input.hadamard(mask_);
}

Matrix DropoutLayer::backward(const Matrix& grad_output) {
  if (rate_ == 0.0) return grad_output;
  if (!has_cache_) {
    throw StateError("DropoutLayer " + name_ + ": backward without cached forward");
  }
  return grad_output.hadamard(mask_);
}

}  // namespace distreg
