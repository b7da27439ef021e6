// Copyright (c) 2026 distreg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "distreg/layers.hpp"
#include "distreg/matrix.hpp"

namespace distreg {

/// An ordered stack of trunk layers feeding one or more scalar output heads.
/// Single-writer: one training loop mutates an instance at a time.
class Network {
 public:
  Network(std::size_t input_width, std::uint64_t seed);

  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;
  Network(Network&&) = default;
  Network& operator=(Network&&) = default;

  void add_trunk_layer(std::unique_ptr<Layer> layer);
  /// Heads are dense trunk->1 maps; every head sees the same trunk output.
  void add_head(std::unique_ptr<DenseLayer> head);

  /// Batch forward; returns one column per head. Train mode caches
  /// activations for backward and consumes dropout masks.
  Matrix forward(const Matrix& batch, Mode mode);
  /// Inference-only forward (BatchNorm running stats, dropout identity).
  Matrix predict(const Matrix& batch) const;

  /// Backpropagates one gradient column per head through the shared trunk;
  /// fills parameter gradient accumulators and returns the input gradient.
  Matrix backward(const Matrix& grad_outputs);

  std::vector<ParamView> parameters();
  std::vector<BufferView> buffers();
  void zero_grad();

  std::size_t input_width() const { return input_width_; }
  std::size_t head_count() const { return heads_.size(); }
  std::uint64_t seed() const { return seed_; }
  std::shared_ptr<Rng> dropout_stream() const { return dropout_stream_; }

  std::size_t trainable_parameter_count();
  /// Trainable parameters plus persistent buffers; what a checkpoint stores.
  std::size_t persisted_value_count();

  /// Flat copy of all parameter values, for freeze checks and snapshots.
  std::vector<double> snapshot_parameters();

  const std::vector<std::unique_ptr<Layer>>& trunk() const { return trunk_; }
  const std::vector<std::unique_ptr<DenseLayer>>& heads() const { return heads_; }

 private:
  std::size_t input_width_;
  std::uint64_t seed_;
  std::shared_ptr<Rng> dropout_stream_;
  std::vector<std::unique_ptr<Layer>> trunk_;
  std::vector<std::unique_ptr<DenseLayer>> heads_;
  Matrix cached_trunk_output_;
  bool has_train_cache_ = false;
};

}  // namespace distreg
