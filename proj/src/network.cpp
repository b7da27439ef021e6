// Copyright (c) 2026 distreg contributors
// SPDX-License-Identifier: Apache-2.0

#include "distreg/network.hpp"

#include "distreg/errors.hpp"

namespace distreg {

Network::Network(std::size_t input_width, std::uint64_t seed)
    : input_width_(input_width),
      seed_(seed),
      dropout_stream_(std::make_shared<Rng>(derive_seed(seed, "dropout"))) {}

void Network::add_trunk_layer(std::unique_ptr<Layer> layer) {
  trunk_.push_back(std::move(layer));
}

void Network::add_head(std::unique_ptr<DenseLayer> head) {
  heads_.push_back(std::move(head));
}

Matrix Network::forward(const Matrix& batch, Mode mode) {
  if (batch.cols() != input_width_) {
    throw DimensionError("Network::forward: batch width " + std::to_string(batch.cols()) +
                         " != input width " + std::to_string(input_width_));
  }
  if (heads_.empty()) throw StateError("Network::forward: no heads attached");

  Matrix activation = batch;
  for (auto& layer : trunk_) activation = layer->forward(activation, mode);

  Matrix out(batch.rows(), heads_.size());
  for (std::size_t h = 0; h < heads_.size(); ++h) {
    out.set_col(h, heads_[h]->forward(activation, mode));
  }
  if (mode == Mode::kTrain) {
    cached_trunk_output_ = std::move(activation);
    has_train_cache_ = true;
  }
  return out;
}

Matrix Network::predict(const Matrix& batch) const {
  if (batch.cols() != input_width_) {
    throw DimensionError("Network::predict: batch width mismatch");
  }
  Matrix activation = batch;
  for (const auto& layer : trunk_) activation = layer->infer(activation);
  Matrix out(batch.rows(), heads_.size());
  for (std::size_t h = 0; h < heads_.size(); ++h) {
    out.set_col(h, heads_[h]->infer(activation));
  }
  return out;
}

Matrix Network::backward(const Matrix& grad_outputs) {
  if (!has_train_cache_) {
    throw StateError("Network::backward: no cached train-mode forward");
  }
  if (grad_outputs.cols() != heads_.size()) {
    throw DimensionError("Network::backward: expected one gradient column per head");
  }
  Matrix grad_trunk(cached_trunk_output_.rows(), cached_trunk_output_.cols(), 0.0);
  for (std::size_t h = 0; h < heads_.size(); ++h) {
    grad_trunk += heads_[h]->backward(grad_outputs.col(h));
  }
  for (auto it = trunk_.rbegin(); it != trunk_.rend(); ++it) {
    grad_trunk = (*it)->backward(grad_trunk);
  }
  has_train_cache_ = false;
  return grad_trunk;
}

std::vector<ParamView> Network::parameters() {
  std::vector<ParamView> out;
  for (auto& layer : trunk_) {
    for (auto& p : layer->parameters()) out.push_back(p);
  }
  for (auto& head : heads_) {
    for (auto& p : head->parameters()) out.push_back(p);
  }
  return out;
}

std::vector<BufferView> Network::buffers() {
  std::vector<BufferView> out;
  for (auto& layer : trunk_) {
    for (auto& b : layer->buffers()) out.push_back(b);
  }
  return out;
}

void Network::zero_grad() {
  for (auto& layer : trunk_) layer->zero_grad();
  for (auto& head : heads_) head->zero_grad();
}

std::size_t Network::trainable_parameter_count() {
  std::size_t n = 0;
  for (auto& p : parameters()) n += p.value->size();
  return n;
}

std::size_t Network::persisted_value_count() {
  std::size_t n = trainable_parameter_count();
  for (auto& b : buffers()) n += b.value->size();
  return n;
}

std::vector<double> Network::snapshot_parameters() {
  std::vector<double> flat;
  for (auto& p : parameters()) {
    const auto& v = p.value->storage();
    flat.insert(flat.end(), v.begin(), v.end());
  }
  return flat;
}

}  // namespace distreg
