// Copyright (c) 2026 distreg contributors
// SPDX-License-Identifier: Apache-2.0

#include "distreg/models.hpp"

#include <memory>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "distreg/errors.hpp"
#include "distreg/rng.hpp"

namespace distreg {
namespace {

const char* block_element_token(BlockElement element) {
  switch (element) {
    case BlockElement::kRelu:
      return "relu";
    case BlockElement::kBatchNorm:
      return "batchnorm";
    case BlockElement::kDropout:
      return "dropout";
  }
  throw DomainError("block_element_token: unknown element");
}

BlockElement block_element_from_token(const std::string& token) {
  if (token == "relu") return BlockElement::kRelu;
  if (token == "batchnorm") return BlockElement::kBatchNorm;
  if (token == "dropout") return BlockElement::kDropout;
  throw ParseError("block order: unknown element '" + token + "'");
}

}  // namespace

std::vector<BlockElement> default_block_order() {
  return {BlockElement::kRelu, BlockElement::kBatchNorm, BlockElement::kDropout};
}

std::string block_order_to_string(const std::vector<BlockElement>& order) {
  std::string out;
  for (BlockElement element : order) {
    if (!out.empty()) out += ',';
    out += block_element_token(element);
  }
  return out;
}

std::vector<BlockElement> block_order_from_string(const std::string& text) {
  std::vector<BlockElement> order;
  std::stringstream stream(text);
  std::string token;
  while (std::getline(stream, token, ',')) {
    if (token.empty()) continue;
    order.push_back(block_element_from_token(token));
  }
  return order;
}

std::string MlpSpec::to_json() const {
  nlohmann::json j;
  j["input_width"] = input_width;
  j["hidden_widths"] = hidden_widths;
  j["head_count"] = head_count;
  j["dropout_rate"] = dropout_rate;
  j["block_order"] = block_order_to_string(block_order);
  return j.dump();
}

MlpSpec MlpSpec::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("MlpSpec: ") + e.what());
  }
  MlpSpec spec;
  spec.input_width = j.at("input_width").get<std::size_t>();
  spec.hidden_widths = j.at("hidden_widths").get<std::vector<std::size_t>>();
  spec.head_count = j.at("head_count").get<std::size_t>();
  spec.dropout_rate = j.at("dropout_rate").get<double>();
  spec.block_order = block_order_from_string(j.at("block_order").get<std::string>());
  return spec;
}

std::size_t MlpSpec::trainable_parameter_count() const {
  bool has_norm = false;
  for (BlockElement element : block_order) {
    if (element == BlockElement::kBatchNorm) has_norm = true;
  }
  std::size_t count = 0;
  std::size_t width = input_width;
  for (std::size_t out : hidden_widths) {
    count += width * out + out;        // dense weights + bias
    if (has_norm) count += 2 * out;    // batchnorm scale + shift
    width = out;
  }
  count += head_count * (width + 1);   // scalar heads
  return count;
}

std::size_t MlpSpec::persisted_value_count() const {
  bool has_norm = false;
  for (BlockElement element : block_order) {
    if (element == BlockElement::kBatchNorm) has_norm = true;
  }
  std::size_t count = trainable_parameter_count();
  if (has_norm) {
    for (std::size_t out : hidden_widths) count += 2 * out;  // running mean/var
  }
  return count;
}

Network build_mlp(const MlpSpec& spec, std::uint64_t seed,
                  const std::vector<std::string>& head_names) {
  if (head_names.size() != spec.head_count) {
    throw DimensionError("build_mlp: " + std::to_string(head_names.size()) +
                         " head names for head_count " + std::to_string(spec.head_count));
  }
  if (spec.hidden_widths.empty()) {
    throw DomainError("build_mlp: at least one hidden layer required");
  }
  Network net(spec.input_width, seed);
  std::size_t width = spec.input_width;
  for (std::size_t i = 0; i < spec.hidden_widths.size(); ++i) {
    const std::size_t out = spec.hidden_widths[i];
    const std::string base = "trunk" + std::to_string(i);
    // Init streams keyed by layer path, not position in the stack, so shared
    // paths come out identical across architectures.
    net.add_trunk_layer(std::make_unique<DenseLayer>(
        base + ".dense", width, out, derive_seed(seed, base + ".dense")));
    for (BlockElement element : spec.block_order) {
      switch (element) {
        case BlockElement::kRelu:
          net.add_trunk_layer(std::make_unique<ReluLayer>(base + ".relu"));
          break;
        case BlockElement::kBatchNorm:
          net.add_trunk_layer(std::make_unique<BatchNormLayer>(base + ".norm", out));
          break;
        case BlockElement::kDropout:
          net.add_trunk_layer(std::make_unique<DropoutLayer>(
              base + ".dropout", spec.dropout_rate, net.dropout_stream()));
          break;
      }
    }
    width = out;
  }
  for (const std::string& name : head_names) {
    net.add_head(std::make_unique<DenseLayer>(name, width, 1, derive_seed(seed, name)));
  }
  return net;
}

MlpSpec teacher_spec() {
  MlpSpec spec;
  spec.input_width = 1;
  // Input projection and hidden layer, each followed by the activation block.
  spec.hidden_widths = {kTeacherHiddenWidth, kTeacherHiddenWidth};
  spec.head_count = 1;
  spec.dropout_rate = kDefaultDropoutRate;
  return spec;
}

MlpSpec student_spec(VariantTag tag) {
  MlpSpec spec;
  spec.input_width = 1;
  spec.hidden_widths = {kStudentHiddenWidth, kStudentHiddenWidth};
  spec.head_count = variant_head_count(tag);
  spec.dropout_rate = kDefaultDropoutRate;
  return spec;
}

Network build_teacher(std::uint64_t seed, MlpSpec spec) {
  spec.head_count = 1;
  return build_mlp(spec, seed, {kLabelHeadName});
}

Network build_student(VariantTag tag, std::uint64_t seed) {
  return build_student(tag, seed, student_spec(tag));
}

Network build_student(const MethodVariant& variant, std::uint64_t seed) {
  return build_student(variant.tag, seed);
}

Network build_student(VariantTag tag, std::uint64_t seed, MlpSpec spec) {
  spec.head_count = variant_head_count(tag);
  std::vector<std::string> head_names;
  switch (tag) {
    case VariantTag::kOursFull:
      head_names = {kLabelHeadName, kDistillHeadName};
      break;
    case VariantTag::kOnlyLd:
      // Same name as the multi-task distill head: with the label-loss weight
      // at zero the two recipes produce bitwise-identical distill heads.
      head_names = {kDistillHeadName};
      break;
    default:
      head_names = {kLabelHeadName};
      break;
  }
  return build_mlp(spec, seed, head_names);
}

MultiTaskOutput MultiTaskOutput::from_outputs(const Matrix& outputs) {
  if (outputs.cols() != 2) {
    throw StateError("MultiTaskOutput: expected 2 head columns, got " +
                     std::to_string(outputs.cols()));
  }
  MultiTaskOutput split{outputs.col(0), outputs.col(1), Matrix::zeros(outputs.rows(), 1)};
  for (std::size_t r = 0; r < outputs.rows(); ++r) {
    split.combined(r, 0) = 0.5 * (split.head_tor(r, 0) + split.head_d(r, 0));
  }
  return split;
}

Matrix combined_prediction(const Matrix& outputs) {
  return MultiTaskOutput::from_outputs(outputs).combined;
}

Matrix final_prediction(const Matrix& outputs) {
  if (outputs.cols() == 1) return outputs;
  if (outputs.cols() == 2) return combined_prediction(outputs);
  throw StateError("final_prediction: expected 1 or 2 head columns, got " +
                   std::to_string(outputs.cols()));
}

}  // namespace distreg
