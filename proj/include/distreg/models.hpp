// Copyright (c) 2026 distreg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "distreg/network.hpp"
#include "distreg/variant.hpp"

namespace distreg {

enum class BlockElement { kRelu, kBatchNorm, kDropout };

/// Default block: Dense -> ReLU -> BatchNorm -> Dropout.
std::vector<BlockElement> default_block_order();
std::string block_order_to_string(const std::vector<BlockElement>& order);
std::vector<BlockElement> block_order_from_string(const std::string& text);

/// Architecture of a perceptron stack: every dense layer except the heads is
/// followed by the activation/normalization/dropout block.
struct MlpSpec {
  std::size_t input_width = 1;
  std::vector<std::size_t> hidden_widths = {40, 40};
  std::size_t head_count = 1;
  double dropout_rate = 0.5;
  std::vector<BlockElement> block_order = default_block_order();

  std::string to_json() const;
  static MlpSpec from_json(const std::string& text);

  /// Closed-form count of trainable values (dense weights/biases, batchnorm
  /// scale/shift) for this architecture.
  std::size_t trainable_parameter_count() const;
  /// Adds the batchnorm running statistics a checkpoint persists.
  std::size_t persisted_value_count() const;
};

inline constexpr std::size_t kTeacherHiddenWidth = 150;
inline constexpr std::size_t kStudentHiddenWidth = 40;
inline constexpr double kDefaultDropoutRate = 0.5;

/// Head layer names by role. The teacher-imitating head shares its name (and
/// therefore its init stream) across the recipes that have one, so zeroing
/// the other loss weight degenerates bitwise into the single-head recipe.
inline constexpr const char* kLabelHeadName = "head_label";
inline constexpr const char* kDistillHeadName = "head_distill";

/// Generic builder: per-layer init streams are derived from (seed, layer
/// path) so shared paths initialize identically across head counts.
Network build_mlp(const MlpSpec& spec, std::uint64_t seed,
                  const std::vector<std::string>& head_names);

MlpSpec teacher_spec();
MlpSpec student_spec(VariantTag tag);

/// 1 -> 150 -> 1 perceptron, single head.
Network build_teacher(std::uint64_t seed, MlpSpec spec = teacher_spec());
/// 1 -> 40 -> heads perceptron; two heads only for the full multi-task recipe.
Network build_student(VariantTag tag, std::uint64_t seed);
Network build_student(const MethodVariant& variant, std::uint64_t seed);
/// Same, with an explicit architecture (tests, scaled-down runs).
Network build_student(VariantTag tag, std::uint64_t seed, MlpSpec spec);

/// Per-sample predictions of a two-head network, plus their average.
struct MultiTaskOutput {
  Matrix head_tor;  // label-facing head, B x 1
  Matrix head_d;    // teacher-imitating head, B x 1
  Matrix combined;  // (head_tor + head_d) / 2

  /// Splits a B x 2 forward output. Throws StateError on one column.
  static MultiTaskOutput from_outputs(const Matrix& outputs);
};

/// Average of the two heads. Throws StateError for single-head outputs.
Matrix combined_prediction(const Matrix& outputs);

/// What evaluation scores: the single head, or the head average for
/// multi-task outputs.
Matrix final_prediction(const Matrix& outputs);

}  // namespace distreg
