// Copyright (c) 2026 distreg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>

#include "distreg/losses.hpp"

namespace distreg {

/// Student-training recipes plus the teacher reference column.
enum class VariantTag {
  kTeacher,     // the teacher itself, reported as a baseline column
  kStudentL1,   // single head, L1 on labels
  kStudentMse,  // single head, MSE on labels
  kOursFull,    // two heads: label head + teacher-imitation head
  kOnlyLd,      // single head, L1 toward teacher predictions
  kOnlyTor,     // single head, outlier-rejection loss on labels
  kL1Tbr,       // single head, L1 plus teacher-bounded term
  kRobust,      // single head, biweight on scale-normalized residuals
};

const char* variant_name(VariantTag tag);
std::optional<VariantTag> parse_variant(const std::string& name);

/// Whether the recipe consumes teacher predictions R_t.
bool variant_needs_teacher(VariantTag tag);
/// Whether the recipe evaluates the outlier threshold (sigma, alpha, B).
bool variant_uses_threshold(VariantTag tag);
/// Two-head students only for the full multi-task recipe.
std::size_t variant_head_count(VariantTag tag);

/// How often the residual scale feeding the threshold is re-estimated.
/// The teacher is frozen, so the residuals never change; per-epoch merely
/// re-runs the same estimation.
enum class SigmaRecompute { kOnce, kPerEpoch };

/// A fully resolved training recipe for one experiment cell.
struct MethodVariant {
  VariantTag tag = VariantTag::kStudentL1;
  CompositeWeights weights;           // ours-full only
  double alpha = 1.0;                 // threshold hyper-parameter
  double margin = 0.0;                // teacher-bounded margin
  OutlierPenalty penalty = OutlierPenalty::kSqrtAbs;
  std::optional<double> fixed_sigma;    // bypass the MAD estimate
  std::optional<double> fixed_epsilon;  // bypass the threshold formula (sweeps)
  SigmaRecompute recompute = SigmaRecompute::kOnce;
};

}  // namespace distreg
