// Copyright (c) 2026 distreg contributors
// SPDX-License-Identifier: Apache-2.0

#include "distreg/variant.hpp"

namespace distreg {

const char* variant_name(VariantTag tag) {
  switch (tag) {
    case VariantTag::kTeacher: return "teacher";
    case VariantTag::kStudentL1: return "student-l1";
    case VariantTag::kStudentMse: return "student-mse";
    case VariantTag::kOursFull: return "ours-full";
    case VariantTag::kOnlyLd: return "only-ld";
    case VariantTag::kOnlyTor: return "only-tor";
    case VariantTag::kL1Tbr: return "l1-tbr";
    case VariantTag::kRobust: return "robust";
  }
  return "unknown";
}

std::optional<VariantTag> parse_variant(const std::string& name) {
  for (VariantTag tag : {VariantTag::kTeacher, VariantTag::kStudentL1, VariantTag::kStudentMse,
                         VariantTag::kOursFull, VariantTag::kOnlyLd, VariantTag::kOnlyTor,
                         VariantTag::kL1Tbr, VariantTag::kRobust}) {
    if (name == variant_name(tag)) return tag;
  }
  return std::nullopt;
}

bool variant_needs_teacher(VariantTag tag) {
  switch (tag) {
    case VariantTag::kOursFull:
    case VariantTag::kOnlyLd:
    case VariantTag::kOnlyTor:
    case VariantTag::kL1Tbr:
      return true;
    default:
      return false;
  }
}

bool variant_uses_threshold(VariantTag tag) {
  return tag == VariantTag::kOursFull || tag == VariantTag::kOnlyTor;
}

std::size_t variant_head_count(VariantTag tag) {
  return tag == VariantTag::kOursFull ? 2 : 1;
}

}  // namespace distreg
