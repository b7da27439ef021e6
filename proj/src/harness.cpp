// Copyright (c) 2026 distreg contributors
// SPDX-License-Identifier: Apache-2.0

#include "distreg/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "distreg/data.hpp"
#include "distreg/errors.hpp"
#include "distreg/rng.hpp"
#include "distreg/robust_stats.hpp"

namespace distreg {
namespace {

using nlohmann::json;

std::string short_number(double value) {
  char buffer[48];
  std::snprintf(buffer, sizeof(buffer), "%g", value);
  return buffer;
}

std::string full_number(double value) {
  char buffer[48];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

/// Reads j[key] with a fallback, recording type mismatches instead of
/// throwing so every config problem surfaces in one validation pass.
template <typename T>
T get_field(const json& j, const char* key, T fallback, std::vector<std::string>& issues) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    issues.push_back(std::string("field '") + key + "' has the wrong type");
    return fallback;
  }
}

std::optional<double> get_optional_number(const json& j, const char* key,
                                          std::vector<std::string>& issues) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  try {
    return j.at(key).get<double>();
  } catch (const json::exception&) {
    issues.push_back(std::string("field '") + key + "' must be a number or null");
    return std::nullopt;
  }
}

void check_known_keys(const json& j, const std::set<std::string>& known, const std::string& scope,
                      std::vector<std::string>& issues) {
  if (!j.is_object()) return;
  for (const auto& item : j.items()) {
    if (known.find(item.key()) == known.end()) {
      issues.push_back("unknown key '" + item.key() + "' in " + scope);
    }
  }
}

StageConfig parse_stage(const json& j, StageConfig defaults, const std::string& scope,
                        std::vector<std::string>& issues) {
  check_known_keys(j,
                   {"epochs", "batch_size", "base_lr", "lr_drop_epochs", "lr_drop_factor",
                    "dropout_rate", "hidden_width"},
                   scope, issues);
  StageConfig stage = defaults;
  stage.epochs = get_field<std::size_t>(j, "epochs", stage.epochs, issues);
  stage.batch_size = get_field<std::size_t>(j, "batch_size", stage.batch_size, issues);
  stage.base_lr = get_field<double>(j, "base_lr", stage.base_lr, issues);
  stage.lr_drop_epochs =
      get_field<std::vector<std::size_t>>(j, "lr_drop_epochs", stage.lr_drop_epochs, issues);
  stage.lr_drop_factor = get_field<double>(j, "lr_drop_factor", stage.lr_drop_factor, issues);
  stage.dropout_rate = get_field<double>(j, "dropout_rate", stage.dropout_rate, issues);
  stage.hidden_width = get_field<std::size_t>(j, "hidden_width", stage.hidden_width, issues);
  return stage;
}

json stage_to_json(const StageConfig& stage) {
  json j;
  j["epochs"] = stage.epochs;
  j["batch_size"] = stage.batch_size;
  j["base_lr"] = stage.base_lr;
  j["lr_drop_epochs"] = stage.lr_drop_epochs;
  j["lr_drop_factor"] = stage.lr_drop_factor;
  j["dropout_rate"] = stage.dropout_rate;
  j["hidden_width"] = stage.hidden_width;
  return j;
}

void validate_stage(const StageConfig& stage, const std::string& scope,
                    std::vector<std::string>& issues) {
  if (stage.batch_size == 0) issues.push_back(scope + ": batch_size must be positive");
  if (!(stage.base_lr > 0.0)) issues.push_back(scope + ": base_lr must be positive");
  if (!(stage.lr_drop_factor > 0.0)) issues.push_back(scope + ": lr_drop_factor must be positive");
  if (stage.dropout_rate < 0.0 || stage.dropout_rate >= 1.0) {
    issues.push_back(scope + ": dropout_rate must lie in [0, 1)");
  }
}

std::map<double, double> parse_std_map(const json& j, const std::string& scope,
                                       std::vector<std::string>& issues) {
  std::map<double, double> out;
  if (!j.is_object()) {
    issues.push_back(scope + " must be an object keyed by noise std");
    return out;
  }
  for (const auto& item : j.items()) {
    char* end = nullptr;
    const double key = std::strtod(item.key().c_str(), &end);
    if (end == item.key().c_str() || *end != '\0') {
      issues.push_back(scope + ": key '" + item.key() + "' is not a number");
      continue;
    }
    try {
      out[key] = item.value().get<double>();
    } catch (const json::exception&) {
      issues.push_back(scope + ": value for key '" + item.key() + "' must be a number");
    }
  }
  return out;
}

/// Writes a double that may be NaN; JSON has no NaN literal so null stands in.
void put_number(json& j, const char* key, double value) {
  if (std::isfinite(value)) {
    j[key] = value;
  } else {
    j[key] = nullptr;
  }
}

double take_number(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  return j.at(key).get<double>();
}

json number_array(const std::vector<double>& values) {
  json arr = json::array();
  for (double v : values) {
    if (std::isfinite(v)) {
      arr.push_back(v);
    } else {
      arr.push_back(nullptr);
    }
  }
  return arr;
}

std::vector<double> take_number_array(const json& j, const char* key) {
  std::vector<double> out;
  if (!j.contains(key)) return out;
  for (const auto& v : j.at(key)) {
    out.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
  }
  return out;
}

struct MeanStd {
  std::size_t count = 0;
  double mean = std::numeric_limits<double>::quiet_NaN();
  double stddev = std::numeric_limits<double>::quiet_NaN();
};

/// Mean and unbiased standard deviation; NaN inputs poison the mean, which
/// is intended (a NaN cell means the underlying metric was unavailable).
MeanStd mean_and_std(const std::vector<double>& values) {
  MeanStd out;
  out.count = values.size();
  if (values.empty()) return out;
  double total = 0.0;
  for (double v : values) total += v;
  out.mean = total / static_cast<double>(values.size());
  if (values.size() < 2) return out;
  double squares = 0.0;
  for (double v : values) squares += (v - out.mean) * (v - out.mean);
  out.stddev = std::sqrt(squares / static_cast<double>(values.size() - 1));
  return out;
}

std::string pad_to(const std::string& text, std::size_t width) {
  if (text.size() >= width) return text;
  return text + std::string(width - text.size(), ' ');
}

}  // namespace

StageConfig ExperimentConfig::teacher_stage_defaults() {
  StageConfig stage;
  stage.lr_drop_epochs = {40, 80};
  return stage;
}

StageConfig ExperimentConfig::student_stage_defaults() {
  StageConfig stage;
  stage.lr_drop_epochs = {70};
  return stage;
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("experiment config: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("experiment config: top level must be an object");

  ExperimentConfig config;
  auto& issues = config.parse_issues;
  check_known_keys(j,
                   {"name", "dataset", "noise_stds", "variants", "trials", "master_seed",
                    "workers", "output_dir", "teacher", "student", "alpha", "weights", "tor",
                    "margin"},
                   "config", issues);

  config.name = get_field<std::string>(j, "name", config.name, issues);
  config.noise_stds = get_field<std::vector<double>>(j, "noise_stds", config.noise_stds, issues);
  config.variant_names =
      get_field<std::vector<std::string>>(j, "variants", config.variant_names, issues);
  config.trials = get_field<std::size_t>(j, "trials", config.trials, issues);
  config.master_seed = get_field<std::uint64_t>(j, "master_seed", config.master_seed, issues);
  config.workers = get_field<std::size_t>(j, "workers", config.workers, issues);
  config.output_dir = get_field<std::string>(j, "output_dir", config.output_dir, issues);
  config.margin = get_field<double>(j, "margin", config.margin, issues);

  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    check_known_keys(d, {"kind", "n", "x_low", "x_high", "path", "shared_inputs", "test_fraction"},
                     "dataset", issues);
    config.dataset.kind = get_field<std::string>(d, "kind", config.dataset.kind, issues);
    config.dataset.n = get_field<std::size_t>(d, "n", config.dataset.n, issues);
    config.dataset.x_low = get_field<double>(d, "x_low", config.dataset.x_low, issues);
    config.dataset.x_high = get_field<double>(d, "x_high", config.dataset.x_high, issues);
    config.dataset.path = get_field<std::string>(d, "path", config.dataset.path, issues);
    config.dataset.shared_inputs =
        get_field<bool>(d, "shared_inputs", config.dataset.shared_inputs, issues);
    config.dataset.test_fraction =
        get_field<double>(d, "test_fraction", config.dataset.test_fraction, issues);
  }

  if (j.contains("teacher")) {
    config.teacher = parse_stage(j.at("teacher"), config.teacher, "teacher", issues);
  }
  if (j.contains("student")) {
    config.student = parse_stage(j.at("student"), config.student, "student", issues);
  }

  if (j.contains("alpha")) {
    const json& a = j.at("alpha");
    check_known_keys(a, {"default", "by_std"}, "alpha", issues);
    config.default_alpha = get_field<double>(a, "default", config.default_alpha, issues);
    if (a.contains("by_std")) config.alpha_by_std = parse_std_map(a.at("by_std"), "alpha.by_std", issues);
  }

  if (j.contains("weights")) {
    const json& w = j.at("weights");
    check_known_keys(w, {"default", "by_std"}, "weights", issues);
    auto parse_weights = [&issues](const json& node, const std::string& scope) {
      CompositeWeights weights;
      check_known_keys(node, {"c_tor", "c_d"}, scope, issues);
      weights.c_tor = get_field<double>(node, "c_tor", weights.c_tor, issues);
      weights.c_d = get_field<double>(node, "c_d", weights.c_d, issues);
      return weights;
    };
    if (w.contains("default")) {
      config.default_weights = parse_weights(w.at("default"), "weights.default");
    }
    if (w.contains("by_std")) {
      const json& by = w.at("by_std");
      if (!by.is_object()) {
        issues.push_back("weights.by_std must be an object keyed by noise std");
      } else {
        for (const auto& item : by.items()) {
          char* end = nullptr;
          const double key = std::strtod(item.key().c_str(), &end);
          if (end == item.key().c_str() || *end != '\0') {
            issues.push_back("weights.by_std: key '" + item.key() + "' is not a number");
            continue;
          }
          config.weights_by_std[key] =
              parse_weights(item.value(), "weights.by_std['" + item.key() + "']");
        }
      }
    }
  }

  if (j.contains("tor")) {
    const json& t = j.at("tor");
    check_known_keys(t, {"penalty", "fixed_sigma", "fixed_epsilon", "epsilon_sweep", "recompute"},
                     "tor", issues);
    const std::string penalty = get_field<std::string>(t, "penalty", "sqrt-abs", issues);
    if (penalty == "sqrt-abs") {
      config.tor.penalty = OutlierPenalty::kSqrtAbs;
    } else if (penalty == "zero") {
      config.tor.penalty = OutlierPenalty::kZero;
    } else {
      issues.push_back("tor.penalty must be 'sqrt-abs' or 'zero', got '" + penalty + "'");
    }
    config.tor.fixed_sigma = get_optional_number(t, "fixed_sigma", issues);
    config.tor.fixed_epsilon = get_optional_number(t, "fixed_epsilon", issues);
    config.tor.epsilon_sweep =
        get_field<std::vector<double>>(t, "epsilon_sweep", config.tor.epsilon_sweep, issues);
    const std::string recompute = get_field<std::string>(t, "recompute", "once", issues);
    if (recompute == "once") {
      config.tor.recompute = SigmaRecompute::kOnce;
    } else if (recompute == "per-epoch") {
      config.tor.recompute = SigmaRecompute::kPerEpoch;
    } else {
      issues.push_back("tor.recompute must be 'once' or 'per-epoch', got '" + recompute + "'");
    }
  }

  return config;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_json_text(buffer.str());
}

std::string ExperimentConfig::to_json() const {
  json j;
  j["name"] = name;
  j["dataset"] = {{"kind", dataset.kind},          {"n", dataset.n},
                  {"x_low", dataset.x_low},        {"x_high", dataset.x_high},
                  {"path", dataset.path},          {"shared_inputs", dataset.shared_inputs},
                  {"test_fraction", dataset.test_fraction}};
  j["noise_stds"] = noise_stds;
  j["variants"] = variant_names;
  j["trials"] = trials;
  j["master_seed"] = master_seed;
  j["workers"] = workers;
  j["output_dir"] = output_dir;
  j["teacher"] = stage_to_json(teacher);
  j["student"] = stage_to_json(student);
  json alpha;
  alpha["default"] = default_alpha;
  alpha["by_std"] = json::object();
  for (const auto& [key, value] : alpha_by_std) alpha["by_std"][short_number(key)] = value;
  j["alpha"] = alpha;
  json weights;
  weights["default"] = {{"c_tor", default_weights.c_tor}, {"c_d", default_weights.c_d}};
  weights["by_std"] = json::object();
  for (const auto& [key, value] : weights_by_std) {
    weights["by_std"][short_number(key)] = {{"c_tor", value.c_tor}, {"c_d", value.c_d}};
  }
  j["weights"] = weights;
  json tor_json;
  tor_json["penalty"] = tor.penalty == OutlierPenalty::kSqrtAbs ? "sqrt-abs" : "zero";
  if (tor.fixed_sigma.has_value()) {
    tor_json["fixed_sigma"] = *tor.fixed_sigma;
  } else {
    tor_json["fixed_sigma"] = nullptr;
  }
  if (tor.fixed_epsilon.has_value()) {
    tor_json["fixed_epsilon"] = *tor.fixed_epsilon;
  } else {
    tor_json["fixed_epsilon"] = nullptr;
  }
  tor_json["epsilon_sweep"] = tor.epsilon_sweep;
  tor_json["recompute"] = tor.recompute == SigmaRecompute::kOnce ? "once" : "per-epoch";
  j["tor"] = tor_json;
  j["margin"] = margin;
  return j.dump(2);
}

std::vector<std::string> ExperimentConfig::validate() const {
  std::vector<std::string> issues = parse_issues;
  if (trials < 1) issues.push_back("trials must be at least 1");
  if (variant_names.empty()) issues.push_back("variant list is empty");
  std::set<std::string> seen;
  for (const std::string& name_entry : variant_names) {
    if (!parse_variant(name_entry).has_value()) {
      issues.push_back("unknown variant '" + name_entry + "'");
    }
    if (!seen.insert(name_entry).second) {
      issues.push_back("variant '" + name_entry + "' listed twice");
    }
  }
  if (noise_stds.empty()) issues.push_back("noise_stds is empty");
  for (double s : noise_stds) {
    if (s < 0.0 || !std::isfinite(s)) {
      issues.push_back("noise std " + short_number(s) + " is invalid");
    }
  }
  if (dataset.kind == "sinusoid") {
    if (dataset.n == 0) issues.push_back("dataset.n must be positive");
    const double high = dataset.x_high == 0.0 && dataset.x_low == 0.0
                            ? 2.0 * std::numbers::pi
                            : dataset.x_high;
    if (!(dataset.x_low < high)) issues.push_back("dataset x range is empty");
  } else if (dataset.kind == "file") {
    if (dataset.path.empty()) issues.push_back("dataset.path required for kind 'file'");
  } else {
    issues.push_back("dataset.kind must be 'sinusoid' or 'file', got '" + dataset.kind + "'");
  }
  if (dataset.test_fraction < 0.0 || dataset.test_fraction >= 1.0) {
    issues.push_back("dataset.test_fraction must lie in [0, 1)");
  }
  validate_stage(teacher, "teacher", issues);
  validate_stage(student, "student", issues);
  if (!(default_alpha > 0.0)) issues.push_back("alpha.default must be positive");
  for (const auto& [key, value] : alpha_by_std) {
    if (!(value > 0.0)) {
      issues.push_back("alpha.by_std[" + short_number(key) + "] must be positive");
    }
  }
  auto check_weights = [&issues](const CompositeWeights& w, const std::string& scope) {
    if (w.c_tor < 0.0 || w.c_d < 0.0) issues.push_back(scope + ": weights must be non-negative");
    if (w.c_tor == 0.0 && w.c_d == 0.0) issues.push_back(scope + ": weights cannot both be zero");
  };
  check_weights(default_weights, "weights.default");
  for (const auto& [key, value] : weights_by_std) {
    check_weights(value, "weights.by_std[" + short_number(key) + "]");
  }
  if (margin < 0.0) issues.push_back("margin must be non-negative");
  if (tor.fixed_sigma.has_value() && !(*tor.fixed_sigma > 0.0)) {
    issues.push_back("tor.fixed_sigma must be positive");
  }
  if (tor.fixed_epsilon.has_value() && !(*tor.fixed_epsilon > 0.0)) {
    issues.push_back("tor.fixed_epsilon must be positive");
  }
  for (double eps : tor.epsilon_sweep) {
    if (!(eps > 0.0)) issues.push_back("tor.epsilon_sweep entries must be positive");
  }
  if (!tor.epsilon_sweep.empty() && tor.fixed_epsilon.has_value()) {
    issues.push_back("tor.fixed_epsilon and tor.epsilon_sweep are mutually exclusive");
  }
  return issues;
}

void ExperimentConfig::ensure_valid() const {
  const std::vector<std::string> issues = validate();
  if (issues.empty()) return;
  std::string message = "invalid experiment config:";
  for (const std::string& issue : issues) message += "\n  - " + issue;
  throw ValidationError(message);
}

double ExperimentConfig::alpha_for(double noise_std) const {
  const auto it = alpha_by_std.find(noise_std);
  return it == alpha_by_std.end() ? default_alpha : it->second;
}

CompositeWeights ExperimentConfig::weights_for(double noise_std) const {
  const auto it = weights_by_std.find(noise_std);
  return it == weights_by_std.end() ? default_weights : it->second;
}

std::vector<VariantTag> ExperimentConfig::resolved_variants() const {
  std::vector<VariantTag> tags;
  for (const std::string& name_entry : variant_names) {
    const std::optional<VariantTag> tag = parse_variant(name_entry);
    if (!tag.has_value()) throw ValidationError("unknown variant '" + name_entry + "'");
    tags.push_back(*tag);
  }
  return tags;
}

MethodVariant ExperimentConfig::method_for(VariantTag tag, double noise_std,
                                           std::optional<double> sweep_epsilon) const {
  MethodVariant method;
  method.tag = tag;
  method.weights = weights_for(noise_std);
  method.alpha = alpha_for(noise_std);
  method.margin = margin;
  method.penalty = tor.penalty;
  method.fixed_sigma = tor.fixed_sigma;
  method.fixed_epsilon = sweep_epsilon.has_value() ? sweep_epsilon : tor.fixed_epsilon;
  method.recompute = tor.recompute;
  return method;
}

TrainConfig ExperimentConfig::teacher_train_config(std::uint64_t seed) const {
  TrainConfig config;
  config.epochs = teacher.epochs;
  config.batch_size = teacher.batch_size;
  config.base_lr = teacher.base_lr;
  config.lr_drop_epochs = teacher.lr_drop_epochs;
  config.lr_drop_factor = teacher.lr_drop_factor;
  config.dropout_rate = teacher.dropout_rate;
  config.seed = seed;
  config.variant.tag = VariantTag::kTeacher;
  config.hidden_width = teacher.hidden_width;
  return config;
}

TrainConfig ExperimentConfig::student_train_config(std::uint64_t seed,
                                                   MethodVariant variant) const {
  TrainConfig config;
  config.epochs = student.epochs;
  config.batch_size = student.batch_size;
  config.base_lr = student.base_lr;
  config.lr_drop_epochs = student.lr_drop_epochs;
  config.lr_drop_factor = student.lr_drop_factor;
  config.dropout_rate = student.dropout_rate;
  config.seed = seed;
  config.variant = std::move(variant);
  config.hidden_width = student.hidden_width;
  return config;
}

std::string TrialReport::to_json() const {
  json j;
  j["cell"] = cell;
  j["noise_std"] = noise_std;
  j["variant"] = variant_name(variant);
  j["alpha"] = alpha;
  j["c_tor"] = weights.c_tor;
  j["c_d"] = weights.c_d;
  if (fixed_epsilon.has_value()) {
    j["fixed_epsilon"] = *fixed_epsilon;
  } else {
    j["fixed_epsilon"] = nullptr;
  }
  j["trial"] = trial_index;
  j["seed"] = seed;
  put_number(j, "mae_noisy", mae_noisy);
  put_number(j, "mae_clean", mae_clean);
  j["head_mae_noisy"] = number_array(head_mae_noisy);
  j["head_mae_clean"] = number_array(head_mae_clean);
  put_number(j, "sigma_hat", sigma_hat);
  put_number(j, "epsilon", epsilon);
  j["wall_seconds"] = wall_seconds;
  j["failed"] = failed;
  j["failure_reason"] = failure_reason;
  return j.dump();
}

TrialReport TrialReport::from_json(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError(std::string("trial record: ") + e.what());
  }
  TrialReport report;
  try {
    report.cell = j.at("cell").get<std::string>();
    report.noise_std = j.at("noise_std").get<double>();
    const std::string variant_text = j.at("variant").get<std::string>();
    const std::optional<VariantTag> tag = parse_variant(variant_text);
    if (!tag.has_value()) throw ParseError("trial record: unknown variant '" + variant_text + "'");
    report.variant = *tag;
    report.alpha = j.at("alpha").get<double>();
    report.weights.c_tor = j.at("c_tor").get<double>();
    report.weights.c_d = j.at("c_d").get<double>();
    if (j.contains("fixed_epsilon") && !j.at("fixed_epsilon").is_null()) {
      report.fixed_epsilon = j.at("fixed_epsilon").get<double>();
    }
    report.trial_index = j.at("trial").get<std::size_t>();
    report.seed = j.at("seed").get<std::uint64_t>();
    report.mae_noisy = take_number(j, "mae_noisy");
    report.mae_clean = take_number(j, "mae_clean");
    report.head_mae_noisy = take_number_array(j, "head_mae_noisy");
    report.head_mae_clean = take_number_array(j, "head_mae_clean");
    report.sigma_hat = take_number(j, "sigma_hat");
    report.epsilon = take_number(j, "epsilon");
    report.wall_seconds = j.at("wall_seconds").get<double>();
    report.failed = j.at("failed").get<bool>();
    report.failure_reason = j.at("failure_reason").get<std::string>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("trial record: ") + e.what());
  }
  return report;
}

std::uint64_t cell_trial_seed(std::uint64_t master_seed, const std::string& tag,
                              std::size_t trial) {
  return derive_seed(derive_seed(master_seed, tag), "trial", trial);
}

std::string make_cell_label(double noise_std, VariantTag tag, double alpha,
                            const CompositeWeights& weights,
                            std::optional<double> sweep_epsilon) {
  std::string label = "std=" + short_number(noise_std) + "|" + variant_name(tag);
  if (variant_uses_threshold(tag)) {
    if (sweep_epsilon.has_value()) {
      label += "|eps=" + short_number(*sweep_epsilon);
    } else {
      label += "|alpha=" + short_number(alpha);
    }
  }
  if (tag == VariantTag::kOursFull) {
    label += "|ctor=" + short_number(weights.c_tor) + "|cd=" + short_number(weights.c_d);
  }
  return label;
}

std::string label_to_filename(const std::string& label) {
  std::string out = label;
  for (char& c : out) {
    if (c == '|') c = '_';
    if (c == '=') c = '-';
  }
  return out;
}

std::vector<CellAggregate> aggregate_reports(const std::vector<TrialReport>& reports) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const TrialReport*>> grouped;
  for (const TrialReport& report : reports) {
    auto [it, inserted] = grouped.try_emplace(report.cell);
    if (inserted) order.push_back(report.cell);
    it->second.push_back(&report);
  }
  std::vector<CellAggregate> aggregates;
  aggregates.reserve(order.size());
  for (const std::string& label : order) {
    const std::vector<const TrialReport*>& rows = grouped.at(label);
    CellAggregate agg;
    agg.cell = label;
    agg.noise_std = rows.front()->noise_std;
    agg.variant = rows.front()->variant;
    agg.alpha = rows.front()->alpha;
    agg.weights = rows.front()->weights;
    agg.fixed_epsilon = rows.front()->fixed_epsilon;
    std::vector<double> noisy;
    std::vector<double> clean;
    for (const TrialReport* row : rows) {
      if (row->failed) {
        ++agg.failed;
        continue;
      }
      noisy.push_back(row->mae_noisy);
      clean.push_back(row->mae_clean);
    }
    const MeanStd noisy_stats = mean_and_std(noisy);
    const MeanStd clean_stats = mean_and_std(clean);
    agg.count = noisy_stats.count;
    agg.mean_noisy = noisy_stats.mean;
    agg.std_noisy = noisy_stats.stddev;
    agg.mean_clean = clean_stats.mean;
    agg.std_clean = clean_stats.stddev;
    aggregates.push_back(std::move(agg));
  }
  return aggregates;
}

void write_trial_reports(const std::string& path, const std::vector<TrialReport>& reports) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open " + path + " for writing");
  for (const TrialReport& report : reports) out << report.to_json() << '\n';
  if (!out) throw ParseError("failed writing trial reports to " + path);
}

std::vector<TrialReport> load_trial_reports(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open trial report file " + path);
  std::vector<TrialReport> reports;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    reports.push_back(TrialReport::from_json(line));
  }
  return reports;
}

std::string render_cells_csv(const std::vector<CellAggregate>& aggregates) {
  std::string out =
      "cell,noise_std,variant,alpha,c_tor,c_d,epsilon,count,failed,"
      "mean_noisy,std_noisy,mean_clean,std_clean\n";
  for (const CellAggregate& agg : aggregates) {
    out += agg.cell;
    out += ',' + full_number(agg.noise_std);
    out += ',';
    out += variant_name(agg.variant);
    out += ',' + full_number(agg.alpha);
    out += ',' + full_number(agg.weights.c_tor);
    out += ',' + full_number(agg.weights.c_d);
    out += ',';
    if (agg.fixed_epsilon.has_value()) out += full_number(*agg.fixed_epsilon);
    out += ',' + std::to_string(agg.count);
    out += ',' + std::to_string(agg.failed);
    out += ',' + full_number(agg.mean_noisy);
    out += ',' + full_number(agg.std_noisy);
    out += ',' + full_number(agg.mean_clean);
    out += ',' + full_number(agg.std_clean);
    out += '\n';
  }
  return out;
}

namespace {

std::string format_table_cell(double mean, double stddev) {
  if (!std::isfinite(mean)) return "-";
  char buffer[64];
  if (std::isfinite(stddev)) {
    std::snprintf(buffer, sizeof(buffer), "%.4g +- %.4g", mean * 100.0, stddev * 100.0);
  } else {
    std::snprintf(buffer, sizeof(buffer), "%.4g", mean * 100.0);
  }
  return buffer;
}

std::string render_grid(const std::vector<std::string>& row_labels,
                        const std::vector<std::string>& column_labels,
                        const std::vector<std::vector<std::string>>& cells,
                        const std::string& corner) {
  std::vector<std::size_t> widths(column_labels.size() + 1, 0);
  widths[0] = corner.size();
  for (const std::string& label : row_labels) widths[0] = std::max(widths[0], label.size());
  for (std::size_t c = 0; c < column_labels.size(); ++c) {
    widths[c + 1] = column_labels[c].size();
    for (const auto& row : cells) widths[c + 1] = std::max(widths[c + 1], row[c].size());
  }
  std::string out = pad_to(corner, widths[0]);
  for (std::size_t c = 0; c < column_labels.size(); ++c) {
    out += "  " + pad_to(column_labels[c], widths[c + 1]);
  }
  out += '\n';
  for (std::size_t r = 0; r < row_labels.size(); ++r) {
    out += pad_to(row_labels[r], widths[0]);
    for (std::size_t c = 0; c < column_labels.size(); ++c) {
      out += "  " + pad_to(cells[r][c], widths[c + 1]);
    }
    out += '\n';
  }
  return out;
}

}  // namespace

std::string render_wide_table(const std::vector<CellAggregate>& aggregates,
                              const std::vector<std::string>& column_order, bool use_clean) {
  std::vector<const CellAggregate*> plain;
  std::vector<const CellAggregate*> swept;
  for (const CellAggregate& agg : aggregates) {
    (agg.fixed_epsilon.has_value() ? swept : plain).push_back(&agg);
  }

  // Column set: requested order first, then any variants present but not
  // requested, in first-seen order.
  std::vector<std::string> columns;
  auto add_column = [&columns](const std::string& name_entry) {
    if (std::find(columns.begin(), columns.end(), name_entry) == columns.end()) {
      columns.push_back(name_entry);
    }
  };
  for (const std::string& name_entry : column_order) add_column(name_entry);
  for (const CellAggregate* agg : plain) add_column(variant_name(agg->variant));
  std::vector<std::string> sweep_columns;
  for (const CellAggregate* agg : swept) {
    const std::string name_entry = variant_name(agg->variant);
    if (std::find(sweep_columns.begin(), sweep_columns.end(), name_entry) ==
        sweep_columns.end()) {
      sweep_columns.push_back(name_entry);
    }
  }

  std::string out = "MAE vs ";
  out += use_clean ? "clean" : "noisy";
  out += " targets, cells are mean +- std scaled by 100\n\n";

  if (!plain.empty()) {
    std::vector<double> stds;
    for (const CellAggregate* agg : plain) {
      if (std::find(stds.begin(), stds.end(), agg->noise_std) == stds.end()) {
        stds.push_back(agg->noise_std);
      }
    }
    std::sort(stds.begin(), stds.end());
    std::vector<std::string> row_labels;
    std::vector<std::vector<std::string>> grid;
    for (double s : stds) {
      row_labels.push_back(short_number(s));
      std::vector<std::string> row;
      for (const std::string& column : columns) {
        std::string cell = "-";
        for (const CellAggregate* agg : plain) {
          if (agg->noise_std == s && variant_name(agg->variant) == column) {
            cell = use_clean ? format_table_cell(agg->mean_clean, agg->std_clean)
                             : format_table_cell(agg->mean_noisy, agg->std_noisy);
            break;
          }
        }
        row.push_back(cell);
      }
      grid.push_back(std::move(row));
    }
    out += render_grid(row_labels, columns, grid, "noise_std");
  }

  if (!swept.empty()) {
    if (!plain.empty()) out += '\n';
    out += "threshold sweep\n";
    std::vector<std::pair<double, double>> rows;  // (std, epsilon)
    for (const CellAggregate* agg : swept) {
      const std::pair<double, double> key{agg->noise_std, *agg->fixed_epsilon};
      if (std::find(rows.begin(), rows.end(), key) == rows.end()) rows.push_back(key);
    }
    std::sort(rows.begin(), rows.end());
    std::vector<std::string> row_labels;
    std::vector<std::vector<std::string>> grid;
    for (const auto& [s, eps] : rows) {
      row_labels.push_back("std=" + short_number(s) + " eps=" + short_number(eps));
      std::vector<std::string> row;
      for (const std::string& column : sweep_columns) {
        std::string cell = "-";
        for (const CellAggregate* agg : swept) {
          if (agg->noise_std == s && *agg->fixed_epsilon == eps &&
              variant_name(agg->variant) == column) {
            cell = use_clean ? format_table_cell(agg->mean_clean, agg->std_clean)
                             : format_table_cell(agg->mean_noisy, agg->std_noisy);
            break;
          }
        }
        row.push_back(cell);
      }
      grid.push_back(std::move(row));
    }
    out += render_grid(row_labels, sweep_columns, grid, "cell");
  }
  return out;
}

std::optional<std::pair<double, double>> parse_table_cell(const std::string& cell) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  const double mean = std::strtod(begin, &end);
  if (end == begin) return std::nullopt;
  double stddev = 0.0;
  std::string rest(end);
  const std::size_t pm = rest.find("+-");
  if (pm != std::string::npos) {
    const char* sbegin = rest.c_str() + pm + 2;
    char* send = nullptr;
    stddev = std::strtod(sbegin, &send);
    if (send == sbegin) return std::nullopt;
  }
  return std::make_pair(mean / 100.0, stddev / 100.0);
}

void emit_plot_data(const ExperimentConfig& config, const ExperimentResult& result,
                    const std::string& plots_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(plots_dir);
  json manifest;
  manifest["series"] = json::array();

  auto write_file = [&plots_dir](const std::string& file, const std::string& text) {
    std::ofstream out(fs::path(plots_dir) / file);
    if (!out) throw ParseError("cannot open plot file " + file + " for writing");
    out << text;
  };

  // Teacher residual histograms, one per noise level, with the fitted scale
  // and the rejection threshold recorded for marker lines.
  for (const auto& [noise_std, residuals] : result.teacher_residuals) {
    if (residuals.empty()) continue;
    const std::string file = "residual-hist-std-" + label_to_filename(short_number(noise_std)) + ".csv";
    const double center = median(residuals);
    double sigma_hat = std::numeric_limits<double>::quiet_NaN();
    try {
      sigma_hat = mad_sigma(residuals);
    } catch (const DegenerateScaleError&) {
      // Noise-free data collapses the MAD; the histogram is still useful.
    }
    double lim = 0.0;
    for (double r : residuals) lim = std::max(lim, std::abs(r - center));
    if (lim == 0.0) lim = 1.0;
    constexpr std::size_t kBins = 61;
    const double width = 2.0 * lim / static_cast<double>(kBins);
    std::vector<std::size_t> counts(kBins, 0);
    for (double r : residuals) {
      auto bin = static_cast<std::size_t>((r - (center - lim)) / width);
      if (bin >= kBins) bin = kBins - 1;
      ++counts[bin];
    }
    std::string text = "bin_center,count,gaussian_fit\n";
    for (std::size_t b = 0; b < kBins; ++b) {
      const double bin_center = center - lim + (static_cast<double>(b) + 0.5) * width;
      double fit = std::numeric_limits<double>::quiet_NaN();
      if (std::isfinite(sigma_hat)) {
        const double z = (bin_center - center) / sigma_hat;
        fit = static_cast<double>(residuals.size()) * width *
              std::exp(-0.5 * z * z) / (sigma_hat * std::sqrt(2.0 * std::numbers::pi));
      }
      text += full_number(bin_center);
      text += ',' + std::to_string(counts[b]);
      text += ',' + full_number(fit);
      text += '\n';
    }
    write_file(file, text);
    json entry;
    entry["file"] = file;
    entry["kind"] = "histogram";
    entry["title"] = "teacher residuals, noise std " + short_number(noise_std);
    entry["columns"] = {"bin_center", "count", "gaussian_fit"};
    json params;
    put_number(params, "sigma_hat", sigma_hat);
    put_number(params, "median", center);
    const double alpha = config.alpha_for(noise_std);
    params["alpha"] = alpha;
    params["batch_size"] = config.student.batch_size;
    double epsilon = std::numeric_limits<double>::quiet_NaN();
    if (std::isfinite(sigma_hat)) {
      try {
        epsilon = epsilon_outlier(sigma_hat, alpha, config.student.batch_size);
      } catch (const DomainError&) {
        // Threshold undefined for this (sigma, alpha, B); no marker then.
      }
    }
    put_number(params, "epsilon", epsilon);
    entry["params"] = params;
    manifest["series"].push_back(entry);
  }

  // MAE against swept threshold, one curve per noise level.
  std::vector<double> sweep_stds;
  for (const CellAggregate& agg : result.aggregates) {
    if (agg.fixed_epsilon.has_value() &&
        std::find(sweep_stds.begin(), sweep_stds.end(), agg.noise_std) == sweep_stds.end()) {
      sweep_stds.push_back(agg.noise_std);
    }
  }
  std::sort(sweep_stds.begin(), sweep_stds.end());
  for (double s : sweep_stds) {
    std::vector<const CellAggregate*> points;
    for (const CellAggregate& agg : result.aggregates) {
      if (agg.fixed_epsilon.has_value() && agg.noise_std == s) points.push_back(&agg);
    }
    std::sort(points.begin(), points.end(), [](const CellAggregate* a, const CellAggregate* b) {
      return *a->fixed_epsilon < *b->fixed_epsilon;
    });
    const std::string file = "mae-vs-eps-std-" + label_to_filename(short_number(s)) + ".csv";
    std::string text = "epsilon,mean_clean,std_clean,mean_noisy,std_noisy,count\n";
    for (const CellAggregate* agg : points) {
      text += full_number(*agg->fixed_epsilon);
      text += ',' + full_number(agg->mean_clean);
      text += ',' + full_number(agg->std_clean);
      text += ',' + full_number(agg->mean_noisy);
      text += ',' + full_number(agg->std_noisy);
      text += ',' + std::to_string(agg->count);
      text += '\n';
    }
    write_file(file, text);
    json entry;
    entry["file"] = file;
    entry["kind"] = "curve";
    entry["title"] = "MAE vs threshold, noise std " + short_number(s);
    entry["columns"] = {"epsilon", "mean_clean", "std_clean", "mean_noisy", "std_noisy", "count"};
    entry["params"] = json::object();
    manifest["series"].push_back(entry);
  }

  // Per-epoch loss traces of trial 0 of each cell.
  for (const auto& [label, trace] : result.traces) {
    const std::string file = "trace-" + label_to_filename(label) + ".csv";
    std::string text = "epoch,learning_rate,loss,loss_label,loss_distill,outlier_count\n";
    for (const EpochTrace& line : trace) {
      text += std::to_string(line.epoch);
      text += ',' + full_number(line.learning_rate);
      text += ',' + full_number(line.loss);
      text += ',' + full_number(line.loss_label);
      text += ',' + full_number(line.loss_distill);
      text += ',' + std::to_string(line.outlier_count);
      text += '\n';
    }
    write_file(file, text);
    json entry;
    entry["file"] = file;
    entry["kind"] = "trace";
    entry["title"] = "training trace, " + label;
    entry["columns"] = {"epoch", "learning_rate", "loss", "loss_label", "loss_distill",
                        "outlier_count"};
    entry["params"] = json::object();
    manifest["series"].push_back(entry);
  }

  std::ofstream manifest_out(fs::path(plots_dir) / "manifest.json");
  if (!manifest_out) throw ParseError("cannot open plot manifest for writing");
  manifest_out << manifest.dump(2) << '\n';
}

}  // namespace distreg
