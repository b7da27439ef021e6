// Copyright (c) 2026 distreg contributors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <numbers>
#include <thread>

#include <json.hpp>

#include "distreg/data.hpp"
#include "distreg/errors.hpp"
#include "distreg/harness.hpp"
#include "distreg/rng.hpp"

namespace distreg {
namespace {

using nlohmann::json;

std::string short_number(double value) {
  char buffer[48];
  std::snprintf(buffer, sizeof(buffer), "%g", value);
  return buffer;
}

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

/// One (noise std, trial) slice of the run: shares its dataset and teacher
/// across every variant cell.
struct TrialUnit {
  std::size_t std_index = 0;
  std::size_t trial = 0;
};

struct UnitOutput {
  std::vector<TrialReport> reports;
  std::vector<std::pair<std::string, std::vector<EpochTrace>>> traces;
  std::vector<std::pair<std::string, Checkpoint>> checkpoints;
  std::vector<std::pair<double, std::vector<double>>> teacher_residuals;
};

std::string teacher_meta(const ExperimentConfig& config, const std::string& cell,
                         std::uint64_t seed, double noise_std) {
  json j;
  j["role"] = "teacher";
  j["cell"] = cell;
  j["seed"] = seed;
  j["noise_std"] = noise_std;
  j["spec"] = json::parse(resolved_teacher_spec(config.teacher_train_config(seed)).to_json());
  return j.dump();
}

std::string student_meta(const ExperimentConfig& config, const std::string& cell,
                         std::uint64_t seed, double noise_std, const MethodVariant& method) {
  json j;
  j["role"] = "student";
  j["cell"] = cell;
  j["seed"] = seed;
  j["noise_std"] = noise_std;
  j["variant"] = variant_name(method.tag);
  j["alpha"] = method.alpha;
  j["c_tor"] = method.weights.c_tor;
  j["c_d"] = method.weights.c_d;
  j["spec"] =
      json::parse(resolved_student_spec(config.student_train_config(seed, method)).to_json());
  return j.dump();
}

TrialReport base_report(const std::string& cell, double noise_std, VariantTag tag,
                        const MethodVariant& method, std::optional<double> sweep_epsilon,
                        std::size_t trial, std::uint64_t seed) {
  TrialReport report;
  report.cell = cell;
  report.noise_std = noise_std;
  report.variant = tag;
  report.alpha = method.alpha;
  report.weights = method.weights;
  report.fixed_epsilon = sweep_epsilon;
  report.trial_index = trial;
  report.seed = seed;
  report.mae_noisy = std::numeric_limits<double>::quiet_NaN();
  report.mae_clean = std::numeric_limits<double>::quiet_NaN();
  report.sigma_hat = std::numeric_limits<double>::quiet_NaN();
  report.epsilon = std::numeric_limits<double>::quiet_NaN();
  return report;
}

void fill_from_evaluation(TrialReport& report, const Evaluation& evaluation) {
  report.mae_noisy = evaluation.mae_noisy;
  report.mae_clean = evaluation.mae_clean;
  report.head_mae_noisy = evaluation.head_mae_noisy;
  report.head_mae_clean = evaluation.head_mae_clean;
}

UnitOutput process_unit(const ExperimentConfig& config, const std::vector<VariantTag>& variants,
                        const std::vector<double>& shared_x, const LabeledDataset& file_data,
                        const TrialUnit& unit) {
  UnitOutput out;
  const double noise_std = config.noise_stds[unit.std_index];
  const std::string std_tag = "std=" + short_number(noise_std);
  const bool keep_artifacts = unit.trial == 0;

  const std::uint64_t data_seed =
      cell_trial_seed(config.master_seed, "data|" + std_tag, unit.trial);
  LabeledDataset full;
  if (config.dataset.kind == "file") {
    full = file_data;
    full.seed = data_seed;
  } else if (config.dataset.shared_inputs) {
    full = sinusoid_from_inputs(shared_x, noise_std, data_seed);
  } else {
    const double high = config.dataset.x_high == 0.0 && config.dataset.x_low == 0.0
                            ? default_x_high()
                            : config.dataset.x_high;
    full = make_sinusoid(config.dataset.n, noise_std, {config.dataset.x_low, high}, data_seed);
  }
  SplitDataset split = split_train_test(full, config.dataset.test_fraction, data_seed);
  const LabeledDataset& eval_set = split.test.size() > 0 ? split.test : split.train;

  bool wants_teacher_column = false;
  bool wants_teacher_predictions = false;
  for (VariantTag tag : variants) {
    if (tag == VariantTag::kTeacher) wants_teacher_column = true;
    if (tag != VariantTag::kTeacher && variant_needs_teacher(tag)) {
      wants_teacher_predictions = true;
    }
  }

  Network teacher(1, 0);
  bool have_teacher = false;
  std::string teacher_failure;
  if (wants_teacher_column || wants_teacher_predictions) {
    const std::string teacher_cell = std_tag + "|" + variant_name(VariantTag::kTeacher);
    const std::uint64_t teacher_seed =
        cell_trial_seed(config.master_seed, "teacher|" + std_tag, unit.trial);
    const MethodVariant teacher_method = config.method_for(VariantTag::kTeacher, noise_std, {});
    TrialReport report = base_report(teacher_cell, noise_std, VariantTag::kTeacher,
                                     teacher_method, {}, unit.trial, teacher_seed);
    const auto start = std::chrono::steady_clock::now();
    try {
      TrainResult trained = train_teacher(split.train, config.teacher_train_config(teacher_seed));
      teacher = std::move(trained.network);
      have_teacher = true;
      fill_from_evaluation(report, evaluate(teacher, eval_set));
      if (keep_artifacts) {
        out.traces.emplace_back(teacher_cell, std::move(trained.trace));
        out.checkpoints.emplace_back(
            teacher_cell,
            checkpoint_from_network(teacher,
                                    teacher_meta(config, teacher_cell, teacher_seed, noise_std)));
      }
    } catch (const std::exception& e) {
      report.failed = true;
      report.failure_reason = e.what();
      teacher_failure = e.what();
    }
    report.wall_seconds = elapsed_seconds(start);
    if (wants_teacher_column) out.reports.push_back(std::move(report));
  }

  LabeledDataset train_with_teacher;
  if (wants_teacher_predictions && have_teacher) {
    train_with_teacher = attach_teacher_predictions(split.train, teacher);
    if (keep_artifacts) {
      out.teacher_residuals.emplace_back(noise_std, train_with_teacher.teacher_residuals());
    }
  }

  for (VariantTag tag : variants) {
    if (tag == VariantTag::kTeacher) continue;
    std::vector<std::optional<double>> epsilons;
    if (variant_uses_threshold(tag) && !config.tor.epsilon_sweep.empty()) {
      for (double eps : config.tor.epsilon_sweep) epsilons.emplace_back(eps);
    } else {
      epsilons.emplace_back(std::nullopt);
    }
    for (const std::optional<double>& sweep_epsilon : epsilons) {
      const MethodVariant method = config.method_for(tag, noise_std, sweep_epsilon);
      const std::string cell =
          make_cell_label(noise_std, tag, method.alpha, method.weights, sweep_epsilon);
      const std::uint64_t seed =
          cell_trial_seed(config.master_seed, "student|" + cell, unit.trial);
      TrialReport report =
          base_report(cell, noise_std, tag, method, sweep_epsilon, unit.trial, seed);
      const auto start = std::chrono::steady_clock::now();
      if (variant_needs_teacher(tag) && !have_teacher) {
        report.failed = true;
        report.failure_reason = teacher_failure.empty()
                                    ? "teacher unavailable"
                                    : "teacher training failed: " + teacher_failure;
        report.wall_seconds = elapsed_seconds(start);
        out.reports.push_back(std::move(report));
        continue;
      }
      const LabeledDataset& train_set =
          variant_needs_teacher(tag) ? train_with_teacher : split.train;
      try {
        TrainResult trained =
            train_student(train_set, nullptr, config.student_train_config(seed, method));
        fill_from_evaluation(report, evaluate(trained.network, eval_set));
        if (trained.threshold.has_value()) {
          report.sigma_hat = trained.threshold->sigma_hat;
          report.epsilon = trained.threshold->epsilon;
        }
        if (keep_artifacts) {
          out.traces.emplace_back(cell, std::move(trained.trace));
          out.checkpoints.emplace_back(
              cell, checkpoint_from_network(trained.network,
                                            student_meta(config, cell, seed, noise_std, method)));
        }
      } catch (const std::exception& e) {
        report.failed = true;
        report.failure_reason = e.what();
      }
      report.wall_seconds = elapsed_seconds(start);
      out.reports.push_back(std::move(report));
    }
  }
  return out;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.ensure_valid();
  const std::vector<VariantTag> variants = config.resolved_variants();

  std::vector<double> shared_x;
  LabeledDataset file_data;
  if (config.dataset.kind == "file") {
    file_data = load_tabular(config.dataset.path);
  } else if (config.dataset.shared_inputs) {
    const double high = config.dataset.x_high == 0.0 && config.dataset.x_low == 0.0
                            ? default_x_high()
                            : config.dataset.x_high;
    Rng inputs(derive_seed(config.master_seed, "inputs"));
    shared_x = inputs.uniform_vector(config.dataset.n, config.dataset.x_low, high);
  }

  std::vector<TrialUnit> units;
  units.reserve(config.noise_stds.size() * config.trials);
  for (std::size_t s = 0; s < config.noise_stds.size(); ++s) {
    for (std::size_t k = 0; k < config.trials; ++k) units.push_back({s, k});
  }

  std::size_t worker_count = config.workers;
  if (worker_count == 0) {
    worker_count = std::max(1u, std::thread::hardware_concurrency());
  }
  worker_count = std::min(worker_count, units.size());

  ExperimentResult result;
  std::mutex sink_mutex;
  std::atomic<std::size_t> next_unit{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t index = next_unit.fetch_add(1);
      if (index >= units.size()) return;
      UnitOutput out = process_unit(config, variants, shared_x, file_data, units[index]);
      std::lock_guard<std::mutex> guard(sink_mutex);
      for (auto& report : out.reports) result.reports.push_back(std::move(report));
      for (auto& trace : out.traces) result.traces.push_back(std::move(trace));
      for (auto& checkpoint : out.checkpoints) {
        result.checkpoints.push_back(std::move(checkpoint));
      }
      for (auto& residuals : out.teacher_residuals) {
        result.teacher_residuals.push_back(std::move(residuals));
      }
    }
  };
  if (worker_count <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(worker_count);
    for (std::size_t w = 0; w < worker_count; ++w) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  // Positional seeds make every row independent of scheduling; sorting makes
  // the stored order deterministic too.
  std::sort(result.reports.begin(), result.reports.end(),
            [](const TrialReport& a, const TrialReport& b) {
              if (a.noise_std != b.noise_std) return a.noise_std < b.noise_std;
              if (a.cell != b.cell) return a.cell < b.cell;
              return a.trial_index < b.trial_index;
            });
  auto by_label = [](const auto& a, const auto& b) { return a.first < b.first; };
  std::sort(result.traces.begin(), result.traces.end(), by_label);
  std::sort(result.checkpoints.begin(), result.checkpoints.end(), by_label);
  std::sort(result.teacher_residuals.begin(), result.teacher_residuals.end(), by_label);
  result.aggregates = aggregate_reports(result.reports);
  return result;
}

void write_outputs(const ExperimentConfig& config, const ExperimentResult& result) {
  namespace fs = std::filesystem;
  const fs::path root(config.output_dir);
  fs::create_directories(root / "trials" / "traces");
  fs::create_directories(root / "tables");
  fs::create_directories(root / "plots");
  fs::create_directories(root / "checkpoints");

  {
    std::ofstream out(root / "config.json");
    if (!out) throw ParseError("cannot write effective config");
    out << config.to_json() << '\n';
  }

  write_trial_reports((root / "trials" / (config.name + ".jsonl")).string(), result.reports);

  for (const auto& [label, trace] : result.traces) {
    std::ofstream out(root / "trials" / "traces" / (label_to_filename(label) + ".jsonl"));
    if (!out) throw ParseError("cannot write trace for " + label);
    for (const EpochTrace& line : trace) {
      json j;
      j["epoch"] = line.epoch;
      j["learning_rate"] = line.learning_rate;
      j["loss"] = line.loss;
      j["loss_label"] = line.loss_label;
      j["loss_distill"] = line.loss_distill;
      j["outlier_count"] = line.outlier_count;
      out << j.dump() << '\n';
    }
  }

  {
    std::ofstream out(root / "tables" / "cells.csv");
    if (!out) throw ParseError("cannot write cells.csv");
    out << render_cells_csv(result.aggregates);
  }
  {
    std::ofstream out(root / "tables" / "table-clean.txt");
    if (!out) throw ParseError("cannot write table-clean.txt");
    out << render_wide_table(result.aggregates, config.variant_names, true);
  }
  {
    std::ofstream out(root / "tables" / "table-noisy.txt");
    if (!out) throw ParseError("cannot write table-noisy.txt");
    out << render_wide_table(result.aggregates, config.variant_names, false);
  }

  emit_plot_data(config, result, (root / "plots").string());

  for (const auto& [label, checkpoint] : result.checkpoints) {
    checkpoint.save(root / "checkpoints" / (label_to_filename(label) + ".ckpt"));
  }
}

}  // namespace distreg
