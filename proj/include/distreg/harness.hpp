// Copyright (c) 2026 distreg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "distreg/checkpoint.hpp"
#include "distreg/training.hpp"
#include "distreg/variant.hpp"

namespace distreg {

/// Where trial data comes from: a seeded sinusoid generator or a tabular file.
struct DatasetSpec {
  std::string kind = "sinusoid";  // "sinusoid" | "file"
  std::size_t n = 100000;
  double x_low = 0.0;
  double x_high = 0.0;  // 0 with x_low 0 means one full period
  std::string path;     // file mode
  /// Share the input grid across trials and redraw only the noise.
  bool shared_inputs = true;
  double test_fraction = 0.1;
};

/// Per-network training knobs, one for the teacher and one for students.
struct StageConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 1000;
  double base_lr = 1e-3;
  std::vector<std::size_t> lr_drop_epochs;
  double lr_drop_factor = 0.1;
  double dropout_rate = 0.5;
  std::size_t hidden_width = 0;  // 0 keeps the role default
};

/// Outlier-rejection knobs shared by the recipes that use the threshold.
struct TorConfig {
  OutlierPenalty penalty = OutlierPenalty::kSqrtAbs;
  std::optional<double> fixed_sigma;
  std::optional<double> fixed_epsilon;
  /// Non-empty list turns each threshold recipe into one cell per epsilon.
  std::vector<double> epsilon_sweep;
  SigmaRecompute recompute = SigmaRecompute::kOnce;
};

/// Everything one experiment run needs, loadable from a JSON file. Unknown
/// or malformed values are collected rather than thrown so that validate()
/// can report every problem at once.
struct ExperimentConfig {
  std::string name = "experiment";
  DatasetSpec dataset;
  std::vector<double> noise_stds = {0.0, 0.5, 1.0, 3.0, 5.0};
  std::vector<std::string> variant_names;
  std::size_t trials = 20;
  std::uint64_t master_seed = 1;
  std::size_t workers = 0;  // 0 = available cores
  std::string output_dir = "out";
  StageConfig teacher = teacher_stage_defaults();
  StageConfig student = student_stage_defaults();
  double default_alpha = 1.0;
  std::map<double, double> alpha_by_std;
  CompositeWeights default_weights;
  std::map<double, CompositeWeights> weights_by_std;
  TorConfig tor;
  double margin = 0.0;
  std::vector<std::string> parse_issues;

  static StageConfig teacher_stage_defaults();
  static StageConfig student_stage_defaults();

  static ExperimentConfig from_json_text(const std::string& text);
  static ExperimentConfig from_json_file(const std::string& path);
  std::string to_json() const;

  /// All violations, empty when runnable. Includes parse issues.
  std::vector<std::string> validate() const;
  /// Throws ValidationError listing every violation.
  void ensure_valid() const;

  double alpha_for(double noise_std) const;
  CompositeWeights weights_for(double noise_std) const;
  /// Parsed variant list; call after validate() passes.
  std::vector<VariantTag> resolved_variants() const;
  /// The fully resolved recipe for one cell.
  MethodVariant method_for(VariantTag tag, double noise_std,
                           std::optional<double> sweep_epsilon) const;
  TrainConfig teacher_train_config(std::uint64_t seed) const;
  TrainConfig student_train_config(std::uint64_t seed, MethodVariant variant) const;
};

/// One trained-and-evaluated trial of one cell.
struct TrialReport {
  std::string cell;
  double noise_std = 0.0;
  VariantTag variant = VariantTag::kStudentL1;
  double alpha = 1.0;
  CompositeWeights weights;
  std::optional<double> fixed_epsilon;
  std::size_t trial_index = 0;
  std::uint64_t seed = 0;
  double mae_noisy = 0.0;
  double mae_clean = 0.0;
  std::vector<double> head_mae_noisy;
  std::vector<double> head_mae_clean;
  double sigma_hat = 0.0;   // NaN when the recipe has no threshold
  double epsilon = 0.0;     // NaN when the recipe has no threshold
  double wall_seconds = 0.0;
  bool failed = false;
  std::string failure_reason;

  std::string to_json() const;
  static TrialReport from_json(const std::string& line);
};

/// Per-cell mean and unbiased standard deviation over non-failed trials.
struct CellAggregate {
  std::string cell;
  double noise_std = 0.0;
  VariantTag variant = VariantTag::kStudentL1;
  double alpha = 1.0;
  CompositeWeights weights;
  std::optional<double> fixed_epsilon;
  std::size_t count = 0;
  std::size_t failed = 0;
  double mean_noisy = 0.0;
  double std_noisy = 0.0;
  double mean_clean = 0.0;
  double std_clean = 0.0;
};

/// Positional trial seed: depends only on (master, tag, trial index).
std::uint64_t cell_trial_seed(std::uint64_t master_seed, const std::string& tag,
                              std::size_t trial);

std::string make_cell_label(double noise_std, VariantTag tag, double alpha,
                            const CompositeWeights& weights,
                            std::optional<double> sweep_epsilon);
std::string label_to_filename(const std::string& label);

/// Groups by cell label; never merges cells that differ in alpha, weights,
/// or swept epsilon because those are part of the label.
std::vector<CellAggregate> aggregate_reports(const std::vector<TrialReport>& reports);

struct ExperimentResult {
  std::vector<TrialReport> reports;
  std::vector<CellAggregate> aggregates;
  /// Trial-0 traces per cell, for the trace plots.
  std::vector<std::pair<std::string, std::vector<EpochTrace>>> traces;
  /// Trial-0 networks per cell, saved under checkpoints/.
  std::vector<std::pair<std::string, Checkpoint>> checkpoints;
  /// Trial-0 teacher residuals per noise std, for the histogram plots.
  std::vector<std::pair<double, std::vector<double>>> teacher_residuals;
};

/// Runs every (std, variant[, epsilon], trial) cell on a bounded worker
/// pool. Failed trials are recorded and skipped by aggregation; the result
/// is identical for any worker count because all seeds are positional.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Writes trials/, tables/, plots/, checkpoints/ and the effective config
/// under config.output_dir.
void write_outputs(const ExperimentConfig& config, const ExperimentResult& result);

void write_trial_reports(const std::string& path, const std::vector<TrialReport>& reports);
std::vector<TrialReport> load_trial_reports(const std::string& path);

/// Long-form aggregate table, full precision, one row per cell.
std::string render_cells_csv(const std::vector<CellAggregate>& aggregates);
/// Human-readable grid: rows = noise std (or epsilon for sweep cells),
/// columns = variants, cells = "mean +- std" scaled by 100.
std::string render_wide_table(const std::vector<CellAggregate>& aggregates,
                              const std::vector<std::string>& column_order, bool use_clean);
/// Parses one wide-table cell back into (mean, std), undoing the x100 scale.
std::optional<std::pair<double, double>> parse_table_cell(const std::string& cell);

/// Series files plus a manifest.json describing each one.
void emit_plot_data(const ExperimentConfig& config, const ExperimentResult& result,
                    const std::string& plots_dir);

}  // namespace distreg
