// Copyright (c) 2026 distreg contributors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: full experiment runs, single teacher/student
// training, threshold sweeps, and re-aggregation of stored trial records.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "distreg/checkpoint.hpp"
#include "distreg/data.hpp"
#include "distreg/errors.hpp"
#include "distreg/harness.hpp"
#include "distreg/models.hpp"
#include "distreg/rng.hpp"
#include "distreg/training.hpp"

namespace {

namespace fs = std::filesystem;
using namespace distreg;

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;    // config/validation problems
constexpr int kExitFailures = 2;   // --strict and at least one failed trial
constexpr int kExitRuntime = 3;    // unexpected runtime error

std::string short_number(double value) {
  char buffer[48];
  std::snprintf(buffer, sizeof(buffer), "%g", value);
  return buffer;
}

struct CommonFlags {
  std::string config_path;
  std::string output_dir;
  std::optional<std::size_t> trials;
  std::optional<std::size_t> workers;
  std::optional<std::uint64_t> master_seed;
  bool strict = false;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags, bool config_required) {
  auto* config = cmd->add_option("-c,--config", flags.config_path, "experiment config JSON");
  if (config_required) config->required();
  cmd->add_option("-o,--out", flags.output_dir, "output directory (overrides config)");
  cmd->add_option("-t,--trials", flags.trials, "trials per cell (overrides config)");
  cmd->add_option("-w,--workers", flags.workers, "worker threads (overrides config)");
  cmd->add_option("-s,--seed", flags.master_seed, "master seed (overrides config)");
  cmd->add_flag("--strict", flags.strict, "exit nonzero when any trial fails");
}

ExperimentConfig load_config(const CommonFlags& flags) {
  ExperimentConfig config = flags.config_path.empty()
                                ? ExperimentConfig{}
                                : ExperimentConfig::from_json_file(flags.config_path);
  if (!flags.output_dir.empty()) config.output_dir = flags.output_dir;
  if (flags.trials.has_value()) config.trials = *flags.trials;
  if (flags.workers.has_value()) config.workers = *flags.workers;
  if (flags.master_seed.has_value()) config.master_seed = *flags.master_seed;
  return config;
}

int report_validation(const ExperimentConfig& config) {
  const std::vector<std::string> issues = config.validate();
  if (issues.empty()) return kExitOk;
  std::cerr << "invalid experiment config:\n";
  for (const std::string& issue : issues) std::cerr << "  - " << issue << '\n';
  return kExitInvalid;
}

void print_summary(const ExperimentConfig& config, const ExperimentResult& result) {
  std::size_t failed = 0;
  for (const TrialReport& report : result.reports) {
    if (report.failed) ++failed;
  }
  std::cout << result.reports.size() << " trials, " << failed << " failed\n\n";
  std::cout << render_wide_table(result.aggregates, config.variant_names, true) << '\n';
  std::cout << "outputs under " << config.output_dir << "/\n";
  if (failed > 0) {
    std::cout << "failed trials:\n";
    for (const TrialReport& report : result.reports) {
      if (report.failed) {
        std::cout << "  " << report.cell << " trial " << report.trial_index << ": "
                  << report.failure_reason << '\n';
      }
    }
  }
}

int run_full(const ExperimentConfig& config, bool strict) {
  const int validation = report_validation(config);
  if (validation != kExitOk) return validation;
  const ExperimentResult result = run_experiment(config);
  write_outputs(config, result);
  print_summary(config, result);
  for (const TrialReport& report : result.reports) {
    if (report.failed && strict) return kExitFailures;
  }
  return kExitOk;
}

/// Builds the per-trial dataset exactly the way the harness does, so one-off
/// CLI runs reproduce harness trial rows bitwise for equal seeds.
SplitDataset cli_dataset(const ExperimentConfig& config, double noise_std) {
  const std::string std_tag = "std=" + short_number(noise_std);
  const std::uint64_t data_seed = cell_trial_seed(config.master_seed, "data|" + std_tag, 0);
  LabeledDataset full;
  if (config.dataset.kind == "file") {
    full = load_tabular(config.dataset.path);
    full.seed = data_seed;
  } else {
    const double high = config.dataset.x_high == 0.0 && config.dataset.x_low == 0.0
                            ? default_x_high()
                            : config.dataset.x_high;
    if (config.dataset.shared_inputs) {
      Rng inputs(derive_seed(config.master_seed, "inputs"));
      full = sinusoid_from_inputs(
          inputs.uniform_vector(config.dataset.n, config.dataset.x_low, high), noise_std,
          data_seed);
    } else {
      full = make_sinusoid(config.dataset.n, noise_std, {config.dataset.x_low, high}, data_seed);
    }
  }
  return split_train_test(full, config.dataset.test_fraction, data_seed);
}

void print_evaluation(const char* label, const Evaluation& evaluation) {
  std::cout << label << ": MAE " << evaluation.mae_noisy << " (noisy)";
  if (std::isfinite(evaluation.mae_clean)) {
    std::cout << ", " << evaluation.mae_clean << " (clean)";
  }
  std::cout << " over " << evaluation.sample_count << " samples\n";
}

int run_train_teacher(const ExperimentConfig& config, double noise_std,
                      const std::string& out_path) {
  const int validation = report_validation(config);
  if (validation != kExitOk) return validation;
  SplitDataset split = cli_dataset(config, noise_std);
  const std::string std_tag = "std=" + short_number(noise_std);
  const std::uint64_t seed = cell_trial_seed(config.master_seed, "teacher|" + std_tag, 0);
  TrainResult trained = train_teacher(split.train, config.teacher_train_config(seed));
  const LabeledDataset& eval_set = split.test.size() > 0 ? split.test : split.train;
  print_evaluation("teacher", evaluate(trained.network, eval_set));

  nlohmann::json meta;
  meta["role"] = "teacher";
  meta["seed"] = seed;
  meta["noise_std"] = noise_std;
  meta["spec"] =
      nlohmann::json::parse(resolved_teacher_spec(config.teacher_train_config(seed)).to_json());
  fs::path path(out_path);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  checkpoint_from_network(trained.network, meta.dump()).save(path);
  std::cout << "checkpoint written to " << out_path << '\n';
  return kExitOk;
}

Network teacher_from_checkpoint(const std::string& path) {
  const Checkpoint checkpoint = Checkpoint::load(path);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(checkpoint.meta_json);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("teacher checkpoint metadata: ") + e.what());
  }
  if (!meta.contains("spec")) {
    throw ParseError("teacher checkpoint metadata is missing the architecture");
  }
  const MlpSpec spec = MlpSpec::from_json(meta.at("spec").dump());
  const std::uint64_t seed = meta.value("seed", std::uint64_t{0});
  Network teacher = build_teacher(derive_seed(seed, "init"), spec);
  load_into_network(checkpoint, teacher);
  return teacher;
}

int run_train_student(const ExperimentConfig& config, const std::string& variant_text,
                      double noise_std, const std::string& teacher_path,
                      const std::string& out_path) {
  const int validation = report_validation(config);
  if (validation != kExitOk) return validation;
  const std::optional<VariantTag> tag = parse_variant(variant_text);
  if (!tag.has_value() || *tag == VariantTag::kTeacher) {
    std::cerr << "unknown student variant '" << variant_text << "'\n";
    return kExitInvalid;
  }
  SplitDataset split = cli_dataset(config, noise_std);
  LabeledDataset train_set = split.train;
  if (variant_needs_teacher(*tag)) {
    if (teacher_path.empty()) {
      std::cerr << variant_text << " needs --teacher <checkpoint>\n";
      return kExitInvalid;
    }
    const Network teacher = teacher_from_checkpoint(teacher_path);
    train_set = attach_teacher_predictions(std::move(train_set), teacher);
  }
  const MethodVariant method = config.method_for(*tag, noise_std, {});
  const std::string cell = make_cell_label(noise_std, *tag, method.alpha, method.weights, {});
  const std::uint64_t seed = cell_trial_seed(config.master_seed, "student|" + cell, 0);
  TrainResult trained =
      train_student(train_set, nullptr, config.student_train_config(seed, method));
  const LabeledDataset& eval_set = split.test.size() > 0 ? split.test : split.train;
  print_evaluation(variant_text.c_str(), evaluate(trained.network, eval_set));
  if (trained.threshold.has_value()) {
    std::cout << "threshold: sigma_hat " << trained.threshold->sigma_hat << ", epsilon "
              << trained.threshold->epsilon << '\n';
  }
  if (!out_path.empty()) {
    nlohmann::json meta;
    meta["role"] = "student";
    meta["cell"] = cell;
    meta["seed"] = seed;
    meta["noise_std"] = noise_std;
    meta["variant"] = variant_text;
    meta["spec"] = nlohmann::json::parse(
        resolved_student_spec(config.student_train_config(seed, method)).to_json());
    fs::path path(out_path);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    checkpoint_from_network(trained.network, meta.dump()).save(path);
    std::cout << "checkpoint written to " << out_path << '\n';
  }
  return kExitOk;
}

int run_report(const ExperimentConfig& config) {
  const fs::path trials_dir = fs::path(config.output_dir) / "trials";
  if (!fs::exists(trials_dir)) {
    std::cerr << "no trials directory under " << config.output_dir << '\n';
    return kExitInvalid;
  }
  std::vector<TrialReport> reports;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(trials_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  for (const fs::path& file : files) {
    for (TrialReport& report : load_trial_reports(file.string())) {
      reports.push_back(std::move(report));
    }
  }
  if (reports.empty()) {
    std::cerr << "no trial records found under " << trials_dir << '\n';
    return kExitInvalid;
  }
  const std::vector<CellAggregate> aggregates = aggregate_reports(reports);
  const fs::path tables_dir = fs::path(config.output_dir) / "tables";
  fs::create_directories(tables_dir);
  {
    std::ofstream out(tables_dir / "cells.csv");
    out << render_cells_csv(aggregates);
  }
  {
    std::ofstream out(tables_dir / "table-clean.txt");
    out << render_wide_table(aggregates, config.variant_names, true);
  }
  {
    std::ofstream out(tables_dir / "table-noisy.txt");
    out << render_wide_table(aggregates, config.variant_names, false);
  }
  std::cout << render_wide_table(aggregates, config.variant_names, true) << '\n';
  std::cout << "tables rewritten under " << tables_dir.string() << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"regression distillation benchmark"};
  app.require_subcommand(1);

  CommonFlags run_flags;
  CLI::App* run_cmd = app.add_subcommand("run", "run a full experiment from a config");
  add_common_flags(run_cmd, run_flags, true);

  CommonFlags sweep_flags;
  std::vector<double> sweep_epsilons;
  std::optional<double> sweep_sigma;
  CLI::App* sweep_cmd =
      app.add_subcommand("sweep-threshold", "run with one cell per rejection threshold");
  add_common_flags(sweep_cmd, sweep_flags, true);
  sweep_cmd->add_option("-e,--epsilons", sweep_epsilons, "thresholds to sweep")
      ->delimiter(',');
  sweep_cmd->add_option("--fixed-sigma", sweep_sigma, "bypass the scale estimate");

  CommonFlags teacher_flags;
  double teacher_std = 3.0;
  std::string teacher_out = "teacher.ckpt";
  CLI::App* teacher_cmd = app.add_subcommand("train-teacher", "train one teacher network");
  add_common_flags(teacher_cmd, teacher_flags, true);
  teacher_cmd->add_option("--std", teacher_std, "label noise standard deviation");
  teacher_cmd->add_option("--ckpt", teacher_out, "checkpoint output path");

  CommonFlags student_flags;
  std::string student_variant = "ours-full";
  double student_std = 3.0;
  std::string student_teacher;
  std::string student_out;
  CLI::App* student_cmd = app.add_subcommand("train-student", "train one student network");
  add_common_flags(student_cmd, student_flags, true);
  student_cmd->add_option("--variant", student_variant, "student recipe name");
  student_cmd->add_option("--std", student_std, "label noise standard deviation");
  student_cmd->add_option("--teacher", student_teacher, "teacher checkpoint path");
  student_cmd->add_option("--ckpt", student_out, "checkpoint output path");

  CommonFlags report_flags;
  CLI::App* report_cmd =
      app.add_subcommand("report", "re-aggregate stored trial records into tables");
  add_common_flags(report_cmd, report_flags, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      return run_full(load_config(run_flags), run_flags.strict);
    }
    if (sweep_cmd->parsed()) {
      ExperimentConfig config = load_config(sweep_flags);
      if (!sweep_epsilons.empty()) config.tor.epsilon_sweep = sweep_epsilons;
      if (sweep_sigma.has_value()) config.tor.fixed_sigma = sweep_sigma;
      if (config.tor.epsilon_sweep.empty()) {
        std::cerr << "sweep-threshold needs --epsilons or tor.epsilon_sweep in the config\n";
        return kExitInvalid;
      }
      return run_full(config, sweep_flags.strict);
    }
    if (teacher_cmd->parsed()) {
      return run_train_teacher(load_config(teacher_flags), teacher_std, teacher_out);
    }
    if (student_cmd->parsed()) {
      return run_train_student(load_config(student_flags), student_variant, student_std,
                               student_teacher, student_out);
    }
    if (report_cmd->parsed()) {
      ExperimentConfig config = load_config(report_flags);
      if (report_flags.output_dir.empty() && report_flags.config_path.empty()) {
        std::cerr << "report needs --out or --config to locate the trial records\n";
        return kExitInvalid;
      }
      return run_report(config);
    }
  } catch (const ValidationError& e) {
    std::cerr << e.what() << '\n';
    return kExitInvalid;
  } catch (const ParseError& e) {
    std::cerr << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}
