// Copyright (c) 2026 distreg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "distreg/matrix.hpp"
#include "distreg/network.hpp"

namespace distreg {

/// 1-D regression dataset. `clean` (noise-free targets) and `r_t` (teacher
/// predictions) are optional and empty until filled. Immutable by convention
/// once handed to a training loop.
struct LabeledDataset {
  std::vector<double> x;
  std::vector<double> t;
  std::vector<double> clean;
  std::vector<double> r_t;
  double noise_std = 0.0;
  std::uint64_t seed = 0;

  std::size_t size() const { return x.size(); }
  bool has_clean() const { return !clean.empty(); }
  bool has_teacher() const { return !r_t.empty(); }

  /// Throws ValidationError when the filled vectors disagree in length.
  void ensure_consistent() const;

  Matrix x_matrix() const;
  Matrix t_matrix() const;
  Matrix clean_matrix() const;
  Matrix teacher_matrix() const;

  /// Residuals t - r_t; requires teacher predictions.
  std::vector<double> teacher_residuals() const;
};

inline constexpr double kDefaultXLow = 0.0;
/// One full period of sin(x).
double default_x_high();

/// x ~ U[x_range), clean = sin(x), t = clean + N(0, noise_std^2).
/// Input positions and noise come from independent child streams of `seed`.
LabeledDataset make_sinusoid(std::size_t n, double noise_std,
                             std::pair<double, double> x_range, std::uint64_t seed);
LabeledDataset make_sinusoid(std::size_t n, double noise_std, std::uint64_t seed);

/// Same targets recipe over caller-supplied inputs; used to redraw noise over
/// a shared x grid. The noise stream matches make_sinusoid for equal seeds.
LabeledDataset sinusoid_from_inputs(std::vector<double> x, double noise_std,
                                    std::uint64_t seed);

/// Fills r_t via inference-mode forward of a width-1 network.
LabeledDataset attach_teacher_predictions(LabeledDataset dataset, const Network& teacher);

/// Column-name mapping for tabular import/export.
struct TabularSchema {
  std::string x = "x";
  std::string t = "t";
  std::string clean = "clean";
  std::string r_t = "r_t";
};

/// Comma-separated text with a header row. Requires the x and t columns;
/// clean and r_t load when their columns are present. Values are written
/// with enough digits to round-trip exactly.
LabeledDataset load_tabular(const std::string& path, const TabularSchema& schema = {});
void save_tabular(const LabeledDataset& dataset, const std::string& path,
                  const TabularSchema& schema = {});

struct SplitDataset {
  LabeledDataset train;
  LabeledDataset test;
};

/// Disjoint, exhaustive split; round(test_fraction * n) samples held out,
/// chosen by a seeded permutation.
SplitDataset split_train_test(const LabeledDataset& dataset, double test_fraction,
                              std::uint64_t seed);

/// One training batch as column matrices. r_t is 0x0 when the dataset has no
/// teacher predictions.
struct Batch {
  Matrix x;
  Matrix t;
  Matrix r_t;
  std::vector<std::size_t> indices;

  bool has_teacher() const { return r_t.rows() > 0; }
};

/// Splits a dataset into shuffled batches. The permutation for epoch e is a
/// pure function of (shuffle seed, e), so epochs are reproducible no matter
/// how many times or in what order they are requested.
class BatchIterator {
 public:
  BatchIterator(const LabeledDataset& dataset, std::size_t batch_size,
                std::uint64_t shuffle_seed);

  std::size_t batches_per_epoch() const;
  /// Every sample exactly once; the last batch may be short.
  std::vector<Batch> epoch(std::uint64_t epoch_index) const;
  /// Stateful convenience: yields epoch(counter) and advances the counter.
  std::vector<Batch> next_epoch();
  std::uint64_t current_epoch() const { return epoch_; }

 private:
  const LabeledDataset* dataset_;
  std::size_t batch_size_;
  std::uint64_t shuffle_seed_;
  std::uint64_t epoch_ = 0;
};

}  // namespace distreg
