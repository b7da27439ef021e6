// Copyright (c) 2026 distreg contributors
// SPDX-License-Identifier: Apache-2.0

#include "distreg/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include "distreg/errors.hpp"
#include "distreg/rng.hpp"

namespace distreg {
namespace {

Matrix column_matrix(const std::vector<double>& values) {
  Matrix out(values.size(), 1);
  for (std::size_t i = 0; i < values.size(); ++i) out(i, 0) = values[i];
  return out;
}

void check_length(std::size_t expected, std::size_t got, const char* field) {
  if (got != 0 && got != expected) {
    throw ValidationError(std::string("dataset field ") + field + " has length " +
                          std::to_string(got) + ", expected " + std::to_string(expected));
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream stream(line);
  std::string cell;
  while (std::getline(stream, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_cell(const std::string& cell, std::size_t line_number) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  double value = std::strtod(begin, &end);
  while (end != nullptr && *end == ' ') ++end;
  if (end == begin || end == nullptr || *end != '\0') {
    throw ParseError("non-numeric cell '" + cell + "' at row " + std::to_string(line_number));
  }
  return value;
}

std::string format_full_precision(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

LabeledDataset take_rows(const LabeledDataset& dataset, const std::vector<std::size_t>& rows) {
  LabeledDataset out;
  out.noise_std = dataset.noise_std;
  out.seed = dataset.seed;
  out.x.reserve(rows.size());
  out.t.reserve(rows.size());
  if (dataset.has_clean()) out.clean.reserve(rows.size());
  if (dataset.has_teacher()) out.r_t.reserve(rows.size());
  for (std::size_t r : rows) {
    out.x.push_back(dataset.x[r]);
    out.t.push_back(dataset.t[r]);
    if (dataset.has_clean()) out.clean.push_back(dataset.clean[r]);
    if (dataset.has_teacher()) out.r_t.push_back(dataset.r_t[r]);
  }
  return out;
}

}  // namespace

void LabeledDataset::ensure_consistent() const {
  if (x.size() != t.size()) {
    throw ValidationError("dataset x has length " + std::to_string(x.size()) +
                          " but t has length " + std::to_string(t.size()));
  }
  check_length(x.size(), clean.size(), "clean");
  check_length(x.size(), r_t.size(), "r_t");
  if (noise_std < 0.0) throw ValidationError("dataset noise_std is negative");
}

Matrix LabeledDataset::x_matrix() const { return column_matrix(x); }
Matrix LabeledDataset::t_matrix() const { return column_matrix(t); }

Matrix LabeledDataset::clean_matrix() const {
  if (!has_clean()) throw StateError("dataset has no clean targets");
  return column_matrix(clean);
}

Matrix LabeledDataset::teacher_matrix() const {
  if (!has_teacher()) throw StateError("dataset has no teacher predictions");
  return column_matrix(r_t);
}

std::vector<double> LabeledDataset::teacher_residuals() const {
  if (!has_teacher()) throw StateError("dataset has no teacher predictions");
  std::vector<double> res(size());
  for (std::size_t i = 0; i < size(); ++i) res[i] = t[i] - r_t[i];
  return res;
}

double default_x_high() { return 2.0 * std::numbers::pi; }

LabeledDataset make_sinusoid(std::size_t n, double noise_std,
                             std::pair<double, double> x_range, std::uint64_t seed) {
  if (n == 0) throw DomainError("make_sinusoid: n must be positive");
  if (noise_std < 0.0) throw DomainError("make_sinusoid: noise_std must be non-negative");
  if (!(x_range.first < x_range.second)) {
    throw DomainError("make_sinusoid: empty x range");
  }
  Rng x_stream(derive_seed(seed, "x"));
  std::vector<double> x = x_stream.uniform_vector(n, x_range.first, x_range.second);
  return sinusoid_from_inputs(std::move(x), noise_std, seed);
}

LabeledDataset make_sinusoid(std::size_t n, double noise_std, std::uint64_t seed) {
  return make_sinusoid(n, noise_std, {kDefaultXLow, default_x_high()}, seed);
}

LabeledDataset sinusoid_from_inputs(std::vector<double> x, double noise_std,
                                    std::uint64_t seed) {
  if (x.empty()) throw DomainError("sinusoid_from_inputs: no inputs");
  if (noise_std < 0.0) throw DomainError("sinusoid_from_inputs: noise_std must be non-negative");
  LabeledDataset data;
  data.noise_std = noise_std;
  data.seed = seed;
  data.x = std::move(x);
  const std::size_t n = data.x.size();
  data.clean.resize(n);
  for (std::size_t i = 0; i < n; ++i) data.clean[i] = std::sin(data.x[i]);
  data.t = data.clean;
  if (noise_std > 0.0) {
    Rng noise_stream(derive_seed(seed, "noise"));
    for (std::size_t i = 0; i < n; ++i) data.t[i] += noise_stream.normal(0.0, noise_std);
  }
  return data;
}

LabeledDataset attach_teacher_predictions(LabeledDataset dataset, const Network& teacher) {
  dataset.ensure_consistent();
  if (teacher.input_width() != 1) {
    throw DimensionError("attach_teacher_predictions: teacher input width is " +
                         std::to_string(teacher.input_width()) + ", dataset is 1-D");
  }
  Matrix predictions = teacher.predict(dataset.x_matrix());
  if (predictions.cols() != 1) {
    throw DimensionError("attach_teacher_predictions: teacher must have a single head");
  }
  dataset.r_t.resize(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) dataset.r_t[i] = predictions(i, 0);
  return dataset;
}

LabeledDataset load_tabular(const std::string& path, const TabularSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset file " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("dataset file " + path + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const std::vector<std::string> header = split_csv_line(line);
  auto column_of = [&header](const std::string& name) -> std::ptrdiff_t {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return static_cast<std::ptrdiff_t>(i);
    }
    return -1;
  };
  const std::ptrdiff_t x_col = column_of(schema.x);
  const std::ptrdiff_t t_col = column_of(schema.t);
  const std::ptrdiff_t clean_col = column_of(schema.clean);
  const std::ptrdiff_t r_t_col = column_of(schema.r_t);
  if (x_col < 0 || t_col < 0) {
    throw ParseError("dataset file " + path + " is missing required columns '" + schema.x +
                     "' and/or '" + schema.t + "'");
  }

  LabeledDataset data;
  std::size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw ParseError("row " + std::to_string(line_number) + " has " +
                       std::to_string(cells.size()) + " cells, header has " +
                       std::to_string(header.size()));
    }
    data.x.push_back(parse_cell(cells[static_cast<std::size_t>(x_col)], line_number));
    data.t.push_back(parse_cell(cells[static_cast<std::size_t>(t_col)], line_number));
    if (clean_col >= 0) {
      data.clean.push_back(parse_cell(cells[static_cast<std::size_t>(clean_col)], line_number));
    }
    if (r_t_col >= 0) {
      data.r_t.push_back(parse_cell(cells[static_cast<std::size_t>(r_t_col)], line_number));
    }
  }
  if (data.x.empty()) throw ParseError("dataset file " + path + " has a header but no rows");
  data.ensure_consistent();
  return data;
}

void save_tabular(const LabeledDataset& dataset, const std::string& path,
                  const TabularSchema& schema) {
  dataset.ensure_consistent();
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open " + path + " for writing");
  out << schema.x << ',' << schema.t;
  if (dataset.has_clean()) out << ',' << schema.clean;
  if (dataset.has_teacher()) out << ',' << schema.r_t;
  out << '\n';
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    out << format_full_precision(dataset.x[i]) << ',' << format_full_precision(dataset.t[i]);
    if (dataset.has_clean()) out << ',' << format_full_precision(dataset.clean[i]);
    if (dataset.has_teacher()) out << ',' << format_full_precision(dataset.r_t[i]);
    out << '\n';
  }
  if (!out) throw ParseError("failed writing dataset to " + path);
}

SplitDataset split_train_test(const LabeledDataset& dataset, double test_fraction,
                              std::uint64_t seed) {
  dataset.ensure_consistent();
  if (!(test_fraction >= 0.0) || test_fraction >= 1.0) {
    throw DomainError("split_train_test: test_fraction must lie in [0, 1)");
  }
  const std::size_t n = dataset.size();
  const auto test_count =
      static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  Rng stream(derive_seed(seed, "split"));
  std::vector<std::size_t> order = stream.permutation(n);
  std::vector<std::size_t> test_rows(order.begin(),
                                     order.begin() + static_cast<std::ptrdiff_t>(test_count));
  std::vector<std::size_t> train_rows(order.begin() + static_cast<std::ptrdiff_t>(test_count),
                                      order.end());
  std::sort(test_rows.begin(), test_rows.end());
  std::sort(train_rows.begin(), train_rows.end());
  return SplitDataset{take_rows(dataset, train_rows), take_rows(dataset, test_rows)};
}

BatchIterator::BatchIterator(const LabeledDataset& dataset, std::size_t batch_size,
                             std::uint64_t shuffle_seed)
    : dataset_(&dataset), batch_size_(batch_size), shuffle_seed_(shuffle_seed) {
  dataset.ensure_consistent();
  if (batch_size == 0) throw DomainError("BatchIterator: batch size must be positive");
  if (dataset.size() == 0) throw DomainError("BatchIterator: empty dataset");
}

std::size_t BatchIterator::batches_per_epoch() const {
  return (dataset_->size() + batch_size_ - 1) / batch_size_;
}

std::vector<Batch> BatchIterator::epoch(std::uint64_t epoch_index) const {
  const std::size_t n = dataset_->size();
  Rng stream(derive_seed(shuffle_seed_, "epoch", epoch_index));
  const std::vector<std::size_t> order = stream.permutation(n);
  std::vector<Batch> batches;
  batches.reserve(batches_per_epoch());
  for (std::size_t start = 0; start < n; start += batch_size_) {
    const std::size_t count = std::min(batch_size_, n - start);
    Batch batch;
    batch.indices.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(start + count));
    batch.x = Matrix(count, 1);
    batch.t = Matrix(count, 1);
    if (dataset_->has_teacher()) batch.r_t = Matrix(count, 1);
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t row = batch.indices[i];
      batch.x(i, 0) = dataset_->x[row];
      batch.t(i, 0) = dataset_->t[row];
      if (dataset_->has_teacher()) batch.r_t(i, 0) = dataset_->r_t[row];
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

std::vector<Batch> BatchIterator::next_epoch() { return epoch(epoch_++); }

}  // namespace distreg
