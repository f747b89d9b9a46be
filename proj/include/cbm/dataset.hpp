#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cbm/math.hpp"
#include "cbm/types.hpp"

namespace cbm {

/// Whether log-likelihoods over this dataset are summed over the weighted
/// patterns or divided by the number of samples.
enum class LlNormalization { TotalSum, PerSample };

/// Empirical distribution stored as distinct binary patterns with integer
/// multiplicities, so exact likelihood sums are order-independent.
struct Dataset {
  Matrix patterns;  // rows = distinct patterns, entries exactly 0 or 1
  Vector weights;   // per-pattern multiplicity, non-negative integers
  std::string name;
  LlNormalization ll_norm = LlNormalization::TotalSum;

  Index num_patterns() const { return patterns.rows(); }
  Index num_variables() const { return patterns.cols(); }
  double total_weight() const { return weights.sum(); }

  Vector column_means() const {
    return patterns.transpose() * weights / total_weight();
  }

  /// Expands each pattern into `weight` identical rows (sample matrix).
  Matrix expand() const {
    Matrix out(static_cast<Index>(std::llround(total_weight())), num_variables());
    Index r = 0;
    for (Index p = 0; p < num_patterns(); ++p) {
      const auto copies = static_cast<Index>(std::llround(weights[p]));
      for (Index k = 0; k < copies; ++k) out.row(r++) = patterns.row(p);
    }
    return out;
  }

  void validate() const {
    require(patterns.rows() == weights.size(), "dataset: weights/pattern count mismatch");
    require(weights.size() > 0 && weights.sum() > 0, "dataset: total weight must be positive");
    for (Index p = 0; p < patterns.rows(); ++p) {
      require(std::abs(weights[p] - std::llround(weights[p])) == 0.0 && weights[p] >= 0.0,
              "dataset: weights must be non-negative integers");
      for (Index i = 0; i < patterns.cols(); ++i)
        require(patterns(p, i) == 0.0 || patterns(p, i) == 1.0, "dataset: entries must be 0 or 1");
    }
  }
};

/// Builds a dataset from possibly repeated sample rows, merging duplicates
/// into multiplicities.
inline Dataset dataset_from_rows(const Matrix& rows, std::string name) {
  require(rows.rows() > 0, "dataset_from_rows: empty sample matrix");
  std::map<std::vector<double>, long> counts;
  for (Index r = 0; r < rows.rows(); ++r) {
    std::vector<double> key(rows.cols());
    for (Index i = 0; i < rows.cols(); ++i) key[static_cast<std::size_t>(i)] = rows(r, i);
    ++counts[key];
  }
  Dataset d;
  d.name = std::move(name);
  d.patterns.resize(static_cast<Index>(counts.size()), rows.cols());
  d.weights.resize(static_cast<Index>(counts.size()));
  Index p = 0;
  for (const auto& [key, count] : counts) {
    for (Index i = 0; i < rows.cols(); ++i) d.patterns(p, i) = key[static_cast<std::size_t>(i)];
    d.weights[p] = static_cast<double>(count);
    ++p;
  }
  d.validate();
  return d;
}

/// All D x D bars-and-stripes patterns, flattened row-major. An orientation
/// (bars or stripes) is drawn uniformly, then every row or column is colored
/// uniformly at random; the all-zero and all-one patterns arise under both
/// orientations and carry multiplicity 2.
inline Dataset generate_bars_stripes(int d) {
  require(d >= 1, "generate_bars_stripes: D must be >= 1");
  const Index n = static_cast<Index>(d) * d;
  const std::uint64_t colorings = 1ULL << d;
  Matrix rows(static_cast<Index>(2 * colorings), n);
  Index r = 0;
  for (int orientation = 0; orientation < 2; ++orientation) {
    for (std::uint64_t bits = 0; bits < colorings; ++bits) {
      for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
          const int line = orientation == 0 ? i : j;
          rows(r, static_cast<Index>(i) * d + j) = (bits >> line) & 1ULL ? 1.0 : 0.0;
        }
      }
      ++r;
    }
  }
  std::ostringstream name;
  name << "bars-stripes-" << d << "x" << d;
  return dataset_from_rows(rows, name.str());
}

/// N patterns with a cyclic run of B ones starting at each position.
inline Dataset generate_shifting_bar(int n, int b) {
  require(n >= 1, "generate_shifting_bar: N must be >= 1");
  require(b > 0 && b < n, "generate_shifting_bar: need 0 < B < N");
  Matrix rows = Matrix::Zero(n, n);
  for (int p = 0; p < n; ++p)
    for (int t = 0; t < b; ++t) rows(p, (p + t) % n) = 1.0;
  std::ostringstream name;
  name << "shifting-bar-" << n << "-" << b;
  return dataset_from_rows(rows, name.str());
}

/// Complements every bit; weights are unchanged.
inline Dataset flip_dataset(const Dataset& d) {
  Dataset out = d;
  out.patterns = Matrix::Ones(d.patterns.rows(), d.patterns.cols()) - d.patterns;
  out.name = "flipped-" + d.name;
  return out;
}

/// Log-likelihood an exact model of the empirical distribution would reach,
/// i.e. sum_p w_p ln(w_p / W) under the dataset's normalization convention.
inline double ll_upper_bound(const Dataset& d) {
  d.validate();
  const double total = d.total_weight();
  double s = 0.0;
  for (Index p = 0; p < d.num_patterns(); ++p) {
    if (d.weights[p] > 0.0) s += d.weights[p] * std::log(d.weights[p] / total);
  }
  if (d.ll_norm == LlNormalization::PerSample) s /= total;
  return s;
}

/// Reads a 0/1 matrix in CSV form. A non-numeric first line is treated as a
/// header. Duplicate rows merge into multiplicities.
inline Dataset read_csv_dataset(std::istream& in, std::string name) {
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t pos = 0;
        const double v = std::stod(cell, &pos);
        row.push_back(v);
      } catch (const std::exception&) {
        numeric = false;
        break;
      }
    }
    if (first && !numeric) {
      first = false;
      continue;  // header row
    }
    first = false;
    require(numeric, "read_csv_dataset: non-numeric cell outside header");
    if (!rows.empty()) require(row.size() == rows.front().size(), "read_csv_dataset: ragged rows");
    rows.push_back(std::move(row));
  }
  require(!rows.empty(), "read_csv_dataset: no data rows");
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) m(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  return dataset_from_rows(m, std::move(name));
}

inline Dataset read_csv_dataset(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "read_csv_dataset: cannot open " + path);
  return read_csv_dataset(in, path);
}

/// Writes the expanded sample matrix as CSV (one sample per row).
inline void write_csv_dataset(std::ostream& out, const Dataset& d) {
  const Matrix rows = d.expand();
  for (Index r = 0; r < rows.rows(); ++r) {
    for (Index c = 0; c < rows.cols(); ++c) {
      if (c > 0) out << ',';
      out << static_cast<int>(rows(r, c));
    }
    out << '\n';
  }
}

inline void write_csv_dataset(const std::string& path, const Dataset& d) {
  std::ofstream out(path);
  require(out.good(), "write_csv_dataset: cannot open " + path);
  write_csv_dataset(out, d);
}

}  // namespace cbm
