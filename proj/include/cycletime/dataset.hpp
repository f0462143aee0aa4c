#pragma once

// Process data: three machine settings per shot and the measured cycle time.
//
// A Dataset is an (n x d) input matrix plus an n-vector of targets. The
// injection-moulding schema has d = 3, but nothing below the CSV loader
// depends on that, so the trainers can be exercised on toy problems too.

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cycletime/errors.hpp"
#include "cycletime/numerics.hpp"

namespace cycletime {

inline const std::array<std::string, 4> kProcessColumns = {"mould_temp", "injection_pressure",
                                                           "switchover_pressure", "cycle_time"};

class Dataset {
 public:
  Dataset() = default;

  /// columns holds the d input names followed by the target name.
  Dataset(Matrix inputs, Vector targets, std::vector<std::string> columns = {})
      : inputs_(std::move(inputs)), targets_(std::move(targets)), columns_(std::move(columns)) {
    if (inputs_.rows() != targets_.size()) throw DimensionMismatch("inputs and targets differ in length");
    if (!inputs_.allFinite() || !targets_.allFinite()) throw Error("dataset contains non-finite values");
    if (columns_.empty()) {
      for (Eigen::Index j = 0; j < inputs_.cols(); ++j) columns_.push_back("x" + std::to_string(j + 1));
      columns_.push_back("y");
    }
    if (columns_.size() != static_cast<std::size_t>(inputs_.cols()) + 1) {
      throw DimensionMismatch("column names must cover every input plus the target");
    }
  }

  std::size_t size() const { return static_cast<std::size_t>(targets_.size()); }
  std::size_t dims() const { return static_cast<std::size_t>(inputs_.cols()); }
  bool empty() const { return size() == 0; }

  const Matrix& inputs() const { return inputs_; }
  const Vector& targets() const { return targets_; }
  const std::vector<std::string>& columns() const { return columns_; }

  Dataset subset(std::span<const std::size_t> rows) const {
    Matrix x(static_cast<Eigen::Index>(rows.size()), inputs_.cols());
    Vector y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(rows[i]);
      x.row(static_cast<Eigen::Index>(i)) = inputs_.row(r);
      y(static_cast<Eigen::Index>(i)) = targets_(r);
    }
    return Dataset(std::move(x), std::move(y), columns_);
  }

  /// Rows of `this` followed by rows of `other`.
  Dataset concat(const Dataset& other) const {
    if (other.dims() != dims()) throw DimensionMismatch("cannot concatenate datasets of different width");
    Matrix x(inputs_.rows() + other.inputs_.rows(), inputs_.cols());
    x.topRows(inputs_.rows()) = inputs_;
    x.bottomRows(other.inputs_.rows()) = other.inputs_;
    Vector y(targets_.size() + other.targets_.size());
    y.head(targets_.size()) = targets_;
    y.tail(other.targets_.size()) = other.targets_;
    return Dataset(std::move(x), std::move(y), columns_);
  }

 private:
  Matrix inputs_;
  Vector targets_;
  std::vector<std::string> columns_;
};

/// Min-max scaling of every column onto [-1, 1].
struct NormParams {
  Vector input_min;
  Vector input_max;
  double target_min = -1.0;
  double target_max = 1.0;

  static NormParams identity(std::size_t dims) {
    NormParams p;
    p.input_min = Vector::Constant(static_cast<Eigen::Index>(dims), -1.0);
    p.input_max = Vector::Constant(static_cast<Eigen::Index>(dims), 1.0);
    return p;
  }

  std::size_t dims() const { return static_cast<std::size_t>(input_min.size()); }

  static double to_unit(double v, double lo, double hi) { return 2.0 * (v - lo) / (hi - lo) - 1.0; }
  static double from_unit(double u, double lo, double hi) { return lo + (u + 1.0) * (hi - lo) / 2.0; }

  Vector normalize_input(const Vector& x) const {
    if (x.size() != input_min.size()) throw DimensionMismatch("input width does not match normalization");
    Vector out(x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) out(j) = to_unit(x(j), input_min(j), input_max(j));
    return out;
  }
  Vector denormalize_input(const Vector& u) const {
    if (u.size() != input_min.size()) throw DimensionMismatch("input width does not match normalization");
    Vector out(u.size());
    for (Eigen::Index j = 0; j < u.size(); ++j) out(j) = from_unit(u(j), input_min(j), input_max(j));
    return out;
  }
  double normalize_target(double y) const { return to_unit(y, target_min, target_max); }
  double denormalize_target(double u) const { return from_unit(u, target_min, target_max); }

  /// Factor converting a mean squared error in normalized target units to s^2.
  double target_mse_scale() const {
    const double half = (target_max - target_min) / 2.0;
    return half * half;
  }

  Dataset apply(const Dataset& d) const {
    Matrix x(d.inputs().rows(), d.inputs().cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) x.row(i) = normalize_input(d.inputs().row(i).transpose()).transpose();
    Vector y = d.targets().unaryExpr([this](double v) { return normalize_target(v); });
    return Dataset(std::move(x), std::move(y), d.columns());
  }

  Dataset invert(const Dataset& d) const {
    Matrix x(d.inputs().rows(), d.inputs().cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) x.row(i) = denormalize_input(d.inputs().row(i).transpose()).transpose();
    Vector y = d.targets().unaryExpr([this](double v) { return denormalize_target(v); });
    return Dataset(std::move(x), std::move(y), d.columns());
  }
};

struct NormalizedDataset {
  Dataset data;
  NormParams params;
};

/// Fits min/max per column and maps the dataset onto [-1, 1].
inline NormalizedDataset normalize(const Dataset& d) {
  if (d.empty()) throw EmptyInput("cannot normalize an empty dataset");
  NormParams p;
  p.input_min = d.inputs().colwise().minCoeff().transpose();
  p.input_max = d.inputs().colwise().maxCoeff().transpose();
  p.target_min = d.targets().minCoeff();
  p.target_max = d.targets().maxCoeff();
  for (std::size_t j = 0; j < d.dims(); ++j) {
    const auto k = static_cast<Eigen::Index>(j);
    if (!(p.input_max(k) > p.input_min(k))) throw ConstantColumn(d.columns()[j]);
  }
  if (!(p.target_max > p.target_min)) throw ConstantColumn(d.columns().back());
  return {p.apply(d), p};
}

inline Dataset denormalize(const Dataset& d, const NormParams& p) { return p.invert(d); }

// ---------------------------------------------------------------------------
// Splitting

struct SplitDataset {
  Dataset train;
  Dataset validation;
  Dataset test;
  std::uint64_t seed = 0;
  bool shuffled = true;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> validation_rows;
  std::vector<std::size_t> test_rows;

  /// Every row again, in train / validation / test order.
  Dataset pooled() const { return train.concat(validation).concat(test); }
};

struct SplitCounts {
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;
};

/// Partitions by explicit row counts, which must add up to the dataset size.
/// With `shuffle` the row order is permuted by a seeded Mersenne twister first;
/// without it the partitions are contiguous in file order.
inline SplitDataset split_counts(const Dataset& d, SplitCounts counts, std::uint64_t seed, bool shuffle = true) {
  if (d.empty()) throw EmptyInput("cannot split an empty dataset");
  if (counts.train + counts.validation + counts.test != d.size()) {
    throw BadRatios("split counts must add up to the number of rows");
  }
  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle) {
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  SplitDataset s;
  s.seed = seed;
  s.shuffled = shuffle;
  const auto b0 = order.begin();
  const auto b1 = b0 + static_cast<std::ptrdiff_t>(counts.train);
  const auto b2 = b1 + static_cast<std::ptrdiff_t>(counts.validation);
  s.train_rows.assign(b0, b1);
  s.validation_rows.assign(b1, b2);
  s.test_rows.assign(b2, order.end());
  s.train = d.subset(s.train_rows);
  s.validation = d.subset(s.validation_rows);
  s.test = d.subset(s.test_rows);
  return s;
}

/// Ratio mode: train and validation sizes are rounded to the nearest row and
/// the test partition takes the remainder.
inline SplitDataset split(const Dataset& d, std::array<double, 3> ratios, std::uint64_t seed, bool shuffle = true) {
  for (double r : ratios) {
    if (!(r > 0.0)) throw BadRatios("every split ratio must be positive");
  }
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) throw BadRatios("split ratios must sum to 1");
  if (d.empty()) throw EmptyInput("cannot split an empty dataset");
  const auto n = static_cast<double>(d.size());
  auto n_train = static_cast<std::size_t>(std::llround(n * ratios[0]));
  auto n_val = static_cast<std::size_t>(std::llround(n * ratios[1]));
  n_train = std::min(n_train, d.size());
  n_val = std::min(n_val, d.size() - n_train);
  return split_counts(d, {n_train, n_val, d.size() - n_train - n_val}, seed, shuffle);
}

/// How a comparison partitions its data: ratios (train, validation, test) or
/// explicit row counts.
struct SplitSpec {
  std::array<double, 3> ratios{0.7, 0.15, 0.15};
  std::optional<SplitCounts> counts;
  bool shuffle = true;

  SplitDataset apply(const Dataset& d, std::uint64_t seed) const {
    return counts ? split_counts(d, *counts, seed, shuffle) : split(d, ratios, seed, shuffle);
  }
};

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc{} && ptr == end && std::isfinite(out);
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace detail

struct CsvOptions {
  /// When false the first row is data and columns are taken by position
  /// (three inputs, then cycle time).
  bool has_header = true;
  /// With a header and require_target = false, a missing cycle_time column is
  /// allowed and the targets are zero-filled (prediction input).
  bool require_target = true;
};

/// Reads the process-data CSV. Columns are located by header name, so extra
/// columns and any column order are accepted. ParseError rows are 1-based data
/// rows (the header does not count); columns are 0-based file columns.
inline Dataset load_csv(std::istream& in, CsvOptions options = {}) {
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lines.empty() && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (detail::trim(line).empty()) continue;
    lines.push_back(std::move(line));
  }
  if (lines.empty()) throw SchemaError("data file is empty");

  std::array<std::size_t, 4> where{0, 1, 2, 3};
  std::size_t columns = 4;
  std::size_t first_data = 0;
  if (options.has_header) {
    const auto header = detail::split_fields(lines.front());
    for (std::size_t k = 0; k < kProcessColumns.size(); ++k) {
      const auto it = std::find_if(header.begin(), header.end(),
                                   [&](std::string_view h) { return detail::lower(h) == kProcessColumns[k]; });
      if (it == header.end()) {
        if (k == 3 && !options.require_target) {
          columns = 3;
          break;
        }
        throw SchemaError("missing column '" + kProcessColumns[k] + "'");
      }
      where[k] = static_cast<std::size_t>(it - header.begin());
    }
    first_data = 1;
  }

  const std::size_t n = lines.size() - first_data;
  if (n == 0) throw SchemaError("data file has a header but no rows");
  Matrix x(static_cast<Eigen::Index>(n), 3);
  Vector y = Vector::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto fields = detail::split_fields(lines[first_data + i]);
    for (std::size_t k = 0; k < columns; ++k) {
      if (where[k] >= fields.size()) throw SchemaError("row " + std::to_string(i + 1) + " has too few columns");
      double v = 0.0;
      if (!detail::parse_double(fields[where[k]], v)) {
        throw ParseError(i + 1, where[k], "'" + std::string(fields[where[k]]) + "' is not a number");
      }
      if (k < 3) {
        x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = v;
      } else {
        y(static_cast<Eigen::Index>(i)) = v;
      }
    }
  }
  return Dataset(std::move(x), std::move(y), {kProcessColumns.begin(), kProcessColumns.end()});
}

inline Dataset load_csv(const std::string& path, CsvOptions options = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot open '" + path + "'");
  return load_csv(in, options);
}

/// Shortest decimal rendering that is still exact: 17 significant digits.
inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_csv(std::ostream& out, const Dataset& d) {
  const auto& cols = d.columns();
  for (std::size_t j = 0; j < cols.size(); ++j) out << (j ? "," : "") << cols[j];
  out << '\n';
  for (Eigen::Index i = 0; i < d.inputs().rows(); ++i) {
    for (Eigen::Index j = 0; j < d.inputs().cols(); ++j) out << format_real(d.inputs()(i, j)) << ',';
    out << format_real(d.targets()(i)) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Synthetic process data
//
// Inputs are drawn uniformly from
//   mould temperature    T in [20, 80] degC
//   injection pressure   P in [500, 1500] bar
//   switch-over pressure S in [300, 900] bar
// and mapped to centred coordinates u = (T-50)/30, v = (P-1000)/500,
// w = (S-600)/300, each in [-1, 1]. The cycle time in seconds is the fixed
// polynomial in synthetic_cycle_time() below; documented in docs/synthetic-data.md.

struct SyntheticRanges {
  static constexpr double temp_lo = 20.0, temp_hi = 80.0;
  static constexpr double inj_lo = 500.0, inj_hi = 1500.0;
  static constexpr double sw_lo = 300.0, sw_hi = 900.0;
};

inline double synthetic_cycle_time(double mould_temp, double injection_pressure, double switchover_pressure) {
  const double u = (mould_temp - 50.0) / 30.0;
  const double v = (injection_pressure - 1000.0) / 500.0;
  const double w = (switchover_pressure - 600.0) / 300.0;
  return 25.0                                                       //
         + 6.0 * u + 4.5 * u * u + 2.4 * u * u * u + 6.0 * u * u * u * u  //
         - 3.6 * v + 2.4 * v * v                                    //
         + 1.8 * w - 1.5 * w * w                                    //
         - 2.7 * u * v + 2.1 * u * w + 1.5 * v * w + 2.7 * u * v * w  //
         + 3.0 * u * u * v * v - 1.8 * v * v * w - 7.5 * u * u * w * w  //
         + 6.0 * v * v * v * w + 4.5 * u * v * v * v * v              //
         - 4.5 * u * u * u * v * w + 3.6 * u * w * w * w * w;
}

inline Dataset generate_synthetic(std::size_t n, std::uint64_t seed, double noise_sd) {
  if (n < 10) throw std::invalid_argument("synthetic dataset needs at least 10 rows");
  if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) throw std::invalid_argument("noise_sd must be >= 0");
  using R = SyntheticRanges;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> temp(R::temp_lo, R::temp_hi);
  std::uniform_real_distribution<double> inj(R::inj_lo, R::inj_hi);
  std::uniform_real_distribution<double> sw(R::sw_lo, R::sw_hi);
  std::normal_distribution<double> noise(0.0, noise_sd > 0.0 ? noise_sd : 1.0);

  Matrix x(static_cast<Eigen::Index>(n), 3);
  Vector y(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    x(i, 0) = temp(rng);
    x(i, 1) = inj(rng);
    x(i, 2) = sw(rng);
    y(i) = synthetic_cycle_time(x(i, 0), x(i, 1), x(i, 2));
    if (noise_sd > 0.0) y(i) += noise(rng);
  }
  return Dataset(std::move(x), std::move(y), {kProcessColumns.begin(), kProcessColumns.end()});
}

}  // namespace cycletime
