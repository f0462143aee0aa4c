#pragma once

// Sugeno-type ANFIS with Gaussian membership functions.
//
// The five layers are evaluated directly:
//   1. memberships  mu_ij(x_i) = exp(-(x_i - c_ij)^2 / (2 sigma_ij^2))
//   2. rule firing  w_k = prod_i mu_{i, a_k(i)}(x_i)        (product T-norm)
//   3. normalization  wn_k = w_k / sum_k w_k
//   4. consequents  f_k = r_k (constant) or p_k . x + r_k (linear)
//   5. output  y = sum_k wn_k f_k
//
// Rules form the complete grid over the per-input MF sets, so a 3-input system
// with m MFs per input has m^3 rules. The grid is enumerated like an odometer:
// the last input's MF index changes fastest.
//
// Training is the hybrid scheme: each epoch fits the consequents by linear
// least squares with the premises frozen, then takes one gradient step on the
// premise (c, sigma) parameters with the consequents frozen.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cycletime/dataset.hpp"
#include "cycletime/errors.hpp"
#include "cycletime/metrics.hpp"
#include "cycletime/numerics.hpp"
#include "cycletime/trainers.hpp"

namespace cycletime::anfis {

inline constexpr double kSigmaFloor = 1e-6;

struct GaussianMF {
  double c = 0.0;
  double sigma = 1.0;
  bool operator==(const GaussianMF&) const = default;
};

inline double gaussian_mf(double x, const GaussianMF& mf) {
  const double d = x - mf.c;
  return std::exp(-(d * d) / (2.0 * mf.sigma * mf.sigma));
}

enum class SugenoOrder { constant, linear };

inline const char* to_string(SugenoOrder o) { return o == SugenoOrder::constant ? "constant" : "linear"; }

inline std::optional<SugenoOrder> parse_order(std::string_view s) {
  if (s == "constant" || s == "zero" || s == "0") return SugenoOrder::constant;
  if (s == "linear" || s == "first" || s == "1") return SugenoOrder::linear;
  return std::nullopt;
}

struct SugenoRule {
  /// MF index per input.
  std::vector<std::size_t> antecedent;
  /// One coefficient per input (all zero and unused for constant order).
  std::vector<double> coefficients;
  double bias = 0.0;
  bool operator==(const SugenoRule&) const = default;
};

class FisModel {
 public:
  FisModel(std::vector<std::vector<GaussianMF>> mfs, std::vector<SugenoRule> rules, SugenoOrder order, NormParams norm)
      : mfs_(std::move(mfs)), rules_(std::move(rules)), order_(order), norm_(std::move(norm)) {
    validate();
  }

  std::size_t n_inputs() const { return mfs_.size(); }
  const std::vector<std::vector<GaussianMF>>& mfs() const { return mfs_; }
  const std::vector<SugenoRule>& rules() const { return rules_; }
  SugenoOrder order() const { return order_; }
  const NormParams& norm() const { return norm_; }

  std::vector<std::size_t> mf_counts() const {
    std::vector<std::size_t> out;
    for (const auto& m : mfs_) out.push_back(m.size());
    return out;
  }

  /// Consequent parameters per rule: n_inputs + 1 for linear order, 1 for constant.
  std::size_t params_per_rule() const { return order_ == SugenoOrder::linear ? n_inputs() + 1 : 1; }

  /// Flat consequents, rule-major; within a rule the coefficients come first
  /// and the bias last.
  Vector consequents() const {
    const auto per = params_per_rule();
    Vector v(static_cast<Eigen::Index>(rules_.size() * per));
    for (std::size_t k = 0; k < rules_.size(); ++k) {
      const auto base = static_cast<Eigen::Index>(k * per);
      if (order_ == SugenoOrder::linear) {
        for (std::size_t i = 0; i < n_inputs(); ++i) v(base + static_cast<Eigen::Index>(i)) = rules_[k].coefficients[i];
      }
      v(base + static_cast<Eigen::Index>(per - 1)) = rules_[k].bias;
    }
    return v;
  }

  FisModel with_consequents(const Vector& v) const {
    const auto per = params_per_rule();
    if (static_cast<std::size_t>(v.size()) != rules_.size() * per) throw DimensionMismatch("consequent vector length");
    auto rules = rules_;
    for (std::size_t k = 0; k < rules.size(); ++k) {
      const auto base = static_cast<Eigen::Index>(k * per);
      if (order_ == SugenoOrder::linear) {
        for (std::size_t i = 0; i < n_inputs(); ++i) rules[k].coefficients[i] = v(base + static_cast<Eigen::Index>(i));
      }
      rules[k].bias = v(base + static_cast<Eigen::Index>(per - 1));
    }
    return FisModel(mfs_, std::move(rules), order_, norm_);
  }

  FisModel with_mfs(std::vector<std::vector<GaussianMF>> mfs) const { return FisModel(std::move(mfs), rules_, order_, norm_); }
  FisModel with_norm(NormParams n) const { return FisModel(mfs_, rules_, order_, std::move(n)); }

 private:
  void validate() const {
    if (mfs_.empty()) throw std::invalid_argument("FIS needs at least one input");
    std::size_t expected = 1;
    for (const auto& m : mfs_) {
      if (m.empty()) throw std::invalid_argument("every input needs at least one membership function");
      for (const auto& mf : m) {
        if (!(mf.sigma > kSigmaFloor * 0.5) || !std::isfinite(mf.c) || !std::isfinite(mf.sigma)) {
          throw std::invalid_argument("membership function spread below floor or non-finite");
        }
      }
      expected *= m.size();
    }
    if (rules_.size() != expected) throw std::invalid_argument("rule base is not the complete MF grid");
    std::vector<bool> seen(expected, false);
    for (const auto& r : rules_) {
      if (r.antecedent.size() != mfs_.size() || r.coefficients.size() != mfs_.size()) {
        throw DimensionMismatch("rule arity does not match input count");
      }
      std::size_t cell = 0;
      for (std::size_t i = 0; i < mfs_.size(); ++i) {
        if (r.antecedent[i] >= mfs_[i].size()) throw std::invalid_argument("antecedent index out of range");
        cell = cell * mfs_[i].size() + r.antecedent[i];
      }
      if (seen[cell]) throw std::invalid_argument("grid cell appears twice in the rule base");
      seen[cell] = true;
    }
    if (norm_.dims() != mfs_.size()) throw DimensionMismatch("normalization width differs from input count");
  }

  std::vector<std::vector<GaussianMF>> mfs_;
  std::vector<SugenoRule> rules_;
  SugenoOrder order_;
  NormParams norm_;
};

/// Places n_mfs[i] Gaussians evenly over ranges[i], endpoints included, with a
/// spread chosen so neighbouring MFs cross at membership 0.5. Consequents start
/// at zero.
inline FisModel grid_partition(std::span<const std::pair<double, double>> ranges, std::span<const std::size_t> n_mfs,
                               SugenoOrder order, std::optional<NormParams> norm = std::nullopt) {
  if (ranges.size() != n_mfs.size() || ranges.empty()) throw DimensionMismatch("one MF count per input range");
  std::vector<std::vector<GaussianMF>> mfs;
  std::size_t n_rules = 1;
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    const auto [lo, hi] = ranges[i];
    if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi)) throw BadRange("input range must satisfy max > min");
    if (n_mfs[i] < 2) throw BadRange("grid partitioning needs at least two MFs per input");
    const double spacing = (hi - lo) / static_cast<double>(n_mfs[i] - 1);
    const double sigma = std::max(spacing / 2.0 / std::sqrt(2.0 * std::log(2.0)), kSigmaFloor);
    std::vector<GaussianMF> set;
    for (std::size_t j = 0; j < n_mfs[i]; ++j) {
      const double c = j + 1 == n_mfs[i] ? hi : lo + spacing * static_cast<double>(j);
      set.push_back({c, sigma});
    }
    mfs.push_back(std::move(set));
    n_rules *= n_mfs[i];
  }

  std::vector<SugenoRule> rules;
  rules.reserve(n_rules);
  std::vector<std::size_t> idx(ranges.size(), 0);
  for (std::size_t k = 0; k < n_rules; ++k) {
    rules.push_back({idx, std::vector<double>(ranges.size(), 0.0), 0.0});
    for (std::size_t i = ranges.size(); i-- > 0;) {
      if (++idx[i] < n_mfs[i]) break;
      idx[i] = 0;
    }
  }
  return FisModel(std::move(mfs), std::move(rules), order, norm.value_or(NormParams::identity(ranges.size())));
}

/// Same MF count on every input.
inline FisModel grid_partition(std::span<const std::pair<double, double>> ranges, std::size_t n_mfs, SugenoOrder order,
                               std::optional<NormParams> norm = std::nullopt) {
  const std::vector<std::size_t> counts(ranges.size(), n_mfs);
  return grid_partition(ranges, counts, order, std::move(norm));
}

namespace detail {

/// Per-sample layer values needed by both evaluation and training.
struct Forward {
  Matrix membership;  // n_inputs x max_mfs (row i, col j = mu_ij)
  Vector firing;      // w_k
  double total = 0.0; // sum_k w_k
  Vector rule_out;    // f_k
  double output = 0.0;
};

inline Forward forward(const FisModel& fis, const Eigen::Ref<const Vector>& x) {
  const std::size_t n = fis.n_inputs();
  Forward f;
  std::size_t widest = 0;
  for (const auto& m : fis.mfs()) widest = std::max(widest, m.size());
  f.membership.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(widest));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < fis.mfs()[i].size(); ++j) {
      f.membership(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          gaussian_mf(x(static_cast<Eigen::Index>(i)), fis.mfs()[i][j]);
    }
  }
  const auto& rules = fis.rules();
  f.firing.resize(static_cast<Eigen::Index>(rules.size()));
  f.rule_out.resize(static_cast<Eigen::Index>(rules.size()));
  for (std::size_t k = 0; k < rules.size(); ++k) {
    double w = 1.0;
    double out = rules[k].bias;
    for (std::size_t i = 0; i < n; ++i) {
      w *= f.membership(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(rules[k].antecedent[i]));
      if (fis.order() == SugenoOrder::linear) out += rules[k].coefficients[i] * x(static_cast<Eigen::Index>(i));
    }
    f.firing(static_cast<Eigen::Index>(k)) = w;
    f.rule_out(static_cast<Eigen::Index>(k)) = out;
  }
  f.total = f.firing.sum();
  if (!(f.total >= 1e-300)) throw DegenerateFiring("no rule fires at this input");
  f.output = f.firing.dot(f.rule_out) / f.total;
  return f;
}

}  // namespace detail

/// Normalized firing strengths wn_k at x (normalized input units).
inline Vector normalized_firing(const FisModel& fis, const Vector& x) {
  const auto f = detail::forward(fis, x);
  return f.firing / f.total;
}

/// With normalized = false the input is in process units and the output in
/// seconds, mapped through the model's NormParams.
inline double evaluate_fis(const FisModel& fis, const Vector& input, bool normalized) {
  if (static_cast<std::size_t>(input.size()) != fis.n_inputs()) {
    throw DimensionMismatch("input has " + std::to_string(input.size()) + " components, expected " +
                            std::to_string(fis.n_inputs()));
  }
  if (normalized) return detail::forward(fis, input).output;
  return fis.norm().denormalize_target(detail::forward(fis, fis.norm().normalize_input(input)).output);
}

/// Outputs for a batch in normalized units.
inline Vector predict(const FisModel& fis, const Matrix& inputs) {
  if (static_cast<std::size_t>(inputs.cols()) != fis.n_inputs()) throw DimensionMismatch("input width");
  Vector y(inputs.rows());
  for (Eigen::Index s = 0; s < inputs.rows(); ++s) y(s) = detail::forward(fis, inputs.row(s).transpose()).output;
  return y;
}

inline double loss(const FisModel& fis, const Dataset& d) {
  if (d.empty()) throw EmptyInput("loss over an empty batch");
  return (d.targets() - predict(fis, d.inputs())).squaredNorm() / static_cast<double>(d.size());
}

/// Layer-4 design matrix: the output is linear in the consequents, y = A theta,
/// with the column layout of FisModel::consequents().
inline Matrix design_matrix(const FisModel& fis, const Dataset& d) {
  const auto per = fis.params_per_rule();
  const auto n_rules = fis.rules().size();
  Matrix a(static_cast<Eigen::Index>(d.size()), static_cast<Eigen::Index>(n_rules * per));
  for (Eigen::Index s = 0; s < a.rows(); ++s) {
    const Vector x = d.inputs().row(s).transpose();
    const Vector wn = normalized_firing(fis, x);
    for (std::size_t k = 0; k < n_rules; ++k) {
      const auto base = static_cast<Eigen::Index>(k * per);
      const double w = wn(static_cast<Eigen::Index>(k));
      if (fis.order() == SugenoOrder::linear) {
        for (std::size_t i = 0; i < fis.n_inputs(); ++i) a(s, base + static_cast<Eigen::Index>(i)) = w * x(static_cast<Eigen::Index>(i));
      }
      a(s, base + static_cast<Eigen::Index>(per - 1)) = w;
    }
  }
  return a;
}

struct ConsequentFit {
  FisModel model;
  bool rank_deficient = false;
};

/// Least-squares consequents for fixed premises.
inline ConsequentFit fit_consequents(const FisModel& fis, const Dataset& d) {
  const auto sol = numerics::solve_least_squares(design_matrix(fis, d), d.targets());
  return {fis.with_consequents(sol.x), sol.rank_deficient};
}

/// dMSE/d(premise) over a batch with consequents fixed. Layout: for each input,
/// for each MF, (dc, dsigma).
inline Vector premise_gradient(const FisModel& fis, const Dataset& d) {
  std::size_t n_params = 0;
  std::vector<std::size_t> offset;
  for (const auto& m : fis.mfs()) {
    offset.push_back(n_params);
    n_params += 2 * m.size();
  }
  Vector g = Vector::Zero(static_cast<Eigen::Index>(n_params));
  const double scale = 2.0 / static_cast<double>(d.size());
  for (Eigen::Index s = 0; s < d.inputs().rows(); ++s) {
    const Vector x = d.inputs().row(s).transpose();
    const auto f = detail::forward(fis, x);
    const double err = f.output - d.targets()(s);
    for (std::size_t k = 0; k < fis.rules().size(); ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      // dy/dw_k * w_k
      const double common = scale * err * (f.rule_out(kk) - f.output) / f.total * f.firing(kk);
      if (common == 0.0) continue;
      for (std::size_t i = 0; i < fis.n_inputs(); ++i) {
        const std::size_t j = fis.rules()[k].antecedent[i];
        const auto& mf = fis.mfs()[i][j];
        const double dx = x(static_cast<Eigen::Index>(i)) - mf.c;
        const double s2 = mf.sigma * mf.sigma;
        const auto at = static_cast<Eigen::Index>(offset[i] + 2 * j);
        g(at) += common * dx / s2;
        g(at + 1) += common * dx * dx / (s2 * mf.sigma);
      }
    }
  }
  return g;
}

inline Vector premise_vector(const FisModel& fis) {
  std::vector<double> v;
  for (const auto& m : fis.mfs())
    for (const auto& mf : m) {
      v.push_back(mf.c);
      v.push_back(mf.sigma);
    }
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/// Premise parameters from the premise_vector() layout; sigma is floored.
inline FisModel with_premises(const FisModel& fis, const Vector& p) {
  auto mfs = fis.mfs();
  Eigen::Index at = 0;
  for (auto& m : mfs)
    for (auto& mf : m) {
      mf.c = p(at++);
      mf.sigma = std::max(p(at++), kSigmaFloor);
    }
  return fis.with_mfs(std::move(mfs));
}

struct HybridConfig {
  std::size_t epochs = 50;
  double lr_premise = 0.01;
  /// Multiplies the premise step size after every epoch.
  double lr_decay = 0.99;
  std::size_t max_fail = 6;
  std::uint64_t seed = 42;
};

struct AnfisReport {
  std::string model = "anfis";
  std::vector<std::size_t> n_mfs;
  SugenoOrder order = SugenoOrder::linear;
  std::size_t rule_count = 0;
  std::uint64_t seed = 0;
  std::size_t epochs_run = 0;
  double train_mse = 0.0;
  double validation_mse = 0.0;
  double test_mse = 0.0;
  double network_mse = 0.0;
  double train_mse_norm = 0.0;
  double validation_mse_norm = 0.0;
  double test_mse_norm = 0.0;
  double network_mse_norm = 0.0;
  double r_value = 0.0;
  train::StopReason stop_reason = train::StopReason::max_epochs;
  /// Epochs in which the least-squares design was rank deficient (ridge used).
  std::size_t rank_deficient_epochs = 0;
  std::vector<double> loss_trace;
  std::vector<double> validation_trace;
};

struct HybridResult {
  FisModel model;
  AnfisReport report;
};

inline void evaluate(const FisModel& fis, const SplitDataset& split, AnfisReport& r) {
  const double scale = fis.norm().target_mse_scale();
  auto norm_mse = [&](const Dataset& d) { return d.empty() ? std::numeric_limits<double>::quiet_NaN() : loss(fis, d); };
  r.train_mse_norm = norm_mse(split.train);
  r.validation_mse_norm = norm_mse(split.validation);
  r.test_mse_norm = norm_mse(split.test);
  const Dataset all = split.pooled();
  r.network_mse_norm = norm_mse(all);
  r.train_mse = r.train_mse_norm * scale;
  r.validation_mse = r.validation_mse_norm * scale;
  r.test_mse = r.test_mse_norm * scale;
  r.network_mse = r.network_mse_norm * scale;
  const Vector pred = predict(fis, all.inputs());
  std::vector<double> a(all.size()), p(all.size());
  for (std::size_t i = 0; i < all.size(); ++i) {
    a[i] = fis.norm().denormalize_target(all.targets()(static_cast<Eigen::Index>(i)));
    p[i] = fis.norm().denormalize_target(pred(static_cast<Eigen::Index>(i)));
  }
  try {
    r.r_value = metrics::pearson_r(a, p);
  } catch (const Error&) {
    r.r_value = std::numeric_limits<double>::quiet_NaN();
  }
}

/// Hybrid least-squares / gradient-descent training on the normalized split.
///
/// Epoch e: (1) consequents by least squares with premises fixed, which gives
/// the model recorded for this epoch; (2) unless this is the last epoch, one
/// gradient step of size lr_premise * lr_decay^(e-1) on (c, sigma). The model
/// with the best validation MSE is returned (the last one without validation
/// data); max_fail consecutive non-improving epochs end training early.
inline HybridResult train_hybrid(const FisModel& initial, const SplitDataset& split, const HybridConfig& cfg) {
  if (cfg.epochs < 1) throw std::invalid_argument("hybrid training needs at least one epoch");
  if (!(cfg.lr_premise >= 0.0)) throw std::invalid_argument("lr_premise must be >= 0");
  if (split.train.empty()) throw EmptyInput("empty training partition");

  AnfisReport report;
  report.n_mfs = initial.mf_counts();
  report.order = initial.order();
  report.rule_count = initial.rules().size();
  report.seed = cfg.seed;

  const bool validating = !split.validation.empty();
  FisModel current = initial;
  std::optional<FisModel> best;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t fails = 0;
  double lr = cfg.lr_premise;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    auto fit = fit_consequents(current, split.train);
    if (fit.rank_deficient) ++report.rank_deficient_epochs;
    current = std::move(fit.model);
    report.loss_trace.push_back(loss(current, split.train));
    report.epochs_run = epoch;

    if (validating) {
      const double v = loss(current, split.validation);
      report.validation_trace.push_back(v);
      if (v < best_val) {
        best_val = v;
        best = current;
        fails = 0;
      } else if (v > best_val) {
        ++fails;
      }
      if (fails >= cfg.max_fail) {
        report.stop_reason = train::StopReason::validation_patience;
        break;
      }
    }

    if (epoch < cfg.epochs && lr > 0.0) {
      const Vector g = premise_gradient(current, split.train);
      if (g.allFinite()) current = with_premises(current, premise_vector(current) - lr * g);
    }
    lr *= cfg.lr_decay;
  }

  FisModel out = validating && best ? *best : current;
  evaluate(out, split, report);
  return {std::move(out), std::move(report)};
}

// ---------------------------------------------------------------------------
// Comparison over (MF count, Sugeno order) cells

struct TracePoint {
  std::size_t n_mfs = 0;
  SugenoOrder order = SugenoOrder::linear;
  std::uint64_t seed = 0;
  std::size_t index = 0;  // position within the test partition
  double actual_s = 0.0;
  double predicted_s = 0.0;
};

struct AnfisComparison {
  std::vector<AnfisReport> reports;
  std::vector<TracePoint> traces;
};

/// The 400 / 100 / 100 protocol for 600 rows, as ratios for other sizes.
inline SplitSpec anfis_split_for(std::size_t rows) {
  SplitSpec s;
  if (rows == 600) {
    s.counts = SplitCounts{400, 100, 100};
  } else {
    s.ratios = {4.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0};
  }
  return s;
}

/// Trains every (n_mfs, order) cell on the same split per seed. Premises start
/// from a grid partition of the normalized input box [-1, 1]^d.
inline AnfisComparison run_anfis_comparison(const Dataset& data, std::span<const std::size_t> n_mfs_list,
                                            std::span<const SugenoOrder> orders, std::span<const std::uint64_t> seeds,
                                            HybridConfig cfg = {}, std::optional<SplitSpec> split_spec = std::nullopt) {
  if (seeds.empty()) throw std::invalid_argument("run_anfis_comparison needs at least one seed");
  const auto normalized = normalize(data);
  const SplitSpec spec = split_spec.value_or(anfis_split_for(data.size()));
  const std::vector<std::pair<double, double>> box(data.dims(), {-1.0, 1.0});
  AnfisComparison out;
  for (const auto seed : seeds) {
    const SplitDataset split = spec.apply(normalized.data, seed);
    for (const auto n_mfs : n_mfs_list) {
      for (const auto order : orders) {
        cfg.seed = seed;
        auto result = train_hybrid(grid_partition(box, n_mfs, order, normalized.params), split, cfg);
        const Vector pred = predict(result.model, split.test.inputs());
        for (std::size_t i = 0; i < split.test.size(); ++i) {
          const auto k = static_cast<Eigen::Index>(i);
          out.traces.push_back({n_mfs, order, seed, i, normalized.params.denormalize_target(split.test.targets()(k)),
                                normalized.params.denormalize_target(pred(k))});
        }
        out.reports.push_back(std::move(result.report));
      }
    }
  }
  return out;
}

}  // namespace cycletime::anfis
