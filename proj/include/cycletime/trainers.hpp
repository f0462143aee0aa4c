#pragma once

// Full-batch training algorithms for ann::NetworkModel.
//
// All six share one driver (run_training) that owns the epoch loop, the
// validation early stopping and the trace bookkeeping. An algorithm is a
// stepper: given the current weights it performs exactly one epoch and reports
// the new weights, the new training MSE, or a reason to stop.
//
// Losses inside the trainers are in normalized target units; reports convert
// to s^2 with the model's NormParams.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cycletime/ann.hpp"
#include "cycletime/dataset.hpp"
#include "cycletime/metrics.hpp"
#include "cycletime/numerics.hpp"

namespace cycletime::train {

enum class Algorithm { gd, gdm, scg, oss, lm, br };

inline constexpr Algorithm kAllAlgorithms[] = {Algorithm::br, Algorithm::lm, Algorithm::gd,
                                               Algorithm::gdm, Algorithm::scg, Algorithm::oss};

/// Short CLI name ("lm").
inline std::string_view short_name(Algorithm a) {
  switch (a) {
    case Algorithm::gd: return "gd";
    case Algorithm::gdm: return "gdm";
    case Algorithm::scg: return "scg";
    case Algorithm::oss: return "oss";
    case Algorithm::lm: return "lm";
    case Algorithm::br: return "br";
  }
  return "?";
}

/// Toolbox-style name used in reports ("trainlm").
inline std::string display_name(Algorithm a) { return "train" + std::string(short_name(a)); }

inline std::optional<Algorithm> parse_algorithm(std::string_view s) {
  if (s.starts_with("train")) s.remove_prefix(5);
  for (auto a : kAllAlgorithms) {
    if (s == short_name(a)) return a;
  }
  return std::nullopt;
}

enum class StopReason { max_epochs, goal, validation_patience, mu_overflow, gradient_vanished, gamma_stable, diverged };

inline std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::max_epochs: return "max_epochs";
    case StopReason::goal: return "goal";
    case StopReason::validation_patience: return "validation_patience";
    case StopReason::mu_overflow: return "mu_overflow";
    case StopReason::gradient_vanished: return "gradient_vanished";
    case StopReason::gamma_stable: return "gamma_stable";
    case StopReason::diverged: return "diverged";
  }
  return "?";
}

struct TrainConfig {
  Algorithm algorithm = Algorithm::lm;
  std::size_t max_epochs = 1000;
  double goal_mse = 0.0;
  double lr = 0.01;
  double momentum = 0.9;
  double mu0 = 1e-3;
  double mu_inc = 10.0;
  double mu_dec = 0.1;
  double mu_max = 1e10;
  std::size_t max_fail = 6;
  double min_grad = 1e-10;
  std::uint64_t seed = 42;

  void validate() const {
    if (!(lr > 0.0)) throw std::invalid_argument("lr must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must lie in [0, 1)");
    if (!(mu0 >= 0.0) || !(mu_inc > 1.0) || !(mu_dec > 0.0 && mu_dec < 1.0) || !(mu_max > 0.0)) {
      throw std::invalid_argument("invalid damping schedule");
    }
    if (max_fail == 0) throw std::invalid_argument("max_fail must be >= 1");
    if (!(goal_mse >= 0.0)) throw std::invalid_argument("goal_mse must be >= 0");
  }
};

struct TrainReport {
  std::string algorithm;
  std::string topology;
  std::uint64_t seed = 0;
  std::size_t epochs_run = 0;
  // Errors in s^2 (denormalized) ...
  double train_mse = 0.0;
  double validation_mse = 0.0;
  double test_mse = 0.0;
  double network_mse = 0.0;
  // ... and the same four in normalized [-1, 1] target units.
  double train_mse_norm = 0.0;
  double validation_mse_norm = 0.0;
  double test_mse_norm = 0.0;
  double network_mse_norm = 0.0;
  /// Pearson R over all rows, in seconds. NaN when undefined (constant output).
  double r_value = 0.0;
  StopReason stop_reason = StopReason::max_epochs;
  bool diverged = false;
  /// Training MSE (normalized) before the first epoch and after each epoch.
  std::vector<double> loss_trace;
  std::vector<double> validation_trace;
  /// Damping increases forced by a rejected step or a failed factorization.
  std::size_t damping_retries = 0;
  // Evidence hyperparameters after each epoch (Bayesian regularization only).
  std::vector<double> alpha_trace;
  std::vector<double> beta_trace;
  std::vector<double> gamma_trace;
};

struct TrainResult {
  ann::NetworkModel model;
  TrainReport report;
};

namespace detail {

inline bool finite(double v) { return std::isfinite(v); }

struct StepOutcome {
  /// Weights after the epoch; empty when the stepper could not move.
  std::optional<Vector> weights;
  double train_mse = 0.0;
  std::optional<StopReason> stop;
};

inline double sse(const Vector& e) { return e.squaredNorm(); }

}  // namespace detail

// ---------------------------------------------------------------------------
// Steppers

/// Steepest descent, optionally with classical momentum.
class GradientDescent {
 public:
  GradientDescent(const Dataset& train, const TrainConfig& cfg, bool with_momentum)
      : train_(train), cfg_(cfg), momentum_(with_momentum ? cfg.momentum : 0.0), with_momentum_(with_momentum) {}

  detail::StepOutcome step(const ann::NetworkModel& m) {
    const Vector g = ann::gradient(m, train_);
    if (!g.allFinite()) return {std::nullopt, 0.0, StopReason::diverged};
    if (g.norm() < cfg_.min_grad) return {std::nullopt, 0.0, StopReason::gradient_vanished};
    Vector w;
    if (with_momentum_) {
      if (velocity_.size() == 0) velocity_ = Vector::Zero(g.size());
      velocity_ = momentum_ * velocity_ - cfg_.lr * g;
      w = m.weights() + velocity_;
    } else {
      w = m.weights() - cfg_.lr * g;
    }
    if (!w.allFinite()) return {std::nullopt, 0.0, StopReason::diverged};
    const double l = ann::loss(m.with_weights(w), train_);
    if (!detail::finite(l)) return {std::nullopt, 0.0, StopReason::diverged};
    return {std::move(w), l, std::nullopt};
  }

 private:
  const Dataset& train_;
  const TrainConfig& cfg_;
  double momentum_;
  bool with_momentum_;
  Vector velocity_;
};

/// Moller's scaled conjugate gradient. Curvature along the search direction
/// comes from a forward difference of gradients; the scale lambda plays the
/// role of a trust-region parameter driven by the comparison ratio Delta.
class ScaledConjugateGradient {
 public:
  static constexpr double kSigma = 5e-5;
  static constexpr double kLambda0 = 5e-7;
  static constexpr double kLambdaMin = 1e-15;
  static constexpr double kLambdaMax = 1e100;

  ScaledConjugateGradient(const ann::NetworkModel& m, const Dataset& train, const TrainConfig& cfg)
      : train_(train), cfg_(cfg) {
    grad_ = ann::gradient(m, train_);
    r_ = -grad_;
    p_ = r_;
    loss_ = ann::loss(m, train_);
  }

  /// Current search direction; equals -gradient before the first step.
  const Vector& direction() const { return p_; }

  detail::StepOutcome step(const ann::NetworkModel& m) {
    if (grad_.norm() < cfg_.min_grad) return {std::nullopt, loss_, StopReason::gradient_vanished};
    const Vector& w = m.weights();
    const auto n = static_cast<std::size_t>(w.size());

    double p2 = p_.squaredNorm();
    if (!(p_.dot(r_) > 0.0)) {
      p_ = r_;
      p2 = p_.squaredNorm();
      success_ = true;
    }
    if (success_) {
      const double sigma_k = kSigma / std::sqrt(p2);
      const Vector g_probe = ann::gradient(m.with_weights(w + sigma_k * p_), train_);
      delta_ = p_.dot(g_probe - grad_) / sigma_k;
    }
    delta_ += (lambda_ - lambda_bar_) * p2;
    if (delta_ <= 0.0) {
      lambda_bar_ = 2.0 * (lambda_ - delta_ / p2);
      delta_ = -delta_ + lambda_ * p2;
      lambda_ = lambda_bar_;
    }

    const double mu = p_.dot(r_);
    const double alpha = mu / delta_;
    const Vector w_try = w + alpha * p_;
    double loss_try = std::numeric_limits<double>::infinity();
    if (w_try.allFinite()) loss_try = ann::loss(m.with_weights(w_try), train_);
    const double comparison = detail::finite(loss_try) ? 2.0 * delta_ * (loss_ - loss_try) / (mu * mu)
                                                       : -std::numeric_limits<double>::infinity();

    std::optional<Vector> moved;
    if (comparison >= 0.0) {
      const Vector g_new = ann::gradient(m.with_weights(w_try), train_);
      const Vector r_new = -g_new;
      lambda_bar_ = 0.0;
      success_ = true;
      ++iterations_;
      if (iterations_ % n == 0) {
        p_ = r_new;
      } else {
        const double beta = (r_new.squaredNorm() - r_new.dot(r_)) / mu;
        p_ = r_new + beta * p_;
      }
      r_ = r_new;
      grad_ = g_new;
      loss_ = loss_try;
      if (comparison >= 0.75) lambda_ = std::max(lambda_ / 4.0, kLambdaMin);
      moved = w_try;
    } else {
      lambda_bar_ = lambda_;
      success_ = false;
    }
    if (comparison < 0.25) {
      const double raise = detail::finite(comparison) ? delta_ * (1.0 - comparison) / p2 : lambda_ * 3.0;
      lambda_ = std::min(lambda_ + raise, kLambdaMax);
    }
    if (!moved) return {m.weights(), loss_, std::nullopt};
    return {std::move(moved), loss_, std::nullopt};
  }

 private:
  const Dataset& train_;
  const TrainConfig& cfg_;
  Vector grad_, r_, p_;
  double loss_ = 0.0;
  double lambda_ = kLambda0;
  double lambda_bar_ = 0.0;
  double delta_ = 0.0;
  bool success_ = true;
  std::size_t iterations_ = 0;
};

/// Battiti's one-step secant: the memoryless BFGS direction built from the
/// last step s and gradient change y alone, followed by an Armijo backtracking
/// line search (c = 1e-4, halving, at most 20 trials).
class OneStepSecant {
 public:
  static constexpr double kArmijo = 1e-4;
  static constexpr int kMaxBacktracks = 20;

  OneStepSecant(const ann::NetworkModel& m, const Dataset& train, const TrainConfig& cfg) : train_(train), cfg_(cfg) {
    grad_ = ann::gradient(m, train_);
    loss_ = ann::loss(m, train_);
    direction_ = -grad_;
  }

  const Vector& direction() const { return direction_; }

  detail::StepOutcome step(const ann::NetworkModel& m) {
    if (grad_.norm() < cfg_.min_grad) return {std::nullopt, loss_, StopReason::gradient_vanished};
    const auto n = static_cast<std::size_t>(grad_.size());

    bool steepest = true;
    direction_ = -grad_;
    if (have_history_ && since_restart_ < n) {
      const double sy = s_.dot(y_);
      if (sy > std::numeric_limits<double>::epsilon() * s_.norm() * y_.norm()) {
        const double sg = s_.dot(grad_);
        const double yg = y_.dot(grad_);
        const double a = -(1.0 + y_.squaredNorm() / sy) * sg / sy + yg / sy;
        const double b = sg / sy;
        Vector d = -grad_ + a * s_ + b * y_;
        if (d.allFinite() && d.dot(grad_) < 0.0) {
          direction_ = std::move(d);
          steepest = false;
        }
      }
    }
    if (steepest) since_restart_ = 0;

    const double slope = direction_.dot(grad_);
    double step = 1.0;
    for (int k = 0; k <= kMaxBacktracks; ++k, step *= 0.5) {
      const Vector w_try = m.weights() + step * direction_;
      if (!w_try.allFinite()) continue;
      const double l = ann::loss(m.with_weights(w_try), train_);
      if (detail::finite(l) && l <= loss_ + kArmijo * step * slope) {
        const Vector g_new = ann::gradient(m.with_weights(w_try), train_);
        s_ = step * direction_;
        y_ = g_new - grad_;
        grad_ = g_new;
        loss_ = l;
        have_history_ = true;
        ++since_restart_;
        return {w_try, loss_, std::nullopt};
      }
    }
    // No acceptable step along this direction.
    have_history_ = false;
    if (steepest) return {std::nullopt, loss_, StopReason::gradient_vanished};
    return {m.weights(), loss_, std::nullopt};
  }

 private:
  const Dataset& train_;
  const TrainConfig& cfg_;
  Vector grad_, direction_, s_, y_;
  double loss_ = 0.0;
  bool have_history_ = false;
  std::size_t since_restart_ = 0;
};

/// Levenberg-Marquardt on the sum of squared errors. Each epoch retries with a
/// larger damping mu until the SSE drops or mu passes mu_max.
class LevenbergMarquardt {
 public:
  static constexpr double kMuFloor = 1e-20;

  LevenbergMarquardt(const ann::NetworkModel& m, const Dataset& train, const TrainConfig& cfg)
      : train_(train), cfg_(cfg), mu_(cfg.mu0) {
    refresh(m);
  }

  double mu() const { return mu_; }
  std::size_t retries() const { return retries_; }

  detail::StepOutcome step(const ann::NetworkModel& m) {
    const double n = static_cast<double>(train_.size());
    const Vector je = jac_.transpose() * err_;
    if ((2.0 / n) * je.norm() < cfg_.min_grad) return {std::nullopt, sse_ / n, StopReason::gradient_vanished};
    const Matrix jj = jac_.transpose() * jac_;
    const auto nw = jj.rows();

    for (;;) {
      Vector delta;
      try {
        delta = -numerics::solve_spd(jj + mu_ * Matrix::Identity(nw, nw), je);
      } catch (const NotPositiveDefinite&) {
        if (!raise_mu()) return {std::nullopt, sse_ / n, StopReason::mu_overflow};
        continue;
      }
      const Vector w_try = m.weights() + delta;
      if (w_try.allFinite()) {
        const auto trial = m.with_weights(w_try);
        const Vector e_try = ann::residuals(trial, train_);
        const double sse_try = detail::sse(e_try);
        if (detail::finite(sse_try) && sse_try < sse_) {
          mu_ *= cfg_.mu_dec;
          refresh(trial);
          return {w_try, sse_ / n, std::nullopt};
        }
      }
      if (!raise_mu()) return {std::nullopt, sse_ / n, StopReason::mu_overflow};
    }
  }

 private:
  void refresh(const ann::NetworkModel& m) {
    jac_ = ann::jacobian(m, train_);
    err_ = ann::residuals(m, train_);
    sse_ = detail::sse(err_);
  }

  bool raise_mu() {
    ++retries_;
    mu_ = std::max(mu_ * cfg_.mu_inc, kMuFloor);
    return mu_ <= cfg_.mu_max;
  }

  const Dataset& train_;
  const TrainConfig& cfg_;
  double mu_;
  Matrix jac_;
  Vector err_;
  double sse_ = 0.0;
  std::size_t retries_ = 0;
};

/// Bayesian regularization: LM steps on F = beta*E_D + alpha*E_W with
/// E_D = SSE/2 and E_W = |w|^2/2. After every accepted step the evidence
/// framework re-estimates
///   gamma = N_w - alpha * tr(A^-1),  A = beta*J^T J + alpha*I
///   alpha = gamma / (2 E_W),         beta = (N - gamma) / (2 E_D).
class BayesianRegularization {
 public:
  static constexpr double kAlpha0 = 0.01;
  static constexpr double kBeta0 = 1.0;
  static constexpr double kHyperMin = 1e-12;
  static constexpr double kHyperMax = 1e15;
  static constexpr double kMuFloor = 1e-20;
  static constexpr double kGammaTolerance = 1e-3;
  static constexpr std::size_t kGammaWindow = 10;

  BayesianRegularization(const ann::NetworkModel& m, const Dataset& train, const TrainConfig& cfg)
      : train_(train), cfg_(cfg), mu_(cfg.mu0) {
    refresh(m);
    gamma_ = effective_parameters(m.weights()).value_or(static_cast<double>(m.weights().size()));
  }

  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  double gamma() const { return gamma_; }
  std::size_t retries() const { return retries_; }

  detail::StepOutcome step(const ann::NetworkModel& m) {
    const double n = static_cast<double>(train_.size());
    const Vector& w = m.weights();
    const auto nw = w.size();
    const Vector grad = beta_ * (jac_.transpose() * err_) + alpha_ * w;
    if (grad.norm() < cfg_.min_grad) return {std::nullopt, sse_ / n, StopReason::gradient_vanished};
    const Matrix jj = jac_.transpose() * jac_;
    const double objective = this->objective(sse_, w);

    for (;;) {
      Vector delta;
      try {
        delta = -numerics::solve_spd(beta_ * jj + (alpha_ + mu_) * Matrix::Identity(nw, nw), grad);
      } catch (const NotPositiveDefinite&) {
        if (!raise_mu()) return {std::nullopt, sse_ / n, StopReason::mu_overflow};
        continue;
      }
      const Vector w_try = w + delta;
      if (w_try.allFinite()) {
        const auto trial = m.with_weights(w_try);
        const double sse_try = detail::sse(ann::residuals(trial, train_));
        if (detail::finite(sse_try) && this->objective(sse_try, w_try) < objective) {
          mu_ *= cfg_.mu_dec;
          refresh(trial);
          update_hyperparameters(w_try);
          if (stable_epochs_ >= kGammaWindow) return {w_try, sse_ / n, StopReason::gamma_stable};
          return {w_try, sse_ / n, std::nullopt};
        }
      }
      if (!raise_mu()) return {std::nullopt, sse_ / n, StopReason::mu_overflow};
    }
  }

 private:
  double objective(double sse, const Vector& w) const { return beta_ * 0.5 * sse + alpha_ * 0.5 * w.squaredNorm(); }

  void refresh(const ann::NetworkModel& m) {
    jac_ = ann::jacobian(m, train_);
    err_ = ann::residuals(m, train_);
    sse_ = detail::sse(err_);
  }

  std::optional<double> effective_parameters(const Vector& w) const {
    const auto nw = w.size();
    const Matrix a = beta_ * (jac_.transpose() * jac_) + alpha_ * Matrix::Identity(nw, nw);
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success) return std::nullopt;
    const double trace = llt.solve(Matrix::Identity(nw, nw)).trace();
    return std::clamp(static_cast<double>(nw) - alpha_ * trace, 0.0, static_cast<double>(nw));
  }

  void update_hyperparameters(const Vector& w) {
    const auto g = effective_parameters(w);
    if (!g) return;
    const double n = static_cast<double>(train_.size());
    const double e_w = 0.5 * w.squaredNorm();
    const double e_d = 0.5 * sse_;
    const double previous = gamma_;
    gamma_ = std::max(*g, kHyperMin);
    alpha_ = e_w > 0.0 ? std::clamp(gamma_ / (2.0 * e_w), kHyperMin, kHyperMax) : kHyperMax;
    beta_ = e_d > 0.0 ? std::clamp((n - gamma_) / (2.0 * e_d), kHyperMin, kHyperMax) : kHyperMax;
    stable_epochs_ = std::abs(gamma_ - previous) < kGammaTolerance ? stable_epochs_ + 1 : 0;
  }

  bool raise_mu() {
    ++retries_;
    mu_ = std::max(mu_ * cfg_.mu_inc, kMuFloor);
    return mu_ <= cfg_.mu_max;
  }

  const Dataset& train_;
  const TrainConfig& cfg_;
  double mu_;
  double alpha_ = kAlpha0;
  double beta_ = kBeta0;
  double gamma_ = 0.0;
  std::size_t stable_epochs_ = 0;
  Matrix jac_;
  Vector err_;
  double sse_ = 0.0;
  std::size_t retries_ = 0;
};

// ---------------------------------------------------------------------------
// Driver

/// Fills the error columns of a report from a finished model.
inline void evaluate(const ann::NetworkModel& m, const SplitDataset& split, TrainReport& r) {
  const double scale = m.norm().target_mse_scale();
  auto norm_mse = [&](const Dataset& d) {
    return d.empty() ? std::numeric_limits<double>::quiet_NaN() : ann::loss(m, d);
  };
  r.train_mse_norm = norm_mse(split.train);
  r.validation_mse_norm = norm_mse(split.validation);
  r.test_mse_norm = norm_mse(split.test);
  const Dataset all = split.pooled();
  r.network_mse_norm = norm_mse(all);
  r.train_mse = r.train_mse_norm * scale;
  r.validation_mse = r.validation_mse_norm * scale;
  r.test_mse = r.test_mse_norm * scale;
  r.network_mse = r.network_mse_norm * scale;

  const Vector pred = ann::predict(m, all.inputs());
  std::vector<double> actual_s(all.size()), pred_s(all.size());
  for (std::size_t i = 0; i < all.size(); ++i) {
    actual_s[i] = m.norm().denormalize_target(all.targets()(static_cast<Eigen::Index>(i)));
    pred_s[i] = m.norm().denormalize_target(pred(static_cast<Eigen::Index>(i)));
  }
  try {
    r.r_value = metrics::pearson_r(actual_s, pred_s);
  } catch (const Error&) {
    r.r_value = std::numeric_limits<double>::quiet_NaN();
  }
}

/// Epoch loop shared by all algorithms.
///
/// Validation early stopping: an epoch whose validation MSE is worse than the
/// best seen so far counts as a failure, an improvement resets the count, and
/// max_fail consecutive failures end the run. Whenever validation is active
/// the returned weights are those of the best validation epoch.
template <typename Stepper>
TrainResult run_training(const ann::NetworkModel& initial, const SplitDataset& split, const TrainConfig& cfg,
                         Stepper& stepper, bool use_validation, TrainReport report = {}) {
  report.algorithm = display_name(cfg.algorithm);
  report.topology = initial.topology().describe();
  report.seed = cfg.seed;

  const bool validating = use_validation && !split.validation.empty();
  Vector w = initial.weights();
  double train_loss = ann::loss(initial, split.train);
  report.loss_trace.push_back(train_loss);

  Vector best_w = w;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t fails = 0;
  if (validating) {
    best_val = ann::loss(initial, split.validation);
    report.validation_trace.push_back(best_val);
  }

  std::optional<StopReason> stop;
  if (train_loss <= cfg.goal_mse) stop = StopReason::goal;
  for (std::size_t epoch = 1; !stop && epoch <= cfg.max_epochs; ++epoch) {
    auto outcome = stepper.step(initial.with_weights(w));
    if (!outcome.weights) {
      stop = outcome.stop.value_or(StopReason::gradient_vanished);
      break;
    }
    w = std::move(*outcome.weights);
    train_loss = outcome.train_mse;
    report.loss_trace.push_back(train_loss);
    report.epochs_run = epoch;

    if constexpr (requires { stepper.alpha(); }) {
      report.alpha_trace.push_back(stepper.alpha());
      report.beta_trace.push_back(stepper.beta());
      report.gamma_trace.push_back(stepper.gamma());
    }

    if (validating) {
      const double v = ann::loss(initial.with_weights(w), split.validation);
      report.validation_trace.push_back(v);
      if (v < best_val) {
        best_val = v;
        best_w = w;
        fails = 0;
      } else if (v > best_val || !detail::finite(v)) {
        ++fails;
      }
    }

    if (train_loss <= cfg.goal_mse) {
      stop = StopReason::goal;
    } else if (outcome.stop) {
      stop = outcome.stop;
    } else if (validating && fails >= cfg.max_fail) {
      stop = StopReason::validation_patience;
    }
  }
  report.stop_reason = stop.value_or(StopReason::max_epochs);
  report.diverged = report.stop_reason == StopReason::diverged;

  if constexpr (requires { stepper.retries(); }) report.damping_retries = stepper.retries();

  auto model = initial.with_weights(validating ? best_w : w);
  evaluate(model, split, report);
  return {std::move(model), std::move(report)};
}

inline TrainResult train_gd(const ann::NetworkModel& m, const SplitDataset& split, TrainConfig cfg) {
  cfg.algorithm = Algorithm::gd;
  cfg.validate();
  GradientDescent s(split.train, cfg, false);
  return run_training(m, split, cfg, s, true);
}

inline TrainResult train_gdm(const ann::NetworkModel& m, const SplitDataset& split, TrainConfig cfg) {
  cfg.algorithm = Algorithm::gdm;
  cfg.validate();
  GradientDescent s(split.train, cfg, true);
  return run_training(m, split, cfg, s, true);
}

inline TrainResult train_scg(const ann::NetworkModel& m, const SplitDataset& split, TrainConfig cfg) {
  cfg.algorithm = Algorithm::scg;
  cfg.validate();
  ScaledConjugateGradient s(m, split.train, cfg);
  return run_training(m, split, cfg, s, true);
}

inline TrainResult train_oss(const ann::NetworkModel& m, const SplitDataset& split, TrainConfig cfg) {
  cfg.algorithm = Algorithm::oss;
  cfg.validate();
  OneStepSecant s(m, split.train, cfg);
  return run_training(m, split, cfg, s, true);
}

inline TrainResult train_lm(const ann::NetworkModel& m, const SplitDataset& split, TrainConfig cfg) {
  cfg.algorithm = Algorithm::lm;
  cfg.validate();
  LevenbergMarquardt s(m, split.train, cfg);
  return run_training(m, split, cfg, s, true);
}

/// Validation stopping is off: the evidence-based regularization takes its place.
inline TrainResult train_br(const ann::NetworkModel& m, const SplitDataset& split, TrainConfig cfg) {
  cfg.algorithm = Algorithm::br;
  cfg.validate();
  BayesianRegularization s(m, split.train, cfg);
  TrainReport seeded;
  seeded.alpha_trace.push_back(s.alpha());
  seeded.beta_trace.push_back(s.beta());
  seeded.gamma_trace.push_back(s.gamma());
  return run_training(m, split, cfg, s, false, std::move(seeded));
}

inline TrainResult train(const ann::NetworkModel& m, const SplitDataset& split, const TrainConfig& cfg) {
  switch (cfg.algorithm) {
    case Algorithm::gd: return train_gd(m, split, cfg);
    case Algorithm::gdm: return train_gdm(m, split, cfg);
    case Algorithm::scg: return train_scg(m, split, cfg);
    case Algorithm::oss: return train_oss(m, split, cfg);
    case Algorithm::lm: return train_lm(m, split, cfg);
    case Algorithm::br: return train_br(m, split, cfg);
  }
  throw std::invalid_argument("unknown algorithm");
}

// ---------------------------------------------------------------------------
// Comparison runs

/// One (actual, predicted) pair in seconds, for regression plots.
struct RegressionPoint {
  std::string algorithm;
  std::uint64_t seed = 0;
  std::string partition;  // train | validation | test
  std::size_t row = 0;    // row index in the source dataset
  double actual_s = 0.0;
  double predicted_s = 0.0;
};

struct ComparisonResult {
  std::vector<TrainReport> reports;
  std::vector<RegressionPoint> points;
};

inline void append_points(const ann::NetworkModel& m, const SplitDataset& split, std::string_view algorithm,
                          std::uint64_t seed, std::vector<RegressionPoint>& out) {
  auto add = [&](const Dataset& part, const std::vector<std::size_t>& rows, const char* name) {
    if (part.empty()) return;
    const Vector pred = ann::predict(m, part.inputs());
    for (std::size_t i = 0; i < part.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      out.push_back({std::string(algorithm), seed, name, rows[i], m.norm().denormalize_target(part.targets()(k)),
                     m.norm().denormalize_target(pred(k))});
    }
  };
  add(split.train, split.train_rows, "train");
  add(split.validation, split.validation_rows, "validation");
  add(split.test, split.test_rows, "test");
}

/// Trains every configuration on identical data per seed. For a given seed all
/// algorithms see the same split and start from the same initial weights; the
/// seed also drives the split shuffle and the weight draw. Reports come back
/// seed-major, in the order of `configs`.
inline ComparisonResult run_comparison(const Dataset& data, const ann::Topology& topology,
                                       std::span<const std::uint64_t> seeds, std::span<const TrainConfig> configs,
                                       const SplitSpec& split_spec = {}, bool with_points = true) {
  if (seeds.empty()) throw std::invalid_argument("run_comparison needs at least one seed");
  const auto normalized = normalize(data);
  ComparisonResult out;
  for (const auto seed : seeds) {
    const SplitDataset split = split_spec.apply(normalized.data, seed);
    const auto initial = ann::init_weights(topology, seed, normalized.params);
    for (TrainConfig cfg : configs) {
      cfg.seed = seed;
      auto result = train(initial, split, cfg);
      if (with_points) append_points(result.model, split, result.report.algorithm, seed, out.points);
      out.reports.push_back(std::move(result.report));
    }
  }
  return out;
}

}  // namespace cycletime::train
