#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "cycletime/trainers.hpp"
#include "test_support.hpp"

using namespace cycletime;
using namespace cycletime::train;
namespace ct = cycletime::testing;

namespace {

SplitDataset train_only(const Dataset& d) {
  SplitDataset s;
  s.train = d;
  s.validation = d.subset(std::vector<std::size_t>{});
  s.test = d.subset(std::vector<std::size_t>{});
  for (std::size_t i = 0; i < d.size(); ++i) s.train_rows.push_back(i);
  return s;
}

// y = 2x on an even grid over [-1, 1].
Dataset line(std::size_t n = 41) {
  Matrix x(static_cast<Eigen::Index>(n), 1);
  Vector y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    x(k, 0) = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1);
    y(k) = 2.0 * x(k, 0);
  }
  return Dataset(x, y);
}

// Consistent linear data y = c . x + 0.5 with per-column input scales.
Dataset linear_data(std::size_t n, const std::vector<double>& scales, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto d = static_cast<Eigen::Index>(scales.size());
  Matrix x(static_cast<Eigen::Index>(n), d);
  Vector y(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    y(i) = 0.5;
    for (Eigen::Index j = 0; j < d; ++j) {
      x(i, j) = scales[static_cast<std::size_t>(j)] * u(rng);
      y(i) += (1.0 + 0.5 * static_cast<double>(j)) * x(i, j);
    }
  }
  return Dataset(x, y);
}

ann::NetworkModel linear_model(std::size_t inputs, std::uint64_t seed = 1) {
  return ann::init_weights(ann::Topology{inputs, {}, 1}, seed);
}

SplitDataset synthetic_split(std::uint64_t seed, std::size_t n = 600) {
  const auto nd = normalize(generate_synthetic(n, seed, 0.1));
  return split(nd.data, {0.70, 0.15, 0.15}, seed);
}

ann::NetworkModel synthetic_init(std::uint64_t seed, std::size_t n = 600) {
  const auto nd = normalize(generate_synthetic(n, seed, 0.1));
  return ann::init_weights(ann::Topology{}, seed, nd.params);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TEST(Names, RoundTrip) {
  for (auto a : kAllAlgorithms) {
    EXPECT_EQ(parse_algorithm(short_name(a)), a);
    EXPECT_EQ(parse_algorithm(display_name(a)), a);
  }
  EXPECT_EQ(display_name(Algorithm::lm), "trainlm");
  EXPECT_FALSE(parse_algorithm("adam").has_value());
}

TEST(TrainConfigTest, RejectsBadValues) {
  TrainConfig c;
  c.momentum = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.lr = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.mu_dec = 2.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Gd, FitsLine) {
  TrainConfig c;
  c.lr = 0.5;
  c.max_epochs = 500;
  const auto r = train_gd(linear_model(1), train_only(line()), c);
  EXPECT_LT(r.report.train_mse_norm, 1e-4);
  EXPECT_LE(r.report.epochs_run, 500u);
}

TEST(Gd, HugeRateDivergesWithoutThrowing) {
  TrainConfig c;
  c.lr = 1e6;
  c.max_epochs = 100;
  const auto r = train_gd(linear_model(1), train_only(line()), c);
  EXPECT_TRUE(r.report.diverged);
  EXPECT_EQ(r.report.stop_reason, StopReason::diverged);
  // The loss grows by roughly lr^2 per epoch from O(1), so overflow needs
  // about 308 / 12.6 epochs here.
  EXPECT_LE(r.report.epochs_run, 30u);
  EXPECT_TRUE(r.model.weights().allFinite());
}

TEST(Gd, IllConditionedProblemDivergesFast) {
  TrainConfig c;
  c.lr = 1e6;
  c.max_epochs = 100;
  const auto r = train_gd(linear_model(2), train_only(linear_data(50, {1e5, 1.0}, 3)), c);
  EXPECT_TRUE(r.report.diverged);
  EXPECT_LE(r.report.epochs_run, 10u);
}

TEST(Gd, ZeroEpochsKeepsWeights) {
  TrainConfig c;
  c.max_epochs = 0;
  const auto m = linear_model(1, 9);
  EXPECT_EQ(train_gd(m, train_only(line()), c).model.weights(), m.weights());
  EXPECT_EQ(train_gdm(m, train_only(line()), c).model.weights(), m.weights());
}

TEST(Gdm, ZeroMomentumMatchesGd) {
  const auto split = synthetic_split(5, 120);
  const auto m = synthetic_init(5, 120);
  TrainConfig c;
  c.max_epochs = 60;
  c.momentum = 0.0;
  const auto a = train_gd(m, split, c);
  const auto b = train_gdm(m, split, c);
  EXPECT_EQ(a.report.loss_trace, b.report.loss_trace);
  EXPECT_EQ(a.model.weights(), b.model.weights());
}

TEST(Gdm, MomentumBeatsGdOnIllConditionedQuadratic) {
  const auto split = train_only(linear_data(60, {1.0, 0.1}, 4));
  TrainConfig c;
  c.lr = 0.2;
  c.goal_mse = 1e-6;
  c.max_epochs = 200000;
  const auto gd = train_gd(linear_model(2), split, c);
  const auto gdm = train_gdm(linear_model(2), split, c);
  ASSERT_EQ(gd.report.stop_reason, StopReason::goal);
  ASSERT_EQ(gdm.report.stop_reason, StopReason::goal);
  EXPECT_LT(gdm.report.epochs_run, gd.report.epochs_run);
}

TEST(Scg, QuadraticInFiveWeights) {
  TrainConfig c;
  c.max_epochs = 25;
  const auto r = train_scg(linear_model(4), train_only(linear_data(80, {1.0, 0.5, 2.0, 1.0}, 6)), c);
  EXPECT_LT(r.report.loss_trace.back(), 1e-10);
}

TEST(Scg, FirstDirectionIsSteepestDescent) {
  const auto split = synthetic_split(2, 100);
  const auto m = synthetic_init(2, 100);
  TrainConfig c;
  train::ScaledConjugateGradient s(m, split.train, c);
  EXPECT_EQ(s.direction(), -ann::gradient(m, split.train));
}

TEST(Oss, FirstDirectionIsSteepestDescent) {
  const auto split = synthetic_split(2, 100);
  const auto m = synthetic_init(2, 100);
  TrainConfig c;
  train::OneStepSecant s(m, split.train, c);
  EXPECT_EQ(s.direction(), -ann::gradient(m, split.train));
}

TEST(Oss, QuadraticBowl) {
  TrainConfig c;
  c.max_epochs = 60;
  const auto r = train_oss(linear_model(3), train_only(linear_data(80, {1.0, 0.3, 2.0}, 7)), c);
  EXPECT_LT(r.report.loss_trace.back(), 1e-8);
}

TEST(Oss, LossNeverIncreasesOnSyntheticSuite) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto r = train_oss(synthetic_init(seed), synthetic_split(seed), {});
    const auto& t = r.report.loss_trace;
    for (std::size_t i = 1; i < t.size(); ++i) EXPECT_LE(t[i], t[i - 1]) << "seed " << seed << " epoch " << i;
  }
}

TEST(Lm, LinearProblemInOneStep) {
  TrainConfig c;
  c.mu0 = 1e-12;
  c.max_epochs = 1;
  const auto d = linear_data(50, {1.0, 2.0}, 8);
  const auto r = train_lm(linear_model(2), train_only(d), c);
  EXPECT_EQ(r.report.epochs_run, 1u);
  EXPECT_LT(r.report.loss_trace.back() * static_cast<double>(d.size()), 1e-20);
}

TEST(Lm, SingularNormalMatrixRaisesDamping) {
  // Two identical hidden units make two Jacobian column groups equal, so
  // J^T J is singular and mu0 = 0 cannot be factorized.
  ann::Topology t{1, {2}, 1};
  Vector w(7);
  w << 0.7, 0.1, 0.7, 0.1, 0.4, 0.4, 0.0;
  const ann::NetworkModel m(t, w);
  TrainConfig c;
  c.mu0 = 0.0;
  c.max_epochs = 5;
  const auto r = train_lm(m, train_only(line()), c);
  EXPECT_GT(r.report.damping_retries, 0u);
  EXPECT_GE(r.report.epochs_run, 1u);
  EXPECT_LT(r.report.loss_trace.back(), r.report.loss_trace.front());
}

TEST(Lm, SseNeverIncreases) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto r = train_lm(synthetic_init(seed), synthetic_split(seed), {});
    const auto& t = r.report.loss_trace;
    for (std::size_t i = 1; i < t.size(); ++i) EXPECT_LT(t[i], t[i - 1]);
  }
}

TEST(Lm, MuOverflowIsReported) {
  TrainConfig c;
  c.mu_max = 1e-2;
  c.max_epochs = 1000;
  const auto r = train_lm(synthetic_init(3, 120), synthetic_split(3, 120), c);
  EXPECT_TRUE(r.report.stop_reason == StopReason::mu_overflow || r.report.stop_reason == StopReason::validation_patience);
}

TEST(Lm, CloseToBrInMostSeeds) {
  int ok = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto split = synthetic_split(seed);
    const auto m = synthetic_init(seed);
    const auto lm = train_lm(m, split, {});
    const auto br = train_br(m, split, {});
    ok += lm.report.network_mse <= 2.0 * br.report.network_mse;
  }
  EXPECT_GE(ok, 6);
}

TEST(Br, WiderNetworkLowersNetworkMseInMostSeeds) {
  int wins = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto nd = normalize(generate_synthetic(600, seed, 0.1));
    const auto split = synthetic_split(seed);
    const auto narrow = train_br(ann::init_weights(ann::Topology{3, {8, 8}, 1}, seed, nd.params), split, {});
    const auto wide = train_br(ann::init_weights(ann::Topology{3, {10, 10}, 1}, seed, nd.params), split, {});
    wins += wide.report.network_mse < narrow.report.network_mse;
  }
  EXPECT_GE(wins, 6);
}

TEST(Br, BetaGrowsOnNoiseFreeData) {
  TrainConfig c;
  c.max_epochs = 40;
  const auto r = train_br(ann::init_weights(ann::Topology{1, {3}, 1}, 2), train_only(line()), c);
  const auto& b = r.report.beta_trace;
  ASSERT_GT(b.size(), 12u);
  EXPECT_GT(b.back(), 1e3 * b.front());
  for (std::size_t i = 6; i < b.size(); ++i) {
    EXPECT_GE(b[i], b[i - 1] * (1.0 - 1e-9)) << "epoch " << i;
  }
}

TEST(Br, HyperparametersStayInBounds) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto m = synthetic_init(seed);
    const auto r = train_br(m, synthetic_split(seed), {});
    const double nw = static_cast<double>(m.weights().size());
    ASSERT_EQ(r.report.gamma_trace.size(), r.report.epochs_run + 1);
    for (std::size_t i = 0; i < r.report.gamma_trace.size(); ++i) {
      EXPECT_GT(r.report.alpha_trace[i], 0.0);
      EXPECT_GT(r.report.beta_trace[i], 0.0);
      EXPECT_GT(r.report.gamma_trace[i], 0.0);
      EXPECT_LE(r.report.gamma_trace[i], nw);
    }
  }
}

TEST(Br, IgnoresValidation) {
  // Validation targets that disagree with training would trip patience for
  // every other algorithm.
  auto split = synthetic_split(4, 120);
  split.validation = Dataset(split.validation.inputs(), -split.validation.targets());
  TrainConfig c;
  c.max_epochs = 30;
  const auto r = train_br(synthetic_init(4, 120), split, c);
  EXPECT_NE(r.report.stop_reason, StopReason::validation_patience);
  EXPECT_TRUE(r.report.validation_trace.empty());
}

TEST(Br, NoisyQuarticBeatsLmOnTest) {
  std::vector<double> br_test, lm_test;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::normal_distribution<double> noise(0.0, 0.05);
    Matrix x(200, 1);
    Vector y(200);
    for (Eigen::Index i = 0; i < 200; ++i) {
      x(i, 0) = u(rng);
      y(i) = 2.0 * std::pow(x(i, 0), 4) - x(i, 0) * x(i, 0) + 0.3 * x(i, 0) + noise(rng);
    }
    const auto nd = normalize(Dataset(x, y));
    const auto split = cycletime::split(nd.data, {0.7, 0.15, 0.15}, seed);
    const auto m = ann::init_weights(ann::Topology{1, {8, 8}, 1}, seed, nd.params);
    br_test.push_back(train_br(m, split, {}).report.test_mse);
    lm_test.push_back(train_lm(m, split, {}).report.test_mse);
  }
  EXPECT_LE(median(br_test), median(lm_test));
}

TEST(EarlyStopping, ReturnsBestValidationWeights) {
  auto split = synthetic_split(6, 120);
  split.validation = Dataset(split.validation.inputs(), -split.validation.targets());
  TrainConfig c;
  c.max_epochs = 500;
  for (auto a : {Algorithm::gd, Algorithm::scg, Algorithm::lm}) {
    c.algorithm = a;
    const auto r = train::train(synthetic_init(6, 120), split, c);
    ASSERT_EQ(r.report.stop_reason, StopReason::validation_patience) << display_name(a);
    const auto& v = r.report.validation_trace;
    const double best = *std::min_element(v.begin(), v.end());
    EXPECT_EQ(ann::loss(r.model, split.validation), best);
    EXPECT_NE(v.back(), best);
  }
}

TEST(EarlyStopping, ConsecutiveFailuresOnly) {
  auto split = synthetic_split(6, 120);
  split.validation = Dataset(split.validation.inputs(), -split.validation.targets());
  TrainConfig c;
  c.max_fail = 3;
  const auto r = train_gd(synthetic_init(6, 120), split, c);
  const auto& v = r.report.validation_trace;
  std::size_t fails = 0;
  double best = v.front();
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] < best) {
      best = v[i];
      fails = 0;
    } else if (v[i] > best) {
      ++fails;
    }
  }
  EXPECT_EQ(fails, 3u);
}

TEST(Determinism, EveryTrainerRepeats) {
  const auto split = synthetic_split(8, 150);
  const auto m = synthetic_init(8, 150);
  TrainConfig c;
  c.max_epochs = 40;
  for (auto a : kAllAlgorithms) {
    c.algorithm = a;
    const auto x = train::train(m, split, c);
    const auto y = train::train(m, split, c);
    EXPECT_EQ(x.report.loss_trace, y.report.loss_trace) << display_name(a);
    EXPECT_EQ(x.model.weights(), y.model.weights()) << display_name(a);
  }
}

TEST(Evaluate, UnitsAndPooledNetworkMse) {
  const auto nd = normalize(generate_synthetic(200, 3, 0.1));
  const auto split = cycletime::split(nd.data, {0.7, 0.15, 0.15}, 3);
  TrainConfig c;
  c.max_epochs = 20;
  const auto r = train_lm(ann::init_weights(ann::Topology{}, 3, nd.params), split, c);
  const double scale = nd.params.target_mse_scale();
  EXPECT_NEAR(r.report.test_mse, r.report.test_mse_norm * scale, 1e-12 * r.report.test_mse);
  const double pooled = (r.report.train_mse * split.train.size() + r.report.validation_mse * split.validation.size() +
                         r.report.test_mse * split.test.size()) /
                        200.0;
  EXPECT_NEAR(r.report.network_mse, pooled, 1e-9 * pooled);
  EXPECT_GT(r.report.r_value, 0.9);
  EXPECT_LE(r.report.r_value, 1.0);
}

TEST(RunComparison, ShapeAndDeterminism) {
  const Dataset d = generate_synthetic(150, 42, 0.1);
  std::vector<TrainConfig> configs;
  for (auto a : kAllAlgorithms) {
    TrainConfig c;
    c.algorithm = a;
    c.max_epochs = 30;
    configs.push_back(c);
  }
  const std::vector<std::uint64_t> seeds{42};
  const auto a = run_comparison(d, ann::Topology{}, seeds, configs);
  const auto b = run_comparison(d, ann::Topology{}, seeds, configs);
  ASSERT_EQ(a.reports.size(), 6u);
  EXPECT_EQ(a.points.size(), 6u * 150u);
  for (std::size_t i = 0; i < 6; ++i) {
    const auto& r = a.reports[i];
    EXPECT_EQ(r.algorithm, display_name(kAllAlgorithms[i]));
    EXPECT_TRUE(r.diverged || std::isfinite(r.network_mse));
    EXPECT_EQ(r.loss_trace, b.reports[i].loss_trace);
    EXPECT_EQ(r.network_mse, b.reports[i].network_mse);
  }
}
