// Train one MLP and one ANFIS on synthetic data and predict a single shot.
//
//   ./quickstart [seed]

#include <cstdio>
#include <cstdlib>

#include "cycletime/anfis.hpp"
#include "cycletime/trainers.hpp"

using namespace cycletime;

int main(int argc, char** argv) {
  const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 42;

  const Dataset data = generate_synthetic(600, seed, 0.1);
  const auto nd = normalize(data);
  const auto split_data = split(nd.data, {0.70, 0.15, 0.15}, seed);

  train::TrainConfig cfg;
  cfg.algorithm = train::Algorithm::br;
  cfg.seed = seed;
  const auto net = train::train(ann::init_weights(ann::Topology{}, seed, nd.params), split_data, cfg);
  std::printf("%s %s: %zu epochs (%s), test MSE %.4g s^2, R %.4f\n", net.report.algorithm.c_str(),
              net.report.topology.c_str(), net.report.epochs_run,
              std::string(train::to_string(net.report.stop_reason)).c_str(), net.report.test_mse, net.report.r_value);

  // ANFIS wants the 400/100/100 split
  const auto fis_split = split_counts(nd.data, {400, 100, 100}, seed);
  const std::vector<std::pair<double, double>> box(3, {-1.0, 1.0});
  const auto fis0 = anfis::grid_partition(box, 2, anfis::SugenoOrder::linear, nd.params);
  const auto fis = anfis::train_hybrid(fis0, fis_split, {.seed = seed});
  std::printf("anfis 2 MFs linear, %zu rules: %zu epochs, test MSE %.4g s^2\n", fis.report.rule_count,
              fis.report.epochs_run, fis.report.test_mse);

  Vector shot(3);
  shot << 65.0, 1200.0, 750.0;
  std::printf("shot (65 C, 1200 bar, 750 bar): truth %.3f s, mlp %.3f s, anfis %.3f s\n",
              synthetic_cycle_time(65.0, 1200.0, 750.0), ann::forward(net.model, shot, false),
              anfis::evaluate_fis(fis.model, shot, false));
}
