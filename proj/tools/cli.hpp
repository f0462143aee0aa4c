#pragma once

// The `cycletime` command line. Kept in a header so the test suite can drive
// it in-process: run() takes the argument list and two streams and returns
// the process exit code.
//
// Exit codes: 0 ok, 2 usage, 3 I/O, 4 data / model schema.

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cycletime/anfis.hpp"
#include "cycletime/ann.hpp"
#include "cycletime/dataset.hpp"
#include "cycletime/io.hpp"
#include "cycletime/trainers.hpp"

namespace cycletime::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitData = 4;

/// Bad flag values found after CLI11 has accepted the syntax.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::uint64_t parse_u64(std::string_view s) {
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw UsageError("'" + std::string(s) + "' is not a non-negative integer");
  return v;
}

/// "8,8" -> {8, 8}. An empty string gives an empty list.
inline std::vector<std::size_t> parse_widths(const std::string& s) {
  std::vector<std::size_t> out;
  if (s.empty()) return out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');) {
    const auto v = parse_u64(item);
    if (v == 0) throw UsageError("layer widths and MF counts must be >= 1");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

/// "1..10" or "3,5,8".
inline std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  if (const auto dots = s.find(".."); dots != std::string::npos) {
    const auto lo = parse_u64(std::string_view(s).substr(0, dots));
    const auto hi = parse_u64(std::string_view(s).substr(dots + 2));
    if (hi < lo) throw UsageError("seed range '" + s + "' is empty");
    for (auto v = lo; v <= hi; ++v) out.push_back(v);
    return out;
  }
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');) out.push_back(parse_u64(item));
  if (out.empty()) throw UsageError("no seeds given");
  return out;
}

inline std::array<double, 3> parse_ratios(const std::string& s) {
  std::array<double, 3> r{};
  std::stringstream in(s);
  std::size_t k = 0;
  for (std::string item; std::getline(in, item, ',');) {
    if (k == 3) throw UsageError("--split takes three comma-separated ratios");
    double v = 0.0;
    const auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc{} || p != item.data() + item.size()) throw UsageError("bad ratio '" + item + "'");
    r[k++] = v;
  }
  if (k != 3) throw UsageError("--split takes three comma-separated ratios");
  return r;
}

inline std::vector<double> parse_triple(const std::string& s) {
  std::vector<double> v;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');) {
    double x = 0.0;
    const auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), x);
    if (ec != std::errc{} || p != item.data() + item.size()) throw UsageError("bad input value '" + item + "'");
    v.push_back(x);
  }
  if (v.size() != 3) throw UsageError("--input takes mould_temp,injection_pressure,switchover_pressure");
  return v;
}

/// Output names are plain file names inside --out-dir.
inline std::filesystem::path output_path(const std::string& out_dir, const std::string& name) {
  const std::filesystem::path p(name);
  if (name.empty() || p.has_parent_path() || p.is_absolute() || name == "." || name == "..") {
    throw UsageError("output name '" + name + "' must be a plain file name; use --out-dir to choose the directory");
  }
  return std::filesystem::path(out_dir) / p;
}

inline void write_file(const std::string& out_dir, const std::string& name, const std::string& text) {
  io::write_text(output_path(out_dir, name).string(), text);
}

template <typename F>
std::string render(F&& f) {
  std::ostringstream s;
  f(s);
  return s.str();
}

}  // namespace detail

struct Globals {
  std::uint64_t seed = 42;
  std::string out_dir = ".";
  std::string format = "csv";
};

/// Where the data for a training command comes from.
struct DataSource {
  std::string path;
  std::size_t n = 600;
  double noise = 0.1;

  void add_to(CLI::App* app) {
    auto* data = app->add_option("--data", path, "Process-data CSV (default: synthetic data)")->check(CLI::ExistingFile);
    app->add_option("--n", n, "Synthetic row count")->capture_default_str()->check(CLI::Range(10, 100000000))->excludes(data);
    app->add_option("--noise", noise, "Synthetic noise sd (s)")->capture_default_str()->check(CLI::NonNegativeNumber)->excludes(data);
  }

  Dataset load(std::uint64_t seed) const { return path.empty() ? generate_synthetic(n, seed, noise) : load_csv(path); }
};

inline CLI::Validator algorithm_validator() {
  return CLI::Validator(
      [](std::string& s) {
        return train::parse_algorithm(s) ? std::string()
                                         : "unknown algorithm '" + s + "'; valid names: br, lm, gd, gdm, scg, oss";
      },
      "ALGO");
}

inline CLI::Validator order_validator() {
  return CLI::Validator(
      [](std::string& s) {
        return anfis::parse_order(s) ? std::string() : "unknown Sugeno order '" + s + "'; valid: constant, linear";
      },
      "ORDER");
}

// ---------------------------------------------------------------------------
// Subcommands

struct GenDataArgs {
  std::size_t n = 600;
  double noise = 0.1;
  std::string output = "synthetic.csv";
};

inline int cmd_gen_data(const Globals& g, const GenDataArgs& a, std::ostream& out) {
  const Dataset d = generate_synthetic(a.n, g.seed, a.noise);
  detail::write_file(g.out_dir, a.output, detail::render([&](std::ostream& s) { write_csv(s, d); }));
  if (g.format == "json") {
    io::json j{{"rows", d.size()}, {"seed", g.seed}, {"noise_sd", a.noise}, {"file", a.output}};
    for (std::size_t c = 0; c < d.columns().size(); ++c) {
      const auto col = c < 3 ? Vector(d.inputs().col(static_cast<Eigen::Index>(c))) : d.targets();
      j["ranges"][d.columns()[c]] = {col.minCoeff(), col.maxCoeff()};
    }
    out << j.dump() << '\n';
  } else {
    out << "wrote " << d.size() << " rows to " << a.output << " (seed " << g.seed << ", noise_sd " << a.noise << ")\n";
    for (std::size_t c = 0; c < d.columns().size(); ++c) {
      const auto col = c < 3 ? Vector(d.inputs().col(static_cast<Eigen::Index>(c))) : d.targets();
      out << "  " << d.columns()[c] << ": " << col.minCoeff() << " .. " << col.maxCoeff() << '\n';
    }
  }
  return kExitOk;
}

struct TrainAnnArgs {
  DataSource data;
  std::string algo = "lm";
  std::string hidden = "8,8";
  std::string split = "0.7,0.15,0.15";
  bool no_shuffle = false;
  train::TrainConfig cfg;
  std::string name;
};

inline int cmd_train_ann(const Globals& g, TrainAnnArgs a, std::ostream& out) {
  a.cfg.algorithm = *train::parse_algorithm(a.algo);
  a.cfg.seed = g.seed;
  const ann::Topology topology{3, detail::parse_widths(a.hidden), 1};
  SplitSpec spec;
  spec.ratios = detail::parse_ratios(a.split);
  spec.shuffle = !a.no_shuffle;

  const auto nd = normalize(a.data.load(g.seed));
  const auto split = spec.apply(nd.data, g.seed);
  const auto initial = ann::init_weights(topology, g.seed, nd.params);
  const auto result = train::train(initial, split, a.cfg);

  std::vector<train::RegressionPoint> points;
  train::append_points(result.model, split, result.report.algorithm, g.seed, points);
  const std::string stem = a.name.empty() ? result.report.algorithm : a.name;
  detail::write_file(g.out_dir, stem + ".model.json", io::to_json(result.model).dump(2) + "\n");
  detail::write_file(g.out_dir, stem + ".report.json", io::to_json(result.report).dump(2) + "\n");
  detail::write_file(g.out_dir, stem + ".loss.csv", detail::render([&](std::ostream& s) {
                       io::write_loss_trace(s, result.report.loss_trace, result.report.validation_trace);
                     }));
  detail::write_file(g.out_dir, stem + ".regression.csv",
                     detail::render([&](std::ostream& s) { io::write_regression(s, points); }));

  if (g.format == "json") {
    out << io::to_json(result.report).dump() << '\n';
  } else {
    io::write_ann_table(out, {result.report});
  }
  return kExitOk;
}

struct TrainAnfisArgs {
  DataSource data;
  std::size_t mfs = 2;
  std::string order = "linear";
  std::string split;
  bool no_shuffle = false;
  anfis::HybridConfig cfg;
  std::string name;
};

inline SplitSpec anfis_spec(const std::string& ratios, bool no_shuffle, std::size_t rows) {
  SplitSpec spec = anfis::anfis_split_for(rows);
  if (!ratios.empty()) {
    spec.counts.reset();
    spec.ratios = detail::parse_ratios(ratios);
  }
  spec.shuffle = !no_shuffle;
  return spec;
}

inline int cmd_train_anfis(const Globals& g, TrainAnfisArgs a, std::ostream& out) {
  const auto order = *anfis::parse_order(a.order);
  if (a.mfs < 2) throw UsageError("--mfs must be >= 2");
  a.cfg.seed = g.seed;
  const auto nd = normalize(a.data.load(g.seed));
  const auto split = anfis_spec(a.split, a.no_shuffle, nd.data.size()).apply(nd.data, g.seed);
  const std::vector<std::pair<double, double>> box(nd.data.dims(), {-1.0, 1.0});
  const auto result = anfis::train_hybrid(anfis::grid_partition(box, a.mfs, order, nd.params), split, a.cfg);

  std::vector<anfis::TracePoint> trace;
  const Vector pred = anfis::predict(result.model, split.test.inputs());
  for (std::size_t i = 0; i < split.test.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    trace.push_back({a.mfs, order, g.seed, i, nd.params.denormalize_target(split.test.targets()(k)),
                     nd.params.denormalize_target(pred(k))});
  }
  const std::string stem =
      a.name.empty() ? "anfis_" + std::to_string(a.mfs) + "mf_" + anfis::to_string(order) : a.name;
  detail::write_file(g.out_dir, stem + ".model.json", io::to_json(result.model).dump(2) + "\n");
  detail::write_file(g.out_dir, stem + ".report.json", io::to_json(result.report).dump(2) + "\n");
  detail::write_file(g.out_dir, stem + ".trace.csv", detail::render([&](std::ostream& s) { io::write_traces(s, trace); }));

  if (g.format == "json") {
    out << io::to_json(result.report).dump() << '\n';
  } else {
    io::write_anfis_table(out, {result.report});
  }
  return kExitOk;
}

struct CompareArgs {
  DataSource data;
  std::string suite = "all";
  std::string seeds;
  std::string hidden = "8,8";
  std::string algos = "br,lm,gd,gdm,scg,oss";
  std::string mfs = "2,4";
  std::string orders = "constant,linear";
  std::size_t epochs = 1000;
  std::size_t anfis_epochs = 50;
};

inline int cmd_compare(const Globals& g, const CompareArgs& a, std::ostream& out) {
  const auto seeds = a.seeds.empty() ? std::vector<std::uint64_t>{g.seed} : detail::parse_seeds(a.seeds);
  const bool do_ann = a.suite == "ann" || a.suite == "all";
  const bool do_anfis = a.suite == "anfis" || a.suite == "all";

  std::vector<train::TrainConfig> configs;
  {
    std::stringstream in(a.algos);
    for (std::string item; std::getline(in, item, ',');) {
      const auto algo = train::parse_algorithm(item);
      if (!algo) throw UsageError("unknown algorithm '" + item + "'; valid names: br, lm, gd, gdm, scg, oss");
      train::TrainConfig c;
      c.algorithm = *algo;
      c.max_epochs = a.epochs;
      configs.push_back(c);
    }
  }
  std::vector<anfis::SugenoOrder> orders;
  {
    std::stringstream in(a.orders);
    for (std::string item; std::getline(in, item, ',');) {
      const auto o = anfis::parse_order(item);
      if (!o) throw UsageError("unknown Sugeno order '" + item + "'");
      orders.push_back(*o);
    }
  }
  const auto mfs = detail::parse_widths(a.mfs);
  const ann::Topology topology{3, detail::parse_widths(a.hidden), 1};
  // The data is drawn once, from the global seed; --seeds varies split and initialization.
  const Dataset data = a.data.load(g.seed);

  io::json summary{{"report_version", io::kReportVersion}, {"suite", a.suite}, {"seeds", seeds}};
  if (do_ann) {
    const auto res = train::run_comparison(data, topology, seeds, configs);
    detail::write_file(g.out_dir, "ann_table.csv", detail::render([&](std::ostream& s) { io::write_ann_table(s, res.reports); }));
    detail::write_file(g.out_dir, "ann_regression.csv",
                       detail::render([&](std::ostream& s) { io::write_regression(s, res.points); }));
    summary["ann"] = io::json::array();
    for (const auto& r : res.reports) summary["ann"].push_back(io::to_json(r));
    if (g.format == "csv") io::write_ann_table(out, res.reports);
  }
  if (do_anfis) {
    anfis::HybridConfig hc;
    hc.epochs = a.anfis_epochs;
    const auto res = anfis::run_anfis_comparison(data, mfs, orders, seeds, hc);
    detail::write_file(g.out_dir, "anfis_table.csv",
                       detail::render([&](std::ostream& s) { io::write_anfis_table(s, res.reports); }));
    detail::write_file(g.out_dir, "anfis_traces.csv", detail::render([&](std::ostream& s) { io::write_traces(s, res.traces); }));
    summary["anfis"] = io::json::array();
    for (const auto& r : res.reports) summary["anfis"].push_back(io::to_json(r));
    if (g.format == "csv") io::write_anfis_table(out, res.reports);
  }
  detail::write_file(g.out_dir, "compare.json", summary.dump(2) + "\n");
  if (g.format == "json") out << summary.dump() << '\n';
  return kExitOk;
}

struct PredictArgs {
  std::string model;
  std::string kind;
  std::string input;
  std::string batch;
  std::string output = "predictions.csv";
};

inline int cmd_predict(const Globals& g, const PredictArgs& a, std::ostream& out) {
  const auto j = io::read_json(a.model);
  const auto kind = io::model_kind(j);
  if (!a.kind.empty() && a.kind != kind) {
    throw SchemaError("model file is of kind '" + kind + "' but --kind " + a.kind + " was requested");
  }
  std::function<double(const Vector&)> f;
  if (kind == "ann") {
    auto m = std::make_shared<ann::NetworkModel>(io::network_from_json(j));
    f = [m](const Vector& x) { return ann::forward(*m, x, false); };
  } else if (kind == "anfis") {
    auto m = std::make_shared<anfis::FisModel>(io::fis_from_json(j));
    f = [m](const Vector& x) { return anfis::evaluate_fis(*m, x, false); };
  } else {
    throw SchemaError("unknown model_kind '" + kind + "'");
  }

  if (!a.input.empty()) {
    const auto v = detail::parse_triple(a.input);
    const double y = f(Eigen::Map<const Vector>(v.data(), 3));
    if (g.format == "json") {
      out << io::json{{"model_kind", kind}, {"predicted_s", io::detail::real(y)}}.dump() << '\n';
    } else {
      out << format_real(y) << '\n';
    }
    return kExitOk;
  }

  bool has_target = true;
  Dataset d;
  try {
    d = load_csv(a.batch);
  } catch (const SchemaError&) {
    d = load_csv(a.batch, {.require_target = false});
    has_target = false;
  }
  std::ostringstream s;
  s << "mould_temp,injection_pressure,switchover_pressure," << (has_target ? "cycle_time," : "") << "predicted_cycle_time\n";
  for (Eigen::Index i = 0; i < d.inputs().rows(); ++i) {
    const Vector x = d.inputs().row(i).transpose();
    for (Eigen::Index k = 0; k < 3; ++k) s << format_real(x(k)) << ',';
    if (has_target) s << format_real(d.targets()(i)) << ',';
    s << format_real(f(x)) << '\n';
  }
  detail::write_file(g.out_dir, a.output, s.str());
  out << "wrote " << d.size() << " predictions to " << a.output << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cycle-time prediction for injection moulding: neural network and ANFIS models", "cycletime"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "Random seed (split, initialization, synthetic data)")->capture_default_str();
  app.add_option("--out-dir", g.out_dir, "Directory for every output file")->capture_default_str();
  app.add_option("--format", g.format, "Format of the summary printed to stdout")
      ->capture_default_str()
      ->check(CLI::IsMember({"csv", "json"}));

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Write a synthetic process-data CSV");
  gen_cmd->add_option("--n", gen.n, "Number of rows (>= 10)")->capture_default_str()->check(CLI::Range(10, 100000000));
  gen_cmd->add_option("--noise", gen.noise, "Gaussian noise sd on the cycle time (s)")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  gen_cmd->add_option("-o,--output", gen.output, "File name inside --out-dir")->capture_default_str();

  TrainAnnArgs tann;
  auto* ann_cmd = app.add_subcommand("train-ann", "Train one neural network");
  tann.data.add_to(ann_cmd);
  ann_cmd->add_option("--algo", tann.algo, "br, lm, gd, gdm, scg or oss")->capture_default_str()->check(algorithm_validator());
  ann_cmd->add_option("--hidden", tann.hidden, "Hidden layer widths, comma separated")->capture_default_str();
  ann_cmd->add_option("--split", tann.split, "Train,validation,test ratios")->capture_default_str();
  ann_cmd->add_flag("--no-shuffle", tann.no_shuffle, "Split in file order");
  ann_cmd->add_option("--epochs", tann.cfg.max_epochs, "Maximum epochs")->capture_default_str();
  ann_cmd->add_option("--goal", tann.cfg.goal_mse, "Stop at this normalized training MSE")->capture_default_str();
  ann_cmd->add_option("--lr", tann.cfg.lr, "Learning rate (gd, gdm)")->capture_default_str();
  ann_cmd->add_option("--momentum", tann.cfg.momentum, "Momentum (gdm)")->capture_default_str();
  ann_cmd->add_option("--mu", tann.cfg.mu0, "Initial damping (lm, br)")->capture_default_str();
  ann_cmd->add_option("--max-fail", tann.cfg.max_fail, "Validation patience")->capture_default_str();
  ann_cmd->add_option("--name", tann.name, "Output file stem (default: the algorithm name)");

  TrainAnfisArgs tfis;
  auto* fis_cmd = app.add_subcommand("train-anfis", "Train one ANFIS");
  tfis.data.add_to(fis_cmd);
  fis_cmd->add_option("--mfs", tfis.mfs, "Membership functions per input")->capture_default_str();
  fis_cmd->add_option("--order", tfis.order, "Sugeno order: constant or linear")->capture_default_str()->check(order_validator());
  fis_cmd->add_option("--split", tfis.split, "Train,validation,test ratios (default 400/100/100 on 600 rows)");
  fis_cmd->add_flag("--no-shuffle", tfis.no_shuffle, "Split in file order");
  fis_cmd->add_option("--epochs", tfis.cfg.epochs, "Hybrid epochs")->capture_default_str()->check(CLI::PositiveNumber);
  fis_cmd->add_option("--lr-premise", tfis.cfg.lr_premise, "Premise step size")->capture_default_str();
  fis_cmd->add_option("--decay", tfis.cfg.lr_decay, "Per-epoch step size factor")->capture_default_str();
  fis_cmd->add_option("--max-fail", tfis.cfg.max_fail, "Validation patience")->capture_default_str();
  fis_cmd->add_option("--name", tfis.name, "Output file stem");

  CompareArgs cmp;
  auto* cmp_cmd = app.add_subcommand("compare", "Run the algorithm and/or ANFIS comparison tables");
  cmp.data.add_to(cmp_cmd);
  cmp_cmd->add_option("--suite", cmp.suite, "ann, anfis or all")->capture_default_str()->check(CLI::IsMember({"ann", "anfis", "all"}));
  cmp_cmd->add_option("--seeds", cmp.seeds, "Seeds as a range 1..10 or a list 1,2,3 (default: --seed)");
  cmp_cmd->add_option("--hidden", cmp.hidden, "Hidden layer widths")->capture_default_str();
  cmp_cmd->add_option("--algos", cmp.algos, "Algorithms to compare")->capture_default_str();
  cmp_cmd->add_option("--mfs", cmp.mfs, "MF counts for the ANFIS grid")->capture_default_str();
  cmp_cmd->add_option("--orders", cmp.orders, "Sugeno orders for the ANFIS grid")->capture_default_str();
  cmp_cmd->add_option("--epochs", cmp.epochs, "Maximum epochs per network")->capture_default_str();
  cmp_cmd->add_option("--anfis-epochs", cmp.anfis_epochs, "Hybrid epochs per ANFIS")->capture_default_str()->check(CLI::PositiveNumber);

  PredictArgs pred;
  auto* pred_cmd = app.add_subcommand("predict", "Predict cycle time with a saved model");
  pred_cmd->add_option("--model", pred.model, "Model JSON file")->required();
  pred_cmd->add_option("--kind", pred.kind, "Expected model kind")->check(CLI::IsMember({"ann", "anfis"}));
  auto* single = pred_cmd->add_option("--input", pred.input, "mould_temp,injection_pressure,switchover_pressure");
  auto* batch = pred_cmd->add_option("--batch", pred.batch, "CSV of inputs");
  single->excludes(batch);
  pred_cmd->add_option("-o,--output", pred.output, "Batch output file name inside --out-dir")->capture_default_str();

  std::vector<std::string> storage{"cycletime"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : storage) argv.push_back(s.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (pred_cmd->parsed() && pred.input.empty() && pred.batch.empty()) throw UsageError("predict needs --input or --batch");
    std::filesystem::create_directories(g.out_dir);
    if (gen_cmd->parsed()) return cmd_gen_data(g, gen, out);
    if (ann_cmd->parsed()) return cmd_train_ann(g, tann, out);
    if (fis_cmd->parsed()) return cmd_train_anfis(g, tfis, out);
    if (cmp_cmd->parsed()) return cmd_compare(g, cmp, out);
    if (pred_cmd->parsed()) return cmd_predict(g, pred, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::ios_base::failure& e) {
    err << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const Error& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace cycletime::cli
