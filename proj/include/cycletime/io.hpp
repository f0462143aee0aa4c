#pragma once

// JSON model files, JSON-lines reports and the CSV tables / plot data.
// The layouts are described in docs/file-formats.md. Doubles are written so
// that reading them back gives the identical bit pattern (JSON: shortest
// round-trip form; CSV: 17 significant digits).

#include <fstream>
#include <ios>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "cycletime/anfis.hpp"
#include "cycletime/ann.hpp"
#include "cycletime/dataset.hpp"
#include "cycletime/errors.hpp"
#include "cycletime/trainers.hpp"

namespace cycletime::io {

using json = nlohmann::json;

inline constexpr int kModelFormatVersion = 1;
inline constexpr int kReportVersion = 1;

namespace detail {

inline json vec(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Vector vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/// NaN and infinities have no JSON form; they are written as null.
inline json real(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline double real(const json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

inline void check_kind(const json& j, std::string_view kind) {
  if (!j.is_object() || !j.contains("model_kind")) throw SchemaError("model file has no model_kind field");
  const auto k = j.at("model_kind").get<std::string>();
  if (k != kind) throw SchemaError("expected a model of kind '" + std::string(kind) + "', found '" + k + "'");
  if (j.value("format_version", 0) != kModelFormatVersion) throw SchemaError("unsupported model format_version");
}

/// Runs a decoder; anything it rejects surfaces as SchemaError.
template <typename F>
auto decode(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed model file: ") + e.what());
  } catch (const SchemaError&) {
    throw;
  } catch (const Error& e) {
    throw SchemaError(std::string("invalid model: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw SchemaError(std::string("invalid model: ") + e.what());
  }
}

}  // namespace detail

inline json to_json(const NormParams& p) {
  return {{"input_min", detail::vec(p.input_min)},
          {"input_max", detail::vec(p.input_max)},
          {"target_min", p.target_min},
          {"target_max", p.target_max}};
}

inline NormParams norm_from_json(const json& j) {
  NormParams p;
  p.input_min = detail::vec(j.at("input_min"));
  p.input_max = detail::vec(j.at("input_max"));
  p.target_min = j.at("target_min").get<double>();
  p.target_max = j.at("target_max").get<double>();
  if (p.input_min.size() != p.input_max.size()) throw SchemaError("norm_params input bounds differ in length");
  return p;
}

// ---------------------------------------------------------------------------
// ANN

inline json to_json(const ann::NetworkModel& m) {
  json acts = json::array();
  for (auto a : m.activations()) acts.push_back(ann::to_string(a));
  return {{"model_kind", "ann"},
          {"format_version", kModelFormatVersion},
          {"topology",
           {{"input_dim", m.topology().input_dim},
            {"hidden_widths", m.topology().hidden_widths},
            {"output_dim", m.topology().output_dim}}},
          {"activations", acts},
          {"weights", detail::vec(m.weights())},
          {"norm_params", to_json(m.norm())}};
}

inline ann::NetworkModel network_from_json(const json& j) {
  detail::check_kind(j, "ann");
  return detail::decode([&] {
    const auto& t = j.at("topology");
    ann::Topology topo{t.at("input_dim").get<std::size_t>(), t.at("hidden_widths").get<std::vector<std::size_t>>(),
                       t.at("output_dim").get<std::size_t>()};
    return ann::NetworkModel(std::move(topo), detail::vec(j.at("weights")), norm_from_json(j.at("norm_params")));
  });
}

// ---------------------------------------------------------------------------
// ANFIS

inline json to_json(const anfis::FisModel& f) {
  json mfs = json::array();
  for (const auto& set : f.mfs()) {
    json s = json::array();
    for (const auto& mf : set) s.push_back({{"c", mf.c}, {"sigma", mf.sigma}});
    mfs.push_back(std::move(s));
  }
  json rules = json::array();
  for (const auto& r : f.rules()) {
    rules.push_back({{"antecedent", r.antecedent}, {"coefficients", r.coefficients}, {"bias", r.bias}});
  }
  return {{"model_kind", "anfis"},
          {"format_version", kModelFormatVersion},
          {"inputs", f.n_inputs()},
          {"order", anfis::to_string(f.order())},
          {"mfs", mfs},
          {"rules", rules},
          {"norm_params", to_json(f.norm())}};
}

inline anfis::FisModel fis_from_json(const json& j) {
  detail::check_kind(j, "anfis");
  return detail::decode([&] {
    const auto order = anfis::parse_order(j.at("order").get<std::string>());
    if (!order) throw SchemaError("unknown Sugeno order");
    std::vector<std::vector<anfis::GaussianMF>> mfs;
    for (const auto& set : j.at("mfs")) {
      std::vector<anfis::GaussianMF> s;
      for (const auto& mf : set) s.push_back({mf.at("c").get<double>(), mf.at("sigma").get<double>()});
      mfs.push_back(std::move(s));
    }
    if (mfs.size() != j.at("inputs").get<std::size_t>()) throw SchemaError("mfs do not match the input count");
    std::vector<anfis::SugenoRule> rules;
    for (const auto& r : j.at("rules")) {
      rules.push_back({r.at("antecedent").get<std::vector<std::size_t>>(),
                       r.at("coefficients").get<std::vector<double>>(), r.at("bias").get<double>()});
    }
    return anfis::FisModel(std::move(mfs), std::move(rules), *order, norm_from_json(j.at("norm_params")));
  });
}

// ---------------------------------------------------------------------------
// Reports

inline json to_json(const train::TrainReport& r) {
  auto reals = [](const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(detail::real(x));
    return a;
  };
  return {{"report_version", kReportVersion},
          {"model_kind", "ann"},
          {"algorithm", r.algorithm},
          {"topology", r.topology},
          {"seed", r.seed},
          {"epochs_run", r.epochs_run},
          {"train_mse", detail::real(r.train_mse)},
          {"validation_mse", detail::real(r.validation_mse)},
          {"test_mse", detail::real(r.test_mse)},
          {"network_mse", detail::real(r.network_mse)},
          {"train_mse_norm", detail::real(r.train_mse_norm)},
          {"validation_mse_norm", detail::real(r.validation_mse_norm)},
          {"test_mse_norm", detail::real(r.test_mse_norm)},
          {"network_mse_norm", detail::real(r.network_mse_norm)},
          {"r_value", detail::real(r.r_value)},
          {"stop_reason", train::to_string(r.stop_reason)},
          {"diverged", r.diverged},
          {"damping_retries", r.damping_retries},
          {"loss_trace", reals(r.loss_trace)},
          {"validation_trace", reals(r.validation_trace)},
          {"alpha_trace", reals(r.alpha_trace)},
          {"beta_trace", reals(r.beta_trace)},
          {"gamma_trace", reals(r.gamma_trace)}};
}

inline json to_json(const anfis::AnfisReport& r) {
  auto reals = [](const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(detail::real(x));
    return a;
  };
  return {{"report_version", kReportVersion},
          {"model_kind", "anfis"},
          {"n_mfs", r.n_mfs},
          {"order", anfis::to_string(r.order)},
          {"rule_count", r.rule_count},
          {"seed", r.seed},
          {"epochs_run", r.epochs_run},
          {"train_mse", detail::real(r.train_mse)},
          {"validation_mse", detail::real(r.validation_mse)},
          {"test_mse", detail::real(r.test_mse)},
          {"network_mse", detail::real(r.network_mse)},
          {"train_mse_norm", detail::real(r.train_mse_norm)},
          {"validation_mse_norm", detail::real(r.validation_mse_norm)},
          {"test_mse_norm", detail::real(r.test_mse_norm)},
          {"network_mse_norm", detail::real(r.network_mse_norm)},
          {"r_value", detail::real(r.r_value)},
          {"stop_reason", train::to_string(r.stop_reason)},
          {"rank_deficient_epochs", r.rank_deficient_epochs},
          {"loss_trace", reals(r.loss_trace)},
          {"validation_trace", reals(r.validation_trace)}};
}

/// One compact JSON document per line.
template <typename Report>
void write_json_lines(std::ostream& out, const std::vector<Report>& reports) {
  for (const auto& r : reports) out << to_json(r).dump() << '\n';
}

// ---------------------------------------------------------------------------
// CSV tables

namespace detail {
inline std::string csv_real(double v) { return std::isnan(v) ? "nan" : format_real(v); }
}  // namespace detail

/// Algorithm comparison, one row per (seed, algorithm).
inline void write_ann_table(std::ostream& out, const std::vector<train::TrainReport>& reports) {
  out << "method,epochs,training_mse,test_mse,network_mse,r_value,seed,topology,validation_mse,stop_reason,diverged\n";
  for (const auto& r : reports) {
    out << r.algorithm << ',' << r.epochs_run << ',' << detail::csv_real(r.train_mse) << ','
        << detail::csv_real(r.test_mse) << ',' << detail::csv_real(r.network_mse) << ','
        << detail::csv_real(r.r_value) << ',' << r.seed << ',' << r.topology << ','
        << detail::csv_real(r.validation_mse) << ',' << train::to_string(r.stop_reason) << ','
        << (r.diverged ? "true" : "false") << '\n';
  }
}

/// ANFIS summary, one row per (seed, MF count, order).
inline void write_anfis_table(std::ostream& out, const std::vector<anfis::AnfisReport>& reports) {
  out << "n_mfs,sugeno_type,training_mse,testing_mse,seed,rule_count,epochs,validation_mse,network_mse,r_value,"
         "rank_deficient_epochs\n";
  for (const auto& r : reports) {
    out << (r.n_mfs.empty() ? 0 : r.n_mfs.front()) << ',' << anfis::to_string(r.order) << ','
        << detail::csv_real(r.train_mse) << ',' << detail::csv_real(r.test_mse) << ',' << r.seed << ','
        << r.rule_count << ',' << r.epochs_run << ',' << detail::csv_real(r.validation_mse) << ','
        << detail::csv_real(r.network_mse) << ',' << detail::csv_real(r.r_value) << ',' << r.rank_deficient_epochs
        << '\n';
  }
}

/// Actual vs predicted pairs for regression plots.
inline void write_regression(std::ostream& out, const std::vector<train::RegressionPoint>& points) {
  out << "algorithm,seed,partition,row,actual_s,predicted_s\n";
  for (const auto& p : points) {
    out << p.algorithm << ',' << p.seed << ',' << p.partition << ',' << p.row << ',' << format_real(p.actual_s) << ','
        << format_real(p.predicted_s) << '\n';
  }
}

/// Test-set traces (point index, actual, predicted).
inline void write_traces(std::ostream& out, const std::vector<anfis::TracePoint>& points) {
  out << "n_mfs,sugeno_type,seed,index,actual_s,predicted_s\n";
  for (const auto& p : points) {
    out << p.n_mfs << ',' << anfis::to_string(p.order) << ',' << p.seed << ',' << p.index << ','
        << format_real(p.actual_s) << ',' << format_real(p.predicted_s) << '\n';
  }
}

/// Epoch-by-epoch training (and validation, when present) MSE in normalized units.
inline void write_loss_trace(std::ostream& out, const std::vector<double>& train_trace,
                             const std::vector<double>& validation_trace) {
  out << "epoch,train_mse_norm,validation_mse_norm\n";
  for (std::size_t i = 0; i < train_trace.size(); ++i) {
    out << i << ',' << detail::csv_real(train_trace[i]) << ','
        << (i < validation_trace.size() ? detail::csv_real(validation_trace[i]) : std::string()) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Files

inline json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError("'" + path + "' is not valid JSON: " + e.what());
  }
}

/// Writes `text` to `path` in one go.
inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::ios_base::failure("cannot write '" + path + "'");
  out << text;
  if (!out) throw std::ios_base::failure("write to '" + path + "' failed");
}

inline void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

/// The model_kind of a parsed model file ("ann" or "anfis").
inline std::string model_kind(const json& j) {
  if (!j.is_object() || !j.contains("model_kind") || !j.at("model_kind").is_string()) {
    throw SchemaError("model file has no model_kind field");
  }
  return j.at("model_kind").get<std::string>();
}

}  // namespace cycletime::io
