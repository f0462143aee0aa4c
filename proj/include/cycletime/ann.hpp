#pragma once

// Feedforward network: tansig hidden layers, one purelin output.
//
// Parameter layout (shared by every trainer): a single flat vector, layer by
// layer from the input side. Within a layer, neuron by neuron; each neuron
// stores its fan_in incoming weights followed by its bias. A layer is therefore
// a row-major fan_out x (fan_in + 1) block.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "cycletime/dataset.hpp"
#include "cycletime/errors.hpp"
#include "cycletime/numerics.hpp"

namespace cycletime::ann {

enum class Activation { tansig, purelin };

inline const char* to_string(Activation a) { return a == Activation::tansig ? "tansig" : "purelin"; }

/// Hyperbolic-tangent sigmoid written as 2 / (1 + exp(-2n)) - 1.
inline double tansig(double n) { return 2.0 / (1.0 + std::exp(-2.0 * n)) - 1.0; }

struct Topology {
  std::size_t input_dim = 3;
  std::vector<std::size_t> hidden_widths{8, 8};
  std::size_t output_dim = 1;

  /// An empty hidden_widths gives a purely linear model.
  void validate() const {
    if (input_dim == 0) throw std::invalid_argument("input_dim must be >= 1");
    if (output_dim != 1) throw std::invalid_argument("only single-output networks are supported");
    for (auto w : hidden_widths) {
      if (w == 0) throw std::invalid_argument("hidden layer widths must be >= 1");
    }
  }

  /// Neuron counts from the input through the output.
  std::vector<std::size_t> layer_sizes() const {
    std::vector<std::size_t> s{input_dim};
    s.insert(s.end(), hidden_widths.begin(), hidden_widths.end());
    s.push_back(output_dim);
    return s;
  }

  std::size_t weight_count() const {
    const auto s = layer_sizes();
    std::size_t n = 0;
    for (std::size_t l = 1; l < s.size(); ++l) n += (s[l - 1] + 1) * s[l];
    return n;
  }

  std::string describe() const {
    std::string out = std::to_string(input_dim);
    for (auto w : hidden_widths) out += "-" + std::to_string(w);
    return out + "-" + std::to_string(output_dim);
  }

  bool operator==(const Topology&) const = default;
};

class NetworkModel {
 public:
  NetworkModel(Topology topology, Vector weights, NormParams norm)
      : topology_(std::move(topology)), weights_(std::move(weights)), norm_(std::move(norm)) {
    topology_.validate();
    if (static_cast<std::size_t>(weights_.size()) != topology_.weight_count()) {
      throw DimensionMismatch("weight vector length does not match topology " + topology_.describe());
    }
    if (!weights_.allFinite()) throw Error("network weights must be finite");
    if (norm_.dims() != topology_.input_dim) throw DimensionMismatch("normalization width differs from input_dim");
  }

  NetworkModel(Topology topology, Vector weights)
      : NetworkModel(topology, std::move(weights), NormParams::identity(topology.input_dim)) {}

  const Topology& topology() const { return topology_; }
  const Vector& weights() const { return weights_; }
  const NormParams& norm() const { return norm_; }

  std::vector<Activation> activations() const {
    std::vector<Activation> a(topology_.hidden_widths.size(), Activation::tansig);
    a.push_back(Activation::purelin);
    return a;
  }

  NetworkModel with_weights(Vector w) const { return NetworkModel(topology_, std::move(w), norm_); }
  NetworkModel with_norm(NormParams n) const { return NetworkModel(topology_, weights_, std::move(n)); }

 private:
  Topology topology_;
  Vector weights_;
  NormParams norm_;
};

namespace detail {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using LayerBlock = Eigen::Map<const RowMajorMatrix>;

struct LayerView {
  LayerBlock block;
  std::size_t offset;
  Eigen::Index fan_in;
  Eigen::Index fan_out;
};

inline std::vector<LayerView> layers(const Topology& t, const Vector& w) {
  const auto s = t.layer_sizes();
  std::vector<LayerView> out;
  std::size_t offset = 0;
  for (std::size_t l = 1; l < s.size(); ++l) {
    const auto fan_in = static_cast<Eigen::Index>(s[l - 1]);
    const auto fan_out = static_cast<Eigen::Index>(s[l]);
    out.push_back({LayerBlock(w.data() + offset, fan_out, fan_in + 1), offset, fan_in, fan_out});
    offset += static_cast<std::size_t>((fan_in + 1) * fan_out);
  }
  return out;
}

/// Activations of every layer for a batch; column i is sample i.
/// acts[0] is the input, acts.back() the network output.
inline std::vector<Matrix> forward_all(const NetworkModel& m, const Matrix& inputs) {
  if (static_cast<std::size_t>(inputs.cols()) != m.topology().input_dim) {
    throw DimensionMismatch("input width " + std::to_string(inputs.cols()) + " does not match topology " +
                            m.topology().describe());
  }
  const auto views = layers(m.topology(), m.weights());
  std::vector<Matrix> acts;
  acts.reserve(views.size() + 1);
  acts.push_back(inputs.transpose());
  for (std::size_t l = 0; l < views.size(); ++l) {
    const auto& v = views[l];
    Matrix z = v.block.leftCols(v.fan_in) * acts.back();
    z.colwise() += v.block.col(v.fan_in);
    if (l + 1 < views.size()) z = z.unaryExpr(&tansig);
    acts.push_back(std::move(z));
  }
  return acts;
}

/// Reverse sweep. `seed` holds dLoss/dOutput per sample (1 x n). When
/// `per_sample` is false the weight derivatives are summed into a gradient,
/// otherwise each sample gets its own row (the Jacobian layout).
inline void backward(const NetworkModel& m, const std::vector<Matrix>& acts, Matrix delta, Matrix& out,
                     bool per_sample) {
  const auto views = layers(m.topology(), m.weights());
  for (std::size_t l = views.size(); l-- > 0;) {
    const auto& v = views[l];
    const Matrix& below = acts[l];
    for (Eigen::Index j = 0; j < v.fan_out; ++j) {
      const auto base = static_cast<Eigen::Index>(v.offset) + j * (v.fan_in + 1);
      if (per_sample) {
        for (Eigen::Index k = 0; k < v.fan_in; ++k) out.col(base + k) = (delta.row(j).array() * below.row(k).array()).transpose();
        out.col(base + v.fan_in) = delta.row(j).transpose();
      } else {
        out.block(0, base, 1, v.fan_in) = delta.row(j) * below.transpose();
        out(0, base + v.fan_in) = delta.row(j).sum();
      }
    }
    if (l > 0) {
      Matrix back = v.block.leftCols(v.fan_in).transpose() * delta;
      delta = back.array() * (1.0 - below.array().square());
    }
  }
}

}  // namespace detail

/// Predictions for a batch, in the same (normalized) units as the inputs.
inline Vector predict(const NetworkModel& m, const Matrix& inputs) {
  return detail::forward_all(m, inputs).back().row(0).transpose();
}

/// Single prediction. With normalized = false the input is in process units and
/// the result is in seconds; otherwise both sides are in [-1, 1] units.
inline double forward(const NetworkModel& m, const Vector& input, bool normalized) {
  if (static_cast<std::size_t>(input.size()) != m.topology().input_dim) {
    throw DimensionMismatch("input has " + std::to_string(input.size()) + " components, expected " +
                            std::to_string(m.topology().input_dim));
  }
  const Vector x = normalized ? input : m.norm().normalize_input(input);
  const double y = predict(m, x.transpose())(0);
  return normalized ? y : m.norm().denormalize_target(y);
}

/// e = target - prediction.
inline Vector residuals(const NetworkModel& m, const Dataset& batch) { return batch.targets() - predict(m, batch.inputs()); }

inline double loss(const NetworkModel& m, const Dataset& batch) {
  if (batch.empty()) throw EmptyInput("loss over an empty batch");
  return residuals(m, batch).squaredNorm() / static_cast<double>(batch.size());
}

/// dMSE/dweights by reverse-mode accumulation over the whole batch.
inline Vector gradient(const NetworkModel& m, const Dataset& batch) {
  if (batch.empty()) throw EmptyInput("gradient over an empty batch");
  const auto acts = detail::forward_all(m, batch.inputs());
  const double n = static_cast<double>(batch.size());
  Matrix seed = (2.0 / n) * (acts.back().row(0) - batch.targets().transpose());
  Matrix g = Matrix::Zero(1, m.weights().size());
  detail::backward(m, acts, std::move(seed), g, false);
  return g.row(0).transpose();
}

/// Row i holds de_i/dweights with e_i = target_i - prediction_i, so
/// gradient() == (2/n) J^T e.
inline Matrix jacobian(const NetworkModel& m, const Dataset& batch) {
  if (batch.empty()) throw EmptyInput("jacobian over an empty batch");
  const auto acts = detail::forward_all(m, batch.inputs());
  Matrix seed = Matrix::Constant(1, static_cast<Eigen::Index>(batch.size()), -1.0);
  Matrix j(static_cast<Eigen::Index>(batch.size()), m.weights().size());
  detail::backward(m, acts, std::move(seed), j, true);
  return j;
}

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights per layer, zero biases.
inline NetworkModel init_weights(const Topology& t, std::uint64_t seed, NormParams norm) {
  t.validate();
  std::mt19937_64 rng(seed);
  Vector w = Vector::Zero(static_cast<Eigen::Index>(t.weight_count()));
  const auto s = t.layer_sizes();
  std::size_t offset = 0;
  for (std::size_t l = 1; l < s.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(s[l - 1]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t j = 0; j < s[l]; ++j) {
      for (std::size_t k = 0; k < s[l - 1]; ++k) w(static_cast<Eigen::Index>(offset + k)) = dist(rng);
      offset += s[l - 1] + 1;
    }
  }
  return NetworkModel(t, std::move(w), std::move(norm));
}

inline NetworkModel init_weights(const Topology& t, std::uint64_t seed) {
  return init_weights(t, seed, NormParams::identity(t.input_dim));
}

}  // namespace cycletime::ann
