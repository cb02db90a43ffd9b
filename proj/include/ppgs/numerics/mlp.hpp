#ifndef PPGS_NUMERICS_MLP_HPP_
#define PPGS_NUMERICS_MLP_HPP_

// Small fully connected networks with optional layer normalization and ReLU,
// evaluated on column batches (one sample per column) with an explicit
// reverse pass. Templated on the scalar so gradient checks can run in double
// while training runs in float.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace ppgs::numerics {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

enum class Activation : std::uint8_t { kNone = 0, kReLU = 1 };

struct LayerSpec {
  int width = 0;
  bool layer_norm = false;
  Activation activation = Activation::kNone;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct MlpSpec {
  int input_width = 0;
  std::vector<LayerSpec> layers;

  int output_width() const { return layers.empty() ? input_width : layers.back().width; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    int fan_in = input_width;
    for (const LayerSpec& l : layers) {
      n += static_cast<std::size_t>(l.width) * (fan_in + 1);
      if (l.layer_norm) n += 2 * static_cast<std::size_t>(l.width);
      fan_in = l.width;
    }
    return n;
  }

  void Validate() const {
    if (layers.empty()) throw std::invalid_argument("MlpSpec needs at least one layer");
    if (input_width <= 0) throw std::invalid_argument("MlpSpec input width must be positive");
    for (const LayerSpec& l : layers) {
      if (l.width <= 0) throw std::invalid_argument("MlpSpec layer width must be positive");
    }
  }

  // `hidden` layers of `hidden_width` (layer norm + ReLU) and a linear head.
  static MlpSpec Make(int input_width, int hidden, int hidden_width, int output_width,
                      bool layer_norm = true) {
    MlpSpec spec;
    spec.input_width = input_width;
    for (int i = 0; i < hidden; ++i) {
      spec.layers.push_back({hidden_width, layer_norm, Activation::kReLU});
    }
    spec.layers.push_back({output_width, false, Activation::kNone});
    return spec;
  }

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

inline constexpr double kLayerNormEps = 1e-5;

// Biases and the layer-norm affine terms are stored as single-column
// matrices so every parameter block has one type.
template <typename Scalar>
struct LayerParams {
  Matrix<Scalar> weight;  // out x in
  Matrix<Scalar> bias;    // out x 1
  Matrix<Scalar> gain;    // out x 1, empty without layer norm
  Matrix<Scalar> shift;   // out x 1, empty without layer norm
};

template <typename Scalar>
struct MlpParams {
  std::vector<LayerParams<Scalar>> layers;

  std::vector<Matrix<Scalar>*> Blocks() {
    std::vector<Matrix<Scalar>*> out;
    for (auto& l : layers) {
      out.push_back(&l.weight);
      out.push_back(&l.bias);
      if (l.gain.size() > 0) {
        out.push_back(&l.gain);
        out.push_back(&l.shift);
      }
    }
    return out;
  }

  std::vector<const Matrix<Scalar>*> Blocks() const {
    std::vector<const Matrix<Scalar>*> out;
    for (const auto& l : layers) {
      out.push_back(&l.weight);
      out.push_back(&l.bias);
      if (l.gain.size() > 0) {
        out.push_back(&l.gain);
        out.push_back(&l.shift);
      }
    }
    return out;
  }

  void SetZero() {
    for (Matrix<Scalar>* m : Blocks()) m->setZero();
  }

  template <typename Other>
  MlpParams<Other> Cast() const {
    MlpParams<Other> out;
    for (const auto& l : layers) {
      out.layers.push_back({l.weight.template cast<Other>(), l.bias.template cast<Other>(),
                            l.gain.template cast<Other>(), l.shift.template cast<Other>()});
    }
    return out;
  }
};

// Parameters with all-zero values, shaped for `spec`.
template <typename Scalar>
MlpParams<Scalar> ZeroParams(const MlpSpec& spec) {
  spec.Validate();
  MlpParams<Scalar> p;
  int fan_in = spec.input_width;
  for (const LayerSpec& l : spec.layers) {
    LayerParams<Scalar> lp;
    lp.weight = Matrix<Scalar>::Zero(l.width, fan_in);
    lp.bias = Matrix<Scalar>::Zero(l.width, 1);
    if (l.layer_norm) {
      lp.gain = Matrix<Scalar>::Zero(l.width, 1);
      lp.shift = Matrix<Scalar>::Zero(l.width, 1);
    }
    p.layers.push_back(std::move(lp));
    fan_in = l.width;
  }
  return p;
}

// Glorot-uniform weights, zero biases, unit layer-norm gain.
template <typename Scalar>
MlpParams<Scalar> InitParams(const MlpSpec& spec, std::mt19937_64& rng) {
  MlpParams<Scalar> p = ZeroParams<Scalar>(spec);
  int fan_in = spec.input_width;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    const double limit = std::sqrt(6.0 / (fan_in + l.width));
    auto& w = p.layers[i].weight;
    // Column-major fill order keeps the stream independent of Eigen internals.
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        w(r, c) = static_cast<Scalar>((2.0 * u - 1.0) * limit);
      }
    }
    if (l.layer_norm) p.layers[i].gain.setOnes();
    fan_in = l.width;
  }
  return p;
}

template <typename Scalar>
struct LayerCache {
  Matrix<Scalar> input;       // in x batch
  Matrix<Scalar> normalized;  // layer-norm output before the affine rescale
  Matrix<Scalar> inv_std;     // 1 x batch
  Matrix<Scalar> output;      // after activation
};

template <typename Scalar>
struct MlpCache {
  std::vector<LayerCache<Scalar>> layers;

  const Matrix<Scalar>& output() const { return layers.back().output; }
};

template <typename Scalar>
MlpCache<Scalar> Forward(const MlpSpec& spec, const MlpParams<Scalar>& params,
                         const Matrix<Scalar>& input) {
  if (input.rows() != spec.input_width) {
    throw std::invalid_argument("MLP input has " + std::to_string(input.rows()) +
                                " rows, expected " + std::to_string(spec.input_width));
  }
  if (params.layers.size() != spec.layers.size()) {
    throw std::invalid_argument("MLP parameters do not match spec");
  }
  MlpCache<Scalar> cache;
  cache.layers.resize(spec.layers.size());
  const Matrix<Scalar>* x = &input;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& ls = spec.layers[i];
    const LayerParams<Scalar>& lp = params.layers[i];
    LayerCache<Scalar>& lc = cache.layers[i];
    lc.input = *x;
    Matrix<Scalar> h = lp.weight * lc.input;
    h.colwise() += lp.bias.col(0);
    if (ls.layer_norm) {
      const Scalar n = static_cast<Scalar>(h.rows());
      const auto mean = (h.colwise().sum() / n).eval();
      h.rowwise() -= mean;
      const auto var = (h.array().square().colwise().sum() / n).eval();
      lc.inv_std = (var + static_cast<Scalar>(kLayerNormEps)).rsqrt().matrix();
      h.array().rowwise() *= lc.inv_std.array().row(0);
      lc.normalized = h;
      h.array().colwise() *= lp.gain.array().col(0);
      h.colwise() += lp.shift.col(0);
    }
    if (ls.activation == Activation::kReLU) h = h.cwiseMax(Scalar(0));
    lc.output = std::move(h);
    x = &lc.output;
  }
  return cache;
}

// Accumulates parameter gradients into `grads` and returns the gradient with
// respect to the network input.
template <typename Scalar>
Matrix<Scalar> Backward(const MlpSpec& spec, const MlpParams<Scalar>& params,
                        const MlpCache<Scalar>& cache, const Matrix<Scalar>& grad_output,
                        MlpParams<Scalar>& grads) {
  Matrix<Scalar> g = grad_output;
  for (std::size_t k = spec.layers.size(); k-- > 0;) {
    const LayerSpec& ls = spec.layers[k];
    const LayerParams<Scalar>& lp = params.layers[k];
    const LayerCache<Scalar>& lc = cache.layers[k];
    LayerParams<Scalar>& lg = grads.layers[k];
    if (ls.activation == Activation::kReLU) {
      g = (lc.output.array() > Scalar(0)).select(g, Scalar(0));
    }
    if (ls.layer_norm) {
      lg.gain.col(0) += (g.array() * lc.normalized.array()).rowwise().sum().matrix();
      lg.shift.col(0) += g.rowwise().sum();
      Matrix<Scalar> gx = (g.array().colwise() * lp.gain.array().col(0)).matrix();
      const Scalar n = static_cast<Scalar>(gx.rows());
      const auto sum_g = gx.colwise().sum().eval();
      const auto sum_gx = (gx.array() * lc.normalized.array()).colwise().sum().eval();
      Matrix<Scalar> centered = (gx * n).rowwise() - sum_g;
      centered -= (lc.normalized.array().rowwise() * sum_gx.array()).matrix();
      centered.array().rowwise() *= (lc.inv_std.array() / n).row(0);
      g = std::move(centered);
    }
    lg.weight.noalias() += g * lc.input.transpose();
    lg.bias.col(0) += g.rowwise().sum();
    g = (lp.weight.transpose() * g).eval();
  }
  return g;
}

// Normalizes each column to unit L2 norm.
template <typename Scalar>
Matrix<Scalar> NormalizeColumns(const Matrix<Scalar>& v) {
  Matrix<Scalar> out = v;
  for (Eigen::Index c = 0; c < v.cols(); ++c) {
    const Scalar norm = v.col(c).norm();
    if (!(norm > Scalar(0))) {
      throw std::domain_error("cannot project a zero vector onto the sphere");
    }
    out.col(c) /= norm;
  }
  return out;
}

// Gradient of NormalizeColumns: (g - y (y.g)) / ||v||.
template <typename Scalar>
Matrix<Scalar> NormalizeColumnsBackward(const Matrix<Scalar>& v, const Matrix<Scalar>& y,
                                        const Matrix<Scalar>& grad_y) {
  Matrix<Scalar> out(v.rows(), v.cols());
  for (Eigen::Index c = 0; c < v.cols(); ++c) {
    const Scalar dot = y.col(c).dot(grad_y.col(c));
    out.col(c) = (grad_y.col(c) - y.col(c) * dot) / v.col(c).norm();
  }
  return out;
}

template <typename Scalar>
Vector<Scalar> NormalizeToSphere(const Vector<Scalar>& v) {
  return NormalizeColumns<Scalar>(v).col(0);
}

}  // namespace ppgs::numerics

#endif  // PPGS_NUMERICS_MLP_HPP_
