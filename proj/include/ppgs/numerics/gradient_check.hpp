#ifndef PPGS_NUMERICS_GRADIENT_CHECK_HPP_
#define PPGS_NUMERICS_GRADIENT_CHECK_HPP_

// Central finite-difference check of Backward on an MLP in double precision.

#include <algorithm>
#include <cmath>
#include <vector>

#include "ppgs/numerics/mlp.hpp"

namespace ppgs::numerics {

struct GradientCheckResult {
  double max_relative_error = 0.0;
  int checked = 0;
  int skipped = 0;  // a ReLU switched inside [w - h, w + h]
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

namespace internal {

// Loss used for the check: sum(readout .* y) + 0.5 * ||y||^2.
inline double CheckLossValue(const MlpCache<double>& cache, const Matrix<double>& readout) {
  const Matrix<double>& y = cache.output();
  return (readout.array() * y.array()).sum() + 0.5 * y.squaredNorm();
}

inline std::vector<bool> ReluPattern(const MlpSpec& spec, const MlpCache<double>& cache) {
  std::vector<bool> out;
  for (std::size_t k = 0; k < spec.layers.size(); ++k) {
    if (spec.layers[k].activation != Activation::kReLU) continue;
    const Matrix<double>& a = cache.layers[k].output;
    for (Eigen::Index i = 0; i < a.size(); ++i) out.push_back(a.data()[i] > 0.0);
  }
  return out;
}

}  // namespace internal

// Compares Backward against central differences with step h for every
// parameter and input entry. Entries where the perturbation flips a ReLU
// are skipped: the loss is not differentiable across the kink.
inline GradientCheckResult CheckGradients(const MlpSpec& spec, MlpParams<double> params,
                                          Matrix<double> input, const Matrix<double>& readout,
                                          double h = 1e-3) {
  const auto cache = Forward(spec, params, input);
  const std::vector<bool> pattern = internal::ReluPattern(spec, cache);
  MlpParams<double> grads = ZeroParams<double>(spec);
  const Matrix<double> grad_in =
      Backward(spec, params, cache, (readout + cache.output()).eval(), grads);

  GradientCheckResult result;
  auto probe = [&](double& w, double analytic) {
    const double saved = w;
    w = saved + h;
    const auto up = Forward(spec, params, input);
    w = saved - h;
    const auto down = Forward(spec, params, input);
    w = saved;
    if (internal::ReluPattern(spec, up) != pattern || internal::ReluPattern(spec, down) != pattern) {
      ++result.skipped;
      return;
    }
    const double fd =
        (internal::CheckLossValue(up, readout) - internal::CheckLossValue(down, readout)) / (2 * h);
    const double scale = std::max({std::abs(analytic), std::abs(fd), 1e-8});
    const double rel = std::abs(analytic - fd) / scale;
    if (rel > result.max_relative_error) {
      result.max_relative_error = rel;
      result.worst_analytic = analytic;
      result.worst_numeric = fd;
    }
    ++result.checked;
  };
  auto blocks = params.Blocks();
  const auto gblocks = std::as_const(grads).Blocks();
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    for (Eigen::Index i = 0; i < blocks[b]->size(); ++i) probe(blocks[b]->data()[i], gblocks[b]->data()[i]);
  }
  for (Eigen::Index i = 0; i < input.size(); ++i) probe(input.data()[i], grad_in.data()[i]);
  return result;
}

}  // namespace ppgs::numerics

#endif  // PPGS_NUMERICS_GRADIENT_CHECK_HPP_
