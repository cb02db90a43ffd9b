#ifndef PPGS_NUMERICS_ADAM_HPP_
#define PPGS_NUMERICS_ADAM_HPP_

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "ppgs/numerics/mlp.hpp"

namespace ppgs::numerics {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-5;
};

// Bias-corrected Adam over an ordered list of parameter blocks. The block
// order fixed by the first step must be kept for the lifetime of the state.
template <typename Scalar>
class AdamState {
 public:
  explicit AdamState(AdamConfig config = {}) : config_(config) {}

  const AdamConfig& config() const { return config_; }
  std::int64_t step_count() const { return t_; }

  void Step(std::span<Matrix<Scalar>* const> params,
            std::span<const Matrix<Scalar>* const> grads) {
    if (params.size() != grads.size()) {
      throw std::invalid_argument("Adam: parameter and gradient lists differ in length");
    }
    if (first_.empty()) {
      for (const Matrix<Scalar>* p : params) {
        first_.push_back(Matrix<Scalar>::Zero(p->rows(), p->cols()));
        second_.push_back(Matrix<Scalar>::Zero(p->rows(), p->cols()));
      }
    }
    if (first_.size() != params.size()) {
      throw std::invalid_argument("Adam: parameter list changed between steps");
    }
    ++t_;
    const Scalar b1 = static_cast<Scalar>(config_.beta1);
    const Scalar b2 = static_cast<Scalar>(config_.beta2);
    const Scalar c1 = static_cast<Scalar>(1.0 - std::pow(config_.beta1, static_cast<double>(t_)));
    const Scalar c2 = static_cast<Scalar>(1.0 - std::pow(config_.beta2, static_cast<double>(t_)));
    const Scalar lr = static_cast<Scalar>(config_.learning_rate);
    const Scalar eps = static_cast<Scalar>(config_.eps);
    for (std::size_t i = 0; i < params.size(); ++i) {
      const Matrix<Scalar>& g = *grads[i];
      if (g.rows() != params[i]->rows() || g.cols() != params[i]->cols() ||
          g.rows() != first_[i].rows() || g.cols() != first_[i].cols()) {
        throw std::invalid_argument("Adam: gradient shape does not match parameter");
      }
      first_[i] = b1 * first_[i] + (Scalar(1) - b1) * g;
      second_[i] = b2 * second_[i] + (Scalar(1) - b2) * g.cwiseAbs2();
      params[i]->array() -=
          lr * (first_[i].array() / c1) / ((second_[i].array() / c2).sqrt() + eps);
    }
  }

  const std::vector<Matrix<Scalar>>& first_moments() const { return first_; }
  const std::vector<Matrix<Scalar>>& second_moments() const { return second_; }

 private:
  AdamConfig config_;
  std::int64_t t_ = 0;
  std::vector<Matrix<Scalar>> first_;
  std::vector<Matrix<Scalar>> second_;
};

}  // namespace ppgs::numerics

#endif  // PPGS_NUMERICS_ADAM_HPP_
