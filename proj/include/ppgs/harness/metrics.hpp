#ifndef PPGS_HARNESS_METRICS_HPP_
#define PPGS_HARNESS_METRICS_HPP_

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "ppgs/harness/dataset.hpp"
#include "ppgs/worldmodel.hpp"

namespace ppgs {

inline constexpr int kMetricTrajectoryLength = 20;

// 1 + the number of trajectory embeddings other than the target that lie
// strictly closer to the prediction than the target does.
inline int PredictionRank(const Embedding& predicted, std::span<const Embedding> trajectory,
                          std::size_t target) {
  const float d_target = (trajectory[target] - predicted).norm();
  int rank = 1;
  for (std::size_t t = 0; t < trajectory.size(); ++t) {
    if (t != target && (trajectory[t] - predicted).norm() < d_target) ++rank;
  }
  return rank;
}

struct LatentMetrics {
  int horizon = 0;
  double hits = 0.0;  // H@K
  double mmr = 0.0;   // MMR@K
  std::size_t count = 0;
};

// Fresh uniform-random trajectories of `length` observations per level.
inline std::vector<Trajectory> HeldOutTrajectories(const std::vector<LevelSpec>& levels,
                                                   int per_level, std::uint64_t seed,
                                                   int length = kMetricTrajectoryLength) {
  if (per_level < 1 || length < 2) throw std::invalid_argument("need trajectories of length >= 2");
  Rng rng(DeriveSeed(seed, 0x4E1D0));
  std::vector<Trajectory> out;
  for (const LevelSpec& level : levels) {
    for (int n = 0; n < per_level; ++n) out.push_back(RandomTrajectory(level, length - 1, rng));
  }
  return out;
}

// For each horizon K, predicts z_{K+1} autoregressively from z_1 and the first
// K actions, using the first observation as context, and ranks it against the
// trajectory's own embeddings.
inline std::vector<LatentMetrics> ComputeLatentMetrics(const WorldModel& model,
                                                       const std::vector<Trajectory>& trajectories,
                                                       std::span<const int> horizons) {
  if (trajectories.empty()) throw std::invalid_argument("latent metrics need trajectories");
  int max_k = 0;
  for (int k : horizons) {
    if (k < 1) throw std::invalid_argument("horizon must be at least 1");
    max_k = std::max(max_k, k);
  }
  std::vector<LatentMetrics> out;
  for (int k : horizons) out.push_back({k, 0.0, 0.0, 0});
  for (const Trajectory& t : trajectories) {
    if (static_cast<int>(t.actions.size()) < max_k) {
      throw std::invalid_argument("trajectory shorter than the largest horizon");
    }
    std::vector<const Observation*> ptrs;
    for (const Observation& o : t.observations) ptrs.push_back(&o);
    const numerics::Matrix<float> z_all = model.EncodeBatch(ptrs);
    std::vector<Embedding> zs;
    for (Eigen::Index c = 0; c < z_all.cols(); ++c) zs.push_back(z_all.col(c));
    Embedding z = zs.front();
    for (int k = 1; k <= max_k; ++k) {
      z = model.Predict(z, t.actions[k - 1], t.observations.front());
      for (LatentMetrics& m : out) {
        if (m.horizon != k) continue;
        const int rank = PredictionRank(z, zs, static_cast<std::size_t>(k));
        m.hits += rank == 1 ? 1.0 : 0.0;
        m.mmr += 1.0 / rank;
        ++m.count;
      }
    }
  }
  for (LatentMetrics& m : out) {
    m.hits /= static_cast<double>(m.count);
    m.mmr /= static_cast<double>(m.count);
  }
  return out;
}

}  // namespace ppgs

#endif  // PPGS_HARNESS_METRICS_HPP_
