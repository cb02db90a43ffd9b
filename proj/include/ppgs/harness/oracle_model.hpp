#ifndef PPGS_HARNESS_ORACLE_MODEL_HPP_
#define PPGS_HARNESS_ORACLE_MODEL_HPP_

#include <Eigen/Dense>

#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "ppgs/env.hpp"
#include "ppgs/planner.hpp"
#include "ppgs/random.hpp"
#include "ppgs/worldmodel.hpp"

namespace ppgs {

// Unit vectors chosen by greedy farthest-point selection from a random pool.
// Throws if the result is not pairwise at least `min_distance` apart.
inline std::vector<Embedding> SpreadUnitVectors(int count, int dim, double min_distance,
                                                std::uint64_t seed) {
  if (count < 1) return {};
  Rng rng(DeriveSeed(seed, 0x0AC1E));
  const int pool_size = std::max(64, 4 * count);
  std::vector<Embedding> pool(pool_size, Embedding(dim));
  for (Embedding& v : pool) {
    do {
      for (int i = 0; i < dim; ++i) v(i) = static_cast<float>(StandardNormal(rng));
    } while (v.norm() == 0.0f);
    v.normalize();
  }
  std::vector<Embedding> chosen;
  std::vector<float> nearest(pool_size, std::numeric_limits<float>::infinity());
  int pick = 0;
  for (int n = 0; n < count; ++n) {
    chosen.push_back(pool[pick]);
    nearest[pick] = -1.0f;
    int best = -1;
    for (int i = 0; i < pool_size; ++i) {
      if (nearest[i] < 0.0f) continue;
      nearest[i] = std::min(nearest[i], (pool[i] - pool[pick]).norm());
      if (best < 0 || nearest[i] > nearest[best]) best = i;
    }
    pick = best;
  }
  for (int i = 0; i < count; ++i) {
    for (int j = i + 1; j < count; ++j) {
      if (static_cast<double>((chosen[i] - chosen[j]).norm()) < min_distance) {
        throw std::runtime_error("could not place separated oracle embeddings");
      }
    }
  }
  return chosen;
}

// A perfectly trained world model for one level: every non-blocking cell gets
// a fixed unit embedding and predictions follow the true dynamics. Unknown
// embeddings predict themselves.
class OracleModel {
 public:
  explicit OracleModel(const LevelSpec& level, double margin = 0.1, int dim = 16,
                       std::uint64_t seed = 0)
      : level_(&level), margin_(margin) {
    for (int i = 0; i < level.width * level.height; ++i) {
      if (!level.Blocked(level.CellAt(i))) cells_.push_back(level.CellAt(i));
    }
    embeddings_ = SpreadUnitVectors(static_cast<int>(cells_.size()), dim, margin, seed);
    state_of_cell_.assign(level.width * level.height, -1);
    for (std::size_t s = 0; s < cells_.size(); ++s) {
      state_of_cell_[level.Index(cells_[s])] = static_cast<int>(s);
      exact_.emplace(Key(embeddings_[s]), static_cast<int>(s));
    }
  }

  double margin() const { return margin_; }
  std::size_t state_count() const { return cells_.size(); }
  const Embedding& embedding(int state) const { return embeddings_[state]; }
  Cell cell(int state) const { return cells_[state]; }
  int StateOfCell(Cell c) const { return state_of_cell_[level_->Index(c)]; }

  Embedding Encode(const Observation& obs) const {
    const Cell c = AgentCell(obs);
    if (!level_->InBounds(c) || StateOfCell(c) < 0) {
      throw std::invalid_argument("observation does not belong to the oracle's level");
    }
    return embeddings_[StateOfCell(c)];
  }

  // State whose embedding reidentifies with z, or -1.
  int StateOf(const Embedding& z) const {
    const auto it = exact_.find(Key(z));
    if (it != exact_.end() && embeddings_[it->second] == z) return it->second;
    for (std::size_t s = 0; s < embeddings_.size(); ++s) {
      if (Reidentify(embeddings_[s], z, margin_)) return static_cast<int>(s);
    }
    return -1;
  }

  std::vector<Embedding> PredictMany(std::span<const Embedding> zs, std::span<const Action> actions,
                                     const Observation& /*context*/) const {
    std::vector<Embedding> out;
    out.reserve(zs.size());
    for (std::size_t i = 0; i < zs.size(); ++i) {
      const int s = StateOf(zs[i]);
      if (s < 0) {
        out.push_back(zs[i]);
        continue;
      }
      const Cell to = Step(EnvState{level_, cells_[s]}, actions[i]).agent;
      out.push_back(embeddings_[StateOfCell(to)]);
    }
    return out;
  }

  // Embedding of a uniformly drawn state of the level.
  Embedding RandomEmbedding(Rng& rng) const {
    return embeddings_[UniformInt(rng, 0, static_cast<int>(embeddings_.size()) - 1)];
  }

 private:
  static std::uint64_t Key(const Embedding& z) {
    std::uint64_t h = 1469598103934665603ull;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      std::uint32_t bits;
      const float f = z(i);
      std::memcpy(&bits, &f, sizeof(bits));
      h = (h ^ bits) * 1099511628211ull;
    }
    return h;
  }

  const LevelSpec* level_;
  double margin_;
  std::vector<Cell> cells_;
  std::vector<Embedding> embeddings_;
  std::vector<int> state_of_cell_;
  std::unordered_map<std::uint64_t, int> exact_;
};

// Replaces each forward prediction of the wrapped model, independently with
// probability p, by model.RandomEmbedding(rng).
template <typename M>
class FaultInjector {
 public:
  FaultInjector(M& model, double probability, std::uint64_t seed)
      : model_(&model), p_(probability), rng_(DeriveSeed(seed, 0xFA017)) {
    if (probability < 0.0 || probability > 1.0) {
      throw std::invalid_argument("fault probability must lie in [0, 1]");
    }
  }

  Embedding Encode(const Observation& obs) { return model_->Encode(obs); }
  double margin() const { return model_->margin(); }
  Embedding RandomEmbedding(Rng& rng) { return model_->RandomEmbedding(rng); }

  std::vector<Embedding> PredictMany(std::span<const Embedding> zs, std::span<const Action> actions,
                                     const Observation& context) {
    std::vector<Embedding> out = model_->PredictMany(zs, actions, context);
    for (Embedding& z : out) {
      if (Uniform01(rng_) < p_) {
        z = model_->RandomEmbedding(rng_);
        ++corrupted_;
      }
    }
    return out;
  }

  std::size_t corrupted() const { return corrupted_; }

 private:
  M* model_;
  double p_;
  Rng rng_;
  std::size_t corrupted_ = 0;
};

}  // namespace ppgs

#endif  // PPGS_HARNESS_ORACLE_MODEL_HPP_
