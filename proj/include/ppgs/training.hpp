#ifndef PPGS_TRAINING_HPP_
#define PPGS_TRAINING_HPP_

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ppgs/harness/dataset.hpp"
#include "ppgs/numerics/adam.hpp"
#include "ppgs/random.hpp"
#include "ppgs/worldmodel.hpp"

namespace ppgs {

struct TrainConfig {
  int epochs = 40;
  int batch_size = 128;
  std::uint64_t seed = 0;
  numerics::AdamConfig adam;
};

struct EpochLoss {
  int epoch = 0;  // 1-based
  LossBreakdown loss;
};

// Joint one-step training of encoder, forward and inverse model. Keeps the
// optimizer state and sampling stream between calls so training can be
// interleaved with data collection.
template <typename Scalar>
class Trainer {
 public:
  Trainer(BasicWorldModel<Scalar>& model, const TrainConfig& config)
      : model_(model), config_(config), adam_(config.adam),
        rng_(DeriveSeed(config.seed, 0x7EA1)) {
    if (config.batch_size < 1) throw std::invalid_argument("batch size must be positive");
  }

  const std::vector<EpochLoss>& log() const { return log_; }
  int epochs_done() const { return static_cast<int>(log_.size()); }

  // Runs one pass over every transition of `data` in shuffled order. Each
  // transition is paired with a context observation drawn uniformly from
  // the stored observations of its own level.
  EpochLoss RunEpoch(const Dataset& data) {
    struct Ref {
      int level;
      int traj;
      int t;
    };
    std::vector<Ref> refs;
    std::vector<std::vector<const Observation*>> pools(data.levels.size());
    for (std::size_t l = 0; l < data.levels.size(); ++l) {
      const auto& trajs = data.levels[l].trajectories;
      for (std::size_t k = 0; k < trajs.size(); ++k) {
        for (const Observation& o : trajs[k].observations) pools[l].push_back(&o);
        for (std::size_t t = 0; t < trajs[k].actions.size(); ++t) {
          refs.push_back({static_cast<int>(l), static_cast<int>(k), static_cast<int>(t)});
        }
      }
    }
    if (refs.empty()) throw std::invalid_argument("cannot train on an empty dataset");
    Shuffle(refs, rng_);
    std::vector<const Observation*> contexts(refs.size());
    for (std::size_t i = 0; i < refs.size(); ++i) {
      const auto& pool = pools[refs[i].level];
      contexts[i] = pool[UniformInt(rng_, 0, static_cast<int>(pool.size()) - 1)];
    }

    LossBreakdown sum;
    std::size_t seen = 0;
    const auto blocks = model_.ParameterBlocks();
    for (std::size_t begin = 0; begin < refs.size(); begin += config_.batch_size) {
      const std::size_t end = std::min(refs.size(), begin + config_.batch_size);
      TrainBatch batch;
      for (std::size_t i = begin; i < end; ++i) {
        const Trajectory& tr = data.levels[refs[i].level].trajectories[refs[i].traj];
        batch.current.push_back(&tr.observations[refs[i].t]);
        batch.next.push_back(&tr.observations[refs[i].t + 1]);
        batch.context.push_back(contexts[i]);
        batch.actions.push_back(tr.actions[refs[i].t]);
        batch.level_ids.push_back(refs[i].level);
      }
      auto grads = model_.ZeroGrads();
      const LossBreakdown loss = LossAndGradients<Scalar>(
          model_, FeaturizeTrainBatch<Scalar>(model_.layout(), batch), &grads);
      std::vector<const numerics::Matrix<Scalar>*> gblocks;
      for (auto* g : std::as_const(grads.encoder).Blocks()) gblocks.push_back(g);
      for (auto* g : std::as_const(grads.forward).Blocks()) gblocks.push_back(g);
      for (auto* g : std::as_const(grads.inverse).Blocks()) gblocks.push_back(g);
      adam_.Step(blocks, gblocks);
      const double w = static_cast<double>(end - begin);
      sum.forward += loss.forward * w;
      sum.inverse += loss.inverse * w;
      sum.margin += loss.margin * w;
      sum.total += loss.total * w;
      seen += end - begin;
    }
    EpochLoss out;
    out.epoch = epochs_done() + 1;
    out.loss = {sum.forward / seen, sum.inverse / seen, sum.margin / seen, sum.total / seen};
    log_.push_back(out);
    return out;
  }

  void Run(const Dataset& data, int epochs) {
    for (int e = 0; e < epochs; ++e) RunEpoch(data);
  }

 private:
  BasicWorldModel<Scalar>& model_;
  TrainConfig config_;
  numerics::AdamState<Scalar> adam_;
  Rng rng_;
  std::vector<EpochLoss> log_;
};

template <typename Scalar>
std::vector<EpochLoss> Train(BasicWorldModel<Scalar>& model, const Dataset& data,
                             const TrainConfig& config) {
  if (data.transition_count() == 0) throw std::invalid_argument("cannot train on an empty dataset");
  Trainer<Scalar> trainer(model, config);
  trainer.Run(data, config.epochs);
  return trainer.log();
}

inline void WriteLossLog(std::ostream& os, const std::vector<EpochLoss>& log) {
  os << "epoch,L_FW,L_CE,L_margin,L_total\n";
  char buf[160];
  for (const EpochLoss& e : log) {
    std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%.6f,%.6f\n", e.epoch, e.loss.forward,
                  e.loss.inverse, e.loss.margin, e.loss.total);
    os << buf;
  }
}

}  // namespace ppgs

#endif  // PPGS_TRAINING_HPP_
