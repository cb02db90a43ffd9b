#ifndef PPGS_HARNESS_EXPERIMENTS_HPP_
#define PPGS_HARNESS_EXPERIMENTS_HPP_

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ppgs/harness/dataset.hpp"
#include "ppgs/harness/evaluate.hpp"
#include "ppgs/harness/metrics.hpp"
#include "ppgs/planner.hpp"
#include "ppgs/training.hpp"
#include "ppgs/worldmodel.hpp"

namespace ppgs {

struct PipelineConfig {
  EnvId env = EnvId::kDigitJump;
  int train_levels = 100;
  int trajectories_per_level = 20;
  int trajectory_length = 20;
  int test_levels = 100;
  int metric_trajectories_per_level = 5;
  std::vector<int> metric_horizons = {1, 10};
  WorldModelConfig model;
  TrainConfig train;
  EvalConfig eval;
  std::uint64_t seed = 0;
};

struct TrainedPipeline {
  WorldModel model;
  std::vector<EpochLoss> log;
};

// Collects random data on the training levels and trains a fresh model.
inline TrainedPipeline TrainPipeline(const PipelineConfig& config) {
  const auto levels = TrainingLevels(config.env, config.train_levels);
  const Dataset data = Collect(levels, config.trajectories_per_level, config.trajectory_length,
                               config.seed);
  TrainedPipeline out{WorldModel(config.env, config.model, config.seed), {}};
  TrainConfig tc = config.train;
  tc.seed = config.seed;
  out.log = Train(out.model, data, tc);
  return out;
}

// H@K / MMR@K on fresh trajectories from the training levels.
inline std::vector<LatentMetrics> TrainingLevelMetrics(const WorldModel& model,
                                                       const PipelineConfig& config) {
  const auto levels = TrainingLevels(config.env, config.train_levels);
  const auto trajs = HeldOutTrajectories(levels, config.metric_trajectories_per_level,
                                         DeriveSeed(config.seed, 0x4E7));
  return ComputeLatentMetrics(model, trajs, config.metric_horizons);
}

// ---------------------------------------------------------------------------
// Ablations

enum class Ablation { kNoInverse, kLatentForward, kNoLookup, kOneShotReid, kOneShotNoReid };

inline std::string_view AblationName(Ablation a) {
  switch (a) {
    case Ablation::kNoInverse:
      return "no-inverse";
    case Ablation::kLatentForward:
      return "latent-forward";
    case Ablation::kNoLookup:
      return "no-lookup";
    case Ablation::kOneShotReid:
      return "oneshot-reid";
    case Ablation::kOneShotNoReid:
      return "oneshot-noreid";
  }
  return "?";
}

inline Ablation AblationFromName(std::string_view name) {
  for (Ablation a : {Ablation::kNoInverse, Ablation::kLatentForward, Ablation::kNoLookup,
                     Ablation::kOneShotReid, Ablation::kOneShotNoReid}) {
    if (AblationName(a) == name) return a;
  }
  throw std::invalid_argument("unknown ablation: " + std::string(name));
}

inline bool AblationRetrains(Ablation a) {
  return a == Ablation::kNoInverse || a == Ablation::kLatentForward;
}

inline PlannerMode AblationPlanner(Ablation a) {
  switch (a) {
    case Ablation::kNoLookup:
      return PlannerMode::kFullNoLookup;
    case Ablation::kOneShotReid:
      return PlannerMode::kOneShot;
    case Ablation::kOneShotNoReid:
      return PlannerMode::kOneShotNoReid;
    default:
      return PlannerMode::kFull;
  }
}

struct AblationResult {
  Ablation which = Ablation::kNoInverse;
  EvalReport report;
  std::vector<EpochLoss> log;  // empty unless the variant retrains
};

// Variants that change the world model retrain from scratch; the others
// reuse `trained` (trained with `config` when null) and swap the planner.
inline AblationResult RunAblation(Ablation which, const PipelineConfig& config,
                                  const WorldModel* trained = nullptr) {
  AblationResult out;
  out.which = which;
  PipelineConfig variant = config;
  if (which == Ablation::kNoInverse) variant.model.beta = 0.0;
  if (which == Ablation::kLatentForward) variant.model.use_context = false;

  std::optional<TrainedPipeline> own;
  const WorldModel* model = trained;
  if (model == nullptr || AblationRetrains(which)) {
    own = TrainPipeline(variant);
    out.log = own->log;
    model = &own->model;
  }
  const auto test = TestLevels(config.env, config.test_levels);
  out.report = Evaluate(*model, AblationPlanner(which), test, config.eval);
  out.report.metrics = TrainingLevelMetrics(*model, variant);
  return out;
}

// ---------------------------------------------------------------------------
// On-policy collection

struct OnPolicyConfig {
  int rounds = 0;
  int round_interval = 5;          // epochs between collection rounds
  int trajectories_per_level = 5;  // per round
  int horizon = 20;                // steps per on-policy trajectory
};

// One trajectory per level and repetition: the full planner drives the agent
// towards the level goal for up to `horizon` steps, and uniform random actions
// fill the remaining steps after success.
inline Dataset OnPolicyCollect(const WorldModel& model, const std::vector<LevelSpec>& levels,
                               int trajectories_per_level, int horizon, std::uint64_t seed) {
  if (trajectories_per_level < 1 || horizon < 1) {
    throw std::invalid_argument("on-policy collection needs at least one step");
  }
  Dataset data;
  data.env = model.env();
  LearnedModel learned(model);
  Rng rng(DeriveSeed(seed, 0x0A7011C));
  for (const LevelSpec& level : levels) {
    LevelData ld{level, {}};
    for (int k = 0; k < trajectories_per_level; ++k) {
      LevelSpec episode_level = level;
      episode_level.start = CollectionStart(level, rng);
      FullPlanOptions o;
      o.step_budget = horizon;
      o.initial_horizon = horizon;
      o.replan_horizon = std::min(kReplanHorizon, horizon);
      std::vector<Action> actions = FullPlanEpisode(learned, episode_level, o, rng).actions;
      while (static_cast<int>(actions.size()) < horizon) {
        actions.push_back(ActionFromIndex(UniformInt(rng, 0, kNumActions - 1)));
      }
      ld.trajectories.push_back(Replay(level, episode_level.start, actions));
    }
    data.levels.push_back(std::move(ld));
  }
  return data;
}

inline void AppendDataset(Dataset& into, const Dataset& extra) {
  if (into.levels.size() != extra.levels.size()) {
    throw std::invalid_argument("datasets cover different level sets");
  }
  for (std::size_t l = 0; l < extra.levels.size(); ++l) {
    if (!(into.levels[l].level == extra.levels[l].level)) {
      throw std::invalid_argument("datasets cover different level sets");
    }
    auto& dst = into.levels[l].trajectories;
    const auto& src = extra.levels[l].trajectories;
    dst.insert(dst.end(), src.begin(), src.end());
  }
}

// Trains for config.epochs; after every `round_interval` epochs (while rounds
// remain and training continues) the current model collects on-policy data
// on the training levels, which joins the dataset.
inline std::vector<EpochLoss> TrainWithOnPolicy(WorldModel& model, Dataset& data,
                                                const TrainConfig& config,
                                                const OnPolicyConfig& onpolicy) {
  if (onpolicy.rounds > 0 && onpolicy.round_interval < 1) {
    throw std::invalid_argument("round interval must be positive");
  }
  std::vector<LevelSpec> levels;
  for (const LevelData& ld : data.levels) levels.push_back(ld.level);
  Trainer<float> trainer(model, config);
  int rounds_done = 0;
  for (int e = 1; e <= config.epochs; ++e) {
    trainer.RunEpoch(data);
    if (rounds_done < onpolicy.rounds && e % onpolicy.round_interval == 0 && e < config.epochs) {
      AppendDataset(data, OnPolicyCollect(model, levels, onpolicy.trajectories_per_level,
                                          onpolicy.horizon, DeriveSeed(config.seed, 0x0A7 + e)));
      ++rounds_done;
    }
  }
  return trainer.log();
}

}  // namespace ppgs

#endif  // PPGS_HARNESS_EXPERIMENTS_HPP_
