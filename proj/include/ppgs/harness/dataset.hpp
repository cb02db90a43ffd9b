#ifndef PPGS_HARNESS_DATASET_HPP_
#define PPGS_HARNESS_DATASET_HPP_

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "ppgs/env.hpp"
#include "ppgs/random.hpp"

namespace ppgs {

// observations.size() == actions.size() + 1; observations[t + 1] is the
// result of applying actions[t] to the state behind observations[t].
struct Trajectory {
  Cell start;
  std::vector<Observation> observations;
  std::vector<Action> actions;

  std::size_t transition_count() const { return actions.size(); }
};

struct LevelData {
  LevelSpec level;
  std::vector<Trajectory> trajectories;

  std::size_t transition_count() const {
    std::size_t n = 0;
    for (const auto& t : trajectories) n += t.transition_count();
    return n;
  }
};

struct Dataset {
  EnvId env = EnvId::kGridMaze;
  std::vector<LevelData> levels;

  std::size_t transition_count() const {
    std::size_t n = 0;
    for (const auto& l : levels) n += l.transition_count();
    return n;
  }
};

// Rolls `actions` forward from `start` and records every observation.
inline Trajectory Replay(const LevelSpec& level, Cell start, const std::vector<Action>& actions) {
  Trajectory t;
  t.start = start;
  t.actions = actions;
  EnvState s = StateAt(level, start);
  t.observations.push_back(Observe(s));
  for (Action a : actions) {
    s = Step(s, a);
    t.observations.push_back(Observe(s));
  }
  return t;
}

// Starting cell for random data collection: uniform over free cells for
// GridMaze, the level start otherwise.
inline Cell CollectionStart(const LevelSpec& level, Rng& rng) {
  if (level.env != EnvId::kGridMaze) return level.start;
  std::vector<Cell> free_cells;
  for (int i = 0; i < level.width * level.height; ++i) {
    const Cell c = level.CellAt(i);
    if (!level.Blocked(c)) free_cells.push_back(c);
  }
  return free_cells[UniformInt(rng, 0, static_cast<int>(free_cells.size()) - 1)];
}

inline Trajectory RandomTrajectory(const LevelSpec& level, int horizon, Rng& rng) {
  const Cell start = CollectionStart(level, rng);
  std::vector<Action> actions(horizon);
  for (Action& a : actions) a = ActionFromIndex(UniformInt(rng, 0, kNumActions - 1));
  return Replay(level, start, actions);
}

// K uniform-random trajectories of H actions per level.
inline Dataset Collect(const std::vector<LevelSpec>& levels, int trajectories_per_level,
                       int horizon, std::uint64_t seed) {
  if (trajectories_per_level < 1 || horizon < 1) {
    throw std::invalid_argument("collect needs at least one trajectory of one step");
  }
  if (levels.empty()) throw std::invalid_argument("collect needs at least one level");
  Dataset data;
  data.env = levels.front().env;
  Rng rng(DeriveSeed(seed, 0xC011EC7));
  for (const LevelSpec& level : levels) {
    if (level.env != data.env) throw std::invalid_argument("collect: mixed environments");
    LevelData ld{level, {}};
    for (int k = 0; k < trajectories_per_level; ++k) {
      ld.trajectories.push_back(RandomTrajectory(level, horizon, rng));
    }
    data.levels.push_back(std::move(ld));
  }
  return data;
}

inline std::vector<LevelSpec> GenerateLevels(EnvId env, std::uint64_t first_seed,
                                             std::size_t count) {
  std::vector<LevelSpec> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(Generate(env, first_seed + i));
  return out;
}

// Seed ranges for the train/test split.
inline constexpr std::uint64_t kTrainSeedBegin = 0;
inline constexpr std::uint64_t kTestSeedBegin = 1000000;

inline std::vector<LevelSpec> TrainingLevels(EnvId env, std::size_t n) {
  return GenerateLevels(env, kTrainSeedBegin, n);
}

inline std::vector<LevelSpec> TestLevels(EnvId env, std::size_t n = 100) {
  return GenerateLevels(env, kTestSeedBegin, n);
}

}  // namespace ppgs

#endif  // PPGS_HARNESS_DATASET_HPP_
