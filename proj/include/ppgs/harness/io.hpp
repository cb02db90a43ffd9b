#ifndef PPGS_HARNESS_IO_HPP_
#define PPGS_HARNESS_IO_HPP_

// JSON-lines level and dataset files, and the plan result record.

#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "ppgs/env.hpp"
#include "ppgs/harness/dataset.hpp"
#include "ppgs/planner.hpp"

namespace ppgs {

using Json = nlohmann::json;

inline Json CellToJson(Cell c) { return Json::array({c.row, c.col}); }

inline Cell CellFromJson(const Json& j) {
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("cell must be [row, col]");
  return {j[0].get<int>(), j[1].get<int>()};
}

inline Json LevelToJson(const LevelSpec& level) {
  Json cells = Json::array();
  for (std::uint8_t c : level.cells) cells.push_back(static_cast<int>(c));
  return Json{{"env", std::string(EnvName(level.env))},
              {"seed", level.seed},
              {"width", level.width},
              {"height", level.height},
              {"cells", std::move(cells)},
              {"start", CellToJson(level.start)},
              {"goal", CellToJson(level.goal)}};
}

inline LevelSpec LevelFromJson(const Json& j) {
  LevelSpec level;
  level.env = EnvFromName(j.at("env").get<std::string>());
  level.seed = j.at("seed").get<std::uint64_t>();
  level.width = j.at("width").get<int>();
  level.height = j.at("height").get<int>();
  for (const Json& c : j.at("cells")) {
    const int code = c.get<int>();
    if (code < 0 || code > 255) throw std::invalid_argument("cell code out of range");
    level.cells.push_back(static_cast<std::uint8_t>(code));
  }
  level.start = CellFromJson(j.at("start"));
  level.goal = CellFromJson(j.at("goal"));
  ValidateLevel(level);
  return level;
}

namespace internal {
template <typename F>
void ForEachJsonLine(std::istream& is, F&& f) {
  std::string line;
  int number = 0;
  while (std::getline(is, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      f(Json::parse(line));
    } catch (const std::exception& e) {
      throw std::invalid_argument("line " + std::to_string(number) + ": " + e.what());
    }
  }
}
}  // namespace internal

inline void WriteLevels(std::ostream& os, const std::vector<LevelSpec>& levels) {
  for (const LevelSpec& l : levels) os << LevelToJson(l).dump() << '\n';
}

inline std::vector<LevelSpec> ReadLevels(std::istream& is) {
  std::vector<LevelSpec> out;
  internal::ForEachJsonLine(is, [&](const Json& j) { out.push_back(LevelFromJson(j)); });
  return out;
}

// One line per trajectory: {env, seed, start, actions}. Observations are
// re-simulated on load from the level with the matching seed.
inline void WriteDataset(std::ostream& os, const Dataset& data) {
  for (const LevelData& ld : data.levels) {
    for (const Trajectory& t : ld.trajectories) {
      Json actions = Json::array();
      for (Action a : t.actions) actions.push_back(ActionIndex(a));
      const Json j{{"env", std::string(EnvName(ld.level.env))},
                   {"seed", ld.level.seed},
                   {"start", CellToJson(t.start)},
                   {"actions", std::move(actions)}};
      os << j.dump() << '\n';
    }
  }
}

inline Dataset ReadDataset(std::istream& is, const std::vector<LevelSpec>& levels) {
  std::map<std::pair<EnvId, std::uint64_t>, const LevelSpec*> by_seed;
  for (const LevelSpec& l : levels) by_seed[{l.env, l.seed}] = &l;
  Dataset data;
  std::map<std::pair<EnvId, std::uint64_t>, std::size_t> slot;
  internal::ForEachJsonLine(is, [&](const Json& j) {
    const EnvId env = EnvFromName(j.at("env").get<std::string>());
    const auto key = std::make_pair(env, j.at("seed").get<std::uint64_t>());
    const auto level = by_seed.find(key);
    if (level == by_seed.end()) throw std::invalid_argument("trajectory refers to an unknown level");
    if (data.levels.empty()) data.env = env;
    if (env != data.env) throw std::invalid_argument("dataset mixes environments");
    auto [it, inserted] = slot.emplace(key, data.levels.size());
    if (inserted) data.levels.push_back({*level->second, {}});
    std::vector<Action> actions;
    for (const Json& a : j.at("actions")) actions.push_back(ActionFromIndex(a.get<int>()));
    const Cell start = CellFromJson(j.at("start"));
    data.levels[it->second].trajectories.push_back(Replay(*level->second, start, actions));
  });
  return data;
}

// Regenerates the levels a dataset file refers to from their seeds.
inline std::vector<LevelSpec> LevelsForDataset(std::istream& is) {
  std::vector<LevelSpec> out;
  std::map<std::pair<EnvId, std::uint64_t>, bool> seen;
  internal::ForEachJsonLine(is, [&](const Json& j) {
    const EnvId env = EnvFromName(j.at("env").get<std::string>());
    const auto seed = j.at("seed").get<std::uint64_t>();
    if (seen.emplace(std::make_pair(env, seed), true).second) out.push_back(Generate(env, seed));
  });
  return out;
}

inline Json PlanResultToJson(const PlanResult& r, std::uint64_t level_seed, std::string_view mode) {
  Json actions = Json::array();
  for (Action a : r.actions) actions.push_back(ActionIndex(a));
  return Json{{"level_seed", level_seed},
              {"mode", std::string(mode)},
              {"solved", r.solved},
              {"actions", std::move(actions)},
              {"stats",
               {{"fringe_sizes", r.stats.fringe_sizes},
                {"expanded", r.stats.expanded},
                {"replans", r.stats.replans},
                {"steps", r.stats.steps}}}};
}

}  // namespace ppgs

#endif  // PPGS_HARNESS_IO_HPP_
