#ifndef PPGS_HARNESS_EVALUATE_HPP_
#define PPGS_HARNESS_EVALUATE_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ppgs/baseline.hpp"
#include "ppgs/env.hpp"
#include "ppgs/harness/metrics.hpp"
#include "ppgs/harness/oracle_model.hpp"
#include "ppgs/planner.hpp"
#include "ppgs/worldmodel.hpp"

namespace ppgs {

enum class PlannerMode { kOneShot, kOneShotNoReid, kFull, kFullNoLookup, kGsImages };

inline std::string_view PlannerModeName(PlannerMode mode) {
  switch (mode) {
    case PlannerMode::kOneShot:
      return "oneshot";
    case PlannerMode::kOneShotNoReid:
      return "oneshot-noreid";
    case PlannerMode::kFull:
      return "full";
    case PlannerMode::kFullNoLookup:
      return "full-nolookup";
    case PlannerMode::kGsImages:
      return "gs-images";
  }
  return "?";
}

inline PlannerMode PlannerModeFromName(std::string_view name) {
  for (PlannerMode m : {PlannerMode::kOneShot, PlannerMode::kOneShotNoReid, PlannerMode::kFull,
                        PlannerMode::kFullNoLookup, PlannerMode::kGsImages}) {
    if (PlannerModeName(m) == name) return m;
  }
  throw std::invalid_argument("unknown planner mode: " + std::string(name));
}

struct EvalConfig {
  int step_budget = kDefaultStepBudget;
  int horizon = kDefaultHorizon;
  std::uint64_t seed = 0;
  double fault_probability = 0.0;  // oracle runs only
};

// Per-level random stream, independent of level order.
inline std::uint64_t LevelSeed(std::uint64_t run_seed, const LevelSpec& level) {
  return DeriveSeed(DeriveSeed(run_seed, static_cast<std::uint64_t>(level.env)), level.seed);
}

// Runs one planner on one level. One-shot plans are executed open loop in the
// environment, so `solved` always reports real success.
template <LatentModel M>
PlanResult RunPlanner(M& model, PlannerMode mode, const LevelSpec& level, const EvalConfig& config,
                      Rng& rng) {
  switch (mode) {
    case PlannerMode::kOneShot:
    case PlannerMode::kOneShotNoReid: {
      OneShotOptions o;
      o.horizon = config.horizon;
      o.reidentify = mode == PlannerMode::kOneShot;
      const PlanResult plan = OneShotPlan(model, Observe(StartState(level)), GoalObservation(level),
                                          o, rng);
      PlanResult run = ExecutePlan(level, plan.actions, config.step_budget);
      run.stats.fringe_sizes = plan.stats.fringe_sizes;
      run.stats.expanded = plan.stats.expanded;
      return run;
    }
    case PlannerMode::kFull:
    case PlannerMode::kFullNoLookup: {
      FullPlanOptions o;
      o.step_budget = config.step_budget;
      o.initial_horizon = config.horizon;
      o.replan_horizon = std::min(kReplanHorizon, config.horizon);
      o.use_lookup = mode == PlannerMode::kFull;
      return FullPlanEpisode(model, level, o, rng);
    }
    case PlannerMode::kGsImages:
      return GsOnImages(level, config.step_budget, rng());
  }
  throw std::logic_error("unhandled planner mode");
}

struct LevelResult {
  std::uint64_t seed = 0;
  bool solved = false;
  int steps = 0;
  int replans = 0;
  int plan_length = 0;
  int max_fringe = 0;
};

struct EvalReport {
  std::vector<LevelResult> levels;
  std::vector<LatentMetrics> metrics;

  std::size_t solved_count() const {
    return static_cast<std::size_t>(
        std::count_if(levels.begin(), levels.end(), [](const LevelResult& r) { return r.solved; }));
  }
  double success_rate() const {
    return levels.empty() ? 0.0 : static_cast<double>(solved_count()) / levels.size();
  }
};

inline LevelResult Summarize(const LevelSpec& level, const PlanResult& r) {
  LevelResult out;
  out.seed = level.seed;
  out.solved = r.solved;
  out.steps = r.stats.steps;
  out.replans = r.stats.replans;
  out.plan_length = static_cast<int>(r.actions.size());
  for (int f : r.stats.fringe_sizes) out.max_fringe = std::max(out.max_fringe, f);
  return out;
}

// `run(level, rng)` returns the PlanResult for one level.
template <typename Run>
EvalReport EvaluateLevels(const std::vector<LevelSpec>& levels, const EvalConfig& config, Run&& run) {
  EvalReport report;
  for (const LevelSpec& level : levels) {
    Rng rng(LevelSeed(config.seed, level));
    report.levels.push_back(Summarize(level, run(level, rng)));
  }
  return report;
}

inline EvalReport Evaluate(const WorldModel& model, PlannerMode mode,
                           const std::vector<LevelSpec>& levels, const EvalConfig& config) {
  LearnedModel learned(model);
  return EvaluateLevels(levels, config, [&](const LevelSpec& level, Rng& rng) {
    return RunPlanner(learned, mode, level, config, rng);
  });
}

// Evaluation with a per-level OracleModel, optionally behind a FaultInjector.
inline EvalReport EvaluateOracle(PlannerMode mode, const std::vector<LevelSpec>& levels,
                                 const EvalConfig& config, double margin = 0.1, int dim = 16) {
  return EvaluateLevels(levels, config, [&](const LevelSpec& level, Rng& rng) {
    OracleModel oracle(level, margin, dim, LevelSeed(config.seed, level));
    if (config.fault_probability > 0.0) {
      FaultInjector<OracleModel> faulty(oracle, config.fault_probability,
                                        LevelSeed(config.seed, level));
      return RunPlanner(faulty, mode, level, config, rng);
    }
    return RunPlanner(oracle, mode, level, config, rng);
  });
}

inline void WriteEvalCsv(std::ostream& os, const EvalReport& report) {
  os << "level_seed,solved,steps,replans,plan_length,max_fringe\n";
  for (const LevelResult& r : report.levels) {
    os << r.seed << ',' << (r.solved ? 1 : 0) << ',' << r.steps << ',' << r.replans << ','
       << r.plan_length << ',' << r.max_fringe << '\n';
  }
}

inline void WriteMetricsCsv(std::ostream& os, const std::vector<LatentMetrics>& metrics) {
  os << "horizon,hits,mmr,count\n";
  char buf[96];
  for (const LatentMetrics& m : metrics) {
    std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%zu\n", m.horizon, m.hits, m.mmr, m.count);
    os << buf;
  }
}

// ---------------------------------------------------------------------------
// Fringe growth

struct FringeRow {
  int depth = 0;
  double mean = 0.0;
  double p05 = 0.0;
  double p95 = 0.0;
};

// Linear interpolation between closest ranks.
inline double Percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

// Per-level fringe sizes, padded with zeros once the search runs dry.
inline std::vector<FringeRow> AggregateFringes(const std::vector<std::vector<int>>& per_level,
                                               int horizon) {
  std::vector<FringeRow> rows;
  for (int d = 1; d <= horizon; ++d) {
    std::vector<double> values;
    double sum = 0.0;
    for (const auto& sizes : per_level) {
      const double v = d <= static_cast<int>(sizes.size()) ? sizes[d - 1] : 0.0;
      values.push_back(v);
      sum += v;
    }
    const double mean = per_level.empty() ? 0.0 : sum / static_cast<double>(per_level.size());
    rows.push_back({d, mean, Percentile(values, 0.05), Percentile(values, 0.95)});
  }
  return rows;
}

// Explores all `horizon` depths from each level start without stopping at
// the goal and records |L| per depth.
template <typename MakeModel>
std::vector<std::vector<int>> FringeSizes(const std::vector<LevelSpec>& levels, bool reidentify,
                                          int horizon, std::uint64_t seed, MakeModel&& make) {
  std::vector<std::vector<int>> out;
  for (const LevelSpec& level : levels) {
    auto model = make(level);
    Rng rng(LevelSeed(seed, level));
    OneShotOptions o;
    o.horizon = horizon;
    o.reidentify = reidentify;
    o.stop_at_goal = false;
    out.push_back(
        OneShotPlan(model, Observe(StartState(level)), GoalObservation(level), o, rng).stats.fringe_sizes);
  }
  return out;
}

struct FringeTable {
  std::vector<FringeRow> reid;
  std::vector<FringeRow> noreid;
};

template <typename MakeModel>
FringeTable FringeExperiment(const std::vector<LevelSpec>& levels, int horizon, std::uint64_t seed,
                             MakeModel&& make) {
  return {AggregateFringes(FringeSizes(levels, true, horizon, seed, make), horizon),
          AggregateFringes(FringeSizes(levels, false, horizon, seed, make), horizon)};
}

inline void WriteFringeCsv(std::ostream& os, const FringeTable& table) {
  os << "mode,depth,mean,p05,p95\n";
  char buf[128];
  auto emit = [&](const char* mode, const std::vector<FringeRow>& rows) {
    for (const FringeRow& r : rows) {
      std::snprintf(buf, sizeof(buf), "%s,%d,%.4f,%.4f,%.4f\n", mode, r.depth, r.mean, r.p05, r.p95);
      os << buf;
    }
  };
  emit("reid", table.reid);
  emit("noreid", table.noreid);
}

// Number of true states at each BFS distance 1, 2, ... from the level start.
inline std::vector<int> BfsLevelWidths(const LevelSpec& level) {
  const TrueGraph g = BuildTrueGraph(level);
  std::vector<int> dist(g.size(), -1);
  dist[0] = 0;
  std::vector<int> widths;
  for (std::size_t i = 0; i < g.size(); ++i) {
    // Vertices are stored in BFS order, so parents precede children.
    for (int to : g.edges[i]) {
      if (dist[to] < 0) {
        dist[to] = dist[i] + 1;
        if (static_cast<int>(widths.size()) < dist[to]) widths.resize(dist[to], 0);
        ++widths[dist[to] - 1];
      }
    }
  }
  return widths;
}

}  // namespace ppgs

#endif  // PPGS_HARNESS_EVALUATE_HPP_
