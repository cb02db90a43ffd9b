#ifndef PPGS_PLANNER_HPP_
#define PPGS_PLANNER_HPP_

// Graph search in latent space. The one-shot planner grows a latent graph
// breadth-first from the embedded start, discarding children that can be
// reidentified with visited vertices, until a leaf reidentifies with the
// embedded goal. The full planner executes that plan, checks every observed
// embedding against the predicted trajectory, records observed transitions
// in a lookup table and replans on mismatch.

#include <Eigen/Dense>

#include <algorithm>
#include <concepts>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ppgs/env.hpp"
#include "ppgs/random.hpp"
#include "ppgs/worldmodel.hpp"

namespace ppgs {

inline constexpr int kLeafCutoff = 256;
inline constexpr int kDefaultHorizon = 128;
inline constexpr int kReplanHorizon = 10;
inline constexpr int kDefaultStepBudget = 256;

// Anything that embeds observations and predicts latent transitions.
// PredictMany evaluates query i as (zs[i], actions[i]) under one shared
// context observation.
template <typename M>
concept LatentModel = requires(M& m, const Observation& obs, std::span<const Embedding> zs,
                               std::span<const Action> actions) {
  { m.Encode(obs) } -> std::convertible_to<Embedding>;
  { m.PredictMany(zs, actions, obs) } -> std::same_as<std::vector<Embedding>>;
  { m.margin() } -> std::convertible_to<double>;
};

// Reidentification: strictly closer than half the margin.
inline bool Reidentify(const Embedding& a, const Embedding& b, double margin) {
  return static_cast<double>((a - b).norm()) < margin / 2.0;
}

// Adapts a trained WorldModel to the LatentModel interface.
class LearnedModel {
 public:
  explicit LearnedModel(const WorldModel& model) : model_(&model) {}

  Embedding Encode(const Observation& obs) const { return model_->Encode(obs); }

  std::vector<Embedding> PredictMany(std::span<const Embedding> zs, std::span<const Action> actions,
                                     const Observation& context) const {
    std::vector<Embedding> out;
    if (zs.empty()) return out;
    numerics::Matrix<float> z(model_->dim(), static_cast<Eigen::Index>(zs.size()));
    for (std::size_t i = 0; i < zs.size(); ++i) z.col(static_cast<Eigen::Index>(i)) = zs[i];
    const auto pred = model_->PredictBatch(z, actions, context);
    out.reserve(zs.size());
    for (Eigen::Index i = 0; i < pred.cols(); ++i) out.push_back(pred.col(i));
    return out;
  }

  double margin() const { return model_->margin(); }

  Embedding RandomEmbedding(Rng& rng) const {
    Embedding v(model_->dim());
    do {
      for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = static_cast<float>(StandardNormal(rng));
    } while (v.norm() == 0.0f);
    return v.normalized();
  }

  const WorldModel& model() const { return *model_; }

 private:
  const WorldModel* model_;
};

// ---------------------------------------------------------------------------
// Leaf filtering

// Uniformly keeps `cutoff` of `indices`, preserving their order.
inline std::vector<int> Subsample(std::vector<int> indices, int cutoff, Rng& rng) {
  if (static_cast<int>(indices.size()) <= cutoff) return indices;
  for (int i = 0; i < cutoff; ++i) {
    const int j = UniformInt(rng, i, static_cast<int>(indices.size()) - 1);
    std::swap(indices[i], indices[j]);
  }
  indices.resize(cutoff);
  std::sort(indices.begin(), indices.end());
  return indices;
}

// Indices of the candidates that survive conflict resolution. Pairs closer
// than margin/2 conflict; the vertex with the most live conflicts (lowest
// index on ties) is dropped until none remain, an approximate minimum vertex
// cover. More than `cutoff` survivors are subsampled uniformly.
inline std::vector<int> FilterIndices(std::span<const Embedding> candidates, double margin,
                                      int cutoff, Rng& rng) {
  const int n = static_cast<int>(candidates.size());
  std::vector<std::vector<int>> adj(n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (Reidentify(candidates[i], candidates[j], margin)) {
        adj[i].push_back(j);
        adj[j].push_back(i);
      }
    }
  }
  std::vector<int> degree(n);
  for (int i = 0; i < n; ++i) degree[i] = static_cast<int>(adj[i].size());
  std::vector<bool> alive(n, true);
  for (;;) {
    int worst = -1;
    for (int i = 0; i < n; ++i) {
      if (alive[i] && degree[i] > 0 && (worst < 0 || degree[i] > degree[worst])) worst = i;
    }
    if (worst < 0) break;
    alive[worst] = false;
    for (int j : adj[worst]) {
      if (alive[j]) --degree[j];
    }
  }
  std::vector<int> kept;
  for (int i = 0; i < n; ++i) {
    if (alive[i]) kept.push_back(i);
  }
  return Subsample(std::move(kept), cutoff, rng);
}

inline std::vector<Embedding> Filter(std::span<const Embedding> candidates, double margin,
                                     Rng& rng, int cutoff = kLeafCutoff) {
  std::vector<Embedding> out;
  for (int i : FilterIndices(candidates, margin, cutoff, rng)) out.push_back(candidates[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Results

struct PlanStats {
  std::vector<int> fringe_sizes;  // |L| after filtering, per depth
  int expanded = 0;               // leaves expanded with all actions
  int replans = 0;
  int steps = 0;                  // environment steps taken
};

// For the one-shot planners `solved` means the goal was reidentified in the
// latent graph; for episode runners it means the environment reached the goal.
struct PlanResult {
  std::vector<Action> actions;
  bool solved = false;
  PlanStats stats;
};

// The latent graph built by one search: every accepted vertex with a
// back-pointer (the path dictionary), plus the visited set and current leaves
// as vertex ids.
struct LatentGraph {
  struct Vertex {
    Embedding z;
    int parent = -1;
    Action via = Action::kNoOp;
  };
  std::vector<Vertex> vertices;
  std::vector<int> visited;
  std::vector<int> leaves;
  Embedding goal;

  int Add(Embedding z, int parent, Action via) {
    vertices.push_back({std::move(z), parent, via});
    return static_cast<int>(vertices.size()) - 1;
  }

  std::vector<Action> PathTo(int id) const {
    std::vector<Action> path;
    for (int v = id; vertices[v].parent >= 0; v = vertices[v].parent) {
      path.push_back(vertices[v].via);
    }
    std::reverse(path.begin(), path.end());
    return path;
  }

  bool Visited(const Embedding& z, double margin) const {
    const double r2 = (margin / 2.0) * (margin / 2.0);
    for (int v : visited) {
      if (static_cast<double>((vertices[v].z - z).squaredNorm()) < r2 &&
          Reidentify(vertices[v].z, z, margin)) {
        return true;
      }
    }
    return false;
  }
};

struct OneShotOptions {
  int horizon = kDefaultHorizon;
  int cutoff = kLeafCutoff;
  bool reidentify = true;    // false: no visited-set discard, no conflict filter
  bool stop_at_goal = true;  // false: explore all `horizon` depths
};

// Breadth-first latent graph search from `start` towards `goal`. The start
// observation is the context for every prediction.
template <LatentModel M>
PlanResult OneShotPlan(M& model, const Observation& start, const Observation& goal,
                       const OneShotOptions& options, Rng& rng, LatentGraph* graph_out = nullptr) {
  const double margin = model.margin();
  LatentGraph graph;
  PlanResult result;
  const int root = graph.Add(model.Encode(start), -1, Action::kNoOp);
  graph.goal = model.Encode(goal);
  graph.visited = {root};
  graph.leaves = {root};
  auto finish = [&]() {
    if (graph_out != nullptr) *graph_out = std::move(graph);
    return result;
  };
  if (options.stop_at_goal && Reidentify(graph.vertices[root].z, graph.goal, margin)) {
    result.solved = true;
    return finish();
  }

  std::vector<Embedding> queries;
  std::vector<Action> query_actions;
  for (int depth = 1; depth <= options.horizon && !graph.leaves.empty(); ++depth) {
    queries.clear();
    query_actions.clear();
    for (int leaf : graph.leaves) {
      for (Action a : kAllActions) {
        queries.push_back(graph.vertices[leaf].z);
        query_actions.push_back(a);
      }
    }
    result.stats.expanded += static_cast<int>(graph.leaves.size());
    std::vector<Embedding> predicted = model.PredictMany(queries, query_actions, start);

    std::vector<Embedding> children;
    std::vector<int> child_query;
    for (std::size_t q = 0; q < predicted.size(); ++q) {
      if (options.reidentify && graph.Visited(predicted[q], margin)) continue;
      children.push_back(std::move(predicted[q]));
      child_query.push_back(static_cast<int>(q));
    }
    std::vector<int> kept;
    if (options.reidentify) {
      kept = FilterIndices(children, margin, options.cutoff, rng);
    } else {
      std::vector<int> all(children.size());
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
      kept = Subsample(std::move(all), options.cutoff, rng);
    }

    std::vector<int> next_leaves;
    next_leaves.reserve(kept.size());
    for (int k : kept) {
      const int q = child_query[k];
      const int parent = graph.leaves[q / kNumActions];
      next_leaves.push_back(graph.Add(std::move(children[k]), parent, query_actions[q]));
    }
    graph.leaves = std::move(next_leaves);
    result.stats.fringe_sizes.push_back(static_cast<int>(graph.leaves.size()));

    if (options.stop_at_goal && !graph.leaves.empty()) {
      int best = graph.leaves.front();
      float best_d = std::numeric_limits<float>::infinity();
      for (int v : graph.leaves) {
        const float dist = (graph.vertices[v].z - graph.goal).squaredNorm();
        if (dist < best_d) {
          best_d = dist;
          best = v;
        }
      }
      if (Reidentify(graph.vertices[best].z, graph.goal, margin)) {
        result.actions = graph.PathTo(best);
        result.solved = true;
        return finish();
      }
    }
    if (options.reidentify) {
      graph.visited.insert(graph.visited.end(), graph.leaves.begin(), graph.leaves.end());
    }
  }
  return finish();
}

template <LatentModel M>
PlanResult OneShotPlan(M& model, const Observation& start, const Observation& goal,
                       int horizon, Rng& rng) {
  OneShotOptions options;
  options.horizon = horizon;
  return OneShotPlan(model, start, goal, options, rng);
}

template <LatentModel M>
PlanResult OneShotNoReid(M& model, const Observation& start, const Observation& goal,
                         int horizon, Rng& rng) {
  OneShotOptions options;
  options.horizon = horizon;
  options.reidentify = false;
  return OneShotPlan(model, start, goal, options, rng);
}

// ---------------------------------------------------------------------------
// Observed-transition lookup

class TransitionTable {
 public:
  struct Record {
    Embedding from;
    Action action;
    Embedding to;
  };

  void Add(Embedding from, Action action, Embedding to) {
    records_.push_back({std::move(from), action, std::move(to)});
  }

  // Most recent record whose key reidentifies with `z` under `action`.
  const Embedding* Lookup(const Embedding& z, Action action, double margin) const {
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
      if (it->action == action && Reidentify(it->from, z, margin)) return &it->to;
    }
    return nullptr;
  }

  std::size_t size() const { return records_.size(); }
  const std::vector<Record>& records() const { return records_; }

 private:
  std::vector<Record> records_;
};

// Serves predictions from the table when a stored transition matches and
// falls back to the wrapped model otherwise.
template <LatentModel M>
class TableBackedModel {
 public:
  TableBackedModel(M& base, const TransitionTable& table, bool enabled = true)
      : base_(&base), table_(&table), enabled_(enabled) {}

  Embedding Encode(const Observation& obs) { return base_->Encode(obs); }
  double margin() const { return base_->margin(); }

  std::vector<Embedding> PredictMany(std::span<const Embedding> zs, std::span<const Action> actions,
                                     const Observation& context) {
    std::vector<Embedding> out(zs.size());
    std::vector<Embedding> miss_z;
    std::vector<Action> miss_a;
    std::vector<std::size_t> miss_at;
    for (std::size_t i = 0; i < zs.size(); ++i) {
      const Embedding* hit = enabled_ ? table_->Lookup(zs[i], actions[i], margin()) : nullptr;
      if (hit != nullptr) {
        out[i] = *hit;
      } else {
        miss_z.push_back(zs[i]);
        miss_a.push_back(actions[i]);
        miss_at.push_back(i);
      }
    }
    if (!miss_z.empty()) {
      std::vector<Embedding> pred = base_->PredictMany(miss_z, miss_a, context);
      for (std::size_t k = 0; k < miss_at.size(); ++k) out[miss_at[k]] = std::move(pred[k]);
    }
    return out;
  }

 private:
  M* base_;
  const TransitionTable* table_;
  bool enabled_;
};

// ---------------------------------------------------------------------------
// Full planner

struct FullPlanOptions {
  int step_budget = kDefaultStepBudget;
  int initial_horizon = kDefaultHorizon;
  int replan_horizon = kReplanHorizon;
  int cutoff = kLeafCutoff;
  bool use_lookup = true;
};

namespace internal {

template <LatentModel M>
std::deque<Embedding> PredictTrajectory(M& model, const Embedding& from,
                                        const std::deque<Action>& plan, const Observation& context) {
  std::deque<Embedding> out;
  Embedding z = from;
  for (Action a : plan) {
    std::vector<Embedding> next =
        model.PredictMany(std::span<const Embedding>(&z, 1), std::span<const Action>(&a, 1), context);
    z = std::move(next.front());
    out.push_back(z);
  }
  return out;
}

}  // namespace internal

// Runs one episode with execute / verify / replan. When a short-horizon replan
// finds nothing the search is retried at the initial horizon; when that also
// fails a random move is taken.
template <LatentModel M>
PlanResult FullPlanEpisode(M& model, const LevelSpec& level, const FullPlanOptions& options,
                           Rng& rng, TransitionTable* table_out = nullptr) {
  if (options.step_budget < 1) throw std::invalid_argument("step budget must be at least 1");
  TransitionTable table;
  TableBackedModel<M> fhat(model, table, options.use_lookup);
  const double margin = model.margin();
  const Observation goal = GoalObservation(level);
  PlanResult result;

  EnvState state = StartState(level);
  Observation obs = Observe(state);
  Embedding z = fhat.Encode(obs);

  auto plan_from = [&](const Observation& from, int horizon) {
    OneShotOptions o;
    o.horizon = horizon;
    o.cutoff = options.cutoff;
    PlanResult r = OneShotPlan(fhat, from, goal, o, rng);
    if (!r.solved && horizon < options.initial_horizon) {
      o.horizon = options.initial_horizon;
      r = OneShotPlan(fhat, from, goal, o, rng);
    }
    // Per-depth maximum over every search in the episode.
    auto& sizes = result.stats.fringe_sizes;
    if (sizes.size() < r.stats.fringe_sizes.size()) sizes.resize(r.stats.fringe_sizes.size(), 0);
    for (std::size_t d = 0; d < r.stats.fringe_sizes.size(); ++d) {
      sizes[d] = std::max(sizes[d], r.stats.fringe_sizes[d]);
    }
    return r.solved ? std::deque<Action>(r.actions.begin(), r.actions.end()) : std::deque<Action>{};
  };

  if (IsSuccess(state)) {
    result.solved = true;
    return result;
  }
  std::deque<Action> plan = plan_from(obs, options.initial_horizon);
  std::deque<Embedding> predicted = internal::PredictTrajectory(fhat, z, plan, obs);

  while (result.stats.steps < options.step_budget) {
    if (plan.empty()) {
      plan.push_back(ActionFromIndex(UniformInt(rng, 0, 3)));
      predicted = internal::PredictTrajectory(fhat, z, plan, obs);
    }
    const Action a = plan.front();
    plan.pop_front();
    const Embedding z_pred = std::move(predicted.front());
    predicted.pop_front();

    state = Step(state, a);
    ++result.stats.steps;
    result.actions.push_back(a);
    Observation next_obs = Observe(state);
    Embedding z_next = fhat.Encode(next_obs);
    table.Add(z, a, z_next);
    if (IsSuccess(state)) {
      result.solved = true;
      break;
    }
    if (!Reidentify(z_pred, z_next, margin) || plan.empty()) {
      ++result.stats.replans;
      plan = plan_from(next_obs, options.replan_horizon);
      predicted = internal::PredictTrajectory(fhat, z_next, plan, next_obs);
    }
    obs = std::move(next_obs);
    z = std::move(z_next);
  }
  if (table_out != nullptr) *table_out = std::move(table);
  return result;
}

// Executes an open-loop plan from the level start, stopping early on success.
inline PlanResult ExecutePlan(const LevelSpec& level, const std::vector<Action>& plan,
                              int step_budget = kDefaultStepBudget) {
  PlanResult result;
  EnvState s = StartState(level);
  result.solved = IsSuccess(s);
  for (Action a : plan) {
    if (result.solved || result.stats.steps >= step_budget) break;
    s = Step(s, a);
    ++result.stats.steps;
    result.actions.push_back(a);
    result.solved = IsSuccess(s);
  }
  return result;
}

}  // namespace ppgs

#endif  // PPGS_PLANNER_HPP_
