#ifndef PPGS_BASELINE_HPP_
#define PPGS_BASELINE_HPP_

// Learning-free online graph search over raw observations. States are
// identified by exact observation equality; untried actions are sampled
// uniformly, and once a state is exhausted the agent walks the known edges to
// the nearest state that still has untried actions.

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <unordered_map>
#include <vector>

#include "ppgs/env.hpp"
#include "ppgs/planner.hpp"
#include "ppgs/random.hpp"

namespace ppgs {

class ObsGraph {
 public:
  struct Edge {
    Action action;
    int to;
  };

  // Id of `obs`, adding it with every action untried if unseen.
  int Visit(const Observation& obs) {
    const auto it = ids_.find(obs);
    if (it != ids_.end()) return it->second;
    const int id = static_cast<int>(nodes_.size());
    ids_.emplace(obs, id);
    nodes_.push_back({obs, {kAllActions.begin(), kAllActions.end()}, {}});
    return id;
  }

  int Find(const Observation& obs) const {
    const auto it = ids_.find(obs);
    return it == ids_.end() ? -1 : it->second;
  }

  void AddEdge(int from, Action a, int to) { nodes_[from].edges.push_back({a, to}); }

  std::vector<Action>& untried(int id) { return nodes_[id].untried; }
  const std::vector<Action>& untried(int id) const { return nodes_[id].untried; }
  const std::vector<Edge>& edges(int id) const { return nodes_[id].edges; }
  std::size_t size() const { return nodes_.size(); }

  // Shortest known action sequence from `from` to the closest state with
  // untried actions; among equally close states the earliest visited wins.
  // nullopt when no such state is reachable over known edges.
  std::optional<std::vector<Action>> RouteToFrontier(int from) const {
    const int n = static_cast<int>(nodes_.size());
    std::vector<int> dist(n, -1);
    std::vector<int> parent(n, -1);
    std::vector<Action> via(n, Action::kNoOp);
    std::vector<int> layer{from};
    dist[from] = 0;
    while (!layer.empty()) {
      int target = -1;
      for (int v : layer) {
        if (!nodes_[v].untried.empty() && (target < 0 || v < target)) target = v;
      }
      if (target >= 0) {
        std::vector<Action> path;
        for (int v = target; v != from; v = parent[v]) path.push_back(via[v]);
        std::reverse(path.begin(), path.end());
        return path;
      }
      std::vector<int> next;
      for (int v : layer) {
        for (const Edge& e : nodes_[v].edges) {
          if (dist[e.to] >= 0) continue;
          dist[e.to] = dist[v] + 1;
          parent[e.to] = v;
          via[e.to] = e.action;
          next.push_back(e.to);
        }
      }
      layer = std::move(next);
    }
    return std::nullopt;
  }

 private:
  struct Node {
    Observation obs;
    std::vector<Action> untried;
    std::vector<Edge> edges;
  };
  std::vector<Node> nodes_;
  std::unordered_map<Observation, int, ObservationHash> ids_;
};

inline PlanResult GsOnImages(const LevelSpec& level, int step_budget, std::uint64_t seed,
                             ObsGraph* graph_out = nullptr) {
  Rng rng(DeriveSeed(seed, 0x65A1A6E5));
  const Observation goal = GoalObservation(level);
  ObsGraph graph;
  PlanResult result;
  EnvState state = StartState(level);
  Observation obs = Observe(state);
  int current = graph.Visit(obs);

  auto act = [&](Action a) {
    state = Step(state, a);
    ++result.stats.steps;
    result.actions.push_back(a);
    obs = Observe(state);
  };

  while (!(obs == goal) && result.stats.steps < step_budget) {
    std::vector<Action>& untried = graph.untried(current);
    if (!untried.empty()) {
      const int k = UniformInt(rng, 0, static_cast<int>(untried.size()) - 1);
      const Action a = untried[k];
      untried.erase(untried.begin() + k);
      act(a);
      const int next = graph.Visit(obs);
      graph.AddEdge(current, a, next);
      current = next;
      continue;
    }
    const auto route = graph.RouteToFrontier(current);
    if (!route) break;
    ++result.stats.replans;
    for (Action a : *route) {
      if (obs == goal || result.stats.steps >= step_budget) break;
      act(a);
    }
    current = graph.Find(obs);
  }
  result.solved = obs == goal;
  if (graph_out != nullptr) *graph_out = std::move(graph);
  return result;
}

}  // namespace ppgs

#endif  // PPGS_BASELINE_HPP_
