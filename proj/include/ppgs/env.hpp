#ifndef PPGS_ENV_HPP_
#define PPGS_ENV_HPP_

// Deterministic goal-conditioned grid puzzles: GridMaze, DigitJump and
// IceSlider. Every level is a pure function of (env, seed); states are agent
// positions on a static grid, so a level's state graph is small enough to be
// enumerated exhaustively by `true_graph`.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <deque>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ppgs/random.hpp"

namespace ppgs {

enum class Action : std::uint8_t {
  kUp = 0,
  kDown = 1,
  kLeft = 2,
  kRight = 3,
  kNoOp = 4,
};

inline constexpr int kNumActions = 5;
inline constexpr std::array<Action, kNumActions> kAllActions = {
    Action::kUp, Action::kDown, Action::kLeft, Action::kRight, Action::kNoOp};

constexpr int ActionIndex(Action a) { return static_cast<int>(a); }

inline Action ActionFromIndex(int i) {
  if (i < 0 || i >= kNumActions) {
    throw std::out_of_range("action index out of range: " + std::to_string(i));
  }
  return static_cast<Action>(i);
}

enum class EnvId : std::uint8_t { kGridMaze = 0, kDigitJump = 1, kIceSlider = 2 };

inline constexpr std::array<EnvId, 3> kAllEnvs = {
    EnvId::kGridMaze, EnvId::kDigitJump, EnvId::kIceSlider};

inline std::string_view EnvName(EnvId env) {
  switch (env) {
    case EnvId::kGridMaze:
      return "GridMaze";
    case EnvId::kDigitJump:
      return "DigitJump";
    case EnvId::kIceSlider:
      return "IceSlider";
  }
  return "?";
}

// Case-insensitive, so "gridmaze" and "GridMaze" both work.
inline EnvId EnvFromName(std::string_view name) {
  for (EnvId env : kAllEnvs) {
    const std::string_view canonical = EnvName(env);
    if (std::equal(canonical.begin(), canonical.end(), name.begin(), name.end(),
                   [](unsigned char a, unsigned char b) { return std::tolower(a) == std::tolower(b); })) {
      return env;
    }
  }
  throw std::invalid_argument("unknown environment: " + std::string(name));
}

// Cell codes double as the on-disk level encoding: 0=Free, 1=Wall, 2=Rock,
// 10+k=Digit k.
namespace cell {
inline constexpr std::uint8_t kFree = 0;
inline constexpr std::uint8_t kWall = 1;
inline constexpr std::uint8_t kRock = 2;
inline constexpr std::uint8_t kDigitBase = 10;

constexpr std::uint8_t Digit(int k) {
  return static_cast<std::uint8_t>(kDigitBase + k);
}
constexpr bool IsDigit(std::uint8_t code) {
  return code > kDigitBase && code <= kDigitBase + 9;
}
constexpr int DigitValue(std::uint8_t code) {
  return IsDigit(code) ? code - kDigitBase : 0;
}
constexpr bool IsBlocking(std::uint8_t code) {
  return code == kWall || code == kRock;
}
constexpr bool IsValidCode(std::uint8_t code) {
  return code == kFree || code == kWall || code == kRock ||
         (code >= kDigitBase + 1 && code <= kDigitBase + 6);
}
}  // namespace cell

struct Cell {
  int row = 0;
  int col = 0;

  friend constexpr bool operator==(const Cell&, const Cell&) = default;
  friend constexpr auto operator<=>(const Cell&, const Cell&) = default;
};

constexpr Cell Offset(Action a) {
  switch (a) {
    case Action::kUp:
      return {-1, 0};
    case Action::kDown:
      return {1, 0};
    case Action::kLeft:
      return {0, -1};
    case Action::kRight:
      return {0, 1};
    case Action::kNoOp:
      return {0, 0};
  }
  return {0, 0};
}

struct LevelSpec {
  EnvId env = EnvId::kGridMaze;
  std::uint64_t seed = 0;
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> cells;  // row-major, height x width
  Cell start;
  Cell goal;

  bool InBounds(Cell c) const {
    return c.row >= 0 && c.row < height && c.col >= 0 && c.col < width;
  }
  int Index(Cell c) const { return c.row * width + c.col; }
  Cell CellAt(int index) const { return {index / width, index % width}; }
  std::uint8_t At(Cell c) const { return cells[Index(c)]; }
  std::uint8_t& At(Cell c) { return cells[Index(c)]; }
  bool Blocked(Cell c) const { return !InBounds(c) || cell::IsBlocking(At(c)); }

  friend bool operator==(const LevelSpec&, const LevelSpec&) = default;
};

// A state is the agent position on a fixed level. The level must outlive it.
struct EnvState {
  const LevelSpec* level = nullptr;
  Cell agent;

  friend bool operator==(const EnvState& a, const EnvState& b) {
    return a.level == b.level && a.agent == b.agent;
  }
};

inline EnvState StartState(const LevelSpec& level) {
  return {&level, level.start};
}

inline EnvState StateAt(const LevelSpec& level, Cell agent) {
  if (level.Blocked(agent)) {
    throw std::invalid_argument("agent placed on a blocking or out-of-bounds cell");
  }
  return {&level, agent};
}

// ---------------------------------------------------------------------------
// Dynamics

inline EnvState Step(const EnvState& state, Action action) {
  const LevelSpec& level = *state.level;
  const Cell d = Offset(action);
  if (action == Action::kNoOp) return state;
  EnvState next = state;
  switch (level.env) {
    case EnvId::kGridMaze: {
      const Cell to{state.agent.row + d.row, state.agent.col + d.col};
      if (!level.Blocked(to)) next.agent = to;
      break;
    }
    case EnvId::kDigitJump: {
      const int k = cell::DigitValue(level.At(state.agent));
      const Cell to{state.agent.row + k * d.row, state.agent.col + k * d.col};
      if (!level.Blocked(to)) next.agent = to;
      break;
    }
    case EnvId::kIceSlider: {
      Cell at = state.agent;
      for (;;) {
        const Cell to{at.row + d.row, at.col + d.col};
        if (level.Blocked(to)) break;
        at = to;
      }
      next.agent = at;
      break;
    }
  }
  return next;
}

inline bool IsSuccess(const EnvState& state) {
  return state.agent == state.level->goal;
}

// ---------------------------------------------------------------------------
// Observations
//
// Three channels over a fixed per-environment canvas: cell kind code, agent
// mask, goal mask. Levels smaller than the canvas (GridMaze) are padded with
// walls so every level of one environment shares an observation shape.

inline constexpr int kObservationChannels = 3;

struct ObservationShape {
  int channels = kObservationChannels;
  int height = 0;
  int width = 0;

  int size() const { return channels * height * width; }
  friend bool operator==(const ObservationShape&, const ObservationShape&) = default;
};

inline constexpr int kMaxMazeSize = 15;
inline constexpr int kDigitJumpSize = 8;
inline constexpr int kIceSliderSize = 10;

inline ObservationShape ObservationShapeFor(EnvId env) {
  switch (env) {
    case EnvId::kGridMaze:
      return {kObservationChannels, kMaxMazeSize, kMaxMazeSize};
    case EnvId::kDigitJump:
      return {kObservationChannels, kDigitJumpSize, kDigitJumpSize};
    case EnvId::kIceSlider:
      return {kObservationChannels, kIceSliderSize, kIceSliderSize};
  }
  return {};
}

struct Observation {
  ObservationShape shape;
  std::vector<std::uint8_t> data;  // [channel][row][col]

  std::uint8_t at(int channel, int row, int col) const {
    return data[(channel * shape.height + row) * shape.width + col];
  }
  std::uint8_t& at(int channel, int row, int col) {
    return data[(channel * shape.height + row) * shape.width + col];
  }

  friend bool operator==(const Observation&, const Observation&) = default;
  friend auto operator<=>(const Observation& a, const Observation& b) {
    return a.data <=> b.data;
  }
};

struct ObservationHash {
  std::size_t operator()(const Observation& o) const noexcept {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (std::uint8_t b : o.data) {
      h ^= b;
      h *= 1099511628211ULL;
    }
    return static_cast<std::size_t>(h);
  }
};

namespace internal {
inline Observation RenderBoard(const LevelSpec& level) {
  Observation obs;
  obs.shape = ObservationShapeFor(level.env);
  obs.data.assign(obs.shape.size(), 0);
  for (int r = 0; r < obs.shape.height; ++r) {
    for (int c = 0; c < obs.shape.width; ++c) {
      obs.at(0, r, c) = level.InBounds({r, c}) ? level.At({r, c}) : cell::kWall;
    }
  }
  obs.at(2, level.goal.row, level.goal.col) = 1;
  return obs;
}
}  // namespace internal

inline Observation Observe(const EnvState& state) {
  Observation obs = internal::RenderBoard(*state.level);
  obs.at(1, state.agent.row, state.agent.col) = 1;
  return obs;
}

inline Observation GoalObservation(const LevelSpec& level) {
  return Observe(EnvState{&level, level.goal});
}

// Agent position encoded in an observation's agent channel.
inline Cell AgentCell(const Observation& obs) {
  for (int r = 0; r < obs.shape.height; ++r) {
    for (int c = 0; c < obs.shape.width; ++c) {
      if (obs.at(1, r, c) != 0) return {r, c};
    }
  }
  throw std::invalid_argument("observation has an empty agent channel");
}

// ---------------------------------------------------------------------------
// Ground-truth state graph

struct TrueGraph {
  std::vector<Cell> vertices;  // BFS discovery order from the root
  std::vector<std::array<int, kNumActions>> edges;
  std::vector<int> vertex_of_cell;  // -1 where unreachable

  int VertexOf(Cell c) const { return vertex_of_cell[c.row * width + c.col]; }
  std::size_t size() const { return vertices.size(); }

  int width = 0;
};

inline TrueGraph BuildTrueGraph(const LevelSpec& level, Cell root) {
  TrueGraph g;
  g.width = level.width;
  g.vertex_of_cell.assign(level.width * level.height, -1);
  auto add = [&](Cell c) {
    g.vertex_of_cell[level.Index(c)] = static_cast<int>(g.vertices.size());
    g.vertices.push_back(c);
    g.edges.push_back({});
  };
  add(root);
  for (std::size_t i = 0; i < g.vertices.size(); ++i) {
    const EnvState s{&level, g.vertices[i]};
    for (Action a : kAllActions) {
      const Cell to = Step(s, a).agent;
      if (g.VertexOf(to) < 0) add(to);
      g.edges[i][ActionIndex(a)] = g.VertexOf(to);
    }
  }
  return g;
}

inline TrueGraph BuildTrueGraph(const LevelSpec& level) {
  return BuildTrueGraph(level, level.start);
}

// Shortest successful action sequence from `from`; ties broken by action
// encoding order. nullopt when the goal cannot be reached.
inline std::optional<std::vector<Action>> OracleShortestPath(const LevelSpec& level,
                                                             const EnvState& from) {
  if (IsSuccess(from)) return std::vector<Action>{};
  const int n = level.width * level.height;
  std::vector<int> parent(n, -2);
  std::vector<Action> via(n, Action::kNoOp);
  std::deque<Cell> queue{from.agent};
  parent[level.Index(from.agent)] = -1;
  while (!queue.empty()) {
    const Cell at = queue.front();
    queue.pop_front();
    for (Action a : kAllActions) {
      const Cell to = Step(EnvState{&level, at}, a).agent;
      const int ti = level.Index(to);
      if (parent[ti] != -2) continue;
      parent[ti] = level.Index(at);
      via[ti] = a;
      if (to == level.goal) {
        std::vector<Action> path;
        for (int i = ti; parent[i] != -1; i = parent[i]) path.push_back(via[i]);
        std::reverse(path.begin(), path.end());
        return path;
      }
      queue.push_back(to);
    }
  }
  return std::nullopt;
}

inline bool IsSolvable(const LevelSpec& level) {
  return OracleShortestPath(level, StartState(level)).has_value();
}

// ---------------------------------------------------------------------------
// Procedural generation

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kMaxGenerationAttempts = 10000;
inline constexpr double kIceRockDensity = 0.2;

namespace internal {

inline std::uint64_t AttemptSeed(EnvId env, std::uint64_t seed, int attempt) {
  return SplitMix64(SplitMix64(seed ^ (static_cast<std::uint64_t>(env) << 56)) +
                    static_cast<std::uint64_t>(attempt));
}

// Perfect maze by randomized depth-first carving. Rooms sit on even
// coordinates, so an odd n gives a wall-less outer ring of rooms and the
// bottom-left corner is always a room.
inline LevelSpec GenerateMaze(Rng& rng) {
  const int n = 5 + 2 * UniformInt(rng, 0, (kMaxMazeSize - 5) / 2);
  LevelSpec level;
  level.env = EnvId::kGridMaze;
  level.width = level.height = n;
  level.cells.assign(n * n, cell::kWall);
  const Cell root{n - 1, 0};
  level.At(root) = cell::kFree;
  std::vector<Cell> stack{root};
  while (!stack.empty()) {
    const Cell at = stack.back();
    std::array<Action, 4> open{};
    int count = 0;
    for (Action a : {Action::kUp, Action::kDown, Action::kLeft, Action::kRight}) {
      const Cell d = Offset(a);
      const Cell to{at.row + 2 * d.row, at.col + 2 * d.col};
      if (level.InBounds(to) && level.At(to) == cell::kWall) open[count++] = a;
    }
    if (count == 0) {
      stack.pop_back();
      continue;
    }
    const Cell d = Offset(open[UniformInt(rng, 0, count - 1)]);
    level.At({at.row + d.row, at.col + d.col}) = cell::kFree;
    const Cell to{at.row + 2 * d.row, at.col + 2 * d.col};
    level.At(to) = cell::kFree;
    stack.push_back(to);
  }
  level.start = root;
  std::vector<Cell> free_cells;
  for (int i = 0; i < n * n; ++i) {
    const Cell c = level.CellAt(i);
    if (level.At(c) == cell::kFree && c != root) free_cells.push_back(c);
  }
  level.goal = free_cells[UniformInt(rng, 0, static_cast<int>(free_cells.size()) - 1)];
  return level;
}

inline LevelSpec GenerateDigitJump(Rng& rng) {
  LevelSpec level;
  level.env = EnvId::kDigitJump;
  level.width = level.height = kDigitJumpSize;
  level.cells.resize(kDigitJumpSize * kDigitJumpSize);
  for (auto& code : level.cells) code = cell::Digit(UniformInt(rng, 1, 6));
  level.start = {0, 0};
  level.goal = {kDigitJumpSize - 1, kDigitJumpSize - 1};
  return level;
}

inline LevelSpec GenerateIceSlider(Rng& rng) {
  const int n = kIceSliderSize;
  LevelSpec level;
  level.env = EnvId::kIceSlider;
  level.width = level.height = n;
  level.cells.assign(n * n, cell::kFree);
  for (auto& code : level.cells) {
    if (Uniform01(rng) < kIceRockDensity) code = cell::kRock;
  }
  level.start = {0, UniformInt(rng, 0, n - 1)};
  level.goal = {n - 1, UniformInt(rng, 0, n - 1)};
  level.At(level.start) = cell::kFree;
  level.At(level.goal) = cell::kFree;
  return level;
}

}  // namespace internal

inline LevelSpec Generate(EnvId env, std::uint64_t seed) {
  for (int attempt = 0; attempt < kMaxGenerationAttempts; ++attempt) {
    Rng rng(internal::AttemptSeed(env, seed, attempt));
    LevelSpec level;
    switch (env) {
      case EnvId::kGridMaze:
        level = internal::GenerateMaze(rng);
        break;
      case EnvId::kDigitJump:
        level = internal::GenerateDigitJump(rng);
        break;
      case EnvId::kIceSlider:
        level = internal::GenerateIceSlider(rng);
        break;
    }
    level.seed = seed;
    if (IsSolvable(level)) return level;
  }
  throw GenerationError("no solvable " + std::string(EnvName(env)) +
                        " level after " + std::to_string(kMaxGenerationAttempts) +
                        " attempts (seed " + std::to_string(seed) + ")");
}

// Checks the structural invariants every level must satisfy.
inline void ValidateLevel(const LevelSpec& level) {
  if (level.width <= 0 || level.height <= 0) {
    throw std::invalid_argument("level has non-positive dimensions");
  }
  const ObservationShape shape = ObservationShapeFor(level.env);
  if (level.width > shape.width || level.height > shape.height) {
    throw std::invalid_argument("level larger than the environment canvas");
  }
  if (level.cells.size() != static_cast<std::size_t>(level.width * level.height)) {
    throw std::invalid_argument("cell count does not match dimensions");
  }
  for (std::uint8_t code : level.cells) {
    if (!cell::IsValidCode(code)) {
      throw std::invalid_argument("invalid cell code " + std::to_string(code));
    }
  }
  if (level.Blocked(level.start) || level.Blocked(level.goal)) {
    throw std::invalid_argument("start or goal on a blocking cell");
  }
}

}  // namespace ppgs

#endif  // PPGS_ENV_HPP_
