#include <gtest/gtest.h>

#include <set>

#include "ppgs/env.hpp"
#include "ppgs/random.hpp"

namespace ppgs {
namespace {

LevelSpec Uniform(EnvId env, int w, int h, std::uint8_t code) {
  LevelSpec l;
  l.env = env;
  l.width = w;
  l.height = h;
  l.cells.assign(w * h, code);
  l.start = {0, 0};
  l.goal = {h - 1, w - 1};
  return l;
}

// Independent flood fill over 4-neighbours for GridMaze.
int FloodFillCount(const LevelSpec& l) {
  std::vector<bool> seen(l.cells.size(), false);
  std::vector<Cell> stack{l.start};
  seen[l.Index(l.start)] = true;
  int count = 0;
  while (!stack.empty()) {
    const Cell c = stack.back();
    stack.pop_back();
    ++count;
    const Cell nbrs[] = {{c.row - 1, c.col}, {c.row + 1, c.col}, {c.row, c.col - 1}, {c.row, c.col + 1}};
    for (Cell n : nbrs) {
      if (l.InBounds(n) && !cell::IsBlocking(l.At(n)) && !seen[l.Index(n)]) {
        seen[l.Index(n)] = true;
        stack.push_back(n);
      }
    }
  }
  return count;
}

TEST(Action, StableEncoding) {
  EXPECT_EQ(ActionIndex(Action::kUp), 0);
  EXPECT_EQ(ActionIndex(Action::kDown), 1);
  EXPECT_EQ(ActionIndex(Action::kLeft), 2);
  EXPECT_EQ(ActionIndex(Action::kRight), 3);
  EXPECT_EQ(ActionIndex(Action::kNoOp), 4);
  for (int i = 0; i < kNumActions; ++i) EXPECT_EQ(ActionIndex(ActionFromIndex(i)), i);
  EXPECT_THROW(ActionFromIndex(5), std::out_of_range);
}

TEST(Generate, DigitJumpLayout) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const LevelSpec l = Generate(EnvId::kDigitJump, seed);
    EXPECT_EQ(l.width, 8);
    EXPECT_EQ(l.height, 8);
    EXPECT_EQ(l.start, (Cell{0, 0}));
    EXPECT_EQ(l.goal, (Cell{7, 7}));
    for (std::uint8_t c : l.cells) {
      ASSERT_TRUE(cell::IsDigit(c));
      EXPECT_GE(cell::DigitValue(c), 1);
      EXPECT_LE(cell::DigitValue(c), 6);
    }
  }
}

TEST(Generate, GridMazeLayout) {
  std::set<int> sizes;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const LevelSpec l = Generate(EnvId::kGridMaze, seed);
    EXPECT_EQ(l.width, l.height);
    EXPECT_EQ(l.width % 2, 1);
    EXPECT_GE(l.width, 5);
    EXPECT_LE(l.width, 15);
    EXPECT_EQ(l.start, (Cell{l.height - 1, 0}));
    EXPECT_FALSE(l.Blocked(l.start));
    EXPECT_FALSE(l.Blocked(l.goal));
    EXPECT_NE(l.start, l.goal);
    sizes.insert(l.width);
  }
  EXPECT_EQ(sizes, (std::set<int>{5, 7, 9, 11, 13, 15}));
}

TEST(Generate, IceSliderLayout) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const LevelSpec l = Generate(EnvId::kIceSlider, seed);
    EXPECT_EQ(l.start.row, 0);
    EXPECT_EQ(l.goal.row, l.height - 1);
    EXPECT_FALSE(l.Blocked(l.start));
    EXPECT_FALSE(l.Blocked(l.goal));
  }
}

TEST(Generate, SeedReproducible) {
  for (EnvId env : kAllEnvs) {
    for (std::uint64_t seed : {0ull, 1ull, 99ull, 1000000ull}) {
      EXPECT_EQ(Generate(env, seed), Generate(env, seed));
    }
    EXPECT_NE(Generate(env, 1).cells, Generate(env, 2).cells);
  }
}

TEST(Generate, ValidatesAndIsSolvable) {
  for (EnvId env : kAllEnvs) {
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
      const LevelSpec l = Generate(env, seed);
      EXPECT_NO_THROW(ValidateLevel(l));
      EXPECT_TRUE(IsSolvable(l));
      EXPECT_EQ(l.seed, seed);
    }
  }
}

TEST(Step, DigitJumpMovesByDigit) {
  LevelSpec l = Uniform(EnvId::kDigitJump, 8, 8, cell::Digit(1));
  l.At({0, 0}) = cell::Digit(3);
  EXPECT_EQ(Step(StartState(l), Action::kRight).agent, (Cell{0, 3}));
  EXPECT_EQ(Step(StartState(l), Action::kDown).agent, (Cell{3, 0}));
}

TEST(Step, DigitJumpOutOfBoundsIsIdentity) {
  LevelSpec l = Uniform(EnvId::kDigitJump, 8, 8, cell::Digit(1));
  l.At({0, 0}) = cell::Digit(6);
  EXPECT_EQ(Step(StartState(l), Action::kUp).agent, (Cell{0, 0}));
  EXPECT_EQ(Step(StartState(l), Action::kLeft).agent, (Cell{0, 0}));
  l.At({0, 2}) = cell::Digit(6);
  EXPECT_EQ(Step(StateAt(l, {0, 2}), Action::kRight).agent, (Cell{0, 2}));
  l.At({0, 2}) = cell::Digit(5);
  EXPECT_EQ(Step(StateAt(l, {0, 2}), Action::kRight).agent, (Cell{0, 7}));
}

TEST(Step, IceSliderStopsBeforeRock) {
  LevelSpec l = Uniform(EnvId::kIceSlider, 10, 10, cell::kFree);
  l.At({3, 2}) = cell::kRock;
  const EnvState s = StateAt(l, {0, 2});
  EXPECT_EQ(Step(s, Action::kDown).agent, (Cell{2, 2}));
  EXPECT_EQ(Step(s, Action::kRight).agent, (Cell{0, 9}));
  EXPECT_EQ(Step(s, Action::kUp).agent, (Cell{0, 2}));
}

TEST(Step, IceSliderPassesOverGoal) {
  LevelSpec l = Uniform(EnvId::kIceSlider, 5, 5, cell::kFree);
  l.start = {0, 0};
  l.goal = {0, 2};
  EnvState s = StartState(l);
  s = Step(s, Action::kRight);
  EXPECT_EQ(s.agent, (Cell{0, 4}));
  EXPECT_FALSE(IsSuccess(s));
  s = Step(s, Action::kLeft);
  EXPECT_EQ(s.agent, (Cell{0, 0}));
  EXPECT_FALSE(IsSuccess(s));
}

TEST(Step, GridMazeBlockedByWall) {
  LevelSpec l = Uniform(EnvId::kGridMaze, 5, 5, cell::kFree);
  l.At({0, 1}) = cell::kWall;
  EXPECT_EQ(Step(StartState(l), Action::kRight).agent, (Cell{0, 0}));
  EXPECT_EQ(Step(StartState(l), Action::kDown).agent, (Cell{1, 0}));
  EXPECT_EQ(Step(StartState(l), Action::kUp).agent, (Cell{0, 0}));
}

TEST(Step, NoOpIsIdentity) {
  for (EnvId env : kAllEnvs) {
    const LevelSpec l = Generate(env, 5);
    const TrueGraph g = BuildTrueGraph(l);
    for (Cell c : g.vertices) {
      const EnvState s = StateAt(l, c);
      EXPECT_EQ(Step(s, Action::kNoOp), s);
    }
  }
}

TEST(Success, AgentOnGoal) {
  const LevelSpec l = Generate(EnvId::kDigitJump, 3);
  EXPECT_TRUE(IsSuccess(StateAt(l, l.goal)));
  EXPECT_FALSE(IsSuccess(StateAt(l, {7, 6})));
}

TEST(Observe, Channels) {
  const LevelSpec l = Generate(EnvId::kGridMaze, 8);
  const EnvState s = StartState(l);
  const Observation a = Observe(s);
  EXPECT_EQ(a, Observe(s));
  EXPECT_EQ(a.shape.channels, 3);
  EXPECT_EQ(a.at(1, l.start.row, l.start.col), 1);
  EXPECT_EQ(a.at(2, l.goal.row, l.goal.col), 1);
  EXPECT_EQ(AgentCell(a), l.start);
  // Padding outside a small maze reads as wall.
  if (l.width < a.shape.width) {
    EXPECT_EQ(a.at(0, 0, a.shape.width - 1), cell::kWall);
  }
}

TEST(Observe, OnlyAgentChannelDiffers) {
  const LevelSpec l = Generate(EnvId::kDigitJump, 4);
  const Observation a = Observe(StateAt(l, {0, 0}));
  const Observation b = Observe(StateAt(l, {2, 5}));
  const int hw = a.shape.height * a.shape.width;
  for (int i = 0; i < static_cast<int>(a.data.size()); ++i) {
    if (i / hw == 1) continue;
    EXPECT_EQ(a.data[i], b.data[i]) << i;
  }
  EXPECT_NE(a, b);
}

TEST(Observe, GoalObservation) {
  for (EnvId env : kAllEnvs) {
    const LevelSpec l = Generate(env, 11);
    EXPECT_EQ(GoalObservation(l), Observe(StateAt(l, l.goal)));
  }
}

TEST(TrueGraph, AllOnesDigitJumpReachesEverything) {
  const LevelSpec l = Uniform(EnvId::kDigitJump, 8, 8, cell::Digit(1));
  EXPECT_EQ(BuildTrueGraph(l).size(), 64u);
  const auto path = OracleShortestPath(l, StartState(l));
  ASSERT_TRUE(path.has_value());
  EXPECT_EQ(path->size(), 14u);
}

TEST(TrueGraph, GridMazeMatchesFloodFill) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const LevelSpec l = Generate(EnvId::kGridMaze, seed);
    EXPECT_EQ(static_cast<int>(BuildTrueGraph(l).size()), FloodFillCount(l));
  }
}

TEST(TrueGraph, EdgesAgreeWithStep) {
  for (EnvId env : kAllEnvs) {
    const LevelSpec l = Generate(env, 21);
    const TrueGraph g = BuildTrueGraph(l);
    for (std::size_t v = 0; v < g.size(); ++v) {
      for (Action a : kAllActions) {
        const int to = g.edges[v][ActionIndex(a)];
        ASSERT_GE(to, 0);
        EXPECT_EQ(g.vertices[to], Step(StateAt(l, g.vertices[v]), a).agent);
      }
    }
  }
}

TEST(TrueGraph, IceSliderCanContainDeadEnds) {
  bool found = false;
  for (std::uint64_t seed = 0; seed < 50 && !found; ++seed) {
    const LevelSpec l = Generate(EnvId::kIceSlider, seed);
    for (Cell c : BuildTrueGraph(l).vertices) {
      if (!OracleShortestPath(l, StateAt(l, c))) found = true;
    }
  }
  EXPECT_TRUE(found);
}

TEST(OracleShortestPath, FromGoalIsEmpty) {
  const LevelSpec l = Generate(EnvId::kGridMaze, 2);
  const auto p = OracleShortestPath(l, StateAt(l, l.goal));
  ASSERT_TRUE(p.has_value());
  EXPECT_TRUE(p->empty());
}

TEST(OracleShortestPath, IrreversibleSlideIsUnreachable) {
  // Top row free, bottom row rock / goal / rock. Sliding sideways from the
  // start strands the agent in the top corners for good.
  LevelSpec l = Uniform(EnvId::kIceSlider, 3, 2, cell::kFree);
  l.At({1, 0}) = cell::kRock;
  l.At({1, 2}) = cell::kRock;
  l.start = {0, 1};
  l.goal = {1, 1};
  ASSERT_TRUE(OracleShortestPath(l, StartState(l)).has_value());
  const EnvState stuck = Step(StartState(l), Action::kRight);
  EXPECT_EQ(stuck.agent, (Cell{0, 2}));
  EXPECT_FALSE(OracleShortestPath(l, stuck).has_value());
}

TEST(OracleShortestPath, PathExecutesToGoal) {
  for (EnvId env : kAllEnvs) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      const LevelSpec l = Generate(env, seed);
      const auto p = OracleShortestPath(l, StartState(l));
      ASSERT_TRUE(p.has_value());
      EnvState s = StartState(l);
      for (Action a : *p) s = Step(s, a);
      EXPECT_TRUE(IsSuccess(s));
    }
  }
}

TEST(Validate, RejectsBadLevels) {
  LevelSpec l = Uniform(EnvId::kGridMaze, 5, 5, cell::kFree);
  EXPECT_NO_THROW(ValidateLevel(l));
  l.At(l.goal) = cell::kWall;
  EXPECT_THROW(ValidateLevel(l), std::invalid_argument);
  LevelSpec big = Uniform(EnvId::kDigitJump, 9, 9, cell::Digit(1));
  EXPECT_THROW(ValidateLevel(big), std::invalid_argument);
}

// Random probes: determinism, NoOp identity, slide closure and jump bounds.
TEST(Properties, RandomProbes) {
  Rng rng(12345);
  for (EnvId env : kAllEnvs) {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      const LevelSpec l = Generate(env, seed);
      const TrueGraph g = BuildTrueGraph(l);
      for (int probe = 0; probe < 50; ++probe) {
        const EnvState s = StateAt(l, g.vertices[UniformInt(rng, 0, static_cast<int>(g.size()) - 1)]);
        const Action a = ActionFromIndex(UniformInt(rng, 0, 4));
        const EnvState t = Step(s, a);
        ASSERT_EQ(t, Step(s, a));
        ASSERT_FALSE(l.Blocked(t.agent));
        const int dr = std::abs(t.agent.row - s.agent.row);
        const int dc = std::abs(t.agent.col - s.agent.col);
        if (env == EnvId::kDigitJump) {
          const int k = cell::DigitValue(l.At(s.agent));
          ASSERT_TRUE(dr + dc == 0 || dr + dc == k);
        }
        if (env == EnvId::kIceSlider && !(t == s)) {
          const Cell d = Offset(a);
          ASSERT_TRUE(l.Blocked({t.agent.row + d.row, t.agent.col + d.col}));
        }
        if (env == EnvId::kGridMaze) {
          ASSERT_LE(dr + dc, 1);
        }
      }
    }
  }
}

}  // namespace
}  // namespace ppgs
