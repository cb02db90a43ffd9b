#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "ppgs/harness/dataset.hpp"
#include "ppgs/training.hpp"
#include "ppgs/worldmodel.hpp"

namespace ppgs {
namespace {

using MatD = numerics::Matrix<double>;

WorldModelConfig TinyConfig() {
  WorldModelConfig c;
  c.dim = 4;
  c.encoder_width = 8;
  c.forward_width = 8;
  c.inverse_width = 6;
  return c;
}

MatD UnitColumns(int rows, int cols, Rng& rng) {
  MatD m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = StandardNormal(rng);
  return numerics::NormalizeColumns<double>(m);
}

// Keeps the observations a TrainBatch points into alive.
struct BatchFixture {
  Dataset data;
  TrainBatch batch;

  BatchFixture(EnvId env, int levels, int steps, std::uint64_t seed) {
    data = Collect(TrainingLevels(env, levels), 1, steps, seed);
    Rng rng(seed);
    for (const LevelData& ld : data.levels) {
      const Trajectory& t = ld.trajectories[0];
      for (std::size_t i = 0; i < t.actions.size(); ++i) {
        batch.current.push_back(&t.observations[i]);
        batch.next.push_back(&t.observations[i + 1]);
        batch.context.push_back(&t.observations[UniformInt(rng, 0, steps)]);
        batch.actions.push_back(t.actions[i]);
        batch.level_ids.push_back(0);
      }
    }
  }
};

TEST(Encode, DeterministicUnitNorm) {
  const WorldModel m(EnvId::kDigitJump, TinyConfig(), 3);
  for (const LevelSpec& level : TrainingLevels(EnvId::kDigitJump, 5)) {
    const Observation obs = Observe(StartState(level));
    const Embedding a = m.Encode(obs);
    EXPECT_EQ(a, m.Encode(obs));
    EXPECT_NEAR(a.norm(), 1.0f, 1e-5f);
  }
}

TEST(Encode, RejectsObservationOfAnotherEnvironment) {
  const WorldModel m(EnvId::kDigitJump, TinyConfig(), 3);
  const Observation obs = Observe(StartState(Generate(EnvId::kIceSlider, 0)));
  EXPECT_THROW(m.Encode(obs), std::invalid_argument);
}

TEST(Predict, DeterministicFiniteUnitNorm) {
  const WorldModel m(EnvId::kGridMaze, WorldModelConfig{}, 5);
  const LevelSpec level = Generate(EnvId::kGridMaze, 4);
  const Observation obs = Observe(StartState(level));
  const Embedding z = m.Encode(obs);
  for (Action a : kAllActions) {
    const Embedding p = m.Predict(z, a, obs);
    EXPECT_TRUE(p.allFinite());
    EXPECT_NEAR(p.norm(), 1.0f, 1e-5f);
    EXPECT_EQ(p, m.Predict(z, a, obs));
  }
}

TEST(Predict, ContextFreeModelIgnoresContext) {
  WorldModelConfig c = TinyConfig();
  c.use_context = false;
  const WorldModel m(EnvId::kDigitJump, c, 2);
  EXPECT_EQ(m.ForwardInputWidth(), c.dim + kNumActions);
  const Observation a = Observe(StartState(Generate(EnvId::kDigitJump, 0)));
  const Observation b = Observe(StartState(Generate(EnvId::kDigitJump, 1)));
  const Embedding z = m.Encode(a);
  EXPECT_EQ(m.Predict(z, Action::kUp, a), m.Predict(z, Action::kUp, b));
}

TEST(ForwardLoss, Examples) {
  Rng rng(1);
  const MatD z = UnitColumns(16, 8, rng);
  EXPECT_EQ(ForwardLoss<double>(z, z), 0.0);
  EXPECT_NEAR(ForwardLoss<double>(z, (-z).eval()), 4.0, 1e-12);
}

TEST(ForwardLoss, UntrainedModelWithinSphereBound) {
  const WorldModel m(EnvId::kDigitJump, TinyConfig(), 9);
  BatchFixture f(EnvId::kDigitJump, 4, 8, 2);
  const double l = LossForward(m, f.batch);
  EXPECT_GT(l, 0.0);
  EXPECT_LE(l, 4.0);
}

TEST(InverseLoss, Examples) {
  const std::vector<Action> actions{Action::kUp, Action::kLeft, Action::kNoOp};
  MatD logits = MatD::Zero(kNumActions, 3);
  EXPECT_NEAR(InverseLoss<double>(logits, actions), std::log(5.0), 1e-12);
  for (int c = 0; c < 3; ++c) logits(ActionIndex(actions[c]), c) = 100.0;
  EXPECT_NEAR(InverseLoss<double>(logits, actions), 0.0, 1e-12);
}

TEST(InverseLoss, ConstantLogitsBoundedByActionEntropy) {
  // With collapsed inputs every column shares one logit vector; the best it
  // can do is the empirical action distribution.
  const std::vector<Action> actions{Action::kUp, Action::kUp, Action::kUp, Action::kDown,
                                    Action::kLeft, Action::kNoOp};
  std::array<double, kNumActions> freq{};
  for (Action a : actions) freq[ActionIndex(a)] += 1.0 / actions.size();
  double entropy = 0.0;
  for (double p : freq) {
    if (p > 0) entropy -= p * std::log(p);
  }
  MatD best(kNumActions, static_cast<int>(actions.size()));
  for (int r = 0; r < kNumActions; ++r) best.row(r).setConstant(std::log(std::max(freq[r], 1e-300)));
  EXPECT_NEAR(InverseLoss<double>(best, actions), entropy, 1e-9);
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    MatD logits(kNumActions, static_cast<int>(actions.size()));
    for (int r = 0; r < kNumActions; ++r) logits.row(r).setConstant(3.0 * StandardNormal(rng));
    EXPECT_GE(InverseLoss<double>(logits, actions), entropy - 1e-12);
  }
}

TEST(MarginLoss, Examples) {
  MatD z = MatD::Zero(2, 1), zn = MatD::Zero(2, 1);
  z(0, 0) = 1.0;
  zn(0, 0) = 1.0;
  EXPECT_DOUBLE_EQ(MarginLoss<double>(z, zn, 0.1), 1.0);
  zn(1, 0) = 0.05;
  EXPECT_NEAR(MarginLoss<double>(z, zn, 0.1), 0.75, 1e-12);
  zn(1, 0) = 0.1;
  EXPECT_DOUBLE_EQ(MarginLoss<double>(z, zn, 0.1), 0.0);
  zn(1, 0) = 0.7;
  EXPECT_DOUBLE_EQ(MarginLoss<double>(z, zn, 0.1), 0.0);
}

TEST(MarginLoss, ZeroExactlyWhenAllPairsSeparated) {
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const MatD z = UnitColumns(3, 6, rng);
    const MatD zn = UnitColumns(3, 6, rng);
    const double eps = 0.05 + Uniform01(rng);
    bool all_far = true;
    for (int c = 0; c < 6; ++c) all_far = all_far && (zn.col(c) - z.col(c)).squaredNorm() >= eps * eps;
    EXPECT_EQ(MarginLoss<double>(z, zn, eps) == 0.0, all_far);
  }
}

TEST(TotalLoss, Combination) {
  EXPECT_NEAR(CombineLosses(0.1, 1.609, 0.75, 10.0, 1.0), 3.359, 1e-12);
  EXPECT_EQ(CombineLosses(0.0, 0.0, 0.0, 10.0, 1.0), 0.0);
  EXPECT_EQ(CombineLosses(0.2, 7.0, 0.5, 10.0, 0.0), 2.5);
}

TEST(TotalLoss, MatchesComponents) {
  BatchFixture f(EnvId::kDigitJump, 3, 6, 8);
  for (double beta : {1.0, 0.0}) {
    WorldModelConfig c = TinyConfig();
    c.beta = beta;
    const WorldModel m(EnvId::kDigitJump, c, 1);
    const LossBreakdown l = ComputeLosses(m, f.batch);
    EXPECT_NEAR(l.total, 10.0 * l.forward + beta * l.inverse + l.margin, 1e-9);
    EXPECT_EQ(l.forward, LossForward(m, f.batch));
    EXPECT_EQ(l.inverse, LossInverse(m, f.batch));
    EXPECT_EQ(l.margin, LossMargin(m, f.batch));
    EXPECT_EQ(l.total, LossTotal(m, f.batch));
  }
}

TEST(TotalLoss, CollapsedEncoderZeroesForwardLoss) {
  BasicWorldModel<double> m(EnvId::kDigitJump, TinyConfig(), 2);
  auto& enc_out = m.encoder().layers.back();
  enc_out.weight.setZero();
  enc_out.bias.setConstant(0.5);
  auto& fw_out = m.forward().layers.back();
  fw_out.weight.setZero();
  fw_out.bias.setConstant(2.0);
  BatchFixture f(EnvId::kDigitJump, 3, 6, 5);
  const LossBreakdown l = ComputeLosses(m, f.batch);
  EXPECT_NEAR(l.forward, 0.0, 1e-24);
  EXPECT_DOUBLE_EQ(l.margin, 1.0);
  EXPECT_GE(l.inverse, 0.0);
}

TEST(Gradients, MatchFiniteDifferences) {
  WorldModelConfig c = TinyConfig();
  BasicWorldModel<double> m(EnvId::kDigitJump, c, 12);
  Rng rng(3);
  for (auto* params : {&m.encoder(), &m.forward(), &m.inverse()}) {
    for (auto& l : params->layers) {
      for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias.data()[i] = 0.2 * StandardNormal(rng);
    }
  }
  BatchFixture f(EnvId::kDigitJump, 2, 5, 11);
  const auto batch = FeaturizeTrainBatch<double>(m.layout(), f.batch);
  auto grads = m.ZeroGrads();
  LossAndGradients<double>(m, batch, &grads);
  std::vector<const MatD*> gblocks;
  for (auto* g : std::as_const(grads.encoder).Blocks()) gblocks.push_back(g);
  for (auto* g : std::as_const(grads.forward).Blocks()) gblocks.push_back(g);
  for (auto* g : std::as_const(grads.inverse).Blocks()) gblocks.push_back(g);
  auto blocks = m.ParameterBlocks();
  ASSERT_EQ(blocks.size(), gblocks.size());
  const double h = 1e-5;
  double worst = 0.0;
  int checked = 0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const Eigen::Index n = blocks[b]->size();
    const int samples = static_cast<int>(std::min<Eigen::Index>(n, 40));
    for (int s = 0; s < samples; ++s) {
      const Eigen::Index i = n <= 40 ? s : UniformInt(rng, 0, static_cast<int>(n) - 1);
      double& w = blocks[b]->data()[i];
      const double saved = w;
      w = saved + h;
      const double up = LossAndGradients<double>(m, batch, nullptr).total;
      w = saved - h;
      const double down = LossAndGradients<double>(m, batch, nullptr).total;
      w = saved;
      const double fd = (up - down) / (2 * h);
      const double g = gblocks[b]->data()[i];
      worst = std::max(worst, std::abs(g - fd) / std::max({std::abs(g), std::abs(fd), 1e-6}));
      ++checked;
    }
  }
  EXPECT_GT(checked, 200);
  EXPECT_LT(worst, 1e-4);
}

TEST(Training, ZeroEpochsKeepsInitialization) {
  const Dataset data = Collect(TrainingLevels(EnvId::kDigitJump, 3), 2, 5, 1);
  WorldModel m(EnvId::kDigitJump, TinyConfig(), 7);
  const WorldModel before = m;
  TrainConfig tc;
  tc.epochs = 0;
  EXPECT_TRUE(Train(m, data, tc).empty());
  EXPECT_EQ(EncodeWorldModel(m), EncodeWorldModel(before));
}

TEST(Training, SeedDeterministic) {
  const Dataset data = Collect(TrainingLevels(EnvId::kDigitJump, 4), 3, 6, 2);
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 16;
  tc.seed = 5;
  WorldModel a(EnvId::kDigitJump, TinyConfig(), 7), b(EnvId::kDigitJump, TinyConfig(), 7);
  Train(a, data, tc);
  Train(b, data, tc);
  EXPECT_EQ(EncodeWorldModel(a), EncodeWorldModel(b));
  tc.seed = 6;
  WorldModel c(EnvId::kDigitJump, TinyConfig(), 7);
  Train(c, data, tc);
  EXPECT_NE(EncodeWorldModel(a), EncodeWorldModel(c));
}

TEST(Training, UpdatesEveryNetworkAndReducesLoss) {
  const Dataset data = Collect(TrainingLevels(EnvId::kDigitJump, 10), 10, 10, 3);
  WorldModelConfig c;
  c.encoder_width = 64;
  c.forward_width = 64;
  WorldModel m(EnvId::kDigitJump, c, 1);
  const WorldModel before = m;
  TrainConfig tc;
  tc.epochs = 15;
  tc.seed = 1;
  const auto log = Train(m, data, tc);
  ASSERT_EQ(log.size(), 15u);
  EXPECT_EQ(log.front().epoch, 1);
  EXPECT_NE(m.encoder().layers[0].weight, before.encoder().layers[0].weight);
  EXPECT_NE(m.forward().layers[0].weight, before.forward().layers[0].weight);
  EXPECT_NE(m.inverse().layers[0].weight, before.inverse().layers[0].weight);
  EXPECT_LT(log.back().loss.total, log.front().loss.total);
  EXPECT_LT(log.back().loss.forward, 0.5 * log.front().loss.forward);
}

TEST(Training, EmptyDatasetThrows) {
  WorldModel m(EnvId::kDigitJump, TinyConfig(), 7);
  EXPECT_THROW(Train(m, Dataset{}, TrainConfig{}), std::invalid_argument);
}

TEST(Training, LossLogFormat) {
  std::vector<EpochLoss> log{{1, {0.5, 1.25, 0.75, 7.0}}};
  std::ostringstream os;
  WriteLossLog(os, log);
  EXPECT_EQ(os.str(), "epoch,L_FW,L_CE,L_margin,L_total\n1,0.500000,1.250000,0.750000,7.000000\n");
}

TEST(Checkpoint, RoundTrip) {
  WorldModelConfig c = TinyConfig();
  c.margin = 0.2;
  c.beta = 0.0;
  c.use_context = false;
  const WorldModel m(EnvId::kIceSlider, c, 4);
  std::stringstream ss;
  SaveWorldModel(m, ss);
  const WorldModel back = LoadWorldModel(ss);
  EXPECT_EQ(back.env(), EnvId::kIceSlider);
  EXPECT_EQ(back.dim(), 4);
  EXPECT_FLOAT_EQ(static_cast<float>(back.margin()), 0.2f);
  EXPECT_FALSE(back.config().use_context);
  EXPECT_EQ(EncodeWorldModel(back), EncodeWorldModel(m));
  const Observation obs = Observe(StartState(Generate(EnvId::kIceSlider, 2)));
  EXPECT_EQ(back.Encode(obs), m.Encode(obs));
}

TEST(Checkpoint, RejectsTruncatedFile) {
  const WorldModel m(EnvId::kDigitJump, TinyConfig(), 4);
  std::string bytes;
  {
    std::ostringstream os;
    SaveWorldModel(m, os);
    bytes = os.str();
  }
  std::istringstream is(bytes.substr(0, bytes.size() / 2));
  EXPECT_THROW(LoadWorldModel(is), numerics::ModelFormatError);
}

TEST(Precision, DoubleCastAgreesWithFloat) {
  const WorldModel m(EnvId::kDigitJump, WorldModelConfig{}, 8);
  const auto md = m.Cast<double>();
  const Observation obs = Observe(StartState(Generate(EnvId::kDigitJump, 3)));
  EXPECT_LT((m.Encode(obs) - md.Encode(obs)).norm(), 1e-5f);
}

}  // namespace
}  // namespace ppgs
