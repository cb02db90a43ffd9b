// Command-line front end: level generation, data collection, training,
// planning, evaluation and the experiment runners.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ppgs/baseline.hpp"
#include "ppgs/env.hpp"
#include "ppgs/harness/dataset.hpp"
#include "ppgs/harness/evaluate.hpp"
#include "ppgs/harness/experiments.hpp"
#include "ppgs/harness/io.hpp"
#include "ppgs/harness/metrics.hpp"
#include "ppgs/harness/oracle_model.hpp"
#include "ppgs/planner.hpp"
#include "ppgs/training.hpp"
#include "ppgs/worldmodel.hpp"

namespace {

using namespace ppgs;

struct SeedRange {
  std::uint64_t begin = 0;
  std::uint64_t end = 0;  // exclusive
};

SeedRange ParseSeedRange(const std::string& text) {
  const auto dots = text.find("..");
  SeedRange r;
  if (dots == std::string::npos) {
    r.begin = std::stoull(text);
    r.end = r.begin + 1;
  } else {
    r.begin = std::stoull(text.substr(0, dots));
    r.end = std::stoull(text.substr(dots + 2));
  }
  if (r.end <= r.begin) throw std::invalid_argument("empty seed range: " + text);
  return r;
}

std::ofstream OpenOut(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  return os;
}

std::ifstream OpenIn(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return is;
}

// Writes to `path`, or stdout when it is empty or "-".
template <typename F>
void Emit(const std::string& path, F&& write) {
  if (path.empty() || path == "-") {
    write(std::cout);
  } else {
    auto os = OpenOut(path);
    write(os);
  }
}

std::vector<int> ParseIntList(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  if (out.empty()) throw std::invalid_argument("empty list: " + text);
  return out;
}

// "test" or "train" select generated seed ranges; anything else is a level file.
std::vector<LevelSpec> LoadLevelSet(const std::string& which, EnvId env, int count) {
  if (which == "test") return TestLevels(env, count);
  if (which == "train") return TrainingLevels(env, count);
  auto is = OpenIn(which);
  return ReadLevels(is);
}

std::string config_path;

CLI::App* Subcommand(CLI::App& app, const char* name, const char* help) {
  CLI::App* sub = app.add_subcommand(name, help);
  sub->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  sub->add_option("--config", config_path, "Flat key=value file mirroring the flags; flags override it");
  return sub;
}

// CLI11 only reads config files on the top-level app, so a subcommand's
// --config file is expanded into flags placed ahead of the command line.
// Keys the subcommand does not know are ignored.
std::vector<std::string> ExpandConfig(const CLI::App& app, int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  if (args.empty()) return args;
  const CLI::App* sub = nullptr;
  try {
    sub = app.get_subcommand(args[0]);
  } catch (const CLI::OptionNotFound&) {
    return args;
  }
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config " + path);
  std::vector<std::string> injected;
  for (const CLI::ConfigItem& item : CLI::ConfigTOML().from_config(is)) {
    const CLI::Option* opt = sub->get_option_no_throw("--" + item.name);
    if (opt == nullptr || item.name == "config" || item.inputs.empty()) continue;
    if (opt->get_expected_min() == 0) {
      if (CLI::detail::to_flag_value(item.inputs.front()) > 0) injected.push_back("--" + item.name);
      continue;
    }
    injected.push_back("--" + item.name);
    injected.push_back(item.inputs.front());
  }
  args.insert(args.begin() + 1, injected.begin(), injected.end());
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent-graph planning toolkit"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  std::string env_name = "gridmaze";
  std::string out_path;

  // gen
  std::string seeds_text = "0..100";
  CLI::App* gen = Subcommand(app, "gen", "Generate levels as JSON lines");
  gen->add_option("--env", env_name, "gridmaze | digitjump | iceslider")->required();
  gen->add_option("--seeds", seeds_text, "Half-open seed range A..B or a single seed");
  gen->add_option("--out", out_path, "Output file (stdout if omitted)");

  // collect
  std::string levels_path;
  int traj = 20;
  int len = 20;
  CLI::App* collect = Subcommand(app, "collect", "Collect uniform-random trajectories");
  collect->add_option("--levels", levels_path, "Level file")->required();
  collect->add_option("--traj", traj, "Trajectories per level");
  collect->add_option("--len", len, "Steps per trajectory");
  collect->add_option("--seed", seed);
  collect->add_option("--out", out_path)->required();

  // train
  std::string data_path;
  std::string loss_log;
  WorldModelConfig model_config;
  TrainConfig train_config;
  bool no_context = false;
  OnPolicyConfig onpolicy;
  CLI::App* train = Subcommand(app, "train", "Train a world model");
  train->add_option("--data", data_path, "Dataset file")->required();
  train->add_option("--epochs", train_config.epochs);
  train->add_option("--batch", train_config.batch_size);
  train->add_option("--lr", train_config.adam.learning_rate);
  train->add_option("--alpha", model_config.alpha);
  train->add_option("--beta", model_config.beta);
  train->add_option("--eps", model_config.margin);
  train->add_option("--dim", model_config.dim);
  train->add_flag("--no-context", no_context, "Forward model without the context observation");
  train->add_option("--onpolicy-rounds", onpolicy.rounds, "On-policy collection rounds");
  train->add_option("--round-interval", onpolicy.round_interval, "Epochs between rounds");
  train->add_option("--onpolicy-traj", onpolicy.trajectories_per_level, "Trajectories per level per round");
  train->add_option("--onpolicy-len", onpolicy.horizon, "Steps per on-policy trajectory");
  train->add_option("--seed", seed);
  train->add_option("--loss-log", loss_log, "Per-epoch loss CSV");
  train->add_option("--out", out_path)->required();

  // plan
  std::string model_path;
  std::string mode_name = "full";
  std::uint64_t level_seed = 0;
  EvalConfig eval_config;
  CLI::App* plan = Subcommand(app, "plan", "Plan on one level and print the result as JSON");
  plan->add_option("--model", model_path, "Model file (not needed for oracle-* and gs-images)");
  plan->add_option("--env", env_name);
  plan->add_option("--level-seed", level_seed);
  plan->add_option("--mode", mode_name,
                   "oneshot | oneshot-noreid | full | full-nolookup | gs-images, "
                   "optionally prefixed with oracle-");
  plan->add_option("--tmax", eval_config.horizon);
  plan->add_option("--budget", eval_config.step_budget);
  plan->add_option("--fault", eval_config.fault_probability, "Oracle prediction corruption rate");
  plan->add_option("--seed", seed);
  plan->add_option("--out", out_path);

  // eval
  std::string level_set = "test";
  int level_count = 100;
  CLI::App* eval = Subcommand(app, "eval", "Evaluate a planner on a level set");
  eval->add_option("--model", model_path);
  eval->add_option("--env", env_name, "Environment for oracle modes");
  eval->add_option("--levels", level_set, "test | train | level file");
  eval->add_option("--count", level_count, "Number of generated levels");
  eval->add_option("--mode", mode_name);
  eval->add_option("--tmax", eval_config.horizon);
  eval->add_option("--budget", eval_config.step_budget);
  eval->add_option("--fault", eval_config.fault_probability);
  eval->add_option("--seed", seed);
  eval->add_option("--out", out_path);

  // metrics
  std::string horizons_text = "1,10";
  int per_level = 5;
  CLI::App* metrics = Subcommand(app, "metrics", "H@K and MMR@K on fresh trajectories");
  metrics->add_option("--model", model_path)->required();
  metrics->add_option("--horizons", horizons_text);
  std::string metrics_levels = "train";
  metrics->add_option("--levels", metrics_levels, "test | train | level file");
  metrics->add_option("--count", level_count);
  metrics->add_option("--per-level", per_level, "Trajectories per level");
  metrics->add_option("--seed", seed);
  metrics->add_option("--out", out_path);

  // ablate
  std::string which_name;
  PipelineConfig pipeline;
  std::string metrics_out;
  CLI::App* ablate = Subcommand(app, "ablate", "Run one ablation end to end");
  ablate->add_option("--which", which_name,
                     "no-inverse | latent-forward | no-lookup | oneshot-reid | oneshot-noreid")
      ->required();
  ablate->add_option("--env", env_name);
  ablate->add_option("--model", model_path, "Reuse a trained model for planner-only variants");
  ablate->add_option("--train-levels", pipeline.train_levels);
  ablate->add_option("--traj", pipeline.trajectories_per_level);
  ablate->add_option("--len", pipeline.trajectory_length);
  ablate->add_option("--test-levels", pipeline.test_levels);
  ablate->add_option("--epochs", pipeline.train.epochs);
  ablate->add_option("--tmax", pipeline.eval.horizon);
  ablate->add_option("--budget", pipeline.eval.step_budget);
  ablate->add_option("--seed", seed);
  ablate->add_option("--out", out_path, "Per-level evaluation CSV");
  ablate->add_option("--metrics-out", metrics_out, "Latent metrics CSV");

  // fringe
  bool use_oracle = false;
  CLI::App* fringe = Subcommand(app, "fringe", "Per-depth fringe sizes with and without reidentification");
  fringe->add_option("--model", model_path);
  fringe->add_flag("--oracle", use_oracle, "Use the oracle model of each level");
  fringe->add_option("--env", env_name);
  fringe->add_option("--levels", level_set);
  fringe->add_option("--count", level_count);
  fringe->add_option("--tmax", eval_config.horizon);
  fringe->add_option("--seed", seed);
  fringe->add_option("--out", out_path);

  try {
    std::vector<std::string> args = ExpandConfig(app, argc, argv);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }

  try {
    if (gen->parsed()) {
      const EnvId env = EnvFromName(env_name);
      const SeedRange r = ParseSeedRange(seeds_text);
      const auto levels = GenerateLevels(env, r.begin, r.end - r.begin);
      Emit(out_path, [&](std::ostream& os) { WriteLevels(os, levels); });
    } else if (collect->parsed()) {
      auto is = OpenIn(levels_path);
      const auto levels = ReadLevels(is);
      const Dataset data = Collect(levels, traj, len, seed);
      Emit(out_path, [&](std::ostream& os) { WriteDataset(os, data); });
      std::fprintf(stderr, "collected %zu transitions on %zu levels\n", data.transition_count(),
                  data.levels.size());
    } else if (train->parsed()) {
      std::vector<LevelSpec> levels;
      {
        auto is = OpenIn(data_path);
        levels = LevelsForDataset(is);
      }
      auto is = OpenIn(data_path);
      Dataset data = ReadDataset(is, levels);
      model_config.use_context = !no_context;
      train_config.seed = seed;
      WorldModel model(data.env, model_config, seed);
      const auto log = TrainWithOnPolicy(model, data, train_config, onpolicy);
      SaveWorldModel(model, out_path);
      if (!loss_log.empty()) Emit(loss_log, [&](std::ostream& os) { WriteLossLog(os, log); });
      if (!log.empty()) {
        std::fprintf(stderr, "epoch %d: L_FW %.6f L_CE %.6f L_margin %.6f L_total %.6f\n", log.back().epoch,
                    log.back().loss.forward, log.back().loss.inverse, log.back().loss.margin,
                    log.back().loss.total);
      }
    } else if (plan->parsed()) {
      const bool oracle = mode_name.rfind("oracle-", 0) == 0;
      const PlannerMode mode = PlannerModeFromName(oracle ? mode_name.substr(7) : mode_name);
      eval_config.seed = seed;
      std::optional<WorldModel> model;
      EnvId env = EnvFromName(env_name);
      if (!oracle && mode != PlannerMode::kGsImages) {
        if (model_path.empty()) throw std::invalid_argument("--model is required for this mode");
        model = LoadWorldModel(model_path);
        env = model->env();
      }
      const LevelSpec level = Generate(env, level_seed);
      const std::vector<LevelSpec> one{level};
      PlanResult result;
      const auto run = [&](const LevelSpec& l, Rng& rng) {
        if (oracle) {
          OracleModel om(l, 0.1, 16, LevelSeed(seed, l));
          if (eval_config.fault_probability > 0.0) {
            FaultInjector<OracleModel> faulty(om, eval_config.fault_probability, LevelSeed(seed, l));
            return result = RunPlanner(faulty, mode, l, eval_config, rng);
          }
          return result = RunPlanner(om, mode, l, eval_config, rng);
        }
        if (mode == PlannerMode::kGsImages) {
          return result = GsOnImages(l, eval_config.step_budget, rng());
        }
        LearnedModel learned(*model);
        return result = RunPlanner(learned, mode, l, eval_config, rng);
      };
      EvaluateLevels(one, eval_config, run);
      Emit(out_path, [&](std::ostream& os) {
        os << PlanResultToJson(result, level_seed, mode_name).dump() << '\n';
      });
    } else if (eval->parsed()) {
      const bool oracle = mode_name.rfind("oracle-", 0) == 0;
      const PlannerMode mode = PlannerModeFromName(oracle ? mode_name.substr(7) : mode_name);
      eval_config.seed = seed;
      EvalReport report;
      if (oracle || mode == PlannerMode::kGsImages) {
        const auto levels = LoadLevelSet(level_set, EnvFromName(env_name), level_count);
        report = EvaluateOracle(mode, levels, eval_config);
      } else {
        if (model_path.empty()) throw std::invalid_argument("--model is required for this mode");
        const WorldModel model = LoadWorldModel(model_path);
        const auto levels = LoadLevelSet(level_set, model.env(), level_count);
        report = Evaluate(model, mode, levels, eval_config);
      }
      Emit(out_path, [&](std::ostream& os) { WriteEvalCsv(os, report); });
      std::fprintf(stderr, "success rate %.4f (%zu/%zu)\n", report.success_rate(), report.solved_count(),
                  report.levels.size());
    } else if (metrics->parsed()) {
      const WorldModel model = LoadWorldModel(model_path);
      const auto levels = LoadLevelSet(metrics_levels, model.env(), level_count);
      const auto trajs = HeldOutTrajectories(levels, per_level, seed);
      const auto horizons = ParseIntList(horizons_text);
      const auto result = ComputeLatentMetrics(model, trajs, horizons);
      Emit(out_path, [&](std::ostream& os) { WriteMetricsCsv(os, result); });
    } else if (ablate->parsed()) {
      const Ablation which = AblationFromName(which_name);
      pipeline.env = EnvFromName(env_name);
      pipeline.seed = seed;
      pipeline.eval.seed = seed;
      std::optional<WorldModel> model;
      if (!model_path.empty()) {
        model = LoadWorldModel(model_path);
        pipeline.env = model->env();
      }
      const AblationResult result = RunAblation(which, pipeline, model ? &*model : nullptr);
      Emit(out_path, [&](std::ostream& os) { WriteEvalCsv(os, result.report); });
      if (!metrics_out.empty()) {
        Emit(metrics_out, [&](std::ostream& os) { WriteMetricsCsv(os, result.report.metrics); });
      }
      std::fprintf(stderr, "%s: success rate %.4f\n", which_name.c_str(), result.report.success_rate());
      for (const LatentMetrics& m : result.report.metrics) {
        std::fprintf(stderr, "  H@%d %.4f  MMR@%d %.4f\n", m.horizon, m.hits, m.horizon, m.mmr);
      }
    } else if (fringe->parsed()) {
      FringeTable table;
      if (use_oracle) {
        const auto levels = LoadLevelSet(level_set, EnvFromName(env_name), level_count);
        table = FringeExperiment(levels, eval_config.horizon, seed,
                                 [](const LevelSpec& l) { return OracleModel(l); });
      } else {
        if (model_path.empty()) throw std::invalid_argument("--model or --oracle is required");
        const WorldModel model = LoadWorldModel(model_path);
        const auto levels = LoadLevelSet(level_set, model.env(), level_count);
        table = FringeExperiment(levels, eval_config.horizon, seed,
                                 [&](const LevelSpec&) { return LearnedModel(model); });
      }
      Emit(out_path, [&](std::ostream& os) { WriteFringeCsv(os, table); });
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
