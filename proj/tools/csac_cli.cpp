// csac: train, sweep, evaluate and inspect cooperative SAC runs.
//
// Exit status: 0 ok, 1 bad arguments or config, 2 failure while running.

#include "csac/config.hpp"
#include "csac/export.hpp"
#include "csac/sweep.hpp"
#include "csac/trainer.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace csac;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;

struct Common {
  std::string config;
  std::string scale;
  std::optional<std::uint64_t> seed;
  std::string outDir;
  std::vector<std::string> overrides;
};

void addCommon(CLI::App* cmd, Common& c, bool withConfig = true) {
  if (withConfig) {
    cmd->add_option("--config", c.config, "JSON config file (keys as in TrainConfig)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--set", c.overrides, "Override one config key, e.g. --set gamma=0.99");
  }
  cmd->add_option("--scale", c.scale, "Preset under the config: desk or paper")
      ->check(CLI::IsMember({"desk", "paper"}));
  cmd->add_option("--seed", c.seed, "Run seed (overrides the config)");
  cmd->add_option("--out-dir", c.outDir, "Run directory");
}

std::optional<Scale> forcedScale(const Common& c) {
  if (c.scale.empty()) return std::nullopt;
  return parseScale(c.scale);
}

TrainConfig baseConfig(const Common& c) {
  TrainConfig config = c.config.empty() ? presetConfig(forcedScale(c).value_or(Scale::desk))
                                        : loadConfig(c.config, forcedScale(c));
  for (const auto& o : c.overrides) applyOverride(config, o);
  if (c.seed) config.seed = *c.seed;
  return config;
}

// Checkpoint given directly, or the newest one in a run directory.
fs::path resolveCheckpoint(const std::string& checkpoint, const std::string& outDir) {
  if (!checkpoint.empty()) {
    if (!fs::exists(checkpoint)) throw ConfigError("no such checkpoint: " + checkpoint);
    return checkpoint;
  }
  if (outDir.empty()) throw ConfigError("give --checkpoint or --out-dir");
  auto latest = latestCheckpoint(outDir);
  if (!latest) throw ConfigError("no checkpoints under " + outDir);
  return *latest;
}

std::string fixed(double v, int digits = 3) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cooperative soft actor critic on multi-room mazes"};
  app.require_subcommand(1);

  // train
  Common trainArgs;
  std::string method, layout;
  std::optional<int> rooms;
  std::vector<double> coopRatios;
  std::optional<std::size_t> epochs;
  bool fresh = false, quiet = false;
  auto* train = app.add_subcommand("train", "Train one configuration");
  addCommon(train, trainArgs);
  train->add_option("--method", method, "csac, uncooperative or single")
      ->check(CLI::IsMember({"csac", "uncooperative", "single"}));
  train->add_option("--rooms", rooms, "Built-in maze with 2, 3 or 4 rooms");
  train->add_option("--layout", layout, "Maze layout JSON file")->check(CLI::ExistingFile);
  train->add_option("--coop-ratio", coopRatios, "One shared ratio or one per cooperative policy")
      ->delimiter(',');
  train->add_option("--epochs", epochs, "Number of epochs");
  train->add_flag("--fresh", fresh, "Ignore checkpoints already in --out-dir");
  train->add_flag("--quiet", quiet, "No per-epoch progress on stderr");

  // sweep
  Common sweepArgs;
  std::string sweepFile;
  std::optional<std::size_t> jobs, window;
  auto* sweep = app.add_subcommand("sweep", "Train a grid of cooperative ratios over seeds");
  addCommon(sweep, sweepArgs, false);
  sweep->add_option("--spec", sweepFile, "Sweep JSON file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--jobs", jobs, "Concurrent runs");
  sweep->add_option("--window", window, "Trailing epochs averaged per run");
  sweep->add_flag("--fresh", fresh, "Restart runs that already have checkpoints");

  // eval
  std::string checkpoint;
  std::size_t episodes = 100;
  std::uint64_t evalSeed = 0;
  std::string evalOutDir;
  auto* eval = app.add_subcommand("eval", "Success rate of a checkpoint");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file");
  eval->add_option("--out-dir", evalOutDir, "Run directory; uses its newest checkpoint");
  eval->add_option("--episodes", episodes, "Evaluation episodes")->check(CLI::PositiveNumber);
  eval->add_option("--seed", evalSeed, "Seed for the start poses");

  // export-traj
  std::size_t count = 20, criticIndex = 2;
  std::uint64_t trajSeed = 0;
  std::string trajOutDir, trajLayout, output;
  auto* exportCmd = app.add_subcommand("export-traj", "Roll out a checkpoint and write trajectories as CSV");
  exportCmd->add_option("--checkpoint", checkpoint, "Checkpoint file");
  exportCmd->add_option("--out-dir", trajOutDir, "Run directory; uses its newest checkpoint");
  exportCmd->add_option("--count", count, "Episodes")->check(CLI::PositiveNumber);
  exportCmd->add_option("--critic", criticIndex, "1-based subtask whose critic colours the rows")
      ->check(CLI::PositiveNumber);
  exportCmd->add_option("--seed", trajSeed, "Seed for the start poses");
  exportCmd->add_option("--layout", trajLayout, "Maze layout to roll out in")->check(CLI::ExistingFile);
  exportCmd->add_option("--output", output, "CSV path; default trajectories.csv next to the checkpoint's run, '-' for stdout");

  // validate-maze
  std::optional<int> checkRooms;
  std::string checkLayout;
  double mazeScale = 1.0;
  auto* validate = app.add_subcommand("validate-maze", "Check a layout's structural invariants");
  validate->add_option("--rooms", checkRooms, "Built-in maze with 2, 3 or 4 rooms");
  validate->add_option("--layout", checkLayout, "Maze layout JSON file")->check(CLI::ExistingFile);
  validate->add_option("--maze-scale", mazeScale, "Geometric factor for built-in layouts")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*train) {
      TrainConfig config = baseConfig(trainArgs);
      if (!method.empty()) applyOverride(config, "method=" + method);
      if (rooms) {
        config.rooms = *rooms;
        config.layout.clear();
      }
      if (!layout.empty()) config.layout = layout;
      if (!coopRatios.empty()) config.coopRatios = coopRatios;
      if (epochs) config.epochs = *epochs;
      validateConfig(config);
      const fs::path out = trainArgs.outDir.empty() ? fs::path("csac_run") : fs::path(trainArgs.outDir);
      RunOptions options;
      options.resume = !fresh;
      if (!quiet) {
        options.onEpoch = [&](const EpochStats& s) {
          std::cerr << "epoch " << s.epoch << "/" << config.epochs << "  steps " << s.envSteps
                    << "  success " << fixed(s.evalSuccessRate) << " (" << s.evalSuccesses << "/"
                    << s.evalEpisodes << ")  " << fixed(s.seconds, 1) << "s\n";
        };
      }
      const RunResult result = runTraining(config, out, options);
      if (result.startEpoch > 0) std::cerr << "resumed from epoch " << result.startEpoch << "\n";
      std::cout << "metrics: " << (out / "metrics.csv").string() << "\n"
                << "checkpoint: " << result.lastCheckpoint.string() << "\n";
      return kOk;
    }

    if (*sweep) {
      std::ifstream in(sweepFile);
      std::stringstream text;
      text << in.rdbuf();
      SweepSpec spec = parseSweepSpec(text.str(), fs::path(sweepFile).parent_path(), forcedScale(sweepArgs));
      if (sweepArgs.seed) spec.base.seed = *sweepArgs.seed;
      if (jobs) spec.jobs = *jobs;
      if (window) spec.window = *window;
      const fs::path out = sweepArgs.outDir.empty() ? fs::path("csac_sweep") : fs::path(sweepArgs.outDir);
      std::cerr << "sweep: " << spec.pointCount() << " points x " << spec.seeds.size() << " seeds\n";
      const auto rows = runSweep(spec, out, !fresh);
      std::cout << sweepTable(spec, rows);
      std::size_t failed = 0;
      for (const auto& r : rows) {
        failed += r.failed;
        for (const auto& e : r.errors) std::cerr << "failed: " << e << "\n";
      }
      if (failed > 0) std::cerr << failed << " run(s) failed; see error.txt in their directories\n";
      return kOk;
    }

    if (*eval) {
      const fs::path path = resolveCheckpoint(checkpoint, evalOutDir);
      Trainer trainer = Trainer::fromCheckpoint(path);
      Rng rng = Rng::derived(evalSeed, 400);
      const EvalSummary s = evaluateEpisodes(trainer.bundles(), trainer.config().method,
                                             trainer.env(), episodes, rng);
      std::cout << "checkpoint: " << path.string() << " (epoch " << trainer.epoch() << ")\n"
                << "episodes: " << s.episodes << "\n"
                << "successes: " << s.successes << "\n"
                << "success_rate: " << fixed(s.successRate, 4) << "\n";
      for (std::size_t j = 0; j < s.meanReturns.size(); ++j) {
        std::cout << "mean_return_sub" << j + 1 << ": " << fixed(s.meanReturns[j], 4) << "\n";
      }
      return kOk;
    }

    if (*exportCmd) {
      const fs::path path = resolveCheckpoint(checkpoint, trajOutDir);
      Trainer trainer = Trainer::fromCheckpoint(path);
      TrajectoryRequest request;
      request.episodes = count;
      request.criticIndex = criticIndex - 1;
      request.seed = trajSeed;
      if (!trajLayout.empty()) request.maze = loadMazeLayout(trajLayout);
      const std::string csv = exportTrajectories(trainer, request);
      if (output == "-") {
        std::cout << csv;
      } else {
        const fs::path target =
            output.empty() ? path.parent_path().parent_path() / "trajectories.csv" : fs::path(output);
        std::ofstream(target, std::ios::binary | std::ios::trunc) << csv;
        std::cout << "trajectories: " << target.string() << "\n";
      }
      return kOk;
    }

    if (*validate) {
      if (checkRooms.has_value() == !checkLayout.empty()) {
        throw ConfigError("give exactly one of --rooms or --layout");
      }
      MazeSpec spec;
      if (checkRooms) {
        try {
          spec = builtinMaze(*checkRooms, MazeGeometry{}.scaled(mazeScale));
        } catch (const std::invalid_argument& e) {
          throw ConfigError(e.what());
        }
      } else {
        try {
          spec = loadMazeLayout(checkLayout);
        } catch (const std::exception& e) {
          throw ConfigError(std::string("cannot parse layout: ") + e.what());
        }
      }
      const MazeReport report = validateMaze(spec);
      std::cout << (report.valid ? "valid" : "invalid") << "\n"
                << "rooms: " << report.rooms << "\n"
                << "transitions: " << report.transitions << "\n"
                << "dead_end_pockets: " << report.deadEndPockets << "\n";
      for (const auto& w : report.warnings) std::cout << "warning: " << w << "\n";
      for (const auto& p : report.problems) std::cout << "problem: " << p << "\n";
      return report.valid ? kOk : kConfigError;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kOk;
}
