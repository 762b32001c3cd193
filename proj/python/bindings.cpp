// Python access to the maze, the loss arithmetic and the run driver.

#include "csac/config.hpp"
#include "csac/export.hpp"
#include "csac/normalize.hpp"
#include "csac/sweep.hpp"
#include "csac/trainer.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace csac;

namespace {

ResetMode parseMode(const std::string& mode) {
  if (mode == "evaluation") return ResetMode::evaluation;
  if (mode == "exploration") return ResetMode::exploration;
  throw std::invalid_argument("mode must be 'evaluation' or 'exploration'");
}

py::dict epochDict(const EpochStats& s) {
  py::dict d;
  d["epoch"] = s.epoch;
  d["env_steps"] = s.envSteps;
  d["eval_episodes"] = s.evalEpisodes;
  d["eval_successes"] = s.evalSuccesses;
  d["eval_success_rate"] = s.evalSuccessRate;
  d["mean_returns"] = s.meanReturns;
  d["critic_loss"] = s.criticLoss;
  d["policy_loss"] = s.policyLoss;
  d["alpha"] = s.alpha;
  d["buffer_writes"] = s.bufferWrites;
  d["seconds"] = s.seconds;
  return d;
}

py::dict reportDict(const MazeReport& r) {
  py::dict d;
  d["valid"] = r.valid;
  d["rooms"] = r.rooms;
  d["transitions"] = r.transitions;
  d["dead_end_pockets"] = r.deadEndPockets;
  d["problems"] = r.problems;
  d["warnings"] = r.warnings;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Cooperative soft actor critic: C++ core";
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("code_version", &codeVersion);

  py::class_<Rng>(m, "Rng")
      .def(py::init<std::uint64_t>(), py::arg("seed") = 0)
      .def("uniform", py::overload_cast<>(&Rng::uniform))
      .def("normal", &Rng::normal);

  m.def("maze_layout", [](int rooms, double scale) { return dumpMazeLayout(builtinMaze(rooms, MazeGeometry{}.scaled(scale))); },
        py::arg("rooms"), py::arg("scale") = 1.0, "Built-in layout as JSON text.");
  m.def("validate_maze", [](const std::string& layoutJson) { return reportDict(validateMaze(parseMazeLayout(layoutJson))); },
        py::arg("layout_json"));

  py::class_<MazeEnv>(m, "MazeEnv")
      .def(py::init([](const std::string& layoutJson, std::size_t maxEpisodeSteps) {
             EnvConfig cfg;
             cfg.maxEpisodeSteps = maxEpisodeSteps;
             return MazeEnv(parseMazeLayout(layoutJson), cfg);
           }),
           py::arg("layout_json"), py::arg("max_episode_steps") = 1000)
      .def("reset",
           [](MazeEnv& env, const std::string& mode, Rng& rng) { return env.features(env.reset(parseMode(mode), rng)); },
           py::arg("mode"), py::arg("rng"))
      .def("step",
           [](MazeEnv& env, double linear, double angular) {
             const StepResult r = env.step(scaleAction(linear, angular, env.config()));
             py::dict d;
             d["features"] = env.features(r.observation);
             d["rewards"] = r.rewards;
             d["subtask"] = r.nextSubtask;
             d["done"] = r.done;
             d["reached_goal"] = r.reachedGoal;
             return d;
           },
           py::arg("linear"), py::arg("angular"), "Squashed actions in (-1, 1).")
      .def("set_state",
           [](MazeEnv& env, double x, double y, double heading) { return env.features(env.setState({x, y}, heading)); })
      .def_property_readonly("position", [](const MazeEnv& env) { return std::make_pair(env.state().position.x, env.state().position.y); })
      .def_property_readonly("heading", [](const MazeEnv& env) { return env.state().heading; })
      .def_property_readonly("subtask", [](const MazeEnv& env) { return env.state().subtask; })
      .def_property_readonly("subtask_count", &MazeEnv::subtaskCount)
      .def_property_readonly("feature_dim", &MazeEnv::featureDim);

  m.def("normalize_over_batch", [](const Matrix& q) { return normalizeOverBatch(q); }, py::arg("q"));
  m.def("convex_combine",
        [](const Matrix& own, const Matrix& next, double eta) {
          return convexCombine(Tensor(own), Tensor(next), eta).value();
        },
        py::arg("own"), py::arg("next"), py::arg("eta"));
  m.def("bellman_targets",
        [](const Matrix& r, const Matrix& nextQ, const Matrix& logPi, const Matrix& dones, double gamma, double alpha,
           bool literal) {
          return bellmanTargets(r, nextQ, logPi, dones, gamma, alpha, literal ? TargetForm::literal : TargetForm::standard);
        },
        py::arg("rewards"), py::arg("next_q"), py::arg("next_log_probs"), py::arg("dones"), py::arg("gamma"),
        py::arg("alpha"), py::arg("literal") = false);

  m.def("preset_config", [](const std::string& scale) { return dumpConfig(presetConfig(parseScale(scale))); },
        py::arg("scale") = "desk", "Preset as JSON text.");
  m.def("parse_config",
        [](const std::string& text) {
          TrainConfig c = parseConfig(text);
          validateConfig(c);
          return dumpConfig(c);
        },
        py::arg("config_json"), "Fills in the preset and validates; returns the full config as JSON text.");

  m.def("train",
        [](const std::string& configJson, const std::filesystem::path& outDir, bool resume,
           std::function<void(py::dict)> onEpoch) {
          const TrainConfig config = parseConfig(configJson);
          RunOptions options;
          options.resume = resume;
          if (onEpoch) options.onEpoch = [&](const EpochStats& s) { onEpoch(epochDict(s)); };
          py::list epochs;
          const RunResult result = runTraining(config, outDir, options);
          for (const auto& s : result.epochs) epochs.append(epochDict(s));
          py::dict d;
          d["start_epoch"] = result.startEpoch;
          d["epochs"] = epochs;
          d["checkpoint"] = result.lastCheckpoint.string();
          return d;
        },
        py::arg("config_json"), py::arg("out_dir"), py::arg("resume") = true, py::arg("on_epoch") = nullptr);

  m.def("evaluate",
        [](const std::filesystem::path& checkpoint, std::size_t episodes, std::uint64_t seed) {
          Trainer trainer = Trainer::fromCheckpoint(checkpoint);
          Rng rng = Rng::derived(seed, 400);
          const EvalSummary s = evaluateEpisodes(trainer.bundles(), trainer.config().method, trainer.env(), episodes, rng);
          py::dict d;
          d["episodes"] = s.episodes;
          d["successes"] = s.successes;
          d["success_rate"] = s.successRate;
          d["mean_returns"] = s.meanReturns;
          return d;
        },
        py::arg("checkpoint"), py::arg("episodes") = 100, py::arg("seed") = 0);

  m.def("export_trajectories",
        [](const std::filesystem::path& checkpoint, std::size_t count, std::size_t critic, std::uint64_t seed) {
          Trainer trainer = Trainer::fromCheckpoint(checkpoint);
          TrajectoryRequest req;
          req.episodes = count;
          if (critic == 0) throw ConfigError("critic index is 1-based");
          req.criticIndex = critic - 1;
          req.seed = seed;
          return exportTrajectories(trainer, req);
        },
        py::arg("checkpoint"), py::arg("count") = 20, py::arg("critic") = 2, py::arg("seed") = 0,
        "CSV text; critic is the 1-based subtask index.");

  m.def("latest_checkpoint", [](const std::filesystem::path& outDir) { return latestCheckpoint(outDir); });
  m.def("trailing_mean", &trailingMean, py::arg("values"), py::arg("window"));
}
