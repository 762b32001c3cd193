#pragma once

// Epoch driver: evaluation runs, exploration runs, training loops; metrics,
// checkpoints and run directories.

#include "csac/config.hpp"
#include "csac/csac.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace csac {

std::string codeVersion();

struct EpochStats {
  std::size_t epoch = 0;  // epochs completed, counting this one
  std::uint64_t envSteps = 0;  // cumulative, evaluation included
  std::size_t evalEpisodes = 0;  // completed in the evaluation budget
  std::size_t evalSuccesses = 0;
  double evalSuccessRate = 0.0;  // 0 when no episode completed
  std::vector<double> meanReturns;  // per subtask over completed eval episodes
  // Per subtask; single-agent runs fill entry 0 only. Empty before warm-up.
  std::vector<std::optional<double>> criticLoss;
  std::vector<std::optional<double>> policyLoss;
  std::vector<std::optional<double>> alpha;
  std::uint64_t bufferWrites = 0;  // exploration transitions stored this epoch
  double seconds = 0.0;
};

// successes / episodes, or 0 when nothing completed.
double successRate(std::size_t successes, std::size_t episodes);

// Fixed metrics layout: epoch, env_steps, eval_success_rate, return_sub1..N,
// q_loss_1..N, pi_loss_1..N, alpha_1..N, seconds.
std::string metricsHeader(std::size_t subtaskCount);
// `seconds` is written as 0 unless wallClock is set.
std::string metricsRow(const EpochStats& stats, bool wallClock);

struct EvalSummary {
  std::size_t episodes = 0;
  std::size_t successes = 0;
  double successRate = 0.0;
  std::vector<double> meanReturns;
};

// Runs `episodes` full deterministic episodes from start-area resets.
EvalSummary evaluateEpisodes(std::vector<AgentBundle>& bundles, Method method, MazeEnv& env,
                             std::size_t episodes, Rng& rng);

class Trainer {
 public:
  // Validates the config; throws ConfigError. A given maze replaces the one
  // the config names.
  explicit Trainer(TrainConfig config, std::optional<MazeSpec> maze = {});

  EpochStats runEpoch();

  const TrainConfig& config() const { return config_; }
  const CoopSettings& settings() const { return settings_; }
  MazeEnv& env() { return env_; }
  const MazeEnv& env() const { return env_; }
  std::vector<AgentBundle>& bundles() { return bundles_; }
  const std::vector<AgentBundle>& bundles() const { return bundles_; }
  const TrainAudit& audit() const { return audit_; }
  std::size_t epoch() const { return epoch_; }
  std::uint64_t envSteps() const { return envSteps_; }

  // Self-describing: the archive carries the config it was trained with.
  Archive checkpoint() const;
  static Trainer fromCheckpoint(const Archive& archive);
  static Trainer fromCheckpoint(const std::filesystem::path& path);
  // Overwrites networks, buffers, streams and counters; the archive must
  // come from a run with the same architecture.
  void restore(const Archive& archive);

 private:
  TrainConfig config_;
  MazeEnv env_;
  CoopSettings settings_;
  std::vector<AgentBundle> bundles_;
  Rng evalRng_;
  Rng exploreRng_;
  TrainAudit audit_;
  std::size_t epoch_ = 0;
  std::uint64_t envSteps_ = 0;
};

// Config and maze stored in a checkpoint.
TrainConfig checkpointConfig(const Archive& archive);
MazeSpec checkpointMaze(const Archive& archive);

// Run directory layout:
//   manifest.json    config, seeds, code version, fixed constants
//   metrics.csv      one row per epoch
//   timing.csv       epoch, seconds (wall clock, never reproducible)
//   checkpoints/epoch_NNNNNN.ckpt
struct RunOptions {
  bool resume = true;  // continue from the newest checkpoint in the directory
  std::function<void(const EpochStats&)> onEpoch;
};

struct RunResult {
  std::size_t startEpoch = 0;  // > 0 when resumed
  std::vector<EpochStats> epochs;  // those run by this call
  std::filesystem::path lastCheckpoint;
};

RunResult runTraining(const TrainConfig& config, const std::filesystem::path& outDir,
                      const RunOptions& options = {});

std::optional<std::filesystem::path> latestCheckpoint(const std::filesystem::path& outDir);

// eval_success_rate column of a metrics file, in epoch order.
std::vector<double> readSuccessRates(const std::filesystem::path& metricsCsv);

}  // namespace csac
