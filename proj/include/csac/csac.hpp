#pragma once

// Cooperative training across sequential sub-agents, plus the uncooperative
// and single-agent baselines that share the same plumbing.

#include "csac/maze_env.hpp"
#include "csac/normalize.hpp"
#include "csac/replay.hpp"
#include "csac/sac.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace csac {

enum class Method { csac, uncooperative, single };

std::string methodName(Method m);
// Throws std::invalid_argument for unknown names.
Method parseMethod(const std::string& name);

struct AgentBundle {
  std::size_t index = 0;  // zero-based subtask served by this bundle
  SacAgent agent;
  ReplayBuffer buffer;
  Rng rng;  // minibatch draws and update noise for this bundle
};

struct CoopSettings {
  Method method = Method::csac;
  // One ratio per cooperative policy (N - 1 of them); csac only.
  std::vector<double> coopRatios;
  std::size_t batchSize = 256;
  std::size_t warmup = 1000;
};

// Throws std::invalid_argument on a malformed ratio vector.
void validateSettings(const CoopSettings& settings, std::size_t subtaskCount);

// One bundle per subtask, or a single bundle for Method::single. Buffers
// always keep the full reward vector.
std::vector<AgentBundle> makeBundles(Method method, std::size_t subtaskCount,
                                     std::size_t stateDim, std::size_t actionDim,
                                     const SacConfig& config, std::size_t bufferCapacity,
                                     std::uint64_t seed);

// Bundle that acts (and stores) while `subtask` is active.
std::size_t actingBundle(Method method, std::size_t subtask);

// Reward channel seen by critic j: r_j, or the sum of all channels for the
// single agent.
Matrix rewardFor(Method method, const Minibatch& batch, std::size_t j);

// Terminal mask for critic j: the goal was reached, or (per-subtask
// methods) the step left subtask j forward, which completes it.
Matrix terminalMaskFor(Method method, const Minibatch& batch, std::size_t j);

// Policy objective of bundle `self`. Non-final bundles must pass their
// successor and combine the two batch-normalized twin-min critics with
// ratio eta; the final bundle (next == null) uses its own critic scaled per
// SacConfig::policyCritic. Throws std::invalid_argument if a non-final bundle has no
// successor or eta lies outside [0, 1].
PolicyObjective cooperativePolicyLoss(const AgentBundle& self, const AgentBundle* next,
                                      std::size_t subtaskCount, const Matrix& states,
                                      const Matrix& noise, double eta);

// Instrumentation over a run.
struct TrainAudit {
  // criticUpdates[j][n]: gradient steps of critic j on minibatches from B_n.
  std::vector<std::vector<std::uint64_t>> criticUpdates;
  // policyCriticReads[n][j]: policy updates of bundle n that evaluated critic j.
  std::vector<std::vector<std::uint64_t>> policyCriticReads;
  std::vector<std::uint64_t> skippedUpdates;  // per bundle, buffer under warm-up
  std::uint64_t loops = 0;

  explicit TrainAudit(std::size_t bundles = 0);
};

// Running sums for the metrics row; entries stay at zero count until the
// bundle trains.
struct LossTotals {
  std::vector<double> criticLoss, policyLoss;
  std::vector<std::uint64_t> criticCount, policyCount;

  explicit LossTotals(std::size_t bundles = 0);
  std::optional<double> meanCritic(std::size_t j) const;
  std::optional<double> meanPolicy(std::size_t n) const;
};

// Next-state actions a' ~ pi_n(s') drawn once per minibatch and shared by
// every critic trained on it.
struct CriticBatch {
  Minibatch batch;
  ActionSample next;
};

// Critic steps for critics j in {n, n + 1} (n + 1 only for csac and when it
// exists), each on reward channel j with targets bootstrapped through
// pi_n's next actions. Returns the critics it trained.
std::vector<std::size_t> trainCriticsFromBuffer(std::vector<AgentBundle>& bundles,
                                                const CoopSettings& settings, std::size_t n,
                                                const CriticBatch& data, TrainAudit* audit,
                                                LossTotals* totals);

// One training loop: for each bundle in order, sample from its buffer, train
// critics, take one policy and one alpha step, then soft-update the targets
// of the critics just trained. Under-filled buffers are skipped.
void trainLoop(std::vector<AgentBundle>& bundles, const CoopSettings& settings,
               TrainAudit* audit = nullptr, LossTotals* totals = nullptr);

struct EpisodeLog {
  std::vector<TransitionRecord> records;  // every step, stored or not
  std::vector<double> returns;            // undiscounted, per subtask
  std::size_t steps = 0;
  bool success = false;   // the goal area was entered
  bool finished = false;  // ended by goal or step limit, not by the budget
};

// Rolls one episode from a fresh reset. Exploration samples actions from the
// acting bundle's policy and stores each transition in that bundle's buffer;
// evaluation acts with tanh(mean) and stores nothing. At most `stepBudget`
// steps are taken.
EpisodeLog gatherEpisode(std::vector<AgentBundle>& bundles, Method method, MazeEnv& env,
                         ResetMode mode, Rng& rng, std::size_t stepBudget);

// Checkpoint helpers.
void saveBundles(Archive& archive, const std::vector<AgentBundle>& bundles);
void loadBundles(const Archive& archive, std::vector<AgentBundle>& bundles);

}  // namespace csac
