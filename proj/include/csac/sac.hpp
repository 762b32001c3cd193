#pragma once

// Soft actor critic with twin critics, target networks and a learned
// entropy temperature.

#include "csac/adam.hpp"
#include "csac/archive.hpp"
#include "csac/gaussian_policy.hpp"
#include "csac/mlp.hpp"
#include "csac/replay.hpp"
#include "csac/rng.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace csac {

// standard: y = r + gamma * (1 - d) * (minQ' - alpha * logpi)
// literal:  y = r + (1 - gamma) * (minQ' - alpha * logpi), no done mask
enum class TargetForm { standard, literal };

// How the policy objective sees its critic: raw values, or rescaled to
// [0, 1] over the batch.
enum class CriticScaling { raw, batchNormalized };

struct SacConfig {
  std::vector<std::size_t> hidden{256, 256};
  double gamma = 0.95;
  double tau = 0.005;
  double learningRate = 3e-4;
  bool autoAlpha = true;
  double initialAlpha = 1.0;
  // Defaults to -actionDim when unset.
  std::optional<double> targetEntropy;
  TargetForm targetForm = TargetForm::standard;
  CriticScaling policyCritic = CriticScaling::raw;
  LogStdBounds logStdBounds{};
};

struct TwinCritic {
  std::array<Mlp, 2> online;
  std::array<Mlp, 2> target;
  std::array<AdamState, 2> optimizer;
};

class SacAgent {
 public:
  SacAgent(std::size_t stateDim, std::size_t actionDim, SacConfig config, Rng& initRng);

  // Deep copies: the copy owns fresh parameter nodes, log(alpha) included.
  SacAgent(const SacAgent& other);
  SacAgent& operator=(const SacAgent& other);
  SacAgent(SacAgent&&) noexcept = default;
  SacAgent& operator=(SacAgent&&) noexcept = default;

  std::size_t stateDim() const { return stateDim_; }
  std::size_t actionDim() const { return actionDim_; }
  const SacConfig& config() const { return config_; }
  double targetEntropy() const;

  double alpha() const;
  double logAlpha() const { return logAlpha_.value()(0, 0); }
  Tensor& logAlphaTensor() { return logAlpha_; }

  GaussianPolicyHead head(const Tensor& states) const;
  // tanh(mean) for each row; no sampling.
  Matrix act(const Matrix& states) const;

  Mlp policy;
  TwinCritic critic;
  AdamState policyOptimizer;
  AdamState alphaOptimizer;

 private:
  std::size_t stateDim_;
  std::size_t actionDim_;
  SacConfig config_;
  Tensor logAlpha_;
};

// Fresh a ~ pi(.|s) draws with their log densities, values only.
struct ActionSample {
  Matrix actions;   // M x actDim
  Matrix logProbs;  // M x 1
};
ActionSample sampleActions(const SacAgent& agent, const Matrix& states, Rng& rng);

// min(Q1, Q2)(s, a) per row. With frozen critics gradients still reach
// `actions`, never the critic parameters.
Tensor twinMin(const std::array<Mlp, 2>& critics, const Tensor& states, const Tensor& actions,
               bool frozen);

// Elementwise target arithmetic; all arguments are M x 1. Throws
// std::domain_error naming the first non-finite entry.
Matrix bellmanTargets(const Matrix& rewards, const Matrix& nextQ, const Matrix& nextLogProbs,
                      const Matrix& dones, double gamma, double alpha, TargetForm form);

// Targets from the target critics at (s', a'), where a' came from the
// acting policy. Values only: nothing here joins a graph.
Matrix computeTargets(const TwinCritic& critic, const Matrix& rewards, const Matrix& nextStates,
                      const ActionSample& next, const Matrix& dones, double gamma, double alpha,
                      TargetForm form);

// Mean squared Bellman error for each online critic.
std::array<Tensor, 2> criticLosses(const TwinCritic& critic, const Matrix& states,
                                   const Matrix& actions, const Matrix& targets);

// One Adam step on both online critics. Returns the mean of the two losses.
double criticStep(TwinCritic& critic, const Matrix& states, const Matrix& actions,
                  const Matrix& targets);

struct PolicyObjective {
  Tensor loss;
  Matrix logProbs;  // of the reparameterized draws, M x 1
};

// (1/M) sum(alpha * logpi(a|s) - Q(s, a)), a ~ pi(s) from `noise`, with Q
// the min over the agent's own twin critics (frozen).
PolicyObjective sacPolicyLoss(const SacAgent& agent, const Matrix& states, const Matrix& noise,
                              CriticScaling scaling);

// Steps the policy on a precomputed objective; returns the loss value.
double policyStep(SacAgent& agent, const PolicyObjective& objective);

// -(1/M) sum(alpha * (logpi + targetEntropy)) with logpi held fixed.
Tensor alphaLoss(const Tensor& logAlpha, const Matrix& logProbs, double targetEntropy);

// One Adam step on log(alpha) when auto-tuning is on; returns the new alpha.
double tuneAlpha(SacAgent& agent, const Matrix& logProbs);

void softTargetUpdate(TwinCritic& critic, double tau);

struct SacStepStats {
  double criticLoss = 0.0;
  double policyLoss = 0.0;
  double alpha = 0.0;
};

// One full update on a minibatch: critics, policy, alpha, targets.
// `dones` is the terminal mask used in the targets.
SacStepStats sacUpdate(SacAgent& agent, const Matrix& states, const Matrix& actions,
                       const Matrix& rewards, const Matrix& nextStates, const Matrix& dones,
                       Rng& rng);

// Checkpoint helpers; every key lives under `prefix`.
void saveNetwork(Archive& archive, const std::string& prefix, const Mlp& net);
void loadNetwork(const Archive& archive, const std::string& prefix, Mlp& net);
void saveAdam(Archive& archive, const std::string& prefix, const AdamState& state);
void loadAdam(const Archive& archive, const std::string& prefix, AdamState& state);
void saveAgent(Archive& archive, const std::string& prefix, const SacAgent& agent);
// The agent must already have the saved architecture.
void loadAgent(const Archive& archive, const std::string& prefix, SacAgent& agent);

// FNV-1a over the raw bytes of every parameter; for change detection.
std::uint64_t parameterHash(const Mlp& net);

}  // namespace csac
