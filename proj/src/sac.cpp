#include "csac/sac.hpp"

#include "csac/normalize.hpp"

#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>

namespace csac {

namespace {

std::vector<std::size_t> withEnds(std::size_t in, const std::vector<std::size_t>& hidden,
                                  std::size_t out) {
  std::vector<std::size_t> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

void requireColumn(const Matrix& m, Index rows, const char* what) {
  if (m.cols() != 1 || m.rows() != rows) {
    throw ShapeError(std::string("bellmanTargets: ") + what + " is [" + std::to_string(m.rows()) +
                     " x " + std::to_string(m.cols()) + "], expected [" + std::to_string(rows) +
                     " x 1]");
  }
}

void requireFinite(const Matrix& m, const char* what) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (!std::isfinite(m(i, j))) {
        std::ostringstream os;
        os << "bellmanTargets: non-finite " << what << " at row " << i << " (" << m(i, j) << ")";
        throw std::domain_error(os.str());
      }
    }
  }
}

}  // namespace

SacAgent::SacAgent(std::size_t stateDim, std::size_t actionDim, SacConfig config, Rng& initRng)
    : stateDim_(stateDim), actionDim_(actionDim), config_(std::move(config)) {
  if (stateDim == 0 || actionDim == 0) throw std::invalid_argument("SacAgent: zero dimension");
  if (!(config_.gamma > 0.0 && config_.gamma < 1.0)) {
    throw std::invalid_argument("SacAgent: gamma must lie in (0, 1)");
  }
  if (!(config_.tau > 0.0 && config_.tau < 1.0)) {
    throw std::invalid_argument("SacAgent: tau must lie in (0, 1)");
  }
  if (config_.autoAlpha && !(config_.initialAlpha > 0.0)) {
    throw std::invalid_argument("SacAgent: a learned alpha needs a positive initial value");
  }
  if (!config_.autoAlpha && config_.initialAlpha < 0.0) {
    throw std::invalid_argument("SacAgent: alpha must be non-negative");
  }

  policy = Mlp(withEnds(stateDim, config_.hidden, 2 * actionDim), initRng);
  for (std::size_t k = 0; k < 2; ++k) {
    critic.online[k] = Mlp(withEnds(stateDim + actionDim, config_.hidden, 1), initRng);
    critic.target[k] = critic.online[k];
  }
  const AdamConfig adam{config_.learningRate};
  for (std::size_t k = 0; k < 2; ++k) {
    critic.optimizer[k] = makeAdamState(critic.online[k].parameters(), adam);
  }
  policyOptimizer = makeAdamState(policy.parameters(), adam);
  logAlpha_ = Tensor::scalar(std::log(config_.initialAlpha), true);
  alphaOptimizer = makeAdamState(std::vector<Tensor>{logAlpha_}, adam);
}

SacAgent::SacAgent(const SacAgent& other)
    : policy(other.policy),
      critic(other.critic),
      policyOptimizer(other.policyOptimizer),
      alphaOptimizer(other.alphaOptimizer),
      stateDim_(other.stateDim_),
      actionDim_(other.actionDim_),
      config_(other.config_),
      logAlpha_(Tensor::scalar(other.logAlpha(), true)) {}

SacAgent& SacAgent::operator=(const SacAgent& other) {
  if (this != &other) {
    SacAgent copy(other);
    *this = std::move(copy);
  }
  return *this;
}

double SacAgent::targetEntropy() const {
  return config_.targetEntropy.value_or(-static_cast<double>(actionDim_));
}

double SacAgent::alpha() const { return std::exp(logAlpha()); }

GaussianPolicyHead SacAgent::head(const Tensor& states) const {
  const Tensor out = policy.forward(states);
  const auto a = static_cast<Index>(actionDim_);
  return {sliceCols(out, 0, a), sliceCols(out, a, a), config_.logStdBounds};
}

Matrix SacAgent::act(const Matrix& states) const {
  const Matrix out = policy.evaluate(states);
  const auto a = static_cast<Index>(actionDim_);
  return deterministicAction({Tensor(out.leftCols(a)), Tensor(out.rightCols(a)), config_.logStdBounds});
}

ActionSample sampleActions(const SacAgent& agent, const Matrix& states, Rng& rng) {
  const Matrix out = agent.policy.evaluate(states);
  const auto a = static_cast<Index>(agent.actionDim());
  const GaussianPolicyHead head{Tensor(out.leftCols(a)), Tensor(out.rightCols(a)),
                                agent.config().logStdBounds};
  const auto sample = sampleSquashedGaussian(head, rng.normalMatrix(states.rows(), a));
  return {sample.action.value(), sample.logProb.value()};
}

Tensor twinMin(const std::array<Mlp, 2>& critics, const Tensor& states, const Tensor& actions,
               bool frozen) {
  const Tensor input = concatCols(states, actions);
  if (frozen) return minimum(critics[0].forwardFrozen(input), critics[1].forwardFrozen(input));
  return minimum(critics[0].forward(input), critics[1].forward(input));
}

Matrix bellmanTargets(const Matrix& rewards, const Matrix& nextQ, const Matrix& nextLogProbs,
                      const Matrix& dones, double gamma, double alpha, TargetForm form) {
  const Index m = rewards.rows();
  requireColumn(rewards, m, "rewards");
  requireColumn(nextQ, m, "next Q");
  requireColumn(nextLogProbs, m, "next log-probabilities");
  requireColumn(dones, m, "done mask");
  requireFinite(rewards, "reward");
  requireFinite(nextQ, "next Q");
  requireFinite(nextLogProbs, "next log-probability");
  if (!std::isfinite(alpha)) throw std::domain_error("bellmanTargets: non-finite alpha");

  const Matrix soft = nextQ - alpha * nextLogProbs;
  Matrix y(m, 1);
  for (Index i = 0; i < m; ++i) {
    if (form == TargetForm::standard) {
      y(i, 0) = dones(i, 0) != 0.0 ? rewards(i, 0) : rewards(i, 0) + gamma * soft(i, 0);
    } else {
      y(i, 0) = rewards(i, 0) + (1.0 - gamma) * soft(i, 0);
    }
  }
  requireFinite(y, "target");
  return y;
}

Matrix computeTargets(const TwinCritic& critic, const Matrix& rewards, const Matrix& nextStates,
                      const ActionSample& next, const Matrix& dones, double gamma, double alpha,
                      TargetForm form) {
  Matrix input(nextStates.rows(), nextStates.cols() + next.actions.cols());
  input << nextStates, next.actions;
  const Matrix q = critic.target[0].evaluate(input).cwiseMin(critic.target[1].evaluate(input));
  return bellmanTargets(rewards, q, next.logProbs, dones, gamma, alpha, form);
}

std::array<Tensor, 2> criticLosses(const TwinCritic& critic, const Matrix& states,
                                   const Matrix& actions, const Matrix& targets) {
  const Tensor input = concatCols(Tensor(states), Tensor(actions));
  const Tensor y(targets);
  std::array<Tensor, 2> out;
  for (std::size_t k = 0; k < 2; ++k) out[k] = mean(square(critic.online[k].forward(input) - y));
  return out;
}

double criticStep(TwinCritic& critic, const Matrix& states, const Matrix& actions,
                  const Matrix& targets) {
  const auto losses = criticLosses(critic, states, actions, targets);
  double total = 0.0;
  for (std::size_t k = 0; k < 2; ++k) {
    critic.online[k].zeroGrad();
    losses[k].backward();
    auto params = critic.online[k].parameters();
    adamStep(std::span<Tensor>(params), critic.optimizer[k]);
    total += losses[k].item();
  }
  return total / 2.0;
}

PolicyObjective sacPolicyLoss(const SacAgent& agent, const Matrix& states, const Matrix& noise,
                              CriticScaling scaling) {
  const Tensor s(states);
  const auto sample = sampleSquashedGaussian(agent.head(s), noise);
  Tensor q = twinMin(agent.critic.online, s, sample.action, true);
  if (scaling == CriticScaling::batchNormalized) q = normalizeOverBatch(q);
  const Tensor loss = mean(agent.alpha() * sample.logProb - q);
  return {loss, sample.logProb.value()};
}

double policyStep(SacAgent& agent, const PolicyObjective& objective) {
  agent.policy.zeroGrad();
  objective.loss.backward();
  auto params = agent.policy.parameters();
  adamStep(std::span<Tensor>(params), agent.policyOptimizer);
  return objective.loss.item();
}

Tensor alphaLoss(const Tensor& logAlpha, const Matrix& logProbs, double targetEntropy) {
  const Tensor gap((logProbs.array() + targetEntropy).matrix());
  return -mean(scaleBy(exp(logAlpha), gap));
}

double tuneAlpha(SacAgent& agent, const Matrix& logProbs) {
  if (!agent.config().autoAlpha) return agent.alpha();
  Tensor& logAlpha = agent.logAlphaTensor();
  logAlpha.zeroGrad();
  alphaLoss(logAlpha, logProbs, agent.targetEntropy()).backward();
  std::array<Tensor, 1> params{logAlpha};
  adamStep(std::span<Tensor>(params), agent.alphaOptimizer);
  return agent.alpha();
}

void softTargetUpdate(TwinCritic& critic, double tau) {
  for (std::size_t k = 0; k < 2; ++k) critic.target[k].softUpdateFrom(critic.online[k], tau);
}

SacStepStats sacUpdate(SacAgent& agent, const Matrix& states, const Matrix& actions,
                       const Matrix& rewards, const Matrix& nextStates, const Matrix& dones,
                       Rng& rng) {
  const auto& cfg = agent.config();
  SacStepStats stats;
  const auto next = sampleActions(agent, nextStates, rng);
  const Matrix y = computeTargets(agent.critic, rewards, nextStates, next, dones, cfg.gamma,
                                  agent.alpha(), cfg.targetForm);
  stats.criticLoss = criticStep(agent.critic, states, actions, y);
  const Matrix noise = rng.normalMatrix(states.rows(), static_cast<Index>(agent.actionDim()));
  const auto objective = sacPolicyLoss(agent, states, noise, cfg.policyCritic);
  stats.policyLoss = policyStep(agent, objective);
  stats.alpha = tuneAlpha(agent, objective.logProbs);
  softTargetUpdate(agent.critic, cfg.tau);
  return stats;
}

void saveNetwork(Archive& archive, const std::string& prefix, const Mlp& net) {
  const auto params = net.parameters();
  archive.put(prefix + "/count", static_cast<std::uint64_t>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    archive.put(prefix + "/" + std::to_string(i), params[i].value());
  }
}

void loadNetwork(const Archive& archive, const std::string& prefix, Mlp& net) {
  auto params = net.parameters();
  if (archive.integer(prefix + "/count") != params.size()) {
    throw std::runtime_error("loadNetwork: " + prefix + " has a different layer count");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& m = archive.matrix(prefix + "/" + std::to_string(i));
    if (m.rows() != params[i].rows() || m.cols() != params[i].cols()) {
      throw ShapeError("loadNetwork: " + prefix + "/" + std::to_string(i) + " is [" +
                       std::to_string(m.rows()) + " x " + std::to_string(m.cols()) +
                       "], network expects " + shapeString(params[i]));
    }
    params[i].mutableValue() = m;
  }
}

void saveAdam(Archive& archive, const std::string& prefix, const AdamState& state) {
  archive.put(prefix + "/steps", state.stepCount);
  archive.put(prefix + "/count", static_cast<std::uint64_t>(state.firstMoment.size()));
  for (std::size_t i = 0; i < state.firstMoment.size(); ++i) {
    archive.put(prefix + "/m" + std::to_string(i), state.firstMoment[i]);
    archive.put(prefix + "/v" + std::to_string(i), state.secondMoment[i]);
  }
}

void loadAdam(const Archive& archive, const std::string& prefix, AdamState& state) {
  if (archive.integer(prefix + "/count") != state.firstMoment.size()) {
    throw std::runtime_error("loadAdam: " + prefix + " has a different parameter count");
  }
  state.stepCount = archive.integer(prefix + "/steps");
  for (std::size_t i = 0; i < state.firstMoment.size(); ++i) {
    state.firstMoment[i] = archive.matrix(prefix + "/m" + std::to_string(i));
    state.secondMoment[i] = archive.matrix(prefix + "/v" + std::to_string(i));
  }
}

void saveAgent(Archive& archive, const std::string& prefix, const SacAgent& agent) {
  archive.put(prefix + "/stateDim", static_cast<std::uint64_t>(agent.stateDim()));
  archive.put(prefix + "/actionDim", static_cast<std::uint64_t>(agent.actionDim()));
  saveNetwork(archive, prefix + "/policy", agent.policy);
  saveAdam(archive, prefix + "/policyAdam", agent.policyOptimizer);
  for (std::size_t k = 0; k < 2; ++k) {
    const std::string tag = std::to_string(k);
    saveNetwork(archive, prefix + "/q" + tag, agent.critic.online[k]);
    saveNetwork(archive, prefix + "/qTarget" + tag, agent.critic.target[k]);
    saveAdam(archive, prefix + "/qAdam" + tag, agent.critic.optimizer[k]);
  }
  archive.put(prefix + "/logAlpha", agent.logAlpha());
  saveAdam(archive, prefix + "/alphaAdam", agent.alphaOptimizer);
}

void loadAgent(const Archive& archive, const std::string& prefix, SacAgent& agent) {
  if (archive.integer(prefix + "/stateDim") != agent.stateDim() ||
      archive.integer(prefix + "/actionDim") != agent.actionDim()) {
    throw ShapeError("loadAgent: " + prefix + " was saved for state/action dims " +
                     std::to_string(archive.integer(prefix + "/stateDim")) + "/" +
                     std::to_string(archive.integer(prefix + "/actionDim")) + ", agent has " +
                     std::to_string(agent.stateDim()) + "/" + std::to_string(agent.actionDim()));
  }
  loadNetwork(archive, prefix + "/policy", agent.policy);
  loadAdam(archive, prefix + "/policyAdam", agent.policyOptimizer);
  for (std::size_t k = 0; k < 2; ++k) {
    const std::string tag = std::to_string(k);
    loadNetwork(archive, prefix + "/q" + tag, agent.critic.online[k]);
    loadNetwork(archive, prefix + "/qTarget" + tag, agent.critic.target[k]);
    loadAdam(archive, prefix + "/qAdam" + tag, agent.critic.optimizer[k]);
  }
  agent.logAlphaTensor().mutableValue()(0, 0) = archive.real(prefix + "/logAlpha");
  loadAdam(archive, prefix + "/alphaAdam", agent.alphaOptimizer);
}

std::uint64_t parameterHash(const Mlp& net) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& p : net.parameters()) {
    const Matrix& m = p.value();
    const auto* bytes = reinterpret_cast<const unsigned char*>(m.data());
    for (std::size_t i = 0; i < static_cast<std::size_t>(m.size()) * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  }
  return h;
}

}  // namespace csac
