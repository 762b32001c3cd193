#include "csac/csac.hpp"

#include <stdexcept>

namespace csac {

std::string methodName(Method m) {
  switch (m) {
    case Method::csac: return "csac";
    case Method::uncooperative: return "uncooperative";
    case Method::single: return "single";
  }
  return "?";
}

Method parseMethod(const std::string& name) {
  if (name == "csac") return Method::csac;
  if (name == "uncooperative") return Method::uncooperative;
  if (name == "single") return Method::single;
  throw std::invalid_argument("unknown method '" + name + "' (expected csac, uncooperative or single)");
}

void validateSettings(const CoopSettings& settings, std::size_t subtaskCount) {
  if (settings.batchSize == 0) throw std::invalid_argument("batch size must be positive");
  if (settings.method != Method::csac) return;
  if (settings.coopRatios.size() + 1 != subtaskCount) {
    throw std::invalid_argument("csac with " + std::to_string(subtaskCount) + " subtasks needs " +
                                std::to_string(subtaskCount - 1) + " cooperative ratios, got " +
                                std::to_string(settings.coopRatios.size()));
  }
  for (double eta : settings.coopRatios) {
    if (!(eta >= 0.0 && eta <= 1.0)) {
      throw std::invalid_argument("cooperative ratio " + std::to_string(eta) + " outside [0, 1]");
    }
  }
}

std::vector<AgentBundle> makeBundles(Method method, std::size_t subtaskCount,
                                     std::size_t stateDim, std::size_t actionDim,
                                     const SacConfig& config, std::size_t bufferCapacity,
                                     std::uint64_t seed) {
  if (subtaskCount == 0) throw std::invalid_argument("makeBundles: no subtasks");
  const std::size_t count = method == Method::single ? 1 : subtaskCount;
  std::vector<AgentBundle> bundles;
  bundles.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    Rng init = Rng::derived(seed, 1000 + n);
    bundles.push_back(AgentBundle{n, SacAgent(stateDim, actionDim, config, init),
                                  ReplayBuffer(bufferCapacity, stateDim, actionDim, subtaskCount),
                                  Rng::derived(seed, n)});
  }
  return bundles;
}

std::size_t actingBundle(Method method, std::size_t subtask) {
  return method == Method::single ? 0 : subtask;
}

Matrix rewardFor(Method method, const Minibatch& batch, std::size_t j) {
  if (method == Method::single) return batch.rewards.rowwise().sum();
  return batch.rewardChannel(j);
}

Matrix terminalMaskFor(Method method, const Minibatch& batch, std::size_t j) {
  Matrix mask = batch.dones;
  if (method == Method::single) return mask;
  for (Index i = 0; i < mask.rows(); ++i) {
    if (batch.nextSubtasks[static_cast<std::size_t>(i)] > j) mask(i, 0) = 1.0;
  }
  return mask;
}

PolicyObjective cooperativePolicyLoss(const AgentBundle& self, const AgentBundle* next,
                                      std::size_t subtaskCount, const Matrix& states,
                                      const Matrix& noise, double eta) {
  const bool final = self.index + 1 >= subtaskCount;
  if (!final && next == nullptr) {
    throw std::invalid_argument("cooperativePolicyLoss: bundle " + std::to_string(self.index + 1) +
                                " of " + std::to_string(subtaskCount) + " needs its successor");
  }
  if (final || next == nullptr) return sacPolicyLoss(self.agent, states, noise, self.agent.config().policyCritic);
  if (next->index != self.index + 1) {
    throw std::invalid_argument("cooperativePolicyLoss: successor has index " +
                                std::to_string(next->index + 1) + ", expected " +
                                std::to_string(self.index + 2));
  }
  if (!(eta >= 0.0 && eta <= 1.0)) {
    throw std::invalid_argument("cooperativePolicyLoss: cooperative ratio " + std::to_string(eta) +
                                " outside [0, 1]");
  }

  const Tensor s(states);
  const auto sample = sampleSquashedGaussian(self.agent.head(s), noise);
  const Tensor own = normalizeOverBatch(twinMin(self.agent.critic.online, s, sample.action, true));
  const Tensor other = normalizeOverBatch(twinMin(next->agent.critic.online, s, sample.action, true));
  const Tensor combined = convexCombine(own, other, eta);
  return {mean(self.agent.alpha() * sample.logProb - combined), sample.logProb.value()};
}

TrainAudit::TrainAudit(std::size_t bundles)
    : criticUpdates(bundles, std::vector<std::uint64_t>(bundles, 0)),
      policyCriticReads(bundles, std::vector<std::uint64_t>(bundles, 0)),
      skippedUpdates(bundles, 0) {}

LossTotals::LossTotals(std::size_t bundles)
    : criticLoss(bundles, 0.0), policyLoss(bundles, 0.0), criticCount(bundles, 0),
      policyCount(bundles, 0) {}

std::optional<double> LossTotals::meanCritic(std::size_t j) const {
  if (criticCount[j] == 0) return std::nullopt;
  return criticLoss[j] / static_cast<double>(criticCount[j]);
}

std::optional<double> LossTotals::meanPolicy(std::size_t n) const {
  if (policyCount[n] == 0) return std::nullopt;
  return policyLoss[n] / static_cast<double>(policyCount[n]);
}

std::vector<std::size_t> trainCriticsFromBuffer(std::vector<AgentBundle>& bundles,
                                                const CoopSettings& settings, std::size_t n,
                                                const CriticBatch& data, TrainAudit* audit,
                                                LossTotals* totals) {
  std::vector<std::size_t> trained{n};
  if (settings.method == Method::csac && n + 1 < bundles.size()) trained.push_back(n + 1);
  const SacAgent& acting = bundles[n].agent;
  const auto& b = data.batch;
  for (std::size_t j : trained) {
    SacAgent& learner = bundles[j].agent;
    const Matrix y = computeTargets(learner.critic, rewardFor(settings.method, b, j), b.nextStates,
                                    data.next, terminalMaskFor(settings.method, b, j),
                                    learner.config().gamma, acting.alpha(),
                                    learner.config().targetForm);
    const double loss = criticStep(learner.critic, b.states, b.actions, y);
    if (audit) audit->criticUpdates[j][n] += 1;
    if (totals) {
      totals->criticLoss[j] += loss;
      totals->criticCount[j] += 1;
    }
  }
  return trained;
}

void trainLoop(std::vector<AgentBundle>& bundles, const CoopSettings& settings, TrainAudit* audit,
               LossTotals* totals) {
  const std::size_t count = bundles.size();
  if (audit) audit->loops += 1;
  for (std::size_t n = 0; n < count; ++n) {
    AgentBundle& self = bundles[n];
    if (self.buffer.size() < std::max(settings.warmup, settings.batchSize)) {
      if (audit) audit->skippedUpdates[n] += 1;
      continue;
    }
    CriticBatch data;
    data.batch = self.buffer.gather(*self.buffer.sampleIndices(settings.batchSize, self.rng));
    data.next = sampleActions(self.agent, data.batch.nextStates, self.rng);
    const auto trained = trainCriticsFromBuffer(bundles, settings, n, data, audit, totals);

    const Matrix noise =
        self.rng.normalMatrix(data.batch.size(), static_cast<Index>(self.agent.actionDim()));
    const bool cooperative = settings.method == Method::csac && n + 1 < count;
    const PolicyObjective objective =
        cooperative ? cooperativePolicyLoss(self, &bundles[n + 1], count, data.batch.states, noise,
                                            settings.coopRatios[n])
                    : sacPolicyLoss(self.agent, data.batch.states, noise,
                                    self.agent.config().policyCritic);
    if (audit) {
      audit->policyCriticReads[n][n] += 1;
      if (cooperative) audit->policyCriticReads[n][n + 1] += 1;
    }
    const double loss = policyStep(self.agent, objective);
    if (totals) {
      totals->policyLoss[n] += loss;
      totals->policyCount[n] += 1;
    }
    tuneAlpha(self.agent, objective.logProbs);
    for (std::size_t j : trained) {
      softTargetUpdate(bundles[j].agent.critic, bundles[j].agent.config().tau);
    }
  }
}

EpisodeLog gatherEpisode(std::vector<AgentBundle>& bundles, Method method, MazeEnv& env,
                         ResetMode mode, Rng& rng, std::size_t stepBudget) {
  EpisodeLog log;
  log.returns.assign(env.subtaskCount(), 0.0);
  const bool explore = mode == ResetMode::exploration;
  Observation obs = env.reset(mode, rng);
  std::vector<double> features = env.features(obs);
  const std::size_t stateDim = features.size();
  while (log.steps < stepBudget) {
    const std::size_t subtask = env.state().subtask;
    AgentBundle& actor = bundles[actingBundle(method, subtask)];
    const Matrix input = Eigen::Map<const Matrix>(features.data(), 1, static_cast<Index>(stateDim));
    const Matrix action = explore ? sampleActions(actor.agent, input, rng).actions
                                  : actor.agent.act(input);
    const StepResult result = env.step(scaleAction(action(0, 0), action(0, 1), env.config()));

    TransitionRecord record;
    record.state = features;
    record.action.assign(action.data(), action.data() + action.size());
    record.rewards = result.rewards;
    record.nextState = env.features(result.observation);
    record.done = result.reachedGoal;
    record.subtask = subtask;
    record.nextSubtask = result.nextSubtask;
    if (explore) actor.buffer.push(record);

    for (std::size_t j = 0; j < log.returns.size(); ++j) log.returns[j] += result.rewards[j];
    features = record.nextState;
    log.records.push_back(std::move(record));
    log.steps += 1;
    if (result.done) {
      log.success = result.reachedGoal;
      log.finished = true;
      break;
    }
  }
  return log;
}

void saveBundles(Archive& archive, const std::vector<AgentBundle>& bundles) {
  archive.put("bundles/count", static_cast<std::uint64_t>(bundles.size()));
  for (const auto& b : bundles) {
    const std::string prefix = "bundle" + std::to_string(b.index);
    saveAgent(archive, prefix + "/agent", b.agent);
    b.buffer.save(archive, prefix + "/buffer");
    archive.put(prefix + "/rng", b.rng.serialize());
  }
}

void loadBundles(const Archive& archive, std::vector<AgentBundle>& bundles) {
  if (archive.integer("bundles/count") != bundles.size()) {
    throw std::runtime_error("checkpoint holds " + std::to_string(archive.integer("bundles/count")) +
                             " bundles, run expects " + std::to_string(bundles.size()));
  }
  for (auto& b : bundles) {
    const std::string prefix = "bundle" + std::to_string(b.index);
    loadAgent(archive, prefix + "/agent", b.agent);
    b.buffer = ReplayBuffer::load(archive, prefix + "/buffer");
    b.rng.deserialize(archive.text(prefix + "/rng"));
  }
}

}  // namespace csac
