#include <doctest.h>

#include "csac/csac.hpp"
#include "support/finite_difference.hpp"
#include "support/reference.hpp"

#include <cmath>
#include <map>

using namespace csac;
using namespace csac::testing;

namespace {

constexpr std::size_t kStateDim = 4;
constexpr std::size_t kActionDim = 2;

Matrix column(std::initializer_list<double> v) {
  Matrix m(static_cast<Index>(v.size()), 1);
  Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

SacConfig tinyConfig() {
  SacConfig cfg;
  cfg.hidden = {8, 8};
  cfg.policyCritic = CriticScaling::batchNormalized;
  return cfg;
}

// Random transition generated while `subtask` is active.
TransitionRecord randomRecord(Rng& rng, std::size_t subtask, std::size_t subtaskCount) {
  TransitionRecord r;
  for (std::size_t i = 0; i < kStateDim; ++i) {
    r.state.push_back(rng.normal());
    r.nextState.push_back(rng.normal());
  }
  for (std::size_t i = 0; i < kActionDim; ++i) r.action.push_back(rng.uniform(-0.99, 0.99));
  r.rewards.assign(subtaskCount, 0.0);
  r.subtask = subtask;
  r.nextSubtask = subtask + 1 < subtaskCount && rng.uniform() < 0.1 ? subtask + 1 : subtask;
  r.rewards[subtask] = r.nextSubtask > subtask ? 10.0 : -0.01;
  r.done = subtask + 1 == subtaskCount && rng.uniform() < 0.05;
  return r;
}

void fill(std::vector<AgentBundle>& bundles, Method method, std::size_t subtask, std::size_t count,
          std::size_t subtaskCount, std::uint64_t seed) {
  Rng rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    bundles[actingBundle(method, subtask)].buffer.push(randomRecord(rng, subtask, subtaskCount));
  }
}

CoopSettings settingsFor(Method method, std::size_t subtaskCount, double eta = 0.3) {
  CoopSettings s;
  s.method = method;
  if (method == Method::csac) s.coopRatios.assign(subtaskCount - 1, eta);
  s.batchSize = 16;
  s.warmup = 32;
  return s;
}

// Critic outputs with a visible spread so normalization is well conditioned.
void spreadCritics(std::vector<AgentBundle>& bundles, std::uint64_t seed) {
  Rng rng(seed);
  for (auto& b : bundles) {
    for (auto& q : b.agent.critic.online) {
      auto params = q.parameters();
      auto& w = params[params.size() - 2];
      w.mutableValue() = rng.normalMatrix(w.rows(), 1);
    }
  }
}

void perturb(Mlp& net, Rng& rng, double scale = 0.3) {
  for (auto& p : net.parameters()) p.mutableValue() += scale * rng.normalMatrix(p.rows(), p.cols());
}

std::vector<Matrix> policyGradient(const AgentBundle& self, const AgentBundle* next,
                                   std::size_t count, const Matrix& s, const Matrix& noise,
                                   double eta) {
  auto& policy = const_cast<Mlp&>(self.agent.policy);
  policy.zeroGrad();
  cooperativePolicyLoss(self, next, count, s, noise, eta).loss.backward();
  return gradientsOf(policy.parameters());
}

double maxDifference(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, (a[i] - b[i]).cwiseAbs().maxCoeff());
  return d;
}

}  // namespace

TEST_CASE("normalize: worked examples") {
  const Matrix a = normalizeOverBatch(column({2.0, 4.0, 6.0}));
  CHECK(a(0, 0) == 0.0);
  CHECK(a(1, 0) == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(a(2, 0) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(normalizeOverBatch(column({3.0, 3.0, 3.0})) == Matrix::Zero(3, 1));
  const Matrix b = normalizeOverBatch(column({-1.0, 0.0, 3.0}));
  CHECK(b(0, 0) == 0.0);
  CHECK(b(1, 0) == doctest::Approx(0.25).epsilon(1e-8));
  CHECK(b(2, 0) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("normalize: output lies in [0, 1] with min 0 and max near 1") {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const Index m = 1 + static_cast<Index>(rng.index(64));
    const Matrix q = std::exp(rng.uniform(-3.0, 3.0)) * rng.normalMatrix(m, 1);
    const Matrix n = normalizeOverBatch(q);
    CHECK(n.minCoeff() >= 0.0);
    CHECK(n.maxCoeff() <= 1.0);
    CHECK(n.minCoeff() == 0.0);
    if (q.maxCoeff() - q.minCoeff() > 1e-3) CHECK(n.maxCoeff() > 1.0 - 1e-5);
  }
  CHECK_THROWS_AS(normalizeOverBatch(Matrix::Zero(3, 2)), ShapeError);
}

TEST_CASE("normalize: gradient is per sample with the range held fixed") {
  Tensor q(column({1.0, 3.0, 2.0}), true);
  sum(normalizeOverBatch(q)).backward();
  const double scale = 1.0 / (2.0 + kNormalizeEpsilon);
  CHECK(q.grad() == Matrix::Constant(3, 1, scale));
}

TEST_CASE("convex combination: endpoints, arithmetic, range, rejection") {
  const Tensor self(column({0.3}));
  const Tensor next(column({0.9}));
  CHECK(convexCombine(self, next, 1.0).item() == 0.3);
  CHECK(convexCombine(self, next, 0.0).item() == 0.9);
  CHECK(convexCombine(Tensor(column({0.4})), Tensor(column({0.8})), 0.25).item() ==
        doctest::Approx(0.7).epsilon(1e-15));
  CHECK_THROWS_AS(convexCombine(self, next, 1.01), std::invalid_argument);
  CHECK_THROWS_AS(convexCombine(self, next, -0.01), std::invalid_argument);
  CHECK_THROWS_AS(convexCombine(self, next, std::nan("")), std::invalid_argument);
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    const Tensor a(normalizeOverBatch(rng.normalMatrix(8, 1)));
    const Tensor b(normalizeOverBatch(rng.normalMatrix(8, 1)));
    const Matrix c = convexCombine(a, b, rng.uniform()).value();
    CHECK(c.minCoeff() >= 0.0);
    CHECK(c.maxCoeff() <= 1.0);
  }
}

TEST_CASE("cooperative loss: matches the reference and finite differences") {
  auto bundles = makeBundles(Method::csac, 3, kStateDim, kActionDim, tinyConfig(), 100, 3);
  spreadCritics(bundles, 4);
  Rng rng(5);
  const Matrix s = rng.normalMatrix(6, kStateDim);
  const Matrix noise = rng.normalMatrix(6, kActionDim);
  for (double eta : {0.0, 0.4, 1.0}) {
    const auto objective = cooperativePolicyLoss(bundles[0], &bundles[1], 3, s, noise, eta);
    std::vector<Range> ranges;
    const double want = referencePolicyLoss(bundles[0].agent, &bundles[1].agent.critic, eta, true,
                                            s, noise, bundles[0].agent.alpha(), ranges);
    CHECK(objective.loss.item() == doctest::Approx(want).epsilon(1e-12));
    const auto params = bundles[0].agent.policy.parameters();
    const auto analytic = policyGradient(bundles[0], &bundles[1], 3, s, noise, eta);
    const auto check = checkGradients(params, analytic, [&] {
      return referencePolicyLoss(bundles[0].agent, &bundles[1].agent.critic, eta, true, s, noise,
                                 bundles[0].agent.alpha(), ranges);
    });
    CHECK(check.maxRelativeError <= 1e-4);
  }
}

TEST_CASE("cooperative loss: eta = 1 ignores the next critic, eta = 0 ignores its own") {
  auto bundles = makeBundles(Method::csac, 2, kStateDim, kActionDim, tinyConfig(), 100, 6);
  spreadCritics(bundles, 7);
  Rng rng(8);
  const Matrix s = rng.normalMatrix(32, kStateDim);
  const Matrix noise = rng.normalMatrix(32, kActionDim);

  const double l1 = cooperativePolicyLoss(bundles[0], &bundles[1], 2, s, noise, 1.0).loss.item();
  const auto g1 = policyGradient(bundles[0], &bundles[1], 2, s, noise, 1.0);
  const double l0 = cooperativePolicyLoss(bundles[0], &bundles[1], 2, s, noise, 0.0).loss.item();
  const auto g0 = policyGradient(bundles[0], &bundles[1], 2, s, noise, 0.0);

  auto nextPerturbed = bundles;
  for (auto& q : nextPerturbed[1].agent.critic.online) perturb(q, rng);
  CHECK(cooperativePolicyLoss(nextPerturbed[0], &nextPerturbed[1], 2, s, noise, 1.0).loss.item() == l1);
  CHECK(maxDifference(policyGradient(nextPerturbed[0], &nextPerturbed[1], 2, s, noise, 1.0), g1) == 0.0);
  CHECK(cooperativePolicyLoss(nextPerturbed[0], &nextPerturbed[1], 2, s, noise, 0.0).loss.item() != l0);

  auto ownPerturbed = bundles;
  for (auto& q : ownPerturbed[0].agent.critic.online) perturb(q, rng);
  CHECK(cooperativePolicyLoss(ownPerturbed[0], &ownPerturbed[1], 2, s, noise, 0.0).loss.item() == l0);
  CHECK(maxDifference(policyGradient(ownPerturbed[0], &ownPerturbed[1], 2, s, noise, 0.0), g0) == 0.0);
  CHECK(cooperativePolicyLoss(ownPerturbed[0], &ownPerturbed[1], 2, s, noise, 1.0).loss.item() != l1);
}

TEST_CASE("cooperative loss: affine in eta") {
  auto bundles = makeBundles(Method::csac, 2, kStateDim, kActionDim, tinyConfig(), 100, 9);
  spreadCritics(bundles, 10);
  Rng rng(11);
  const Matrix s = rng.normalMatrix(64, kStateDim);
  const Matrix noise = rng.normalMatrix(64, kActionDim);
  const auto loss = [&](double eta) {
    return cooperativePolicyLoss(bundles[0], &bundles[1], 2, s, noise, eta).loss.item();
  };
  const double at0 = loss(0.0);
  const double at1 = loss(1.0);
  for (double eta : {0.1, 0.25, 0.5, 0.75, 0.9}) {
    CHECK(std::abs(loss(eta) - (eta * at1 + (1.0 - eta) * at0)) <= 1e-10);
  }
}

TEST_CASE("cooperative loss: bundle bookkeeping and the final-policy rule") {
  auto bundles = makeBundles(Method::csac, 3, kStateDim, kActionDim, tinyConfig(), 100, 12);
  spreadCritics(bundles, 13);
  Rng rng(14);
  const Matrix s = rng.normalMatrix(16, kStateDim);
  const Matrix noise = rng.normalMatrix(16, kActionDim);
  CHECK_THROWS_AS(cooperativePolicyLoss(bundles[0], nullptr, 3, s, noise, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(cooperativePolicyLoss(bundles[0], &bundles[2], 3, s, noise, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(cooperativePolicyLoss(bundles[0], &bundles[1], 3, s, noise, 1.5), std::invalid_argument);

  const double final = cooperativePolicyLoss(bundles[2], nullptr, 3, s, noise, 0.5).loss.item();
  CHECK(final == sacPolicyLoss(bundles[2].agent, s, noise, CriticScaling::batchNormalized).loss.item());
  auto others = bundles;
  for (std::size_t n = 0; n < 2; ++n) {
    for (auto& q : others[n].agent.critic.online) perturb(q, rng);
    for (auto& q : others[n].agent.critic.target) perturb(q, rng);
  }
  CHECK(cooperativePolicyLoss(others[2], nullptr, 3, s, noise, 0.5).loss.item() == final);
}

TEST_CASE("critic schedule: N = 1 trains only Q1; N = 3, n = 2 trains exactly Q2 and Q3") {
  {
    auto bundles = makeBundles(Method::csac, 1, kStateDim, kActionDim, tinyConfig(), 100, 15);
    fill(bundles, Method::csac, 0, 40, 1, 16);
    const auto settings = settingsFor(Method::csac, 1);
    CriticBatch data{bundles[0].buffer.gather({0, 1, 2, 3}), {}};
    data.next = sampleActions(bundles[0].agent, data.batch.nextStates, bundles[0].rng);
    const auto before = parameterHash(bundles[0].agent.critic.online[0]);
    CHECK(trainCriticsFromBuffer(bundles, settings, 0, data, nullptr, nullptr) ==
          std::vector<std::size_t>{0});
    CHECK(parameterHash(bundles[0].agent.critic.online[0]) != before);
  }
  auto bundles = makeBundles(Method::csac, 3, kStateDim, kActionDim, tinyConfig(), 100, 17);
  fill(bundles, Method::csac, 1, 40, 3, 18);
  const auto settings = settingsFor(Method::csac, 3);
  std::vector<std::uint64_t> before;
  for (const auto& b : bundles) {
    for (std::size_t k = 0; k < 2; ++k) before.push_back(parameterHash(b.agent.critic.online[k]));
  }
  CriticBatch data{bundles[1].buffer.gather({0, 5, 9, 30}), {}};
  data.next = sampleActions(bundles[1].agent, data.batch.nextStates, bundles[1].rng);
  trainCriticsFromBuffer(bundles, settings, 1, data, nullptr, nullptr);
  for (std::size_t n = 0; n < 3; ++n) {
    for (std::size_t k = 0; k < 2; ++k) {
      const bool changed = parameterHash(bundles[n].agent.critic.online[k]) != before[2 * n + k];
      CHECK(changed == (n != 0));
    }
  }
}

TEST_CASE("critic schedule: the cross-buffer target matches an independent computation") {
  auto bundles = makeBundles(Method::csac, 3, kStateDim, kActionDim, tinyConfig(), 200, 19);
  fill(bundles, Method::csac, 1, 150, 3, 20);
  const auto settings = settingsFor(Method::csac, 3);
  const auto copy = bundles;
  CriticBatch data{bundles[1].buffer.gather({3, 9, 27, 81, 100, 120, 140, 7}), {}};
  data.next = sampleActions(bundles[1].agent, data.batch.nextStates, bundles[1].rng);

  // Oracle for critic 3 (index 2): reward channel 3, bootstrap through the
  // next-actions of policy 2, target critics of bundle 3, alpha of bundle 2.
  const auto& b = data.batch;
  Matrix input(b.size(), static_cast<Index>(kStateDim + kActionDim));
  input << b.nextStates, data.next.actions;
  const auto& targets = copy[2].agent.critic.target;
  const Matrix q0 = referenceForward(targets[0], input);
  const Matrix q1 = referenceForward(targets[1], input);
  Matrix y(b.size(), 1);
  const double alpha = copy[1].agent.alpha();
  for (Index i = 0; i < b.size(); ++i) {
    const bool terminal = b.dones(i, 0) != 0.0 || b.nextSubtasks[static_cast<std::size_t>(i)] > 2;
    const double soft = std::min(q0(i, 0), q1(i, 0)) - alpha * data.next.logProbs(i, 0);
    y(i, 0) = b.rewards(i, 2) + (terminal ? 0.0 : 0.95 * soft);
  }
  const Matrix viaCore = computeTargets(copy[2].agent.critic, b.rewardChannel(2), b.nextStates,
                                        data.next, terminalMaskFor(Method::csac, b, 2), 0.95,
                                        alpha, TargetForm::standard);
  CHECK((viaCore - y).cwiseAbs().maxCoeff() < 1e-12);

  auto expected = copy[2].agent.critic;
  criticStep(expected, b.states, b.actions, viaCore);
  trainCriticsFromBuffer(bundles, settings, 1, data, nullptr, nullptr);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(parameterHash(bundles[2].agent.critic.online[k]) == parameterHash(expected.online[k]));
  }
}

TEST_CASE("train loop: uncooperative mode equals independent SAC agents in lockstep") {
  const std::size_t count = 3;
  auto bundles = makeBundles(Method::uncooperative, count, kStateDim, kActionDim, tinyConfig(), 300, 21);
  for (std::size_t n = 0; n < count; ++n) fill(bundles, Method::uncooperative, n, 200, count, 22 + n);
  const auto settings = settingsFor(Method::uncooperative, count);

  std::vector<SacAgent> solo;
  std::vector<Rng> soloRng;
  for (const auto& b : bundles) {
    solo.push_back(b.agent);
    soloRng.push_back(b.rng);
  }
  for (int loop = 0; loop < 20; ++loop) {
    trainLoop(bundles, settings);
    for (std::size_t n = 0; n < count; ++n) {
      const auto batch = bundles[n].buffer.gather(*bundles[n].buffer.sampleIndices(16, soloRng[n]));
      sacUpdate(solo[n], batch.states, batch.actions, batch.rewardChannel(n), batch.nextStates,
                terminalMaskFor(Method::uncooperative, batch, n), soloRng[n]);
    }
  }
  for (std::size_t n = 0; n < count; ++n) {
    CHECK(parameterHash(bundles[n].agent.policy) == parameterHash(solo[n].policy));
    for (std::size_t k = 0; k < 2; ++k) {
      CHECK(parameterHash(bundles[n].agent.critic.online[k]) == parameterHash(solo[n].critic.online[k]));
      CHECK(parameterHash(bundles[n].agent.critic.target[k]) == parameterHash(solo[n].critic.target[k]));
    }
    CHECK(bundles[n].agent.logAlpha() == solo[n].logAlpha());
  }
}

TEST_CASE("train loop: N = 1 csac equals the single agent and plain SAC") {
  auto coop = makeBundles(Method::csac, 1, kStateDim, kActionDim, tinyConfig(), 300, 25);
  auto single = makeBundles(Method::single, 1, kStateDim, kActionDim, tinyConfig(), 300, 25);
  fill(coop, Method::csac, 0, 200, 1, 26);
  fill(single, Method::single, 0, 200, 1, 26);
  SacAgent solo = coop[0].agent;
  Rng soloRng = coop[0].rng;
  for (int loop = 0; loop < 20; ++loop) {
    trainLoop(coop, settingsFor(Method::csac, 1));
    trainLoop(single, settingsFor(Method::single, 1));
    const auto batch = coop[0].buffer.gather(*coop[0].buffer.sampleIndices(16, soloRng));
    sacUpdate(solo, batch.states, batch.actions, batch.rewardChannel(0), batch.nextStates,
              batch.dones, soloRng);
  }
  CHECK(parameterHash(coop[0].agent.policy) == parameterHash(single[0].agent.policy));
  CHECK(parameterHash(coop[0].agent.policy) == parameterHash(solo.policy));
  CHECK(parameterHash(coop[0].agent.critic.online[1]) == parameterHash(single[0].agent.critic.online[1]));
  CHECK(parameterHash(coop[0].agent.critic.target[0]) == parameterHash(solo.critic.target[0]));
  CHECK(coop[0].agent.logAlpha() == single[0].agent.logAlpha());
}

TEST_CASE("train loop: single agent trains on the summed reward") {
  Minibatch b;
  b.rewards = Matrix{{10.0, -0.01, 0.0}, {0.0, 0.0, -0.01}};
  CHECK(rewardFor(Method::single, b, 0) == column({9.99, -0.01}));
  CHECK(rewardFor(Method::csac, b, 1) == column({-0.01, 0.0}));
}

TEST_CASE("train loop: only bundles with filled buffers (and their critic partners) change") {
  auto bundles = makeBundles(Method::csac, 3, kStateDim, kActionDim, tinyConfig(), 300, 27);
  fill(bundles, Method::csac, 0, 100, 3, 28);
  fill(bundles, Method::csac, 1, 10, 3, 29);
  fill(bundles, Method::csac, 2, 100, 3, 30);
  const auto snapshot = bundles;
  TrainAudit audit(3);
  trainLoop(bundles, settingsFor(Method::csac, 3), &audit);
  const auto changed = [&](const Mlp& a, const Mlp& b) { return parameterHash(a) != parameterHash(b); };
  CHECK(changed(bundles[0].agent.policy, snapshot[0].agent.policy));
  CHECK_FALSE(changed(bundles[1].agent.policy, snapshot[1].agent.policy));
  CHECK(changed(bundles[2].agent.policy, snapshot[2].agent.policy));
  CHECK(changed(bundles[1].agent.critic.online[0], snapshot[1].agent.critic.online[0]));
  CHECK(bundles[1].agent.logAlpha() == snapshot[1].agent.logAlpha());
  CHECK(audit.skippedUpdates == std::vector<std::uint64_t>{0, 1, 0});

  auto uncoop = makeBundles(Method::uncooperative, 3, kStateDim, kActionDim, tinyConfig(), 300, 27);
  fill(uncoop, Method::uncooperative, 0, 100, 3, 28);
  const auto before = uncoop;
  trainLoop(uncoop, settingsFor(Method::uncooperative, 3));
  CHECK(changed(uncoop[0].agent.critic.online[0], before[0].agent.critic.online[0]));
  for (std::size_t n = 1; n < 3; ++n) {
    CHECK_FALSE(changed(uncoop[n].agent.policy, before[n].agent.policy));
    CHECK_FALSE(changed(uncoop[n].agent.critic.online[0], before[n].agent.critic.online[0]));
  }
}

TEST_CASE("train loop: audit counters follow the critic-data and final-policy rules") {
  const std::size_t count = 3;
  auto bundles = makeBundles(Method::csac, count, kStateDim, kActionDim, tinyConfig(), 300, 31);
  for (std::size_t n = 0; n < count; ++n) fill(bundles, Method::csac, n, 100, count, 32 + n);
  TrainAudit audit(count);
  LossTotals totals(count);
  for (int i = 0; i < 10; ++i) trainLoop(bundles, settingsFor(Method::csac, count), &audit, &totals);
  for (std::size_t j = 0; j < count; ++j) {
    for (std::size_t n = 0; n < count; ++n) {
      const bool allowed = n == j || n + 1 == j;
      CHECK((audit.criticUpdates[j][n] > 0) == allowed);
    }
  }
  CHECK(audit.policyCriticReads[2] == std::vector<std::uint64_t>{0, 0, 10});
  CHECK(audit.policyCriticReads[0] == std::vector<std::uint64_t>{10, 10, 0});
  CHECK(totals.criticCount == std::vector<std::uint64_t>{10, 20, 20});
  CHECK(totals.meanPolicy(2).has_value());
}

TEST_CASE("settings: ratio vectors are validated") {
  CoopSettings s = settingsFor(Method::csac, 3);
  CHECK_NOTHROW(validateSettings(s, 3));
  CHECK_THROWS_AS(validateSettings(s, 4), std::invalid_argument);
  s.coopRatios = {0.2, 1.2};
  CHECK_THROWS_AS(validateSettings(s, 3), std::invalid_argument);
  s.method = Method::uncooperative;
  CHECK_NOTHROW(validateSettings(s, 3));
  CHECK(parseMethod("single") == Method::single);
  CHECK_THROWS_AS(parseMethod("greedy"), std::invalid_argument);
}

namespace {

// Whether the position decoded from a stored feature row lies in `room`
// (closed, to absorb rounding in the decode).
bool featuresInRoom(const MazeEnv& env, const std::vector<double>& f, std::size_t room) {
  const Rect b = env.spec().bounds();
  const std::size_t k = env.config().beamCount;
  const Vec2 p{b.xMin + (f[k] + 1.0) * 0.5 * (b.xMax - b.xMin),
               b.yMin + (f[k + 1] + 1.0) * 0.5 * (b.yMax - b.yMin)};
  return env.spec().rooms[room].containsClosed(p, 1e-9);
}

}  // namespace

TEST_CASE("gather: 100 random episodes route every transition to its acting bundle") {
  EnvConfig cfg;
  cfg.maxEpisodeSteps = 150;
  MazeEnv env(builtinMaze(3), cfg);
  SacConfig sac = tinyConfig();
  auto bundles = makeBundles(Method::csac, 3, env.featureDim(), 2, sac, 100000, 33);
  Rng rng(34);
  std::vector<std::vector<TransitionRecord>> expected(3);
  std::size_t total = 0;
  std::size_t crossings = 0;
  bool roomsMatch = true;
  for (int episode = 0; episode < 100; ++episode) {
    const auto log = gatherEpisode(bundles, Method::csac, env, ResetMode::exploration, rng, 100000);
    total += log.steps;
    for (const auto& r : log.records) {
      expected[r.subtask].push_back(r);
      roomsMatch = roomsMatch && featuresInRoom(env, r.state, r.subtask) &&
                   featuresInRoom(env, r.nextState, r.nextSubtask);
      if (r.nextSubtask != r.subtask) ++crossings;
    }
  }
  CHECK(roomsMatch);
  CHECK(crossings > 0);
  std::size_t stored = 0;
  for (std::size_t n = 0; n < 3; ++n) {
    stored += bundles[n].buffer.size();
    REQUIRE(bundles[n].buffer.size() == expected[n].size());
    bool same = true;
    for (std::size_t i = 0; i < expected[n].size(); ++i) same = same && bundles[n].buffer.at(i) == expected[n][i];
    CHECK(same);
  }
  CHECK(stored == total);
}

TEST_CASE("gather: evaluation stores nothing; single agent stores everything in one buffer") {
  MazeEnv env(builtinMaze(2));
  auto bundles = makeBundles(Method::csac, 2, env.featureDim(), 2, tinyConfig(), 1000, 35);
  Rng rng(36);
  const auto log = gatherEpisode(bundles, Method::csac, env, ResetMode::evaluation, rng, 50);
  CHECK(log.steps == 50);
  CHECK_FALSE(log.finished);
  CHECK(bundles[0].buffer.size() + bundles[1].buffer.size() == 0);
  for (const auto& r : log.records) CHECK(r.subtask == 0);

  auto single = makeBundles(Method::single, 2, env.featureDim(), 2, tinyConfig(), 1000, 35);
  const auto explore = gatherEpisode(single, Method::single, env, ResetMode::exploration, rng, 300);
  CHECK(single.size() == 1);
  CHECK(single[0].buffer.size() == explore.steps);
  CHECK(single[0].buffer.rewardCount() == 2);
}

TEST_CASE("checkpoint: bundles round-trip and keep training identically") {
  auto bundles = makeBundles(Method::csac, 2, kStateDim, kActionDim, tinyConfig(), 300, 37);
  for (std::size_t n = 0; n < 2; ++n) fill(bundles, Method::csac, n, 100, 2, 38 + n);
  const auto settings = settingsFor(Method::csac, 2);
  for (int i = 0; i < 3; ++i) trainLoop(bundles, settings);
  Archive archive;
  saveBundles(archive, bundles);
  auto restored = makeBundles(Method::csac, 2, kStateDim, kActionDim, tinyConfig(), 300, 99);
  loadBundles(Archive::fromBytes(archive.toBytes()), restored);
  for (int i = 0; i < 3; ++i) {
    trainLoop(bundles, settings);
    trainLoop(restored, settings);
  }
  for (std::size_t n = 0; n < 2; ++n) {
    CHECK(parameterHash(bundles[n].agent.policy) == parameterHash(restored[n].agent.policy));
    CHECK(bundles[n].rng == restored[n].rng);
  }
}
