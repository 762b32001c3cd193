#include <doctest.h>

#include "csac/normalize.hpp"
#include "csac/sac.hpp"
#include "support/finite_difference.hpp"
#include "support/reference.hpp"

#include <cmath>

using namespace csac;
using namespace csac::testing;

namespace {

Matrix column(std::initializer_list<double> v) {
  Matrix m(static_cast<Index>(v.size()), 1);
  Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

SacAgent smallAgent(std::uint64_t seed, SacConfig cfg = {}, std::size_t stateDim = 3,
                    std::size_t actionDim = 2) {
  if (cfg.hidden == std::vector<std::size_t>{256, 256}) cfg.hidden = {8, 8};
  Rng rng(seed);
  return SacAgent(stateDim, actionDim, cfg, rng);
}

// Zero the output weights so the critic returns its output bias everywhere.
void makeConstant(Mlp& net, double value) {
  auto params = net.parameters();
  params[params.size() - 2].mutableValue().setZero();
  params.back().mutableValue().setConstant(value);
}

// Output layer scaled up so random critics have a visible spread.
void widenOutput(Mlp& net, Rng& rng) {
  auto params = net.parameters();
  params[params.size() - 2].mutableValue() = rng.normalMatrix(params[params.size() - 2].rows(), 1);
}

}  // namespace

TEST_CASE("targets: arithmetic of the standard form") {
  const auto y = [](double r, double q, double logPi, double d, double alpha) {
    return bellmanTargets(column({r}), column({q}), column({logPi}), column({d}), 0.95, alpha,
                          TargetForm::standard)(0, 0);
  };
  CHECK(y(1.0, 2.0, -1.0, 0.0, 0.0) == doctest::Approx(2.9).epsilon(1e-14));
  CHECK(y(1.0, 2.0, -1.0, 1.0, 0.0) == 1.0);
  CHECK(y(1.0, 2.0, -1.0, 0.0, 0.2) == doctest::Approx(3.09).epsilon(1e-14));
}

TEST_CASE("targets: literal form uses (1 - gamma) and ignores the done mask") {
  const Matrix y = bellmanTargets(column({1.0, 1.0}), column({2.0, 2.0}), column({-1.0, -1.0}),
                                  column({0.0, 1.0}), 0.95, 0.2, TargetForm::literal);
  CHECK(y(0, 0) == doctest::Approx(1.0 + 0.05 * 2.2).epsilon(1e-14));
  CHECK(y(1, 0) == y(0, 0));
}

TEST_CASE("targets: non-finite inputs are rejected with a diagnostic") {
  const double nan = std::nan("");
  CHECK_THROWS_AS(bellmanTargets(column({1.0}), column({nan}), column({0.0}), column({0.0}), 0.9,
                                 0.1, TargetForm::standard),
                  std::domain_error);
  CHECK_THROWS_AS(bellmanTargets(column({1.0, 2.0}), column({1.0}), column({0.0}), column({0.0}),
                                 0.9, 0.1, TargetForm::standard),
                  ShapeError);
}

TEST_CASE("targets: all-terminal batches return the rewards whatever the next state") {
  auto agent = smallAgent(4);
  Rng rng(5);
  const Matrix rewards = rng.normalMatrix(16, 1);
  for (int trial = 0; trial < 3; ++trial) {
    const Matrix nextStates = 10.0 * rng.normalMatrix(16, 3);
    const auto next = sampleActions(agent, nextStates, rng);
    const Matrix y = computeTargets(agent.critic, rewards, nextStates, next, Matrix::Ones(16, 1),
                                    0.95, agent.alpha(), TargetForm::standard);
    CHECK(y == rewards);
  }
}

TEST_CASE("targets: target networks move y but receive no gradient") {
  auto agent = smallAgent(6);
  Rng rng(7);
  const Matrix s = rng.normalMatrix(8, 3);
  const Matrix a = rng.normalMatrix(8, 2).array().tanh().matrix();
  const Matrix r = rng.normalMatrix(8, 1);
  const Matrix s2 = rng.normalMatrix(8, 3);
  const auto next = sampleActions(agent, s2, rng);
  const Matrix d = Matrix::Zero(8, 1);
  const Matrix before = computeTargets(agent.critic, r, s2, next, d, 0.95, 0.1, TargetForm::standard);
  for (auto& net : agent.critic.target) {
    for (auto& p : net.parameters()) p.mutableValue().array() += 0.05;
  }
  const Matrix after = computeTargets(agent.critic, r, s2, next, d, 0.95, 0.1, TargetForm::standard);
  CHECK((after - before).cwiseAbs().maxCoeff() > 1e-6);

  const auto losses = criticLosses(agent.critic, s, a, after);
  losses[0].backward();
  losses[1].backward();
  for (const auto& net : agent.critic.target) {
    for (const auto& p : net.parameters()) CHECK_FALSE(p.hasGrad());
  }
}

TEST_CASE("critic loss: fixed point, single sample, and direct summation") {
  auto agent = smallAgent(8);
  Rng rng(9);
  const Matrix s = rng.normalMatrix(32, 3);
  const Matrix a = rng.normalMatrix(32, 2).array().tanh().matrix();
  Matrix input(32, 5);
  input << s, a;

  const Matrix exact = agent.critic.online[0].evaluate(input);
  CHECK(criticLosses(agent.critic, s, a, exact)[0].item() == 0.0);

  auto one = smallAgent(10);
  makeConstant(one.critic.online[0], 1.0);
  CHECK(criticLosses(one.critic, s.topRows(1), a.topRows(1), column({3.0}))[0].item() == 4.0);

  widenOutput(agent.critic.online[1], rng);
  const Matrix y = rng.normalMatrix(32, 1);
  const auto losses = criticLosses(agent.critic, s, a, y);
  for (std::size_t k = 0; k < 2; ++k) {
    const double want = referenceCriticLoss(agent.critic.online[k], s, a, y);
    CHECK(std::abs(losses[k].item() - want) <= 1e-12 * std::max(1.0, want));
  }
}

TEST_CASE("critic loss: gradients reach only that critic") {
  auto agent = smallAgent(11);
  Rng rng(12);
  const Matrix s = rng.normalMatrix(8, 3);
  const Matrix a = rng.normalMatrix(8, 2).array().tanh().matrix();
  const auto losses = criticLosses(agent.critic, s, a, rng.normalMatrix(8, 1));
  losses[0].backward();
  for (const auto& p : agent.critic.online[0].parameters()) CHECK(p.hasGrad());
  for (const auto& p : agent.critic.online[1].parameters()) CHECK_FALSE(p.hasGrad());
  for (const auto& p : agent.policy.parameters()) CHECK_FALSE(p.hasGrad());
}

TEST_CASE("critic loss: gradients match central finite differences") {
  auto agent = smallAgent(13);
  Rng rng(14);
  widenOutput(agent.critic.online[0], rng);
  const Matrix s = rng.normalMatrix(6, 3);
  const Matrix a = rng.normalMatrix(6, 2).array().tanh().matrix();
  const Matrix y = rng.normalMatrix(6, 1);
  auto params = agent.critic.online[0].parameters();
  criticLosses(agent.critic, s, a, y)[0].backward();
  const auto check = checkGradients(params, gradientsOf(params), [&] {
    return referenceCriticLoss(agent.critic.online[0], s, a, y);
  });
  CHECK(check.maxRelativeError <= 1e-4);
}

TEST_CASE("policy loss: matches the reference value and finite differences") {
  for (auto scaling : {CriticScaling::raw, CriticScaling::batchNormalized}) {
    SacConfig cfg;
    cfg.initialAlpha = 0.3;
    auto agent = smallAgent(15, cfg);
    Rng rng(16);
    for (auto& q : agent.critic.online) widenOutput(q, rng);
    const Matrix s = rng.normalMatrix(6, 3);
    const Matrix noise = rng.normalMatrix(6, 2);
    const auto objective = sacPolicyLoss(agent, s, noise, scaling);
    const bool normalized = scaling == CriticScaling::batchNormalized;
    std::vector<Range> ranges;
    const double want = referencePolicyLoss(agent, nullptr, 1.0, normalized, s, noise, 0.3, ranges);
    CHECK(objective.loss.item() == doctest::Approx(want).epsilon(1e-12));

    auto params = agent.policy.parameters();
    agent.policy.zeroGrad();
    objective.loss.backward();
    const auto check = checkGradients(params, gradientsOf(params), [&] {
      return referencePolicyLoss(agent, nullptr, 1.0, normalized, s, noise, 0.3, ranges);
    });
    CHECK(check.maxRelativeError <= 1e-4);
    for (const auto& net : agent.critic.online) {
      for (const auto& p : net.parameters()) CHECK_FALSE(p.hasGrad());
    }
  }
}

TEST_CASE("policy loss: zero alpha and constant critics give a flat objective") {
  SacConfig cfg;
  cfg.autoAlpha = false;
  cfg.initialAlpha = 0.0;
  auto agent = smallAgent(17, cfg);
  for (auto& q : agent.critic.online) makeConstant(q, 2.5);
  Rng rng(18);
  const Matrix s = rng.normalMatrix(16, 3);
  const auto objective = sacPolicyLoss(agent, s, rng.normalMatrix(16, 2), CriticScaling::raw);
  CHECK(objective.loss.item() == doctest::Approx(-2.5).epsilon(1e-14));
  agent.policy.zeroGrad();
  objective.loss.backward();
  double largest = 0.0;
  for (const auto& p : agent.policy.parameters()) largest = std::max(largest, p.grad().cwiseAbs().maxCoeff());
  CHECK(largest < 1e-12);
}

TEST_CASE("policy loss: swapping the twin critics leaves it unchanged") {
  auto agent = smallAgent(19);
  Rng rng(20);
  for (auto& q : agent.critic.online) widenOutput(q, rng);
  const Matrix s = rng.normalMatrix(32, 3);
  const Matrix noise = rng.normalMatrix(32, 2);
  const double before = sacPolicyLoss(agent, s, noise, CriticScaling::raw).loss.item();
  std::swap(agent.critic.online[0], agent.critic.online[1]);
  CHECK(sacPolicyLoss(agent, s, noise, CriticScaling::raw).loss.item() == before);
}

TEST_CASE("policy loss: a large alpha grows sigma monotonically from a narrow start") {
  // Under tanh squashing the entropy peaks at a finite sigma (about
  // exp(-0.15) for one dimension), so growth stops there rather than at the
  // logStd clamp.
  SacConfig cfg;
  cfg.autoAlpha = false;
  cfg.initialAlpha = 50.0;
  cfg.learningRate = 3e-3;
  auto agent = smallAgent(21, cfg, 3, 1);
  for (auto& q : agent.critic.online) makeConstant(q, 0.0);
  agent.policy.parameters().back().mutableValue()(0, 1) = -3.0;
  Rng rng(22);
  const Matrix s = rng.normalMatrix(256, 3);
  const Matrix noise = rng.normalMatrix(256, 1);
  const auto meanLogStd = [&] { return agent.policy.evaluate(s).col(1).mean(); };
  double last = meanLogStd();
  bool monotone = true;
  for (int step = 0; step < 300; ++step) {
    policyStep(agent, sacPolicyLoss(agent, s, noise, CriticScaling::raw));
    const double now = meanLogStd();
    // Monotone while well below the peak; Adam momentum overshoots near it.
    if (step < 60) monotone = monotone && now > last;
    last = now;
  }
  CHECK(monotone);
  CHECK(last > -0.5);
  CHECK(last < 0.2);
}

TEST_CASE("soft target update: single step, fixed point, geometric series") {
  Rng rng(23);
  Mlp online({2, 3, 1}, rng);
  Mlp target = online;
  for (auto& p : online.parameters()) p.mutableValue().setOnes();
  for (auto& p : target.parameters()) p.mutableValue().setZero();
  target.softUpdateFrom(online, 0.005);
  for (const auto& p : target.parameters()) CHECK(p.value().isConstant(0.005));

  Mlp same = online;
  same.softUpdateFrom(online, 0.005);
  for (const auto& p : same.parameters()) CHECK(p.value().isConstant(1.0));

  for (auto& p : target.parameters()) p.mutableValue().setZero();
  for (int i = 0; i < 1000; ++i) target.softUpdateFrom(online, 0.005);
  const double want = 1.0 - std::pow(0.995, 1000);
  CHECK(want == doctest::Approx(0.9933).epsilon(1e-4));
  for (const auto& p : target.parameters()) {
    CHECK((p.value().array() - want).abs().maxCoeff() < 1e-12);
  }

  TwinCritic twin;
  twin.online = {online, online};
  twin.target = {target, target};
  softTargetUpdate(twin, 0.5);
  CHECK(twin.target[1].parameters()[0].value()(0, 0) == doctest::Approx(0.5 + 0.5 * want));
}

TEST_CASE("alpha: zero gradient at the target entropy, grows when entropy is low") {
  auto agent = smallAgent(24);
  const double target = agent.targetEntropy();
  CHECK(target == -2.0);
  const double before = agent.alpha();
  CHECK(tuneAlpha(agent, Matrix::Constant(8, 1, -target)) == before);

  Tensor logAlpha = Tensor::scalar(std::log(0.5), true);
  alphaLoss(logAlpha, Matrix::Constant(8, 1, -target), target).backward();
  CHECK(logAlpha.grad()(0, 0) == 0.0);

  // logpi = 3 means entropy -3, below the target of -2.
  CHECK(tuneAlpha(agent, Matrix::Constant(8, 1, 3.0)) > before);
  auto other = smallAgent(24);
  CHECK(tuneAlpha(other, Matrix::Constant(8, 1, -5.0)) < before);
}

TEST_CASE("alpha: loss gradient matches finite differences") {
  Rng rng(25);
  const Matrix logProbs = rng.normalMatrix(10, 1);
  Tensor logAlpha = Tensor::scalar(-0.7, true);
  alphaLoss(logAlpha, logProbs, -2.0).backward();
  const auto check = checkGradients({logAlpha}, {logAlpha.grad()}, [&] {
    return alphaLoss(Tensor::scalar(logAlpha.item()), logProbs, -2.0).item();
  });
  CHECK(check.maxRelativeError <= 1e-6);
}

TEST_CASE("alpha: tuning on a stationary bandit settles the entropy near its target") {
  // One state, reward -20 (a - 0.3)^2, every step terminal.
  SacConfig cfg;
  cfg.hidden = {32, 32};
  cfg.learningRate = 1e-2;
  cfg.targetEntropy = -1.0;
  auto agent = smallAgent(26, cfg, 1, 1);
  Rng rng(27);
  const Index m = 256;
  const Matrix s = Matrix::Ones(m, 1);
  for (int step = 0; step < 500; ++step) {
    const Matrix a = rng.normalMatrix(m, 1).array().tanh().matrix();
    const Matrix r = -20.0 * (a.array() - 0.3).square().matrix();
    sacUpdate(agent, s, a, r, s, Matrix::Ones(m, 1), rng);
  }
  const auto sample = sampleActions(agent, Matrix::Ones(20000, 1), rng);
  const double entropy = -sample.logProbs.mean();
  CHECK(std::abs(entropy - (-1.0)) < 0.2);
}

namespace {

// Two one-hot states alternating 0 -> 1 -> 0 with reward 1 on leaving
// state 0; optionally state 1 instead ends the episode with reward 2.
// Dynamics ignore the action.
double trainToyChain(bool terminal, double q0, double q1) {
  SacConfig cfg;
  cfg.hidden = {32, 32};
  cfg.autoAlpha = false;
  cfg.initialAlpha = 0.0;
  cfg.learningRate = 1e-3;
  cfg.tau = 0.05;
  auto agent = smallAgent(28, cfg, 2, 1);
  Rng rng(29);
  const Index m = 32;
  for (int step = 0; step < 4000; ++step) {
    Matrix s(m, 2), s2(m, 2), r(m, 1), d(m, 1);
    for (Index i = 0; i < m; ++i) {
      const bool first = rng.uniform() < 0.5;
      s.row(i) << (first ? 1.0 : 0.0), (first ? 0.0 : 1.0);
      s2.row(i) << (first ? 0.0 : 1.0), (first ? 1.0 : 0.0);
      r(i, 0) = first ? 1.0 : (terminal ? 2.0 : 0.0);
      d(i, 0) = !first && terminal ? 1.0 : 0.0;
    }
    Matrix a(m, 1);
    for (Index i = 0; i < m; ++i) a(i, 0) = rng.uniform(-1.0, 1.0);
    sacUpdate(agent, s, a, r, s2, d, rng);
  }
  double worst = 0.0;
  for (double action : {-0.8, 0.0, 0.8}) {
    for (int k = 0; k < 2; ++k) {
      Matrix in(1, 3);
      in << (k == 0 ? 1.0 : 0.0), (k == 0 ? 0.0 : 1.0), action;
      const double want = k == 0 ? q0 : q1;
      for (const auto& q : agent.critic.online) {
        worst = std::max(worst, std::abs(q.evaluate(in)(0, 0) - want) / std::abs(want));
      }
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("toy chain: trained critics reproduce the analytic Q values") {
  const double g = 0.95;
  CHECK(trainToyChain(true, 1.0 + g * 2.0, 2.0) < 0.05);
  CHECK(trainToyChain(false, 1.0 / (1.0 - g * g), g / (1.0 - g * g)) < 0.05);
}

TEST_CASE("checkpoint: agents round-trip and continue bit-identically") {
  auto agent = smallAgent(30);
  Rng rng(31);
  const Matrix s = rng.normalMatrix(16, 3);
  const Matrix a = rng.normalMatrix(16, 2).array().tanh().matrix();
  const Matrix r = rng.normalMatrix(16, 1);
  const Matrix d = Matrix::Zero(16, 1);
  for (int i = 0; i < 5; ++i) sacUpdate(agent, s, a, r, s, d, rng);

  Archive archive;
  saveAgent(archive, "agent", agent);
  archive.put("rng", rng.serialize());
  auto restored = smallAgent(99);
  const auto loaded = Archive::fromBytes(archive.toBytes());
  loadAgent(loaded, "agent", restored);
  Rng rng2(0);
  rng2.deserialize(loaded.text("rng"));

  for (int i = 0; i < 5; ++i) {
    const auto x = sacUpdate(agent, s, a, r, s, d, rng);
    const auto y = sacUpdate(restored, s, a, r, s, d, rng2);
    CHECK(x.criticLoss == y.criticLoss);
    CHECK(x.policyLoss == y.policyLoss);
    CHECK(x.alpha == y.alpha);
  }
  CHECK(parameterHash(agent.policy) == parameterHash(restored.policy));
  CHECK(parameterHash(agent.critic.target[1]) == parameterHash(restored.critic.target[1]));

  SacConfig wide;
  wide.hidden = {4};
  Rng r3(1);
  SacAgent mismatched(5, 2, wide, r3);
  CHECK_THROWS(loadAgent(loaded, "agent", mismatched));
}
