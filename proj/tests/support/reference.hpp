#pragma once

// Value-only re-implementations used as oracles. Plain loops and std::
// math; none of this touches the autodiff graph.

#include "csac/mlp.hpp"
#include "csac/sac.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace csac::testing {

inline Matrix referenceForward(const Mlp& net, const Matrix& x) {
  const auto params = net.parameters();
  Matrix h = x;
  for (std::size_t l = 0; l < params.size() / 2; ++l) {
    const Matrix& w = params[2 * l].value();
    const Matrix& b = params[2 * l + 1].value();
    Matrix out(h.rows(), w.cols());
    for (Index i = 0; i < h.rows(); ++i) {
      for (Index k = 0; k < w.cols(); ++k) {
        double acc = b(0, k);
        for (Index j = 0; j < w.rows(); ++j) acc += h(i, j) * w(j, k);
        const bool hidden = l + 1 < params.size() / 2;
        out(i, k) = hidden && acc < 0.0 ? 0.0 : acc;
      }
    }
    h = out;
  }
  return h;
}

struct ReferenceSample {
  Matrix actions;
  Matrix logProbs;
};

inline ReferenceSample referenceSquashed(const Matrix& policyOut, const Matrix& noise,
                                         LogStdBounds bounds = {}) {
  const Index m = noise.rows();
  const Index d = noise.cols();
  ReferenceSample out{Matrix(m, d), Matrix::Zero(m, 1)};
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < d; ++j) {
      const double mu = policyOut(i, j);
      const double logStd = std::min(std::max(policyOut(i, d + j), bounds.lo), bounds.hi);
      const double u = mu + std::exp(logStd) * noise(i, j);
      const double a = std::tanh(u);
      out.actions(i, j) = std::min(std::max(a, -(1.0 - 1e-12)), 1.0 - 1e-12);
      // log N(u) - log(1 - tanh(u)^2), the latter via log(4) - 2|u| - 2 log(1 + e^{-2|u|}).
      const double logJac = 2.0 * std::numbers::ln2 - 2.0 * std::abs(u) -
                            2.0 * std::log1p(std::exp(-2.0 * std::abs(u)));
      out.logProbs(i, 0) += -0.5 * noise(i, j) * noise(i, j) -
                            0.5 * std::log(2.0 * std::numbers::pi) - logStd - logJac;
    }
  }
  return out;
}

inline Matrix referenceTwinMin(const std::array<Mlp, 2>& critics, const Matrix& states,
                               const Matrix& actions) {
  Matrix input(states.rows(), states.cols() + actions.cols());
  input << states, actions;
  const Matrix a = referenceForward(critics[0], input);
  const Matrix b = referenceForward(critics[1], input);
  Matrix out(states.rows(), 1);
  for (Index i = 0; i < states.rows(); ++i) out(i, 0) = std::min(a(i, 0), b(i, 0));
  return out;
}

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

// Batch normalization with the range either measured (ranges empty on
// entry, filled on exit) or supplied, which holds min/max fixed under
// perturbation exactly as the analytic gradient assumes.
inline Matrix referenceNormalize(const Matrix& q, Range* range, bool measure) {
  if (measure) {
    range->lo = q.minCoeff();
    range->hi = q.maxCoeff();
  }
  Matrix out(q.rows(), 1);
  for (Index i = 0; i < q.rows(); ++i) {
    out(i, 0) = (q(i, 0) - range->lo) / (range->hi - range->lo + 1e-8);
  }
  return out;
}

// (1/M) sum(alpha logpi - C) with C = eta Q'_self + (1 - eta) Q'_next, or
// the raw/normalized own critic when `next` is null.
inline double referencePolicyLoss(const SacAgent& self, const TwinCritic* next, double eta,
                                  bool normalize, const Matrix& states, const Matrix& noise,
                                  double alpha, std::vector<Range>& ranges) {
  const bool measure = ranges.empty();
  if (measure) ranges.resize(2);
  const auto sample =
      referenceSquashed(referenceForward(self.policy, states), noise, self.config().logStdBounds);
  Matrix own = referenceTwinMin(self.critic.online, states, sample.actions);
  if (normalize || next != nullptr) own = referenceNormalize(own, &ranges[0], measure);
  Matrix critic = own;
  if (next != nullptr) {
    Matrix other = referenceTwinMin(next->online, states, sample.actions);
    other = referenceNormalize(other, &ranges[1], measure);
    for (Index i = 0; i < critic.rows(); ++i) {
      critic(i, 0) = eta * own(i, 0) + (1.0 - eta) * other(i, 0);
    }
  }
  double total = 0.0;
  for (Index i = 0; i < states.rows(); ++i) total += alpha * sample.logProbs(i, 0) - critic(i, 0);
  return total / static_cast<double>(states.rows());
}

// Mean squared Bellman error by direct summation.
inline double referenceCriticLoss(const Mlp& q, const Matrix& states, const Matrix& actions,
                                  const Matrix& targets) {
  Matrix input(states.rows(), states.cols() + actions.cols());
  input << states, actions;
  const Matrix values = referenceForward(q, input);
  double total = 0.0;
  for (Index i = 0; i < states.rows(); ++i) {
    const double e = values(i, 0) - targets(i, 0);
    total += e * e;
  }
  return total / static_cast<double>(states.rows());
}

}  // namespace csac::testing
