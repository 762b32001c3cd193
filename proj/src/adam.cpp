#include "csac/adam.hpp"

#include <cmath>
#include <iostream>

namespace csac {

AdamState makeAdamState(std::span<const Tensor> params, const AdamConfig& config) {
  AdamState state;
  state.config = config;
  for (const auto& p : params) {
    state.firstMoment.push_back(Matrix::Zero(p.rows(), p.cols()));
    state.secondMoment.push_back(Matrix::Zero(p.rows(), p.cols()));
  }
  return state;
}

bool adamStep(std::span<Matrix* const> params, std::span<const Matrix> grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.firstMoment.size()) {
    throw ShapeError("adamStep: " + std::to_string(params.size()) + " params, " +
                     std::to_string(grads.size()) + " grads, state holds " +
                     std::to_string(state.firstMoment.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& m = state.firstMoment[i];
    if (params[i]->rows() != m.rows() || params[i]->cols() != m.cols() ||
        grads[i].rows() != m.rows() || grads[i].cols() != m.cols()) {
      throw ShapeError("adamStep: shape mismatch at parameter " + std::to_string(i));
    }
    if (!grads[i].allFinite()) {
      std::cerr << "adamStep: non-finite gradient in parameter " << i << ", step rejected\n";
      return false;
    }
  }

  const auto& c = state.config;
  state.stepCount += 1;
  const double t = static_cast<double>(state.stepCount);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.firstMoment[i];
    auto& v = state.secondMoment[i];
    m = c.beta1 * m + (1.0 - c.beta1) * grads[i];
    v = c.beta2 * v + (1.0 - c.beta2) * grads[i].cwiseProduct(grads[i]);
    params[i]->array() -= c.learningRate * (m.array() / correction1) /
                          ((v.array() / correction2).sqrt() + c.epsilon);
  }
  return true;
}

bool adamStep(std::span<Tensor> params, AdamState& state) {
  std::vector<Matrix*> values;
  std::vector<Matrix> grads;
  values.reserve(params.size());
  grads.reserve(params.size());
  for (auto& p : params) {
    values.push_back(&p.mutableValue());
    grads.push_back(p.grad());
  }
  return adamStep(std::span<Matrix* const>(values), std::span<const Matrix>(grads), state);
}

}  // namespace csac
