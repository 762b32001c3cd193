#pragma once

#include "csac/tensor.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace csac {

struct AdamConfig {
  double learningRate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::uint64_t stepCount = 0;
  std::vector<Matrix> firstMoment;
  std::vector<Matrix> secondMoment;
};

AdamState makeAdamState(std::span<const Tensor> params, const AdamConfig& config = {});

// One bias-corrected Adam update. Returns false and leaves params and state
// untouched if any gradient entry is non-finite (a diagnostic goes to
// stderr). Throws ShapeError when shapes disagree with the state.
bool adamStep(std::span<Matrix* const> params, std::span<const Matrix> grads, AdamState& state);

// Convenience: reads each tensor's accumulated gradient.
bool adamStep(std::span<Tensor> params, AdamState& state);

}  // namespace csac
