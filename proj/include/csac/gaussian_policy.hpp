#pragma once

#include "csac/tensor.hpp"

namespace csac {

struct LogStdBounds {
  double lo = -20.0;
  double hi = 2.0;
};

// Raw network outputs for a diagonal Gaussian before squashing.
struct GaussianPolicyHead {
  Tensor mean;    // batch x actionDim
  Tensor logStd;  // batch x actionDim, clamped before use
  LogStdBounds bounds{};
};

struct SquashedSample {
  Tensor action;   // tanh(mean + std * noise), each entry in (-1, 1)
  Tensor logProb;  // batch x 1, includes the tanh change of variables
};

// Reparameterized draw: gradients reach mean and logStd through both the
// action and the log-density. Throws on non-finite head outputs or when the
// noise shape differs from the head.
SquashedSample sampleSquashedGaussian(const GaussianPolicyHead& head, const Matrix& noise);

// tanh(mean); the action used for deterministic evaluation.
Matrix deterministicAction(const GaussianPolicyHead& head);

}  // namespace csac
