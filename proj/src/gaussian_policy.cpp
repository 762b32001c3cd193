#include "csac/gaussian_policy.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace csac {

SquashedSample sampleSquashedGaussian(const GaussianPolicyHead& head, const Matrix& noise) {
  if (head.mean.rows() != head.logStd.rows() || head.mean.cols() != head.logStd.cols()) {
    throw ShapeError("sampleSquashedGaussian: mean " + shapeString(head.mean) + " vs logStd " +
                     shapeString(head.logStd));
  }
  if (noise.rows() != head.mean.rows() || noise.cols() != head.mean.cols()) {
    throw ShapeError("sampleSquashedGaussian: noise has shape [" + std::to_string(noise.rows()) +
                     " x " + std::to_string(noise.cols()) + "], head " + shapeString(head.mean));
  }
  if (!head.mean.value().allFinite() || !head.logStd.value().allFinite()) {
    throw std::domain_error("sampleSquashedGaussian: non-finite mean or logStd");
  }

  const Tensor logStd = clamp(head.logStd, head.bounds.lo, head.bounds.hi);
  const Tensor eps(noise);
  const Tensor preTanh = head.mean + exp(logStd) * eps;
  // Saturated tanh rounds to +-1 in double precision; keep actions open.
  constexpr double kEdge = 1.0 - 1e-12;
  const Tensor action = clamp(tanh(preTanh), -kEdge, kEdge);

  // log N(u; mean, std) with (u - mean) / std == noise.
  const double halfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);
  const Tensor gaussianTerm = affine(Tensor(noise.cwiseProduct(noise)), -0.5, -halfLog2Pi) - logStd;
  // log(1 - tanh(u)^2) = 2 * (log 2 - u - softplus(-2u)), stable for large |u|.
  const Tensor squashTerm = 2.0 * (affine(preTanh, -1.0, std::numbers::ln2) - softplus(-2.0 * preTanh));
  const Tensor logProb = rowSum(gaussianTerm - squashTerm);
  return {action, logProb};
}

Matrix deterministicAction(const GaussianPolicyHead& head) {
  constexpr double kEdge = 1.0 - 1e-12;
  return head.mean.value().array().tanh().cwiseMax(-kEdge).cwiseMin(kEdge).matrix();
}

}  // namespace csac
