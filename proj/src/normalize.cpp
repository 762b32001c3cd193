#include "csac/normalize.hpp"

#include <stdexcept>
#include <string>

namespace csac {

Tensor normalizeOverBatch(const Tensor& q) {
  if (q.cols() != 1 || q.rows() < 1) {
    throw ShapeError("normalizeOverBatch: expected an M x 1 column, got " + shapeString(q));
  }
  const double lo = q.value().minCoeff();
  const double hi = q.value().maxCoeff();
  return (q - lo) * (1.0 / (hi - lo + kNormalizeEpsilon));
}

Matrix normalizeOverBatch(const Matrix& q) { return normalizeOverBatch(Tensor(q)).value(); }

Tensor convexCombine(const Tensor& qSelf, const Tensor& qNext, double eta) {
  if (!(eta >= 0.0 && eta <= 1.0)) {
    throw std::invalid_argument("convexCombine: cooperative ratio " + std::to_string(eta) +
                                " outside [0, 1]");
  }
  if (qSelf.shape() != qNext.shape()) {
    throw ShapeError("convexCombine: " + shapeString(qSelf) + " vs " + shapeString(qNext));
  }
  return eta * qSelf + (1.0 - eta) * qNext;
}

}  // namespace csac
