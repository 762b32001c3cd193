#pragma once

#include "csac/tensor.hpp"

namespace csac {

// Added to the batch range so a constant batch maps to all zeros.
inline constexpr double kNormalizeEpsilon = 1e-8;

// (q - min) / (max - min + eps) over the rows of an M x 1 column. The batch
// min and max are treated as constants: gradients flow per sample, scaled by
// 1 / (max - min + eps), never through the argmin/argmax.
Tensor normalizeOverBatch(const Tensor& q);
Matrix normalizeOverBatch(const Matrix& q);

// eta * qSelf + (1 - eta) * qNext. Throws std::invalid_argument unless
// 0 <= eta <= 1 and the shapes agree.
Tensor convexCombine(const Tensor& qSelf, const Tensor& qNext, double eta);

}  // namespace csac
