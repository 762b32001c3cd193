#include "csac/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace csac {

namespace {

Matrix uniformMatrix(Index rows, Index cols, double bound, Rng& rng) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
  }
  return m;
}

}  // namespace

Mlp::Mlp(std::vector<std::size_t> layerSizes, Rng& rng, double outputInitScale)
    : sizes_(std::move(layerSizes)) {
  if (sizes_.size() < 2) throw std::invalid_argument("Mlp: need at least input and output widths");
  for (std::size_t w : sizes_) {
    if (w == 0) throw std::invalid_argument("Mlp: zero-width layer");
  }
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const auto in = static_cast<Index>(sizes_[l]);
    const auto out = static_cast<Index>(sizes_[l + 1]);
    const bool last = l + 2 == sizes_.size();
    const double bound = last ? outputInitScale : 1.0 / std::sqrt(static_cast<double>(in));
    Linear layer;
    layer.weight = Tensor(uniformMatrix(in, out, bound, rng), true);
    layer.bias = Tensor(last ? uniformMatrix(1, out, bound, rng) : Matrix::Constant(1, out, 0.1), true);
    layers_.push_back(std::move(layer));
  }
}

Mlp::Mlp(const Mlp& other) : sizes_(other.sizes_) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) {
    layers_.push_back({Tensor(l.weight.value(), true), Tensor(l.bias.value(), true)});
  }
}

Mlp& Mlp::operator=(const Mlp& other) {
  if (this != &other) {
    Mlp copy(other);
    *this = std::move(copy);
  }
  return *this;
}

Tensor Mlp::forward(const Tensor& input) const { return run(input, false); }

Tensor Mlp::forwardFrozen(const Tensor& input) const { return run(input, true); }

Matrix Mlp::evaluate(const Matrix& input) const {
  if (static_cast<std::size_t>(input.cols()) != inputWidth()) {
    throw ShapeError("Mlp::evaluate: input has " + std::to_string(input.cols()) +
                     " columns but network expects " + std::to_string(inputWidth()));
  }
  Matrix h = input;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Matrix next = h * layers_[l].weight.value();
    next.rowwise() += layers_[l].bias.value().row(0);
    if (l + 1 < layers_.size()) next = next.cwiseMax(0.0);
    h = std::move(next);
  }
  return h;
}

Tensor Mlp::run(const Tensor& input, bool frozen) const {
  if (static_cast<std::size_t>(input.cols()) != inputWidth()) {
    throw ShapeError("Mlp::forward: input " + shapeString(input) + " but network expects " +
                     std::to_string(inputWidth()) + " columns");
  }
  Tensor h = input;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    const Tensor w = frozen ? layer.weight.detach() : layer.weight;
    const Tensor b = frozen ? layer.bias.detach() : layer.bias;
    h = addRowVector(matmul(h, w), b);
    if (l + 1 < layers_.size()) h = relu(h);
  }
  return h;
}

std::size_t Mlp::parameterCount() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) n += sizes_[l] * sizes_[l + 1] + sizes_[l + 1];
  return n;
}

std::vector<Tensor> Mlp::parameters() const {
  std::vector<Tensor> out;
  out.reserve(layers_.size() * 2);
  for (const auto& l : layers_) {
    out.push_back(l.weight);
    out.push_back(l.bias);
  }
  return out;
}

void Mlp::zeroGrad() {
  for (auto& l : layers_) {
    l.weight.zeroGrad();
    l.bias.zeroGrad();
  }
}

void Mlp::softUpdateFrom(const Mlp& source, double tau) {
  if (source.sizes_ != sizes_) throw std::invalid_argument("softUpdateFrom: architectures differ");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    auto& w = layers_[l].weight.mutableValue();
    auto& b = layers_[l].bias.mutableValue();
    w = (1.0 - tau) * w + tau * source.layers_[l].weight.value();
    b = (1.0 - tau) * b + tau * source.layers_[l].bias.value();
  }
}

void Mlp::copyValuesFrom(const Mlp& source) {
  if (source.sizes_ != sizes_) throw std::invalid_argument("copyValuesFrom: architectures differ");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    layers_[l].weight.mutableValue() = source.layers_[l].weight.value();
    layers_[l].bias.mutableValue() = source.layers_[l].bias.value();
  }
}

}  // namespace csac
