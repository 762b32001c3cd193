#pragma once

#include "csac/rng.hpp"
#include "csac/tensor.hpp"

#include <cstddef>
#include <vector>

namespace csac {

struct Linear {
  Tensor weight;  // in x out
  Tensor bias;    // 1 x out
};

// Fully connected network with ReLU hidden layers and a linear output.
// Copies are deep: a copied Mlp owns fresh parameter nodes.
class Mlp {
 public:
  Mlp() = default;
  // Hidden layers use fan-in uniform init; the output layer is drawn from
  // U(-outputInitScale, outputInitScale) so initial outputs sit near zero.
  Mlp(std::vector<std::size_t> layerSizes, Rng& rng, double outputInitScale = 3e-3);

  Mlp(const Mlp& other);
  Mlp& operator=(const Mlp& other);
  Mlp(Mlp&&) noexcept = default;
  Mlp& operator=(Mlp&&) noexcept = default;

  // Records the graph for backward. Throws ShapeError on width mismatch.
  Tensor forward(const Tensor& input) const;
  // Same arithmetic with parameters cut from the graph: gradients still
  // flow to the input, never into this network.
  Tensor forwardFrozen(const Tensor& input) const;
  // Plain values, no graph at all.
  Matrix evaluate(const Matrix& input) const;

  const std::vector<std::size_t>& layerSizes() const { return sizes_; }
  std::size_t inputWidth() const { return sizes_.front(); }
  std::size_t outputWidth() const { return sizes_.back(); }
  std::size_t parameterCount() const;

  // Weight and bias of every layer, in order.
  std::vector<Tensor> parameters() const;
  void zeroGrad();

  // target <- (1 - tau) * target + tau * source, elementwise.
  void softUpdateFrom(const Mlp& source, double tau);
  void copyValuesFrom(const Mlp& source);

 private:
  Tensor run(const Tensor& input, bool frozen) const;

  std::vector<std::size_t> sizes_;
  std::vector<Linear> layers_;
};

}  // namespace csac
