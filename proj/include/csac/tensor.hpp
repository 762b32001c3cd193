#pragma once

// Dense 2-D tensors with tape-free reverse-mode automatic differentiation.
//
// A Tensor is a cheap handle onto a graph node. Operations on tensors that
// require gradients record their parents and a local backward rule; calling
// backward() on a scalar walks the recorded graph in reverse topological
// order. Every tensor is rank 2 (rows = batch, cols = features); scalars are
// 1x1.

#include <Eigen/Core>

#include <array>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace csac {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {
struct Node {
  Matrix value;
  Matrix grad;  // empty until a backward pass reaches this node
  bool requiresGrad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backwardFn;  // pushes this->grad into parents
};
}  // namespace detail

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Matrix value, bool requiresGrad = false);

  static Tensor scalar(double v, bool requiresGrad = false);
  static Tensor zeros(Index rows, Index cols, bool requiresGrad = false);

  bool defined() const { return static_cast<bool>(node_); }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  std::array<Index, 2> shape() const { return {rows(), cols()}; }
  Index size() const { return node_->value.size(); }

  const Matrix& value() const { return node_->value; }
  // Direct mutation is meant for optimizers and parameter surgery only;
  // it does not invalidate graphs already built from this tensor.
  Matrix& mutableValue() { return node_->value; }
  double item() const;

  bool requiresGrad() const { return node_->requiresGrad; }
  bool hasGrad() const { return node_->grad.size() != 0; }
  // Zeros of the right shape when no gradient has been accumulated yet.
  Matrix grad() const;
  void zeroGrad();

  // Reverse pass from a scalar. Leaf gradients accumulate, so callers zero
  // them (zeroGrad) before each pass to get d(loss)/d(leaf) exactly.
  void backward() const;

  // Same values, cut from the graph.
  Tensor detach() const;

  bool sameNode(const Tensor& other) const { return node_ == other.node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  friend Tensor makeResult(Matrix value, std::vector<Tensor> parents,
                           std::function<void(detail::Node&)> backwardFn);
  friend struct TensorAccess;

  std::shared_ptr<detail::Node> node_;
};

std::string shapeString(const Tensor& t);

// Linear algebra and broadcasting.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor addRowVector(const Tensor& x, const Tensor& row);  // row: 1 x cols
Tensor scaleBy(const Tensor& scalar, const Tensor& x);    // scalar: 1 x 1
Tensor concatCols(const Tensor& a, const Tensor& b);
Tensor sliceCols(const Tensor& x, Index start, Index count);

// Elementwise.
Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a);
Tensor operator*(double s, const Tensor& x);
Tensor operator*(const Tensor& x, double s);
Tensor operator+(const Tensor& x, double s);
Tensor operator-(const Tensor& x, double s);
Tensor affine(const Tensor& x, double scale, double shift);  // scale*x + shift
Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor square(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor clamp(const Tensor& x, double lo, double hi);
Tensor minimum(const Tensor& a, const Tensor& b);

// Reductions.
Tensor sum(const Tensor& x);      // -> 1 x 1
Tensor mean(const Tensor& x);     // -> 1 x 1
Tensor rowSum(const Tensor& x);   // -> rows x 1

}  // namespace csac
