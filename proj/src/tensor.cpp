#include "csac/tensor.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

namespace csac {

namespace {

void accumulate(detail::Node& node, const Matrix& g) {
  if (!node.requiresGrad) return;
  if (node.grad.size() == 0) {
    node.grad = g;
  } else {
    node.grad += g;
  }
}

void requireSameShape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shapeString(a) + " vs " +
                     shapeString(b));
  }
}

}  // namespace

struct TensorAccess {
  static detail::Node& node(const Tensor& t) { return *t.node_; }
  static const std::shared_ptr<detail::Node>& ptr(const Tensor& t) { return t.node_; }
};

Tensor makeResult(Matrix value, std::vector<Tensor> parents,
                  std::function<void(detail::Node&)> backwardFn) {
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  for (const auto& p : parents) {
    if (p.requiresGrad()) node->requiresGrad = true;
  }
  if (node->requiresGrad) {
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(TensorAccess::ptr(p));
    node->backwardFn = std::move(backwardFn);
  }
  return Tensor(std::move(node));
}

Tensor::Tensor(Matrix value, bool requiresGrad) : node_(std::make_shared<detail::Node>()) {
  node_->value = std::move(value);
  node_->requiresGrad = requiresGrad;
}

Tensor Tensor::scalar(double v, bool requiresGrad) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return Tensor(std::move(m), requiresGrad);
}

Tensor Tensor::zeros(Index rows, Index cols, bool requiresGrad) {
  return Tensor(Matrix::Zero(rows, cols), requiresGrad);
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item: tensor is " + shapeString(*this) + ", not a scalar");
  return node_->value(0, 0);
}

Matrix Tensor::grad() const {
  if (node_->grad.size() == 0) return Matrix::Zero(rows(), cols());
  return node_->grad;
}

void Tensor::zeroGrad() { node_->grad = Matrix::Zero(rows(), cols()); }

Tensor Tensor::detach() const { return Tensor(node_->value, false); }

void Tensor::backward() const {
  if (size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got " + shapeString(*this));
  }
  if (!node_->requiresGrad) return;

  // Iterative post-order DFS; yields parents before children.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      detail::Node* p = n->parents[next++].get();
      if (p->requiresGrad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  // Interior nodes start clean on every pass; leaves keep accumulating.
  for (detail::Node* n : order) {
    if (n->backwardFn) n->grad.resize(0, 0);
  }
  node_->grad = Matrix::Ones(1, 1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backwardFn && n->grad.size() != 0) n->backwardFn(*n);
  }
  // Release interior gradients; they are meaningless after the pass.
  for (detail::Node* n : order) {
    if (n->backwardFn && n != node_.get()) n->grad.resize(0, 0);
  }
}

std::string shapeString(const Tensor& t) {
  std::ostringstream os;
  os << "[" << t.rows() << " x " << t.cols() << "]";
  return os.str();
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ " + shapeString(a) + " * " + shapeString(b));
  }
  Matrix out = a.value() * b.value();
  return makeResult(std::move(out), {a, b}, [](detail::Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requiresGrad) accumulate(pa, self.grad * pb.value.transpose());
    if (pb.requiresGrad) accumulate(pb, pa.value.transpose() * self.grad);
  });
}

Tensor addRowVector(const Tensor& x, const Tensor& row) {
  if (row.rows() != 1 || row.cols() != x.cols()) {
    throw ShapeError("addRowVector: row " + shapeString(row) + " does not broadcast over " +
                     shapeString(x));
  }
  Matrix out = x.value();
  out.rowwise() += row.value().row(0);
  return makeResult(std::move(out), {x, row}, [](detail::Node& self) {
    auto& px = *self.parents[0];
    auto& pr = *self.parents[1];
    if (px.requiresGrad) accumulate(px, self.grad);
    if (pr.requiresGrad) accumulate(pr, self.grad.colwise().sum());
  });
}

Tensor scaleBy(const Tensor& scalar, const Tensor& x) {
  if (scalar.size() != 1) throw ShapeError("scaleBy: factor must be 1 x 1, got " + shapeString(scalar));
  const double s = scalar.item();
  Matrix out = s * x.value();
  return makeResult(std::move(out), {scalar, x}, [](detail::Node& self) {
    auto& ps = *self.parents[0];
    auto& px = *self.parents[1];
    if (ps.requiresGrad) {
      Matrix g(1, 1);
      g(0, 0) = self.grad.cwiseProduct(px.value).sum();
      accumulate(ps, g);
    }
    if (px.requiresGrad) accumulate(px, ps.value(0, 0) * self.grad);
  });
}

Tensor concatCols(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("concatCols: row counts differ " + shapeString(a) + " vs " + shapeString(b));
  }
  Matrix out(a.rows(), a.cols() + b.cols());
  out.leftCols(a.cols()) = a.value();
  out.rightCols(b.cols()) = b.value();
  const Index split = a.cols();
  return makeResult(std::move(out), {a, b}, [split](detail::Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requiresGrad) accumulate(pa, self.grad.leftCols(split));
    if (pb.requiresGrad) accumulate(pb, self.grad.rightCols(self.grad.cols() - split));
  });
}

Tensor sliceCols(const Tensor& x, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > x.cols()) {
    throw ShapeError("sliceCols: columns [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") out of range for " + shapeString(x));
  }
  Matrix out = x.value().middleCols(start, count);
  return makeResult(std::move(out), {x}, [start, count](detail::Node& self) {
    auto& px = *self.parents[0];
    Matrix g = Matrix::Zero(px.value.rows(), px.value.cols());
    g.middleCols(start, count) = self.grad;
    accumulate(px, g);
  });
}

Tensor operator+(const Tensor& a, const Tensor& b) {
  requireSameShape(a, b, "add");
  return makeResult(a.value() + b.value(), {a, b}, [](detail::Node& self) {
    accumulate(*self.parents[0], self.grad);
    accumulate(*self.parents[1], self.grad);
  });
}

Tensor operator-(const Tensor& a, const Tensor& b) {
  requireSameShape(a, b, "sub");
  return makeResult(a.value() - b.value(), {a, b}, [](detail::Node& self) {
    accumulate(*self.parents[0], self.grad);
    accumulate(*self.parents[1], -self.grad);
  });
}

Tensor operator*(const Tensor& a, const Tensor& b) {
  requireSameShape(a, b, "mul");
  return makeResult(a.value().cwiseProduct(b.value()), {a, b}, [](detail::Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requiresGrad) accumulate(pa, self.grad.cwiseProduct(pb.value));
    if (pb.requiresGrad) accumulate(pb, self.grad.cwiseProduct(pa.value));
  });
}

Tensor operator-(const Tensor& a) { return affine(a, -1.0, 0.0); }
Tensor operator*(double s, const Tensor& x) { return affine(x, s, 0.0); }
Tensor operator*(const Tensor& x, double s) { return affine(x, s, 0.0); }
Tensor operator+(const Tensor& x, double s) { return affine(x, 1.0, s); }
Tensor operator-(const Tensor& x, double s) { return affine(x, 1.0, -s); }

Tensor affine(const Tensor& x, double scale, double shift) {
  Matrix out = (scale * x.value()).array() + shift;
  return makeResult(std::move(out), {x}, [scale](detail::Node& self) {
    accumulate(*self.parents[0], scale * self.grad);
  });
}

Tensor relu(const Tensor& x) {
  Matrix out = x.value().cwiseMax(0.0);
  return makeResult(std::move(out), {x}, [](detail::Node& self) {
    auto& px = *self.parents[0];
    accumulate(px, (px.value.array() > 0.0).select(self.grad.array(), 0.0).matrix());
  });
}

Tensor tanh(const Tensor& x) {
  Matrix out = x.value().array().tanh().matrix();
  return makeResult(std::move(out), {x}, [](detail::Node& self) {
    Matrix local = (1.0 - self.value.array().square()).matrix();
    accumulate(*self.parents[0], self.grad.cwiseProduct(local));
  });
}

Tensor exp(const Tensor& x) {
  Matrix out = x.value().array().exp().matrix();
  return makeResult(std::move(out), {x}, [](detail::Node& self) {
    accumulate(*self.parents[0], self.grad.cwiseProduct(self.value));
  });
}

Tensor log(const Tensor& x) {
  Matrix out = x.value().array().log().matrix();
  return makeResult(std::move(out), {x}, [](detail::Node& self) {
    auto& px = *self.parents[0];
    accumulate(px, self.grad.cwiseQuotient(px.value));
  });
}

Tensor square(const Tensor& x) {
  Matrix out = x.value().array().square().matrix();
  return makeResult(std::move(out), {x}, [](detail::Node& self) {
    auto& px = *self.parents[0];
    accumulate(px, 2.0 * self.grad.cwiseProduct(px.value));
  });
}

Tensor softplus(const Tensor& x) {
  // log(1 + e^x) = max(x, 0) + log1p(e^-|x|)
  Matrix out = x.value().unaryExpr([](double v) {
    return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v)));
  });
  return makeResult(std::move(out), {x}, [](detail::Node& self) {
    auto& px = *self.parents[0];
    Matrix sig = px.value.unaryExpr([](double v) {
      return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    });
    accumulate(px, self.grad.cwiseProduct(sig));
  });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  Matrix out = x.value().cwiseMax(lo).cwiseMin(hi);
  return makeResult(std::move(out), {x}, [lo, hi](detail::Node& self) {
    auto& px = *self.parents[0];
    Matrix g = ((px.value.array() >= lo) && (px.value.array() <= hi)).select(self.grad.array(), 0.0).matrix();
    accumulate(px, g);
  });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
  requireSameShape(a, b, "minimum");
  Matrix out = a.value().cwiseMin(b.value());
  // Ties route the gradient to the first argument.
  return makeResult(std::move(out), {a, b}, [](detail::Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    auto takeA = (pa.value.array() <= pb.value.array());
    if (pa.requiresGrad) accumulate(pa, takeA.select(self.grad.array(), 0.0).matrix());
    if (pb.requiresGrad) accumulate(pb, takeA.select(0.0, self.grad.array()).matrix());
  });
}

Tensor sum(const Tensor& x) {
  Matrix out(1, 1);
  out(0, 0) = x.value().sum();
  return makeResult(std::move(out), {x}, [](detail::Node& self) {
    auto& px = *self.parents[0];
    accumulate(px, Matrix::Constant(px.value.rows(), px.value.cols(), self.grad(0, 0)));
  });
}

Tensor mean(const Tensor& x) {
  if (x.size() == 0) throw ShapeError("mean: empty tensor");
  return sum(x) * (1.0 / static_cast<double>(x.size()));
}

Tensor rowSum(const Tensor& x) {
  Matrix out = x.value().rowwise().sum();
  return makeResult(std::move(out), {x}, [](detail::Node& self) {
    auto& px = *self.parents[0];
    Matrix g(px.value.rows(), px.value.cols());
    g.colwise() = self.grad.col(0);
    accumulate(px, g);
  });
}

}  // namespace csac
