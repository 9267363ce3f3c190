#pragma once

// Reverse-mode automatic differentiation over dense row-major tensors.
//
// A BasicTape records every operation applied to its Vars. Node inputs always
// precede the node itself, so backward() is a single reverse sweep. Constants
// (data, masks, Gumbel noise) are leaves that never receive gradients.

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "uae/error.hpp"

namespace uae::ad {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Stand-in for -inf. exp() of it is exactly zero and it never produces NaN
// when shifted by a finite amount.
template <typename Scalar>
constexpr Scalar neg_inf() noexcept {
  return std::numeric_limits<Scalar>::lowest();
}

template <typename Scalar>
constexpr bool is_neg_inf(Scalar x) noexcept {
  return x <= neg_inf<Scalar>();
}

inline Index numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

inline std::string to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

// Dense tensor. Storage is a row-major matrix whose column count is the last
// dimension and whose row count is the product of all leading dimensions.
template <typename Scalar>
class Tensor {
 public:
  using MatrixType = Matrix<Scalar>;

  Tensor() : Tensor(Shape{}, MatrixType::Zero(1, 1)) {}

  Tensor(Shape shape, MatrixType data) : shape_(std::move(shape)), data_(std::move(data)) {
    const Index last = shape_.empty() ? 1 : shape_.back();
    const Index n = numel(shape_);
    if (data_.size() != n || (n > 0 && data_.cols() != last)) {
      throw ContractError("tensor data " + std::to_string(data_.rows()) + "x" +
                          std::to_string(data_.cols()) + " does not match shape " + to_string(shape_));
    }
  }

  // Shape is read before the move; argument evaluation order is unspecified.
  explicit Tensor(MatrixType m) : shape_{m.rows(), m.cols()}, data_(std::move(m)) {}

  static Tensor scalar(Scalar v) { return Tensor(Shape{}, MatrixType::Constant(1, 1, v)); }

  static Tensor vector(std::span<const Scalar> values) {
    MatrixType m(1, static_cast<Index>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i) m(0, static_cast<Index>(i)) = values[i];
    return Tensor(Shape{static_cast<Index>(values.size())}, std::move(m));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  Index size() const noexcept { return data_.size(); }
  Index rows() const noexcept { return data_.rows(); }
  Index cols() const noexcept { return data_.cols(); }

  MatrixType& data() noexcept { return data_; }
  const MatrixType& data() const noexcept { return data_; }

  Scalar item() const {
    if (data_.size() != 1) throw ContractError("item() on tensor of shape " + to_string(shape_));
    return data_(0, 0);
  }

  Scalar operator[](Index flat) const { return data_.data()[flat]; }

 private:
  Shape shape_;
  MatrixType data_;
};

template <typename Scalar>
class BasicTape;

// Handle to a node on a tape.
template <typename Scalar>
class Var {
 public:
  Var() = default;
  Var(BasicTape<Scalar>* tape, std::size_t id) : tape_(tape), id_(id) {}

  BasicTape<Scalar>* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }

  const Tensor<Scalar>& tensor() const { return tape_->value(id_); }
  const Matrix<Scalar>& value() const { return tape_->value(id_).data(); }
  const Shape& shape() const { return tape_->value(id_).shape(); }
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  Scalar item() const { return tape_->value(id_).item(); }
  bool requires_grad() const { return tape_->requires_grad(id_); }

 private:
  BasicTape<Scalar>* tape_ = nullptr;
  std::size_t id_ = 0;
};

template <typename Scalar>
class BasicTape {
 public:
  using MatrixType = Matrix<Scalar>;
  using TensorType = Tensor<Scalar>;
  using VarType = Var<Scalar>;
  using BackwardFn = std::function<void(BasicTape&, std::size_t)>;

  BasicTape() = default;
  BasicTape(const BasicTape&) = delete;
  BasicTape& operator=(const BasicTape&) = delete;

  VarType constant(TensorType value) { return push(std::move(value), {}, {}, false); }
  VarType constant(MatrixType value) { return constant(TensorType(std::move(value))); }

  VarType parameter(TensorType value) { return push(std::move(value), {}, {}, true); }
  VarType parameter(MatrixType value) { return parameter(TensorType(std::move(value))); }

  // Appends an op node. The backward function is dropped when no input needs a gradient.
  VarType record(TensorType value, std::vector<std::size_t> inputs, BackwardFn backward) {
    bool needs = false;
    for (std::size_t in : inputs) {
      if (in >= nodes_.size()) throw ContractError("op input refers to a later node");
      needs = needs || nodes_[in].requires_grad;
    }
    if (!needs) backward = nullptr;
    return push(std::move(value), std::move(inputs), std::move(backward), needs);
  }

  std::size_t size() const noexcept { return nodes_.size(); }
  const TensorType& value(std::size_t id) const { return nodes_.at(id).value; }
  const MatrixType& data(std::size_t id) const { return nodes_[id].value.data(); }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_.at(id).inputs; }

  bool has_grad(std::size_t id) const { return nodes_.at(id).grad.size() != 0; }

  // Upstream gradient of a node, valid inside backward closures.
  const MatrixType& grad_ref(std::size_t id) const { return nodes_[id].grad; }

  MatrixType grad(const VarType& v) const { return grad(v.id()); }
  MatrixType grad(std::size_t id) const {
    const auto& node = nodes_.at(id);
    if (node.grad.size() != 0) return node.grad;
    return MatrixType::Zero(node.value.rows(), node.value.cols());
  }

  template <typename Derived>
  void accumulate(std::size_t id, const Eigen::MatrixBase<Derived>& g) {
    auto& node = nodes_[id];
    if (!node.requires_grad) return;
    if (node.grad.size() == 0) {
      node.grad = g;
    } else {
      node.grad += g;
    }
  }

  void backward(const VarType& loss) {
    if (loss.tape() != this) throw ContractError("loss belongs to another tape");
    const std::size_t root = loss.id();
    if (nodes_.at(root).value.size() != 1) {
      throw ContractError("backward() needs a scalar loss, got shape " + to_string(nodes_[root].value.shape()));
    }
    for (auto& node : nodes_) node.grad.resize(0, 0);
    nodes_[root].grad = MatrixType::Ones(nodes_[root].value.rows(), nodes_[root].value.cols());
    for (std::size_t id = root + 1; id-- > 0;) {
      auto& node = nodes_[id];
      if (node.backward && node.grad.size() != 0) node.backward(*this, id);
    }
  }

 private:
  struct Node {
    TensorType value;
    MatrixType grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
  };

  VarType push(TensorType value, std::vector<std::size_t> inputs, BackwardFn backward, bool requires_grad) {
    nodes_.push_back(Node{std::move(value), MatrixType(), std::move(inputs), std::move(backward), requires_grad});
    return VarType(this, nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
};

using Tape = BasicTape<double>;
using Variable = Var<double>;
using Tensord = Tensor<double>;
using Matrixd = Matrix<double>;

namespace detail {

template <typename Scalar>
BasicTape<Scalar>& tape_of(const Var<Scalar>& a, const Var<Scalar>& b) {
  if (a.tape() == nullptr || a.tape() != b.tape()) throw ContractError("operands live on different tapes");
  return *a.tape();
}

template <typename Scalar>
void require_same_shape(const Var<Scalar>& a, const Var<Scalar>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ContractError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}

// Shape with the last axis replaced.
inline Shape with_last(Shape shape, Index last) {
  if (shape.empty()) return Shape{last};
  shape.back() = last;
  return shape;
}

template <typename Scalar, typename F>
Var<Scalar> unary(const Var<Scalar>& a, Matrix<Scalar> out, F&& local_grad) {
  auto& tape = *a.tape();
  const std::size_t ia = a.id();
  return tape.record(Tensor<Scalar>(a.shape(), std::move(out)), {ia},
                     [ia, local_grad = std::forward<F>(local_grad)](BasicTape<Scalar>& t, std::size_t self) {
                       t.accumulate(ia, local_grad(t, self));
                     });
}

}  // namespace detail

template <typename Scalar>
Var<Scalar> matmul(const Var<Scalar>& a, const Var<Scalar>& b) {
  auto& tape = detail::tape_of(a, b);
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.cols() != b.rows()) {
    throw ContractError("matmul: cannot multiply " + to_string(a.shape()) + " by " + to_string(b.shape()));
  }
  Matrix<Scalar> out;
  out.noalias() = a.value() * b.value();
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record(Tensor<Scalar>(std::move(out)), {ia, ib}, [ia, ib](BasicTape<Scalar>& t, std::size_t self) {
    const auto& g = t.grad_ref(self);
    if (t.requires_grad(ia)) {
      Matrix<Scalar> da;
      da.noalias() = g * t.data(ib).transpose();
      t.accumulate(ia, da);
    }
    if (t.requires_grad(ib)) {
      Matrix<Scalar> db;
      db.noalias() = t.data(ia).transpose() * g;
      t.accumulate(ib, db);
    }
  });
}

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b) {
  auto& tape = detail::tape_of(a, b);
  detail::require_same_shape(a, b, "add");
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record(Tensor<Scalar>(a.shape(), a.value() + b.value()), {ia, ib},
                     [ia, ib](BasicTape<Scalar>& t, std::size_t self) {
                       t.accumulate(ia, t.grad_ref(self));
                       t.accumulate(ib, t.grad_ref(self));
                     });
}

// x[r, :] + bias[0, :] for every row r; the only broadcast the engine supports.
template <typename Scalar>
Var<Scalar> add_bias(const Var<Scalar>& x, const Var<Scalar>& bias) {
  auto& tape = detail::tape_of(x, bias);
  if (bias.rows() != 1 || bias.cols() != x.cols()) {
    throw ContractError("add_bias: bias " + to_string(bias.shape()) + " does not fit " + to_string(x.shape()));
  }
  Matrix<Scalar> out = x.value().rowwise() + bias.value().row(0);
  const std::size_t ix = x.id(), ib = bias.id();
  return tape.record(Tensor<Scalar>(x.shape(), std::move(out)), {ix, ib},
                     [ix, ib](BasicTape<Scalar>& t, std::size_t self) {
                       const auto& g = t.grad_ref(self);
                       t.accumulate(ix, g);
                       if (t.requires_grad(ib)) t.accumulate(ib, g.colwise().sum());
                     });
}

template <typename Scalar>
Var<Scalar> sub(const Var<Scalar>& a, const Var<Scalar>& b) {
  auto& tape = detail::tape_of(a, b);
  detail::require_same_shape(a, b, "sub");
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record(Tensor<Scalar>(a.shape(), a.value() - b.value()), {ia, ib},
                     [ia, ib](BasicTape<Scalar>& t, std::size_t self) {
                       t.accumulate(ia, t.grad_ref(self));
                       if (t.requires_grad(ib)) t.accumulate(ib, -t.grad_ref(self));
                     });
}

// Elementwise product.
template <typename Scalar>
Var<Scalar> mul(const Var<Scalar>& a, const Var<Scalar>& b) {
  auto& tape = detail::tape_of(a, b);
  detail::require_same_shape(a, b, "mul");
  const std::size_t ia = a.id(), ib = b.id();
  Matrix<Scalar> out = a.value().cwiseProduct(b.value());
  return tape.record(Tensor<Scalar>(a.shape(), std::move(out)), {ia, ib},
                     [ia, ib](BasicTape<Scalar>& t, std::size_t self) {
                       const auto& g = t.grad_ref(self);
                       if (t.requires_grad(ia)) t.accumulate(ia, g.cwiseProduct(t.data(ib)));
                       if (t.requires_grad(ib)) t.accumulate(ib, g.cwiseProduct(t.data(ia)));
                     });
}

// Elementwise quotient.
template <typename Scalar>
Var<Scalar> div(const Var<Scalar>& a, const Var<Scalar>& b) {
  auto& tape = detail::tape_of(a, b);
  detail::require_same_shape(a, b, "div");
  const std::size_t ia = a.id(), ib = b.id();
  Matrix<Scalar> out = a.value().cwiseQuotient(b.value());
  return tape.record(Tensor<Scalar>(a.shape(), std::move(out)), {ia, ib},
                     [ia, ib](BasicTape<Scalar>& t, std::size_t self) {
                       const auto& g = t.grad_ref(self);
                       const auto& bv = t.data(ib);
                       if (t.requires_grad(ia)) t.accumulate(ia, g.cwiseQuotient(bv));
                       if (t.requires_grad(ib)) {
                         Matrix<Scalar> db = -(g.array() * t.data(self).array() / bv.array()).matrix();
                         t.accumulate(ib, db);
                       }
                     });
}

template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& a, Scalar s) {
  return detail::unary(a, Matrix<Scalar>(a.value() * s),
                       [s](BasicTape<Scalar>& t, std::size_t self) { return Matrix<Scalar>(t.grad_ref(self) * s); });
}

template <typename Scalar>
Var<Scalar> add_scalar(const Var<Scalar>& a, Scalar s) {
  Matrix<Scalar> out = (a.value().array() + s).matrix();
  return detail::unary(a, std::move(out), [](BasicTape<Scalar>& t, std::size_t self) { return t.grad_ref(self); });
}

template <typename Scalar>
Var<Scalar> relu(const Var<Scalar>& a) {
  Matrix<Scalar> out = a.value().cwiseMax(Scalar(0));
  return detail::unary(a, std::move(out), [](BasicTape<Scalar>& t, std::size_t self) {
    return Matrix<Scalar>((t.data(self).array() > Scalar(0)).select(t.grad_ref(self), Scalar(0)));
  });
}

template <typename Scalar>
Var<Scalar> exp(const Var<Scalar>& a) {
  Matrix<Scalar> out = a.value().array().exp().matrix();
  return detail::unary(a, std::move(out), [](BasicTape<Scalar>& t, std::size_t self) {
    return Matrix<Scalar>(t.grad_ref(self).cwiseProduct(t.data(self)));
  });
}

template <typename Scalar>
Var<Scalar> log(const Var<Scalar>& a) {
  Matrix<Scalar> out = a.value().array().log().matrix();
  const std::size_t ia = a.id();
  return detail::unary(a, std::move(out), [ia](BasicTape<Scalar>& t, std::size_t self) {
    return Matrix<Scalar>(t.grad_ref(self).cwiseQuotient(t.data(ia)));
  });
}

// max(a, c) elementwise; the gradient passes only where a > c strictly.
template <typename Scalar>
Var<Scalar> clamp_min(const Var<Scalar>& a, Scalar c) {
  Matrix<Scalar> out = a.value().cwiseMax(c);
  const std::size_t ia = a.id();
  return detail::unary(a, std::move(out), [ia, c](BasicTape<Scalar>& t, std::size_t self) {
    return Matrix<Scalar>((t.data(ia).array() > c).select(t.grad_ref(self), Scalar(0)));
  });
}

// max(a, b) elementwise; ties route the gradient to a.
template <typename Scalar>
Var<Scalar> maximum(const Var<Scalar>& a, const Var<Scalar>& b) {
  auto& tape = detail::tape_of(a, b);
  detail::require_same_shape(a, b, "maximum");
  const std::size_t ia = a.id(), ib = b.id();
  Matrix<Scalar> out = a.value().cwiseMax(b.value());
  return tape.record(Tensor<Scalar>(a.shape(), std::move(out)), {ia, ib},
                     [ia, ib](BasicTape<Scalar>& t, std::size_t self) {
                       const auto& g = t.grad_ref(self);
                       const auto take_a = (t.data(ia).array() >= t.data(ib).array());
                       if (t.requires_grad(ia)) t.accumulate(ia, Matrix<Scalar>(take_a.select(g, Scalar(0))));
                       if (t.requires_grad(ib)) t.accumulate(ib, Matrix<Scalar>(take_a.select(Scalar(0), g)));
                     });
}

// out[r] = x[r, index[r]] along the last axis.
template <typename Scalar>
Var<Scalar> gather(const Var<Scalar>& x, std::vector<Index> index) {
  if (static_cast<Index>(index.size()) != x.rows()) {
    throw ContractError("gather: " + std::to_string(index.size()) + " indices for " + std::to_string(x.rows()) + " rows");
  }
  Matrix<Scalar> out(x.rows(), 1);
  for (Index r = 0; r < x.rows(); ++r) {
    if (index[r] < 0 || index[r] >= x.cols()) throw ContractError("gather: index out of range");
    out(r, 0) = x.value()(r, index[r]);
  }
  const std::size_t ix = x.id();
  const Index cols = x.cols();
  return x.tape()->record(
      Tensor<Scalar>(detail::with_last(x.shape(), 1), std::move(out)), {ix},
      [ix, cols, index = std::move(index)](BasicTape<Scalar>& t, std::size_t self) {
        const auto& g = t.grad_ref(self);
        Matrix<Scalar> dx = Matrix<Scalar>::Zero(g.rows(), cols);
        for (Index r = 0; r < g.rows(); ++r) dx(r, index[r]) = g(r, 0);
        t.accumulate(ix, dx);
      });
}

template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& x) {
  Matrix<Scalar> out = Matrix<Scalar>::Constant(1, 1, x.value().sum());
  const std::size_t ix = x.id();
  const Index r = x.rows(), c = x.cols();
  return x.tape()->record(Tensor<Scalar>(Shape{}, std::move(out)), {ix},
                          [ix, r, c](BasicTape<Scalar>& t, std::size_t self) {
                            t.accumulate(ix, Matrix<Scalar>::Constant(r, c, t.grad_ref(self)(0, 0)));
                          });
}

template <typename Scalar>
Var<Scalar> mean(const Var<Scalar>& x) {
  return scale(sum(x), Scalar(1) / static_cast<Scalar>(x.value().size()));
}

// Sum along the last axis; the result keeps a trailing axis of size 1.
template <typename Scalar>
Var<Scalar> row_sum(const Var<Scalar>& x) {
  Matrix<Scalar> out = x.value().rowwise().sum();
  const std::size_t ix = x.id();
  const Index c = x.cols();
  return x.tape()->record(Tensor<Scalar>(detail::with_last(x.shape(), 1), std::move(out)), {ix},
                          [ix, c](BasicTape<Scalar>& t, std::size_t self) {
                            t.accumulate(ix, Matrix<Scalar>(t.grad_ref(self).replicate(1, c)));
                          });
}

// Concatenation along the last axis.
template <typename Scalar>
Var<Scalar> concat(std::span<const Var<Scalar>> parts) {
  if (parts.empty()) throw ContractError("concat of nothing");
  auto* tape = parts.front().tape();
  const Index rows = parts.front().rows();
  Index cols = 0;
  std::vector<std::size_t> ids;
  std::vector<Index> widths;
  for (const auto& p : parts) {
    if (p.tape() != tape) throw ContractError("concat: operands live on different tapes");
    if (p.rows() != rows) throw ContractError("concat: row counts differ");
    ids.push_back(p.id());
    widths.push_back(p.cols());
    cols += p.cols();
  }
  Matrix<Scalar> out(rows, cols);
  Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return tape->record(Tensor<Scalar>(detail::with_last(parts.front().shape(), cols), std::move(out)), ids,
                      [ids, widths](BasicTape<Scalar>& t, std::size_t self) {
                        const auto& g = t.grad_ref(self);
                        Index off = 0;
                        for (std::size_t i = 0; i < ids.size(); ++i) {
                          if (t.requires_grad(ids[i])) t.accumulate(ids[i], g.middleCols(off, widths[i]));
                          off += widths[i];
                        }
                      });
}

template <typename Scalar>
Var<Scalar> concat(std::initializer_list<Var<Scalar>> parts) {
  return concat(std::span<const Var<Scalar>>(parts.begin(), parts.size()));
}

// Row-wise log-softmax over the last axis. Entries at neg_inf() stay there and
// carry zero probability; a row with no finite entry is degenerate.
template <typename Scalar>
Var<Scalar> log_softmax(const Var<Scalar>& x) {
  const auto& v = x.value();
  if (v.cols() < 1) throw ContractError("log_softmax over an empty axis");
  Matrix<Scalar> out(v.rows(), v.cols());
  for (Index r = 0; r < v.rows(); ++r) {
    const Scalar m = v.row(r).maxCoeff();
    if (is_neg_inf(m) || std::isnan(m)) throw NumericError("log_softmax: row " + std::to_string(r) + " has no support");
    const Scalar lse = m + std::log((v.row(r).array() - m).exp().sum());
    out.row(r) = (v.row(r).array() - lse).cwiseMax(neg_inf<Scalar>()).matrix();
  }
  const std::size_t ix = x.id();
  return x.tape()->record(Tensor<Scalar>(x.shape(), std::move(out)), {ix},
                          [ix](BasicTape<Scalar>& t, std::size_t self) {
                            const auto& g = t.grad_ref(self);
                            const Matrix<Scalar> p = t.data(self).array().exp().matrix();
                            Matrix<Scalar> dx = g - (p.array().colwise() * g.rowwise().sum().array()).matrix();
                            t.accumulate(ix, dx);
                          });
}

template <typename Scalar>
Var<Scalar> softmax(const Var<Scalar>& x) {
  return exp(log_softmax(x));
}

// out = mask ? value : x. Filled positions pass no gradient.
template <typename Scalar>
Var<Scalar> masked_fill(const Var<Scalar>& x, const Mask& mask, Scalar value) {
  if (mask.rows() != x.rows() || mask.cols() != x.cols()) throw ContractError("masked_fill: mask shape mismatch");
  if (value == -std::numeric_limits<Scalar>::infinity()) value = neg_inf<Scalar>();
  Matrix<Scalar> out = mask.select(Matrix<Scalar>::Constant(x.rows(), x.cols(), value), x.value());
  return detail::unary(x, std::move(out), [mask](BasicTape<Scalar>& t, std::size_t self) {
    return Matrix<Scalar>(mask.select(Scalar(0), t.grad_ref(self)));
  });
}

template <typename Scalar>
Var<Scalar> operator+(const Var<Scalar>& a, const Var<Scalar>& b) { return add(a, b); }
template <typename Scalar>
Var<Scalar> operator-(const Var<Scalar>& a, const Var<Scalar>& b) { return sub(a, b); }
template <typename Scalar>
Var<Scalar> operator-(const Var<Scalar>& a) { return scale(a, Scalar(-1)); }
template <typename Scalar>
Var<Scalar> operator*(const Var<Scalar>& a, Scalar s) { return scale(a, s); }
template <typename Scalar>
Var<Scalar> operator*(Scalar s, const Var<Scalar>& a) { return scale(a, s); }
template <typename Scalar>
Var<Scalar> operator/(const Var<Scalar>& a, Scalar s) { return scale(a, Scalar(1) / s); }
template <typename Scalar>
Var<Scalar> operator+(const Var<Scalar>& a, Scalar s) { return add_scalar(a, s); }

}  // namespace uae::ad
