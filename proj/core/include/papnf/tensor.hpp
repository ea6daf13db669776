#pragma once

// Dense row-major float64 tensors with define-by-run reverse-mode autodiff.
//
// Every differentiable op whose inputs include a tensor with requires_grad
// records a node stamped with a global sequence number. backward() collects
// the nodes reachable from the loss and replays them in descending sequence
// order, which is exactly the reverse of execution order. Tensors with
// requires_grad == false never receive a grad buffer.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "papnf/errors.hpp"

namespace papnf {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

namespace detail {
struct TensorImpl;
struct Node;
}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  /// 1-D tensor holding `values`.
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                       bool requires_grad = false);
  static Tensor identity(std::size_t n);

  bool defined() const noexcept { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;
  std::size_t rows() const;  // rank-2 only
  std::size_t cols() const;  // rank-2 only

  std::span<const double> data() const;
  /// Mutable view for leaf tensors only (parameters, inputs).
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t i) const { return data()[i]; }
  double at(std::size_t r, std::size_t c) const;

  bool requires_grad() const;
  /// Only valid on leaves; turning it off drops any grad buffer.
  void set_requires_grad(bool flag);
  bool is_leaf() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();
  void clear_grad();

  /// A new leaf holding a copy of the values, detached from any graph.
  Tensor detach() const;
  /// Deep copy as a new leaf with the same requires_grad flag.
  Tensor clone() const;

  bool same_as(const Tensor& other) const noexcept { return impl_ == other.impl_; }

  const std::shared_ptr<detail::TensorImpl>& impl() const noexcept { return impl_; }
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

// ---------------------------------------------------------------------------
// Tape and gradient control

struct TapeEntry {
  std::uint64_t sequence = 0;
  std::string_view op;
};

/// Differentiable operations reachable from `root`, in execution order.
using Tape = std::vector<TapeEntry>;
Tape tape_of(const Tensor& root);

/// Populate grads for every requires_grad ancestor of a scalar loss. Leaf grads
/// accumulate across calls; intermediate grads are reset on each call so the
/// same graph can be replayed.
void backward(const Tensor& loss);

/// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// ---------------------------------------------------------------------------
// Linear algebra

Tensor matmul(const Tensor& a, const Tensor& b);
/// y = x·Wᵀ + b for x of shape [n, in] (or [in]), W of shape [out, in].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);
Tensor linear(const Tensor& x, const Tensor& weight);
Tensor transpose(const Tensor& x);

// ---------------------------------------------------------------------------
// Elementwise. Binary ops require equal shapes, or one operand with numel 1.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double offset);
Tensor neg(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor square(const Tensor& x);
/// tanh-approximated GELU.
Tensor gelu(const Tensor& x);

/// x[n, m] + b[m] added to every row.
Tensor add_rowwise(const Tensor& x, const Tensor& row);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

// ---------------------------------------------------------------------------
// Reductions and reshaping

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Column-wise mean of a [n, m] matrix -> [m].
Tensor mean_rows(const Tensor& x);
/// Stack along rows. 1-D inputs are treated as single rows.
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_rows(std::initializer_list<Tensor> parts);
/// Join along columns. All 1-D inputs produce a 1-D result.
Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_cols(std::initializer_list<Tensor> parts);
/// Rows [begin, end) of a matrix.
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
/// Columns [begin, end) of a matrix, or elements [begin, end) of a vector.
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
Tensor reshape(const Tensor& x, Shape shape);
/// Repeat a 1-D tensor as `n` identical rows.
Tensor repeat_rows(const Tensor& row, std::size_t n);

// ---------------------------------------------------------------------------
// Fused row operations used by the transformer

/// Row-wise softmax; with `causal`, entry (i, j > i) is masked out.
Tensor softmax_rows(const Tensor& x, bool causal = false);
/// Per-row layer normalization with affine gamma/beta of length = cols.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

// ---------------------------------------------------------------------------
// Gradient checking

/// max over coordinates of |analytic - central| / (|analytic| + |central| + 1e-12)
/// for the scalar function `f` with respect to every tensor in `params`.
/// `params` must be leaves with requires_grad; their values are perturbed in
/// place and restored. Throws NumericError on a non-finite function value.
double grad_check(const std::function<Tensor()>& f, std::span<Tensor> params,
                  double epsilon = 1e-6);

/// Single-point convenience: `point` is copied into a fresh leaf.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point,
                  double epsilon = 1e-6);

}  // namespace papnf
