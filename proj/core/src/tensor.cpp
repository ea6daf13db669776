#include "papnf/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace papnf {

namespace detail {

using BackwardFn = std::function<void(const std::vector<double>& grad_out)>;

struct Node {
  std::uint64_t sequence = 0;
  std::string_view op;
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  TensorImpl* output = nullptr;
  BackwardFn backward;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::optional<std::vector<double>> grad;
  std::shared_ptr<Node> grad_fn;

  // nullptr when this tensor does not take gradients.
  double* grad_buffer() {
    if (!requires_grad) return nullptr;
    if (!grad) grad.emplace(data.size(), 0.0);
    return grad->data();
  }
};

}  // namespace detail

namespace {

using detail::Node;
using detail::TensorImpl;

std::atomic<std::uint64_t> g_sequence{0};
thread_local bool t_grad_enabled = true;

std::shared_ptr<TensorImpl> new_impl(Shape shape, std::vector<double> data, bool requires_grad) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  return impl;
}

// Build an op result; records a node only when some input takes gradients.
template <typename MakeBackward>
Tensor record(std::string_view op, Shape shape, std::vector<double> values,
              std::span<const Tensor* const> inputs, MakeBackward&& make_backward) {
  bool needs_grad = false;
  if (t_grad_enabled) {
    for (const Tensor* t : inputs) needs_grad = needs_grad || t->requires_grad();
  }
  auto impl = new_impl(std::move(shape), std::move(values), needs_grad);
  if (needs_grad) {
    auto node = std::make_shared<Node>();
    node->sequence = g_sequence.fetch_add(1, std::memory_order_relaxed);
    node->op = op;
    for (const Tensor* t : inputs) node->inputs.push_back(t->impl());
    node->output = impl.get();
    node->backward = make_backward(node->inputs);
    impl->grad_fn = std::move(node);
  }
  return Tensor(std::move(impl));
}

template <typename MakeBackward>
Tensor make_result(std::string_view op, Shape shape, std::vector<double> values,
                   std::initializer_list<const Tensor*> inputs, MakeBackward&& make_backward) {
  return record(op, std::move(shape), std::move(values),
                std::span<const Tensor* const>(inputs.begin(), inputs.size()),
                std::forward<MakeBackward>(make_backward));
}

std::vector<TensorImpl*> raw_inputs(const std::vector<std::shared_ptr<TensorImpl>>& in) {
  std::vector<TensorImpl*> ptrs;
  ptrs.reserve(in.size());
  for (const auto& p : in) ptrs.push_back(p.get());
  return ptrs;
}

std::vector<const Tensor*> pointers_to(std::span<const Tensor> parts) {
  std::vector<const Tensor*> ptrs;
  ptrs.reserve(parts.size());
  for (const Tensor& t : parts) ptrs.push_back(&t);
  return ptrs;
}

void require_defined(const Tensor& t, std::string_view op) {
  if (!t.defined()) throw std::invalid_argument(std::string(op) + ": undefined tensor");
}

void require_rank2(const Tensor& t, std::string_view op) {
  require_defined(t, op);
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got shape " + shape_str(t.shape()));
  }
}

// C[m,n] += A[m,k] * B[k,n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m,n] += A[m,k] * B[n,k]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

// C[m,n] += A[k,m]^T * B[k,n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = a + p * m;
    const double* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

enum class Broadcast { kNone, kLeftScalar, kRightScalar };

Broadcast check_binary(const Tensor& a, const Tensor& b, std::string_view op) {
  require_defined(a, op);
  require_defined(b, op);
  if (a.shape() == b.shape()) return Broadcast::kNone;
  if (b.numel() == 1) return Broadcast::kRightScalar;
  if (a.numel() == 1) return Broadcast::kLeftScalar;
  throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                   shape_str(b.shape()));
}

// Shared implementation for add/sub/mul/div. `fwd(x, y)` computes the value,
// `dx(x, y)` and `dy(x, y)` the local partials.
template <typename Fwd, typename Dx, typename Dy>
Tensor binary_op(std::string_view op, const Tensor& a, const Tensor& b, Fwd fwd, Dx dx, Dy dy) {
  const Broadcast bc = check_binary(a, b, op);
  const Shape out_shape = bc == Broadcast::kLeftScalar ? b.shape() : a.shape();
  const std::size_t n = shape_numel(out_shape);
  auto ad = a.data();
  auto bd = b.data();
  auto ai = [&](std::size_t i) { return bc == Broadcast::kLeftScalar ? ad[0] : ad[i]; };
  auto bi = [&](std::size_t i) { return bc == Broadcast::kRightScalar ? bd[0] : bd[i]; };
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(ai(i), bi(i));
  return make_result(op, out_shape, std::move(out), {&a, &b}, [=](const auto& in) {
    TensorImpl* pa = in[0].get();
    TensorImpl* pb = in[1].get();
    return [=](const std::vector<double>& g) {
      auto va = [&](std::size_t i) {
        return bc == Broadcast::kLeftScalar ? pa->data[0] : pa->data[i];
      };
      auto vb = [&](std::size_t i) {
        return bc == Broadcast::kRightScalar ? pb->data[0] : pb->data[i];
      };
      if (double* ga = pa->grad_buffer()) {
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[bc == Broadcast::kLeftScalar ? 0 : i] += g[i] * dx(va(i), vb(i));
        }
      }
      if (double* gb = pb->grad_buffer()) {
        for (std::size_t i = 0; i < g.size(); ++i) {
          gb[bc == Broadcast::kRightScalar ? 0 : i] += g[i] * dy(va(i), vb(i));
        }
      }
    };
  });
}

// Unary op where the local derivative is a function of (input, output).
template <typename Fwd, typename Deriv>
Tensor unary_op(std::string_view op, const Tensor& x, Fwd fwd, Deriv deriv) {
  require_defined(x, op);
  auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) out[i] = fwd(xd[i]);
  std::vector<double> saved = out;
  return make_result(op, x.shape(), std::move(out), {&x},
                     [=, saved = std::move(saved)](const auto& in) {
                       TensorImpl* px = in[0].get();
                       return [=](const std::vector<double>& g) {
                         double* gx = px->grad_buffer();
                         if (!gx) return;
                         for (std::size_t i = 0; i < g.size(); ++i) {
                           gx[i] += g[i] * deriv(px->data[i], saved[i]);
                         }
                       };
                     });
}

double stable_softplus(double v) {
  return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
}

double sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

}  // namespace

// ---------------------------------------------------------------------------

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(new_impl(std::move(shape), std::vector<double>(n, value), requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("Tensor::from: shape " + shape_str(shape) + " needs " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  return Tensor(new_impl(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({}, {value}, requires_grad); }

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  const std::size_t n = values.size();
  return from({n}, std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                      bool requires_grad) {
  return from({rows, cols}, std::move(values), requires_grad);
}

Tensor Tensor::identity(std::size_t n) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  return matrix(n, n, std::move(v));
}

const Shape& Tensor::shape() const {
  require_defined(*this, "shape");
  return impl_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) throw ShapeError("dim: axis out of range for " + shape_str(shape()));
  return shape()[axis];
}

std::size_t Tensor::numel() const { return impl_ ? impl_->data.size() : 0; }

std::size_t Tensor::rows() const {
  require_rank2(*this, "rows");
  return impl_->shape[0];
}

std::size_t Tensor::cols() const {
  require_rank2(*this, "cols");
  return impl_->shape[1];
}

std::span<const double> Tensor::data() const {
  require_defined(*this, "data");
  return impl_->data;
}

std::span<double> Tensor::mutable_data() {
  require_defined(*this, "mutable_data");
  if (impl_->grad_fn) throw std::logic_error("mutable_data: tensor is not a leaf");
  return impl_->data;
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item: tensor has shape " + shape_str(shape()));
  return impl_->data[0];
}

double Tensor::at(std::size_t r, std::size_t c) const { return data()[r * cols() + c]; }

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

void Tensor::set_requires_grad(bool flag) {
  require_defined(*this, "set_requires_grad");
  if (impl_->grad_fn) throw std::logic_error("set_requires_grad: tensor is not a leaf");
  impl_->requires_grad = flag;
  if (!flag) impl_->grad.reset();
}

bool Tensor::is_leaf() const { return impl_ && !impl_->grad_fn; }

bool Tensor::has_grad() const { return impl_ && impl_->grad.has_value(); }

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw std::logic_error("grad: tensor has no gradient buffer");
  return *impl_->grad;
}

void Tensor::zero_grad() {
  if (impl_ && impl_->grad) std::fill(impl_->grad->begin(), impl_->grad->end(), 0.0);
}

void Tensor::clear_grad() {
  if (impl_) impl_->grad.reset();
}

Tensor Tensor::detach() const { return Tensor(new_impl(shape(), impl_->data, false)); }

Tensor Tensor::clone() const { return Tensor(new_impl(shape(), impl_->data, impl_->requires_grad)); }

// ---------------------------------------------------------------------------

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }
bool grad_enabled() { return t_grad_enabled; }

namespace {

std::vector<Node*> collect_nodes(const Tensor& root) {
  std::vector<Node*> nodes;
  if (!root.defined() || !root.impl()->grad_fn) return nodes;
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{root.impl()->grad_fn.get()};
  seen.insert(stack.back());
  while (!stack.empty()) {
    Node* node = stack.back();
    stack.pop_back();
    nodes.push_back(node);
    for (const auto& input : node->inputs) {
      Node* parent = input->grad_fn.get();
      if (parent && seen.insert(parent).second) stack.push_back(parent);
    }
  }
  std::sort(nodes.begin(), nodes.end(),
            [](const Node* a, const Node* b) { return a->sequence < b->sequence; });
  return nodes;
}

}  // namespace

Tape tape_of(const Tensor& root) {
  Tape tape;
  for (const Node* node : collect_nodes(root)) tape.push_back({node->sequence, node->op});
  return tape;
}

void backward(const Tensor& loss) {
  require_defined(loss, "backward");
  if (loss.numel() != 1) {
    throw ShapeError("backward: loss must be a scalar, got shape " + shape_str(loss.shape()));
  }
  if (!loss.requires_grad()) return;
  std::vector<Node*> nodes = collect_nodes(loss);
  for (Node* node : nodes) {
    if (node->output->grad) {
      std::fill(node->output->grad->begin(), node->output->grad->end(), 0.0);
    }
  }
  loss.impl()->grad_buffer()[0] += 1.0;
  for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
    Node* node = *it;
    node->output->grad_buffer();
    node->backward(*node->output->grad);
  }
}

// ---------------------------------------------------------------------------
// Linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw ShapeError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  gemm_nn(a.data().data(), b.data().data(), out.data(), m, k, n);
  return make_result("matmul", {m, n}, std::move(out), {&a, &b}, [=](const auto& in) {
    TensorImpl* pa = in[0].get();
    TensorImpl* pb = in[1].get();
    return [=](const std::vector<double>& g) {
      if (double* ga = pa->grad_buffer()) gemm_nt(g.data(), pb->data.data(), ga, m, n, k);
      if (double* gb = pb->grad_buffer()) gemm_tn(pa->data.data(), g.data(), gb, k, m, n);
    };
  });
}

namespace {

Tensor linear_impl(const Tensor& x, const Tensor& weight, const Tensor* bias) {
  require_defined(x, "linear");
  require_rank2(weight, "linear");
  const bool vector_input = x.rank() == 1;
  if (x.rank() != 1 && x.rank() != 2) {
    throw ShapeError("linear: input must be a vector or matrix, got " + shape_str(x.shape()));
  }
  const std::size_t n = vector_input ? 1 : x.shape()[0];
  const std::size_t in_dim = vector_input ? x.shape()[0] : x.shape()[1];
  const std::size_t out_dim = weight.rows();
  if (weight.cols() != in_dim) {
    throw ShapeError("linear: input " + shape_str(x.shape()) + " incompatible with weight " +
                     shape_str(weight.shape()));
  }
  if (bias && (bias->rank() != 1 || bias->shape()[0] != out_dim)) {
    throw ShapeError("linear: bias " + shape_str(bias->shape()) + " does not match weight " +
                     shape_str(weight.shape()));
  }
  std::vector<double> out(n * out_dim, 0.0);
  if (bias) {
    auto bd = bias->data();
    for (std::size_t r = 0; r < n; ++r) std::copy(bd.begin(), bd.end(), out.begin() + r * out_dim);
  }
  gemm_nt(x.data().data(), weight.data().data(), out.data(), n, in_dim, out_dim);
  Shape shape = vector_input ? Shape{out_dim} : Shape{n, out_dim};
  const Tensor empty;
  const Tensor& b = bias ? *bias : empty;
  auto backward = [=, has_bias = bias != nullptr](const auto& in) {
    TensorImpl* px = in[0].get();
    TensorImpl* pw = in[1].get();
    TensorImpl* pb = has_bias ? in[2].get() : nullptr;
    return [=](const std::vector<double>& g) {
      if (double* gx = px->grad_buffer()) gemm_nn(g.data(), pw->data.data(), gx, n, out_dim, in_dim);
      if (double* gw = pw->grad_buffer()) gemm_tn(g.data(), px->data.data(), gw, out_dim, n, in_dim);
      if (pb) {
        if (double* gb = pb->grad_buffer()) {
          for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t o = 0; o < out_dim; ++o) gb[o] += g[r * out_dim + o];
          }
        }
      }
    };
  };
  if (bias) return make_result("linear", std::move(shape), std::move(out), {&x, &weight, &b}, backward);
  return make_result("linear", std::move(shape), std::move(out), {&x, &weight}, backward);
}

}  // namespace

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  return linear_impl(x, weight, &bias);
}

Tensor linear(const Tensor& x, const Tensor& weight) { return linear_impl(x, weight, nullptr); }

Tensor transpose(const Tensor& x) {
  require_rank2(x, "transpose");
  const std::size_t r = x.rows(), c = x.cols();
  auto xd = x.data();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = xd[i * c + j];
  }
  return make_result("transpose", {c, r}, std::move(out), {&x}, [=](const auto& in) {
    TensorImpl* px = in[0].get();
    return [=](const std::vector<double>& g) {
      double* gx = px->grad_buffer();
      if (!gx) return;
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += g[j * r + i];
      }
    };
  });
}

// ---------------------------------------------------------------------------
// Elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary_op(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; }, [](double x, double y) { return -x / (y * y); });
}

Tensor scale(const Tensor& x, double factor) {
  return unary_op(
      "scale", x, [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double offset) {
  return unary_op(
      "add_scalar", x, [offset](double v) { return v + offset; },
      [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& x) { return scale(x, -1.0); }

Tensor tanh(const Tensor& x) {
  return unary_op(
      "tanh", x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor softplus(const Tensor& x) {
  return unary_op("softplus", x, stable_softplus, [](double v, double) { return sigmoid(v); });
}

Tensor abs(const Tensor& x) {
  return unary_op(
      "abs", x, [](double v) { return std::fabs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor square(const Tensor& x) {
  return unary_op(
      "square", x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor gelu(const Tensor& x) {
  return unary_op(
      "gelu", x,
      [](double v) { return 0.5 * v * (1.0 + std::tanh(kGeluC * (v + 0.044715 * v * v * v))); },
      [](double v, double) {
        const double inner = kGeluC * (v + 0.044715 * v * v * v);
        const double t = std::tanh(inner);
        const double dinner = kGeluC * (1.0 + 3.0 * 0.044715 * v * v);
        return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * dinner;
      });
}

Tensor add_rowwise(const Tensor& x, const Tensor& row) {
  require_rank2(x, "add_rowwise");
  require_defined(row, "add_rowwise");
  const std::size_t n = x.rows(), m = x.cols();
  if (row.rank() != 1 || row.shape()[0] != m) {
    throw ShapeError("add_rowwise: row " + shape_str(row.shape()) + " does not fit " +
                     shape_str(x.shape()));
  }
  auto xd = x.data();
  auto rd = row.data();
  std::vector<double> out(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] = xd[i * m + j] + rd[j];
  }
  return make_result("add_rowwise", {n, m}, std::move(out), {&x, &row}, [=](const auto& in) {
    TensorImpl* px = in[0].get();
    TensorImpl* pr = in[1].get();
    return [=](const std::vector<double>& g) {
      if (double* gx = px->grad_buffer()) {
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      }
      if (double* gr = pr->grad_buffer()) {
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < m; ++j) gr[j] += g[i * m + j];
        }
      }
    };
  });
}

// ---------------------------------------------------------------------------
// Reductions and reshaping

Tensor sum(const Tensor& x) {
  require_defined(x, "sum");
  double total = 0.0;
  for (double v : x.data()) total += v;
  return make_result("sum", {}, {total}, {&x}, [](const auto& in) {
    TensorImpl* px = in[0].get();
    return [=](const std::vector<double>& g) {
      double* gx = px->grad_buffer();
      if (!gx) return;
      for (std::size_t i = 0; i < px->data.size(); ++i) gx[i] += g[0];
    };
  });
}

Tensor mean(const Tensor& x) {
  require_defined(x, "mean");
  if (x.numel() == 0) throw ShapeError("mean: empty tensor");
  const double inv = 1.0 / static_cast<double>(x.numel());
  double total = 0.0;
  for (double v : x.data()) total += v;
  return make_result("mean", {}, {total * inv}, {&x}, [=](const auto& in) {
    TensorImpl* px = in[0].get();
    return [=](const std::vector<double>& g) {
      double* gx = px->grad_buffer();
      if (!gx) return;
      for (std::size_t i = 0; i < px->data.size(); ++i) gx[i] += g[0] * inv;
    };
  });
}

Tensor mean_rows(const Tensor& x) {
  require_rank2(x, "mean_rows");
  const std::size_t n = x.rows(), m = x.cols();
  if (n == 0) throw ShapeError("mean_rows: matrix has no rows");
  const double inv = 1.0 / static_cast<double>(n);
  auto xd = x.data();
  std::vector<double> out(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) out[j] += xd[i * m + j];
  }
  for (double& v : out) v *= inv;
  return make_result("mean_rows", {m}, std::move(out), {&x}, [=](const auto& in) {
    TensorImpl* px = in[0].get();
    return [=](const std::vector<double>& g) {
      double* gx = px->grad_buffer();
      if (!gx) return;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) gx[i * m + j] += g[j] * inv;
      }
    };
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  std::size_t width = 0;
  std::size_t total_rows = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const Tensor& t = parts[i];
    require_defined(t, "concat_rows");
    if (t.rank() != 1 && t.rank() != 2) {
      throw ShapeError("concat_rows: unsupported shape " + shape_str(t.shape()));
    }
    const std::size_t w = t.rank() == 1 ? t.shape()[0] : t.shape()[1];
    const std::size_t r = t.rank() == 1 ? 1 : t.shape()[0];
    if (i == 0) width = w;
    if (w != width) {
      throw ShapeError("concat_rows: width mismatch " + shape_str(parts[0].shape()) + " vs " +
                       shape_str(t.shape()));
    }
    total_rows += r;
  }
  std::vector<double> out;
  out.reserve(total_rows * width);
  for (const Tensor& t : parts) out.insert(out.end(), t.data().begin(), t.data().end());
  return record("concat_rows", {total_rows, width}, std::move(out), pointers_to(parts),
                [](const auto& in) {
                  return [ptrs = raw_inputs(in)](const std::vector<double>& g) {
                    std::size_t offset = 0;
                    for (TensorImpl* p : ptrs) {
                      const std::size_t n = p->data.size();
                      if (double* gp = p->grad_buffer()) {
                        for (std::size_t i = 0; i < n; ++i) gp[i] += g[offset + i];
                      }
                      offset += n;
                    }
                  };
                });
}

Tensor concat_rows(std::initializer_list<Tensor> parts) {
  return concat_rows(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const bool vectors = parts[0].defined() && parts[0].rank() == 1;
  const std::size_t n_rows = vectors ? 1 : parts[0].rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Tensor& t : parts) {
    require_defined(t, "concat_cols");
    const bool is_vec = t.rank() == 1;
    if (is_vec != vectors || (!is_vec && t.rank() != 2)) {
      throw ShapeError("concat_cols: mixed or unsupported ranks " + shape_str(parts[0].shape()) +
                       " vs " + shape_str(t.shape()));
    }
    if (!is_vec && t.rows() != n_rows) {
      throw ShapeError("concat_cols: row mismatch " + shape_str(parts[0].shape()) + " vs " +
                       shape_str(t.shape()));
    }
    const std::size_t w = is_vec ? t.shape()[0] : t.cols();
    widths.push_back(w);
    total += w;
  }
  std::vector<double> out(n_rows * total);
  std::size_t col = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto d = parts[k].data();
    for (std::size_t r = 0; r < n_rows; ++r) {
      std::copy_n(d.begin() + r * widths[k], widths[k], out.begin() + r * total + col);
    }
    col += widths[k];
  }
  Shape shape = vectors ? Shape{total} : Shape{n_rows, total};
  return record("concat_cols", std::move(shape), std::move(out), pointers_to(parts),
                       [=](const auto& in) {
                         return [=, ptrs = raw_inputs(in)](const std::vector<double>& g) {
                           std::size_t c0 = 0;
                           for (std::size_t k = 0; k < ptrs.size(); ++k) {
                             if (double* gp = ptrs[k]->grad_buffer()) {
                               for (std::size_t r = 0; r < n_rows; ++r) {
                                 for (std::size_t j = 0; j < widths[k]; ++j) {
                                   gp[r * widths[k] + j] += g[r * total + c0 + j];
                                 }
                               }
                             }
                             c0 += widths[k];
                           }
                         };
                       });
}

Tensor concat_cols(std::initializer_list<Tensor> parts) {
  return concat_cols(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  require_rank2(x, "slice_rows");
  if (begin > end || end > x.rows()) {
    throw std::out_of_range("slice_rows: range [" + std::to_string(begin) + ", " +
                            std::to_string(end) + ") outside " + shape_str(x.shape()));
  }
  const std::size_t m = x.cols();
  auto xd = x.data();
  std::vector<double> out(xd.begin() + begin * m, xd.begin() + end * m);
  return make_result("slice_rows", {end - begin, m}, std::move(out), {&x}, [=](const auto& in) {
    TensorImpl* px = in[0].get();
    return [=](const std::vector<double>& g) {
      double* gx = px->grad_buffer();
      if (!gx) return;
      for (std::size_t i = 0; i < g.size(); ++i) gx[begin * m + i] += g[i];
    };
  });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  require_defined(x, "slice_cols");
  const bool is_vec = x.rank() == 1;
  if (!is_vec) require_rank2(x, "slice_cols");
  const std::size_t n = is_vec ? 1 : x.rows();
  const std::size_t m = is_vec ? x.shape()[0] : x.cols();
  if (begin > end || end > m) {
    throw std::out_of_range("slice_cols: range [" + std::to_string(begin) + ", " +
                            std::to_string(end) + ") outside " + shape_str(x.shape()));
  }
  const std::size_t w = end - begin;
  auto xd = x.data();
  std::vector<double> out(n * w);
  for (std::size_t r = 0; r < n; ++r) {
    std::copy_n(xd.begin() + r * m + begin, w, out.begin() + r * w);
  }
  Shape shape = is_vec ? Shape{w} : Shape{n, w};
  return make_result("slice_cols", std::move(shape), std::move(out), {&x}, [=](const auto& in) {
    TensorImpl* px = in[0].get();
    return [=](const std::vector<double>& g) {
      double* gx = px->grad_buffer();
      if (!gx) return;
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < w; ++j) gx[r * m + begin + j] += g[r * w + j];
      }
    };
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  require_defined(x, "reshape");
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_result("reshape", std::move(shape), std::move(out), {&x}, [](const auto& in) {
    TensorImpl* px = in[0].get();
    return [=](const std::vector<double>& g) {
      double* gx = px->grad_buffer();
      if (!gx) return;
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    };
  });
}

Tensor repeat_rows(const Tensor& row, std::size_t n) {
  require_defined(row, "repeat_rows");
  if (row.rank() != 1) throw ShapeError("repeat_rows: expected a vector, got " + shape_str(row.shape()));
  const std::size_t m = row.shape()[0];
  auto rd = row.data();
  std::vector<double> out(n * m);
  for (std::size_t i = 0; i < n; ++i) std::copy(rd.begin(), rd.end(), out.begin() + i * m);
  return make_result("repeat_rows", {n, m}, std::move(out), {&row}, [=](const auto& in) {
    TensorImpl* pr = in[0].get();
    return [=](const std::vector<double>& g) {
      double* gr = pr->grad_buffer();
      if (!gr) return;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) gr[j] += g[i * m + j];
      }
    };
  });
}

// ---------------------------------------------------------------------------
// Fused row ops

Tensor softmax_rows(const Tensor& x, bool causal) {
  require_rank2(x, "softmax_rows");
  const std::size_t n = x.rows(), m = x.cols();
  auto xd = x.data();
  std::vector<double> out(n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t limit = causal ? std::min(m, i + 1) : m;
    double peak = -INFINITY;
    for (std::size_t j = 0; j < limit; ++j) peak = std::max(peak, xd[i * m + j]);
    double total = 0.0;
    for (std::size_t j = 0; j < limit; ++j) {
      out[i * m + j] = std::exp(xd[i * m + j] - peak);
      total += out[i * m + j];
    }
    for (std::size_t j = 0; j < limit; ++j) out[i * m + j] /= total;
  }
  std::vector<double> saved = out;
  return make_result("softmax_rows", {n, m}, std::move(out), {&x},
                     [=, saved = std::move(saved)](const auto& in) {
                       TensorImpl* px = in[0].get();
                       return [=](const std::vector<double>& g) {
                         double* gx = px->grad_buffer();
                         if (!gx) return;
                         for (std::size_t i = 0; i < n; ++i) {
                           double dot = 0.0;
                           for (std::size_t j = 0; j < m; ++j) dot += g[i * m + j] * saved[i * m + j];
                           for (std::size_t j = 0; j < m; ++j) {
                             gx[i * m + j] += saved[i * m + j] * (g[i * m + j] - dot);
                           }
                         }
                       };
                     });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require_rank2(x, "layer_norm");
  const std::size_t n = x.rows(), m = x.cols();
  if (gamma.rank() != 1 || gamma.shape()[0] != m || beta.rank() != 1 || beta.shape()[0] != m) {
    throw ShapeError("layer_norm: gamma/beta must have length " + std::to_string(m));
  }
  auto xd = x.data();
  auto gd = gamma.data();
  auto bd = beta.data();
  std::vector<double> normalized(n * m);
  std::vector<double> inv_std(n);
  std::vector<double> out(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < m; ++j) mu += xd[i * m + j];
    mu /= static_cast<double>(m);
    double var = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double d = xd[i * m + j] - mu;
      var += d * d;
    }
    var /= static_cast<double>(m);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < m; ++j) {
      normalized[i * m + j] = (xd[i * m + j] - mu) * inv_std[i];
      out[i * m + j] = normalized[i * m + j] * gd[j] + bd[j];
    }
  }
  return make_result(
      "layer_norm", {n, m}, std::move(out), {&x, &gamma, &beta},
      [=, normalized = std::move(normalized), inv_std = std::move(inv_std)](const auto& in) {
        TensorImpl* px = in[0].get();
        TensorImpl* pg = in[1].get();
        TensorImpl* pb = in[2].get();
        return [=](const std::vector<double>& g) {
          if (double* gg = pg->grad_buffer()) {
            for (std::size_t i = 0; i < n; ++i) {
              for (std::size_t j = 0; j < m; ++j) gg[j] += g[i * m + j] * normalized[i * m + j];
            }
          }
          if (double* gb = pb->grad_buffer()) {
            for (std::size_t i = 0; i < n; ++i) {
              for (std::size_t j = 0; j < m; ++j) gb[j] += g[i * m + j];
            }
          }
          if (double* gx = px->grad_buffer()) {
            const double inv_m = 1.0 / static_cast<double>(m);
            for (std::size_t i = 0; i < n; ++i) {
              double sum_dy = 0.0;
              double sum_dy_xhat = 0.0;
              for (std::size_t j = 0; j < m; ++j) {
                const double dy = g[i * m + j] * pg->data[j];
                sum_dy += dy;
                sum_dy_xhat += dy * normalized[i * m + j];
              }
              for (std::size_t j = 0; j < m; ++j) {
                const double dy = g[i * m + j] * pg->data[j];
                gx[i * m + j] += inv_std[i] *
                                 (dy - inv_m * sum_dy - normalized[i * m + j] * inv_m * sum_dy_xhat);
              }
            }
          }
        };
      });
}

// ---------------------------------------------------------------------------
// Gradient checking

double grad_check(const std::function<Tensor()>& f, std::span<Tensor> params, double epsilon) {
  for (Tensor& p : params) {
    if (!p.is_leaf() || !p.requires_grad()) {
      throw std::invalid_argument("grad_check: parameters must be leaves with requires_grad");
    }
    p.zero_grad();
  }
  const Tensor loss = f();
  if (!std::isfinite(loss.item())) throw NumericError("grad_check: non-finite function value");
  backward(loss);

  auto eval = [&] {
    NoGradGuard guard;
    const double v = f().item();
    if (!std::isfinite(v)) throw NumericError("grad_check: non-finite function value");
    return v;
  };

  double worst = 0.0;
  for (Tensor& p : params) {
    std::vector<double> analytic = p.has_grad() ? std::vector<double>(p.grad().begin(), p.grad().end())
                                                : std::vector<double>(p.numel(), 0.0);
    auto values = p.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + epsilon;
      const double up = eval();
      values[i] = original - epsilon;
      const double down = eval();
      values[i] = original;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double err =
          std::fabs(analytic[i] - numeric) / (std::fabs(analytic[i]) + std::fabs(numeric) + 1e-12);
      worst = std::max(worst, err);
    }
  }
  return worst;
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point,
                  double epsilon) {
  Tensor leaf = Tensor::from(point.shape(), {point.data().begin(), point.data().end()}, true);
  std::vector<Tensor> params{leaf};
  return grad_check([&] { return f(params[0]); }, params, epsilon);
}

}  // namespace papnf
