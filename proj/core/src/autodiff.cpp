#include "hypmil/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "hypmil/error.hpp"

namespace hypmil::ad {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void check_extents(const Shape& shape) {
  for (auto d : shape) {
    if (d == 0) throw Error(ErrorCode::kShapeMismatch, "zero extent in shape " + shape_str(shape));
  }
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_extents(shape_);
  values_.assign(numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  check_extents(shape_);
  if (values_.size() != numel(shape_)) {
    throw Error(ErrorCode::kShapeMismatch, "shape " + shape_str(shape_) + " needs " +
                                               std::to_string(numel(shape_)) + " values, got " +
                                               std::to_string(values_.size()));
  }
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor(Shape{values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor(Shape{rows, cols}, std::move(values));
}

double Tensor::item() const {
  if (values_.size() != 1) {
    throw Error(ErrorCode::kShapeMismatch, "item() on non-scalar tensor " + shape_str(shape_));
  }
  return values_[0];
}

void Tensor::fill(double value) { std::fill(values_.begin(), values_.end(), value); }

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

bool operator==(const Tensor& a, const Tensor& b) {
  return a.shape_ == b.shape_ &&
         std::memcmp(a.values_.data(), b.values_.data(), a.values_.size() * sizeof(double)) == 0;
}

const Tensor& Var::value() const { return graph_->node(id_).value; }

Tensor& Graph::Node::grad_buffer() {
  if (!has_grad) {
    grad = Tensor(value.shape(), 0.0);
    has_grad = true;
  }
  return grad;
}

Var Graph::input(Tensor tensor) {
  if (backward_done_) throw Error(ErrorCode::kInvalidArgument, "graph already differentiated");
  Node node;
  node.op = "leaf";
  node.needs_grad = tensor.requires_grad();
  node.value = std::move(tensor);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::constant(Tensor tensor) {
  tensor.set_requires_grad(false);
  return input(std::move(tensor));
}

Var Graph::parameter(Tensor tensor) {
  tensor.set_requires_grad(true);
  return input(std::move(tensor));
}

Var Graph::emit(const char* op, Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  if (backward_done_) throw Error(ErrorCode::kInvalidArgument, "graph already differentiated");
  if (!value.all_finite()) {
    throw Error(ErrorCode::kNonFinite, std::string("primitive '") + op + "' produced a non-finite value");
  }
  Node node;
  node.op = op;
  node.value = std::move(value);
  node.inputs.reserve(inputs.size());
  for (const auto& v : inputs) {
    if (&v.graph() != this) throw Error(ErrorCode::kInvalidArgument, "operand from another graph");
    node.inputs.push_back(v.id());
    node.needs_grad = node.needs_grad || nodes_[v.id()].needs_grad;
  }
  if (node.needs_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Graph::backward(Var root) {
  if (&root.graph() != this) throw Error(ErrorCode::kInvalidArgument, "root from another graph");
  if (backward_done_) throw Error(ErrorCode::kInvalidArgument, "backward already run on this graph");
  Node& r = nodes_[root.id()];
  if (r.value.size() != 1) {
    throw Error(ErrorCode::kShapeMismatch, "backward root must be scalar, got " + shape_str(r.value.shape()));
  }
  backward_done_ = true;
  r.grad_buffer().fill(1.0);
  std::vector<Node*> slots;
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.backward) continue;
    slots.clear();
    for (auto in : n.inputs) slots.push_back(&nodes_[in]);
    n.backward(n, slots);
  }
}

Tensor Graph::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  if (n.has_grad) return n.grad;
  return Tensor(n.value.shape(), 0.0);
}

// ---------------------------------------------------------------------------

namespace {

Graph& same_graph(Var a, Var b) {
  if (&a.graph() != &b.graph()) throw Error(ErrorCode::kInvalidArgument, "operands from different graphs");
  return a.graph();
}

struct Broadcast {
  Shape out;
  std::vector<std::size_t> stride_a;
  std::vector<std::size_t> stride_b;
  bool same = false;
};

std::vector<std::size_t> contiguous_strides(const Shape& s) {
  std::vector<std::size_t> st(s.size(), 1);
  for (std::size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
  return st;
}

Broadcast plan_broadcast(const Shape& a, const Shape& b, const char* op) {
  Broadcast p;
  if (a == b) {
    p.out = a;
    p.same = true;
    return p;
  }
  const std::size_t r = std::max(a.size(), b.size());
  p.out.assign(r, 1);
  Shape pa(r, 1), pb(r, 1);
  std::copy(a.begin(), a.end(), pa.begin() + static_cast<std::ptrdiff_t>(r - a.size()));
  std::copy(b.begin(), b.end(), pb.begin() + static_cast<std::ptrdiff_t>(r - b.size()));
  for (std::size_t i = 0; i < r; ++i) {
    if (pa[i] != pb[i] && pa[i] != 1 && pb[i] != 1) {
      throw Error(ErrorCode::kShapeMismatch,
                  std::string(op) + ": cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    }
    p.out[i] = std::max(pa[i], pb[i]);
  }
  auto sa = contiguous_strides(pa), sb = contiguous_strides(pb);
  p.stride_a.resize(r);
  p.stride_b.resize(r);
  for (std::size_t i = 0; i < r; ++i) {
    p.stride_a[i] = pa[i] == 1 ? 0 : sa[i];
    p.stride_b[i] = pb[i] == 1 ? 0 : sb[i];
  }
  return p;
}

// Calls f(out_index, a_index, b_index) for every element of the output.
template <class F>
void for_each_broadcast(const Broadcast& p, F&& f) {
  const std::size_t n = numel(p.out);
  if (p.same) {
    for (std::size_t i = 0; i < n; ++i) f(i, i, i);
    return;
  }
  const std::size_t r = p.out.size();
  std::vector<std::size_t> idx(r, 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t i = 0; i < n; ++i) {
    f(i, ia, ib);
    for (std::size_t d = r; d-- > 0;) {
      ++idx[d];
      ia += p.stride_a[d];
      ib += p.stride_b[d];
      if (idx[d] < p.out[d]) break;
      ia -= p.stride_a[d] * idx[d];
      ib -= p.stride_b[d] * idx[d];
      idx[d] = 0;
    }
  }
}

// Binary elementwise op with broadcasting. `fwd(x, y)` gives the value;
// `partials(x, y, z)` returns {dz/dx, dz/dy}.
template <class Fwd, class Partials>
Var binary(const char* op, Var a, Var b, Fwd fwd, Partials partials) {
  Graph& g = same_graph(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  auto plan = plan_broadcast(av.shape(), bv.shape(), op);
  Tensor out(plan.out);
  for_each_broadcast(plan, [&](std::size_t i, std::size_t ia, std::size_t ib) { out[i] = fwd(av[ia], bv[ib]); });
  return g.emit(op, std::move(out), {a, b},
                [plan, partials](const Graph::Node& self, std::span<Graph::Node* const> in) {
                  const Tensor& x = in[0]->value;
                  const Tensor& y = in[1]->value;
                  Tensor* gx = in[0]->needs_grad ? &in[0]->grad_buffer() : nullptr;
                  Tensor* gy = in[1]->needs_grad ? &in[1]->grad_buffer() : nullptr;
                  for_each_broadcast(plan, [&](std::size_t i, std::size_t ia, std::size_t ib) {
                    auto [dx, dy] = partials(x[ia], y[ib], self.value[i]);
                    if (gx) (*gx)[ia] += self.grad[i] * dx;
                    if (gy) (*gy)[ib] += self.grad[i] * dy;
                  });
                });
}

// Unary elementwise op; `deriv(x, y)` is dy/dx given input and output.
template <class Fwd, class Deriv>
Var unary(const char* op, Var a, Fwd fwd, Deriv deriv) {
  const Tensor& av = a.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  return a.graph().emit(op, std::move(out), {a},
                        [deriv](const Graph::Node& self, std::span<Graph::Node* const> in) {
                          const Tensor& x = in[0]->value;
                          Tensor& gx = in[0]->grad_buffer();
                          for (std::size_t i = 0; i < x.size(); ++i) gx[i] += self.grad[i] * deriv(x[i], self.value[i]);
                        });
}

// Floor for 1 - x^2 style denominators so derivatives at domain edges stay finite.
constexpr double kEdgeFloor = 1e-12;

// [outer, axis, inner] decomposition of a shape around `axis`.
struct AxisSplit {
  std::size_t outer = 1, n = 1, inner = 1;
};

AxisSplit split_axis(const Shape& s, std::size_t axis, const char* op) {
  if (axis >= s.size()) {
    throw Error(ErrorCode::kShapeMismatch, std::string(op) + ": axis " + std::to_string(axis) +
                                               " out of range for " + shape_str(s));
  }
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.n = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

Shape reduced_shape(const Shape& s, std::size_t axis, bool keepdim) {
  Shape out = s;
  if (keepdim) {
    out[axis] = 1;
  } else {
    out.erase(out.begin() + static_cast<std::ptrdiff_t>(axis));
  }
  return out;
}

}  // namespace

Var add(Var a, Var b) {
  return binary("add", a, b, [](double x, double y) { return x + y; },
                [](double, double, double) { return std::pair{1.0, 1.0}; });
}

Var sub(Var a, Var b) {
  return binary("sub", a, b, [](double x, double y) { return x - y; },
                [](double, double, double) { return std::pair{1.0, -1.0}; });
}

Var mul(Var a, Var b) {
  return binary("mul", a, b, [](double x, double y) { return x * y; },
                [](double x, double y, double) { return std::pair{y, x}; });
}

Var div(Var a, Var b) {
  return binary("div", a, b, [](double x, double y) { return x / y; },
                [](double, double y, double z) { return std::pair{1.0 / y, -z / y}; });
}

Var maximum(Var a, Var b) {
  return binary("maximum", a, b, [](double x, double y) { return x >= y ? x : y; },
                [](double x, double y, double) { return x >= y ? std::pair{1.0, 0.0} : std::pair{0.0, 1.0}; });
}

Var add_scalar(Var a, double s) {
  return unary("add_scalar", a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var mul_scalar(Var a, double s) {
  return unary("mul_scalar", a, [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Var rdiv_scalar(double s, Var a) {
  return unary("rdiv_scalar", a, [s](double x) { return s / x; }, [](double x, double y) { return -y / x; });
}

Var neg(Var a) {
  return unary("neg", a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Var square(Var a) {
  return unary("square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var exp(Var a) {
  return unary("exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  return unary("log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

// The derivative at exactly zero is taken as 0 (one-sided subgradient choice).
Var sqrt(Var a) {
  return unary("sqrt", a, [](double x) { return std::sqrt(x); },
               [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Var abs(Var a) {
  return unary("abs", a, [](double x) { return std::fabs(x); },
               [](double x, double) { return x >= 0.0 ? 1.0 : -1.0; });
}

Var tanh(Var a) {
  return unary("tanh", a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var sinh(Var a) {
  return unary("sinh", a, [](double x) { return std::sinh(x); }, [](double x, double) { return std::cosh(x); });
}

Var cosh(Var a) {
  return unary("cosh", a, [](double x) { return std::cosh(x); }, [](double x, double) { return std::sinh(x); });
}

Var acos(Var a) {
  return unary("acos", a, [](double x) { return std::acos(x); },
               [](double x, double) { return -1.0 / std::sqrt(std::max(1.0 - x * x, kEdgeFloor)); });
}

Var asin(Var a) {
  return unary("asin", a, [](double x) { return std::asin(x); },
               [](double x, double) { return 1.0 / std::sqrt(std::max(1.0 - x * x, kEdgeFloor)); });
}

Var acosh(Var a) {
  return unary("acosh", a, [](double x) { return std::acosh(x); },
               [](double x, double) { return 1.0 / std::sqrt(std::max(x * x - 1.0, kEdgeFloor)); });
}

namespace {

constexpr double kSinhcSeriesCutoff = 1e-4;

double sinhc_value(double t) {
  if (std::fabs(t) < kSinhcSeriesCutoff) {
    const double t2 = t * t;
    return 1.0 + t2 / 6.0 + t2 * t2 / 120.0;
  }
  return std::sinh(t) / t;
}

// d/dt sinh(t)/t = (t cosh t - sinh t) / t^2 ~ t/3 + t^3/30.
double sinhc_deriv(double t) {
  if (std::fabs(t) < kSinhcSeriesCutoff) return t / 3.0 + t * t * t / 30.0;
  return (t * std::cosh(t) - std::sinh(t)) / (t * t);
}

}  // namespace

Var sinhc(Var a) {
  return unary("sinhc", a, sinhc_value, [](double x, double) { return sinhc_deriv(x); });
}

Var clamp(Var a, double lo, double hi) {
  return unary("clamp", a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
               [lo, hi](double x, double) { return (x < lo || x > hi) ? 0.0 : 1.0; });
}

Var clamp_min(Var a, double lo) {
  return unary("clamp_min", a, [lo](double x) { return std::max(x, lo); },
               [lo](double x, double) { return x < lo ? 0.0 : 1.0; });
}

Var matmul(Var a, Var b) {
  Graph& g = same_graph(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) {
    throw Error(ErrorCode::kShapeMismatch, "matmul: " + shape_str(av.shape()) + " x " + shape_str(bv.shape()));
  }
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  Tensor out(Shape{m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double x = av[i * k + p];
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += x * bv[p * n + j];
    }
  }
  return g.emit("matmul", std::move(out), {a, b},
                [m, k, n](const Graph::Node& self, std::span<Graph::Node* const> in) {
                  const Tensor& x = in[0]->value;
                  const Tensor& y = in[1]->value;
                  const Tensor& gz = self.grad;
                  if (in[0]->needs_grad) {
                    Tensor& gx = in[0]->grad_buffer();
                    for (std::size_t i = 0; i < m; ++i)
                      for (std::size_t p = 0; p < k; ++p) {
                        double acc = 0.0;
                        for (std::size_t j = 0; j < n; ++j) acc += gz[i * n + j] * y[p * n + j];
                        gx[i * k + p] += acc;
                      }
                  }
                  if (in[1]->needs_grad) {
                    Tensor& gy = in[1]->grad_buffer();
                    for (std::size_t i = 0; i < m; ++i)
                      for (std::size_t p = 0; p < k; ++p) {
                        const double xv = x[i * k + p];
                        for (std::size_t j = 0; j < n; ++j) gy[p * n + j] += xv * gz[i * n + j];
                      }
                  }
                });
}

Var transpose(Var a) {
  const Tensor& av = a.value();
  if (av.rank() != 2) throw Error(ErrorCode::kShapeMismatch, "transpose of non-matrix " + shape_str(av.shape()));
  const std::size_t r = av.dim(0), c = av.dim(1);
  Tensor out(Shape{c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
  return a.graph().emit("transpose", std::move(out), {a},
                        [r, c](const Graph::Node& self, std::span<Graph::Node* const> in) {
                          Tensor& gx = in[0]->grad_buffer();
                          for (std::size_t i = 0; i < r; ++i)
                            for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += self.grad[j * r + i];
                        });
}

Var reshape(Var a, Shape shape) {
  const Tensor& av = a.value();
  if (numel(shape) != av.size()) {
    throw Error(ErrorCode::kShapeMismatch, "reshape " + shape_str(av.shape()) + " to " + shape_str(shape));
  }
  Tensor out(std::move(shape), av.storage());
  return a.graph().emit("reshape", std::move(out), {a},
                        [](const Graph::Node& self, std::span<Graph::Node* const> in) {
                          Tensor& gx = in[0]->grad_buffer();
                          for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i];
                        });
}

Var broadcast_to(Var a, Shape shape) {
  const Tensor& av = a.value();
  auto plan = plan_broadcast(av.shape(), shape, "broadcast_to");
  if (plan.out != shape) {
    throw Error(ErrorCode::kShapeMismatch, "broadcast_to: " + shape_str(av.shape()) + " to " + shape_str(shape));
  }
  Tensor out(plan.out);
  for_each_broadcast(plan, [&](std::size_t i, std::size_t ia, std::size_t) { out[i] = av[ia]; });
  return a.graph().emit("broadcast_to", std::move(out), {a},
                        [plan](const Graph::Node& self, std::span<Graph::Node* const> in) {
                          Tensor& gx = in[0]->grad_buffer();
                          for_each_broadcast(plan, [&](std::size_t i, std::size_t ia, std::size_t) {
                            gx[ia] += self.grad[i];
                          });
                        });
}

Var sum(Var a) {
  const Tensor& av = a.value();
  double acc = 0.0;
  for (double v : av.values()) acc += v;
  return a.graph().emit("sum", Tensor::scalar(acc), {a},
                        [](const Graph::Node& self, std::span<Graph::Node* const> in) {
                          Tensor& gx = in[0]->grad_buffer();
                          const double g = self.grad[0];
                          for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
                        });
}

Var sum(Var a, std::size_t axis, bool keepdim) {
  const Tensor& av = a.value();
  auto sp = split_axis(av.shape(), axis, "sum");
  Tensor out(reduced_shape(av.shape(), axis, keepdim));
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t k = 0; k < sp.n; ++k)
      for (std::size_t i = 0; i < sp.inner; ++i) out[o * sp.inner + i] += av[(o * sp.n + k) * sp.inner + i];
  return a.graph().emit("sum_axis", std::move(out), {a},
                        [sp](const Graph::Node& self, std::span<Graph::Node* const> in) {
                          Tensor& gx = in[0]->grad_buffer();
                          for (std::size_t o = 0; o < sp.outer; ++o)
                            for (std::size_t k = 0; k < sp.n; ++k)
                              for (std::size_t i = 0; i < sp.inner; ++i)
                                gx[(o * sp.n + k) * sp.inner + i] += self.grad[o * sp.inner + i];
                        });
}

Var mean(Var a) { return mul_scalar(sum(a), 1.0 / static_cast<double>(a.size())); }

Var mean(Var a, std::size_t axis, bool keepdim) {
  const double n = static_cast<double>(split_axis(a.shape(), axis, "mean").n);
  return mul_scalar(sum(a, axis, keepdim), 1.0 / n);
}

Var max(Var a, std::size_t axis, bool keepdim) {
  const Tensor& av = a.value();
  auto sp = split_axis(av.shape(), axis, "max");
  Tensor out(reduced_shape(av.shape(), axis, keepdim));
  std::vector<std::size_t> argmax(sp.outer * sp.inner, 0);
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t i = 0; i < sp.inner; ++i) {
      std::size_t best = 0;
      double bv = av[(o * sp.n) * sp.inner + i];
      for (std::size_t k = 1; k < sp.n; ++k) {
        const double v = av[(o * sp.n + k) * sp.inner + i];
        if (v > bv) {
          bv = v;
          best = k;
        }
      }
      out[o * sp.inner + i] = bv;
      argmax[o * sp.inner + i] = best;
    }
  return a.graph().emit("max_axis", std::move(out), {a},
                        [sp, argmax = std::move(argmax)](const Graph::Node& self,
                                                         std::span<Graph::Node* const> in) {
                          Tensor& gx = in[0]->grad_buffer();
                          for (std::size_t o = 0; o < sp.outer; ++o)
                            for (std::size_t i = 0; i < sp.inner; ++i) {
                              const std::size_t j = o * sp.inner + i;
                              gx[(o * sp.n + argmax[j]) * sp.inner + i] += self.grad[j];
                            }
                        });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw Error(ErrorCode::kShapeMismatch, "concat of zero tensors");
  Graph& g = parts.front().graph();
  Shape out_shape = parts.front().shape();
  if (axis >= out_shape.size()) throw Error(ErrorCode::kShapeMismatch, "concat axis out of range");
  std::vector<std::size_t> extents;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    Shape s = p.shape();
    if (s.size() != out_shape.size()) {
      throw Error(ErrorCode::kShapeMismatch, "concat: " + shape_str(parts.front().shape()) + " vs " + shape_str(s));
    }
    for (std::size_t d = 0; d < s.size(); ++d) {
      if (d != axis && s[d] != out_shape[d]) {
        throw Error(ErrorCode::kShapeMismatch, "concat: " + shape_str(parts.front().shape()) + " vs " + shape_str(s));
      }
    }
    extents.push_back(s[axis]);
    out_shape[axis] += s[axis];
  }
  auto sp = split_axis(out_shape, axis, "concat");
  Tensor out(out_shape);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor& pv = parts[p].value();
    const std::size_t w = extents[p] * sp.inner;
    for (std::size_t o = 0; o < sp.outer; ++o)
      std::copy_n(pv.values().begin() + static_cast<std::ptrdiff_t>(o * w), w,
                  out.values().begin() + static_cast<std::ptrdiff_t>(o * sp.n * sp.inner + offset));
    offset += w;
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return g.emit("concat", std::move(out), std::move(inputs),
                [sp, extents](const Graph::Node& self, std::span<Graph::Node* const> in) {
                  std::size_t off = 0;
                  for (std::size_t p = 0; p < in.size(); ++p) {
                    const std::size_t w = extents[p] * sp.inner;
                    if (in[p]->needs_grad) {
                      Tensor& gx = in[p]->grad_buffer();
                      for (std::size_t o = 0; o < sp.outer; ++o)
                        for (std::size_t i = 0; i < w; ++i) gx[o * w + i] += self.grad[o * sp.n * sp.inner + off + i];
                    }
                    off += w;
                  }
                });
}

Var concat(std::initializer_list<Var> parts, std::size_t axis) {
  return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}

Var rows(Var a, std::span<const std::size_t> indices) {
  const Tensor& av = a.value();
  if (av.rank() < 1) throw Error(ErrorCode::kShapeMismatch, "rows() of a scalar");
  if (indices.empty()) throw Error(ErrorCode::kShapeMismatch, "rows() with no indices");
  const std::size_t n = av.dim(0);
  const std::size_t w = av.size() / n;
  Shape s = av.shape();
  s[0] = indices.size();
  Tensor out(s);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= n) {
      throw Error(ErrorCode::kShapeMismatch, "row index " + std::to_string(indices[r]) + " out of range for " +
                                                 shape_str(av.shape()));
    }
    std::copy_n(av.values().begin() + static_cast<std::ptrdiff_t>(indices[r] * w), w,
                out.values().begin() + static_cast<std::ptrdiff_t>(r * w));
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return a.graph().emit("rows", std::move(out), {a},
                        [w, idx = std::move(idx)](const Graph::Node& self, std::span<Graph::Node* const> in) {
                          Tensor& gx = in[0]->grad_buffer();
                          for (std::size_t r = 0; r < idx.size(); ++r)
                            for (std::size_t i = 0; i < w; ++i) gx[idx[r] * w + i] += self.grad[r * w + i];
                        });
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
  if (begin >= end || end > a.shape().at(0)) {
    throw Error(ErrorCode::kShapeMismatch, "slice_rows [" + std::to_string(begin) + ", " + std::to_string(end) +
                                               ") of " + shape_str(a.shape()));
  }
  std::vector<std::size_t> idx(end - begin);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = begin + i;
  return rows(a, idx);
}

Var logsumexp(Var a, std::size_t axis, bool keepdim) {
  Var m = max(a, axis, true);
  Var shifted = sub(a, m);
  Var out = add(log(sum(exp(shifted), axis, true)), m);
  if (!keepdim) out = reshape(out, reduced_shape(a.shape(), axis, false));
  return out;
}

Var softmax(Var a, std::size_t axis) {
  Var e = exp(sub(a, max(a, axis, true)));
  return div(e, sum(e, axis, true));
}

}  // namespace hypmil::ad
