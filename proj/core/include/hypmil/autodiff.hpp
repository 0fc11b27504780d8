#pragma once

// Define-by-run reverse-mode differentiation over dense double tensors.
//
// A Graph records every primitive applied to Vars in append order; the
// operands of a node always precede it, so the append order is a valid
// topological order and backward() is a single reverse sweep. Graphs are
// cheap and meant to be rebuilt for every forward pass.

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace hypmil::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tensor {
 public:
  Tensor() : values_(1, 0.0) {}
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }
  static Tensor vector(std::initializer_list<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return values_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  std::vector<double>& storage() noexcept { return values_; }
  const std::vector<double>& storage() const noexcept { return values_; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  // Row-major access for rank-2 tensors.
  double& at(std::size_t row, std::size_t col) { return values_[row * shape_[1] + col]; }
  double at(std::size_t row, std::size_t col) const { return values_[row * shape_[1] + col]; }

  double item() const;

  bool requires_grad() const noexcept { return requires_grad_; }
  Tensor& set_requires_grad(bool on) noexcept {
    requires_grad_ = on;
    return *this;
  }

  void fill(double value);
  bool all_finite() const;

  // Bitwise-equal shape and values.
  friend bool operator==(const Tensor& a, const Tensor& b);

 private:
  Shape shape_;
  std::vector<double> values_;
  bool requires_grad_ = false;
};

class Graph;

// Lightweight handle to a node of a Graph. Valid while the graph lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
  double item() const { return value().item(); }
  Graph& graph() const { return *graph_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

class Graph {
 public:
  struct Node;
  // Accumulates d(root)/d(inputs) given d(root)/d(self). Rules must skip
  // inputs whose needs_grad is false.
  using BackwardFn = std::function<void(const Node& self, std::span<Node* const> inputs)>;

  struct Node {
    const char* op = "";
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool needs_grad = false;
    std::vector<std::size_t> inputs;
    BackwardFn backward;

    // Gradient storage, zero-initialised on first use.
    Tensor& grad_buffer();
  };

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // A leaf; it receives a gradient iff tensor.requires_grad().
  Var input(Tensor tensor);
  Var constant(Tensor tensor);
  Var parameter(Tensor tensor);

  // Records a primitive. `value` must already be computed; it is checked for
  // non-finite entries and the primitive is named in the error.
  Var emit(const char* op, Tensor value, std::vector<Var> inputs, BackwardFn backward);

  void backward(Var root);

  // Gradient of the last backward root w.r.t. `v`; zeros when unreached.
  Tensor grad(Var v) const;

  const Node& node(std::size_t id) const { return nodes_[id]; }
  std::size_t size() const noexcept { return nodes_.size(); }
  bool backward_done() const noexcept { return backward_done_; }

 private:
  std::deque<Node> nodes_;
  bool backward_done_ = false;
};

// ---------------------------------------------------------------------------
// Primitives. Binary elementwise ops broadcast numpy-style; a shape mismatch
// raises ErrorCode::kShapeMismatch naming both shapes.

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
// Elementwise maximum; on exact ties the gradient goes to `a`.
Var maximum(Var a, Var b);

Var add_scalar(Var a, double s);
Var mul_scalar(Var a, double s);
// s / a
Var rdiv_scalar(double s, Var a);

Var neg(Var a);
Var square(Var a);
Var exp(Var a);
Var log(Var a);
Var sqrt(Var a);
Var abs(Var a);
Var tanh(Var a);
Var sinh(Var a);
Var cosh(Var a);
Var acos(Var a);
Var asin(Var a);
Var acosh(Var a);
// sinh(t)/t, with the series 1 + t^2/6 + t^4/120 below |t| < 1e-4.
Var sinhc(Var a);
// Clamps into [lo, hi]; the gradient is zero where the clamp is active.
Var clamp(Var a, double lo, double hi);
Var clamp_min(Var a, double lo);

Var matmul(Var a, Var b);
Var transpose(Var a);
Var reshape(Var a, Shape shape);
Var broadcast_to(Var a, Shape shape);

Var sum(Var a);
Var sum(Var a, std::size_t axis, bool keepdim = true);
Var mean(Var a);
Var mean(Var a, std::size_t axis, bool keepdim = true);
// Reduction max along an axis; gradient to the first maximal entry.
Var max(Var a, std::size_t axis, bool keepdim = true);

Var concat(std::span<const Var> parts, std::size_t axis);
Var concat(std::initializer_list<Var> parts, std::size_t axis);
// Gathers entries along axis 0 (rows of a matrix); indices may repeat.
Var rows(Var a, std::span<const std::size_t> indices);
Var slice_rows(Var a, std::size_t begin, std::size_t end);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator-(Var a) { return neg(a); }
inline Var operator+(Var a, double s) { return add_scalar(a, s); }
inline Var operator+(double s, Var a) { return add_scalar(a, s); }
inline Var operator-(Var a, double s) { return add_scalar(a, -s); }
inline Var operator-(double s, Var a) { return add_scalar(neg(a), s); }
inline Var operator*(Var a, double s) { return mul_scalar(a, s); }
inline Var operator*(double s, Var a) { return mul_scalar(a, s); }
inline Var operator/(Var a, double s) { return mul_scalar(a, 1.0 / s); }
inline Var operator/(double s, Var a) { return rdiv_scalar(s, a); }

// Numerically stable log(sum(exp(a))) along `axis` (max-subtracted).
Var logsumexp(Var a, std::size_t axis, bool keepdim = true);
// Softmax along `axis`.
Var softmax(Var a, std::size_t axis);

}  // namespace hypmil::ad
