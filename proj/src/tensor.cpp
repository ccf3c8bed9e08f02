#include "bevfuse/tensor.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

namespace bevfuse {

namespace {
bool g_grad_mode = true;
bool g_finite_checks = true;
}  // namespace

bool grad_mode_enabled() { return g_grad_mode; }
void set_grad_mode(bool on) { g_grad_mode = on; }
bool finite_checks_enabled() { return g_finite_checks; }
void set_finite_checks(bool on) { g_finite_checks = on; }

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) {
    if (d <= 0) throw ShapeMismatch("non-positive dimension in " + shape_str(s));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto n = std::make_shared<detail::Node>();
  int64_t count = shape_numel(shape);
  n->shape = std::move(shape);
  n->value.assign(static_cast<size_t>(count), value);
  n->requires_grad = requires_grad;
  return adopt(std::move(n));
}

Tensor Tensor::from_vector(Shape shape, std::vector<double> values,
                           bool requires_grad) {
  if (shape_numel(shape) != static_cast<int64_t>(values.size()))
    throw ShapeMismatch("value count does not match shape " + shape_str(shape));
  auto n = std::make_shared<detail::Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  n->requires_grad = requires_grad;
  return adopt(std::move(n));
}

Tensor Tensor::scalar(double value) { return from_vector({1}, {value}); }

int64_t Tensor::dim(int i) const {
  int r = rank();
  if (i < 0) i += r;
  if (i < 0 || i >= r) throw IndexOutOfRange("tensor dim index");
  return node_->shape[static_cast<size_t>(i)];
}

double Tensor::at(std::initializer_list<int64_t> idx) const {
  if (static_cast<int>(idx.size()) != rank())
    throw IndexOutOfRange("index rank mismatch");
  int64_t flat = 0;
  int i = 0;
  for (int64_t v : idx) {
    int64_t d = node_->shape[static_cast<size_t>(i)];
    if (v < 0 || v >= d) throw IndexOutOfRange("tensor index out of range");
    flat = flat * d + v;
    ++i;
  }
  return node_->value[static_cast<size_t>(flat)];
}

Tensor Tensor::detach() const {
  auto n = std::make_shared<detail::Node>();
  n->shape = node_->shape;
  n->value = node_->value;
  n->requires_grad = false;
  return adopt(std::move(n));
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeMismatch("item() on non-scalar tensor");
  return node_->value[0];
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1)
    throw NonScalarLoss("backward requires a scalar loss");

  // iterative DFS topological sort over inputs that require grad
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  struct Frame {
    detail::Node* node;
    size_t next_input;
  };
  std::vector<Frame> stack;
  if (loss.node()->requires_grad) stack.push_back({loss.node(), 0});
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_input < f.node->inputs.size()) {
      detail::Node* in = f.node->inputs[f.next_input++].get();
      if (in->requires_grad && !seen.count(in)) {
        seen.insert(in);
        stack.push_back({in, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  // Interior grads are scratch for this sweep; only leaves accumulate
  // across repeated backward calls.
  for (detail::Node* n : order)
    if (n->backward) n->grad.clear();

  loss.node()->grad_buf()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backward) n->backward(*n);
  }
}

namespace detail {

Tensor make_op(Shape shape, std::vector<double> value,
               std::vector<Tensor> inputs,
               std::function<void(Node&)> backward_fn) {
  if (finite_checks_enabled()) {
    for (double v : value)
      if (!std::isfinite(v))
        throw NonFiniteValue("non-finite value produced by an op");
  }
  auto n = std::make_shared<Node>();
  if (shape_numel(shape) != static_cast<int64_t>(value.size()))
    throw ShapeMismatch("op output size mismatch");
  n->shape = std::move(shape);
  n->value = std::move(value);
  if (grad_mode_enabled()) {
    bool needs = false;
    for (const auto& t : inputs)
      if (t.defined() && t.requires_grad()) needs = true;
    if (needs) {
      n->requires_grad = true;
      n->inputs.reserve(inputs.size());
      for (const auto& t : inputs) n->inputs.push_back(t.handle());
      n->backward = std::move(backward_fn);
    }
  }
  return Tensor::adopt(std::move(n));
}

}  // namespace detail

}  // namespace bevfuse
