#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bevfuse/errors.hpp"

namespace bevfuse {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  // pulls from this node's grad and accumulates into the inputs' grads
  std::function<void(Node&)> backward;

  int64_t numel() const { return static_cast<int64_t>(value.size()); }
  std::vector<double>& grad_buf() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

// Value-semantic handle to a graph node. Copies share storage.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_vector(Shape shape, std::vector<double> values,
                            bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  int64_t dim(int i) const;
  int64_t numel() const { return node_->numel(); }

  std::span<double> values() { return node_->value; }
  std::span<const double> values() const { return node_->value; }
  double at(std::initializer_list<int64_t> idx) const;

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> grad_buf() { return node_->grad_buf(); }
  void zero_grad() {
    if (!node_->grad.empty()) node_->grad.assign(node_->value.size(), 0.0);
  }

  // same values, cut from the graph
  Tensor detach() const;
  double item() const;

  std::shared_ptr<detail::Node> handle() const { return node_; }
  detail::Node* node() const { return node_.get(); }
  static Tensor adopt(std::shared_ptr<detail::Node> n) {
    Tensor t;
    t.node_ = std::move(n);
    return t;
  }

 private:
  std::shared_ptr<detail::Node> node_;
};

// Reverse-mode sweep from a scalar loss; gradients accumulate into every
// reachable tensor with requires_grad. Repeated calls keep accumulating.
void backward(const Tensor& loss);

// When disabled, ops compute values but record no graph.
bool grad_mode_enabled();
void set_grad_mode(bool on);

struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(grad_mode_enabled()) { set_grad_mode(false); }
  ~NoGradGuard() { set_grad_mode(prev); }
};

// Every op scans its output for NaN/Inf when enabled (the default) and
// throws NonFiniteValue.
bool finite_checks_enabled();
void set_finite_checks(bool on);

namespace detail {
// op construction helper shared by ops.cpp
Tensor make_op(Shape shape, std::vector<double> value,
               std::vector<Tensor> inputs,
               std::function<void(Node&)> backward_fn);
}  // namespace detail

}  // namespace bevfuse
