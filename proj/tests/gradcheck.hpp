#pragma once

// Central-difference gradient certification shared by the unit and
// acceptance suites. Lives test-side so the checks stay independent of the
// library's backward implementations.

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "bevfuse/ops.hpp"
#include "bevfuse/rng.hpp"
#include "bevfuse/tensor.hpp"

namespace bevfuse::testutil {

inline double rel_err(double a, double b) {
  double denom = std::max({std::abs(a), std::abs(b), 1e-6});
  return std::abs(a - b) / denom;
}

// Scalarizes f's output against fixed random weights, then compares analytic
// input gradients with central differences of the scalarized value.
template <typename F>
double grad_check(F&& f, std::vector<Tensor>& inputs, Rng& rng,
                  double h = 1e-5) {
  Tensor out = f(inputs);
  std::vector<double> w(static_cast<size_t>(out.numel()));
  for (auto& v : w) v = rng.uniform(-1.0, 1.0);
  Tensor weights = Tensor::from_vector(out.shape(), w);

  Tensor loss = sum(mul(out, weights));
  for (auto& in : inputs) in.zero_grad();
  backward(loss);

  auto scalarize = [&]() {
    NoGradGuard ng;
    Tensor y = f(inputs);
    double acc = 0;
    auto yv = y.values();
    for (size_t i = 0; i < yv.size(); ++i) acc += yv[i] * w[i];
    return acc;
  };

  double worst = 0;
  for (auto& in : inputs) {
    if (!in.requires_grad()) continue;
    auto vals = in.values();
    auto grad = in.grad();
    for (size_t i = 0; i < vals.size(); ++i) {
      double keep = vals[i];
      vals[i] = keep + h;
      double up = scalarize();
      vals[i] = keep - h;
      double down = scalarize();
      vals[i] = keep;
      double numeric = (up - down) / (2 * h);
      double analytic = grad.empty() ? 0.0 : grad[i];
      worst = std::max(worst, rel_err(analytic, numeric));
    }
  }
  return worst;
}

inline Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad = true,
                            double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(static_cast<size_t>(shape_numel(shape)));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from_vector(std::move(shape), std::move(v), requires_grad);
}

// One named check per differentiable op; each returns the worst relative
// error for a fresh random instance.
inline std::vector<std::pair<std::string, std::function<double(Rng&)>>>
diffcore_gradcheck_suite() {
  using Case = std::pair<std::string, std::function<double(Rng&)>>;
  std::vector<Case> cases;

  cases.emplace_back("add_broadcast", [](Rng& rng) {
    std::vector<Tensor> in = {random_tensor({3, 4, 5}, rng),
                              random_tensor({4, 1}, rng)};
    return grad_check([](auto& t) { return add(t[0], t[1]); }, in, rng);
  });
  cases.emplace_back("sub", [](Rng& rng) {
    std::vector<Tensor> in = {random_tensor({2, 6}, rng),
                              random_tensor({2, 6}, rng)};
    return grad_check([](auto& t) { return sub(t[0], t[1]); }, in, rng);
  });
  cases.emplace_back("mul_broadcast", [](Rng& rng) {
    std::vector<Tensor> in = {random_tensor({2, 3, 4}, rng),
                              random_tensor({3, 4}, rng)};
    return grad_check([](auto& t) { return mul(t[0], t[1]); }, in, rng);
  });
  cases.emplace_back("sigmoid", [](Rng& rng) {
    std::vector<Tensor> in = {random_tensor({4, 7}, rng, true, -3, 3)};
    return grad_check([](auto& t) { return sigmoid(t[0]); }, in, rng);
  });
  cases.emplace_back("softplus", [](Rng& rng) {
    std::vector<Tensor> in = {random_tensor({4, 7}, rng, true, -3, 3)};
    return grad_check([](auto& t) { return softplus(t[0]); }, in, rng);
  });
  cases.emplace_back("gelu", [](Rng& rng) {
    std::vector<Tensor> in = {random_tensor({5, 5}, rng, true, -2, 2)};
    return grad_check([](auto& t) { return gelu(t[0]); }, in, rng);
  });
  cases.emplace_back("log", [](Rng& rng) {
    std::vector<Tensor> in = {random_tensor({3, 8}, rng, true, 0.2, 4.0)};
    return grad_check([](auto& t) { return log_op(t[0]); }, in, rng);
  });
  cases.emplace_back("pow_scalar", [](Rng& rng) {
    std::vector<Tensor> in = {random_tensor({3, 5}, rng, true, 0.3, 2.0)};
    return grad_check([](auto& t) { return pow_scalar(t[0], 2.0); }, in, rng);
  });
  cases.emplace_back("mean", [](Rng& rng) {
    std::vector<Tensor> in = {random_tensor({6, 6}, rng)};
    return grad_check([](auto& t) { return mean(t[0]); }, in, rng);
  });
  cases.emplace_back("matmul", [](Rng& rng) {
    std::vector<Tensor> in = {random_tensor({4, 6}, rng),
                              random_tensor({6, 3}, rng)};
    return grad_check([](auto& t) { return matmul(t[0], t[1]); }, in, rng);
  });
  cases.emplace_back("linear", [](Rng& rng) {
    std::vector<Tensor> in = {random_tensor({2, 5, 4}, rng),
                              random_tensor({4, 3}, rng),
                              random_tensor({3}, rng)};
    return grad_check([](auto& t) { return linear(t[0], t[1], t[2]); }, in, rng);
  });
  cases.emplace_back("conv2d", [](Rng& rng) {
    std::vector<Tensor> in = {random_tensor({3, 5, 5}, rng),
                              random_tensor({2, 3, 3, 3}, rng)};
    return grad_check([](auto& t) { return conv2d(t[0], t[1], 1, 1); }, in, rng);
  });
  cases.emplace_back("conv2d_strided", [](Rng& rng) {
    std::vector<Tensor> in = {random_tensor({2, 6, 8}, rng),
                              random_tensor({3, 2, 3, 3}, rng)};
    return grad_check([](auto& t) { return conv2d(t[0], t[1], 2, 1); }, in, rng);
  });
  cases.emplace_back("conv3d", [](Rng& rng) {
    std::vector<Tensor> in = {random_tensor({2, 3, 4, 4}, rng),
                              random_tensor({2, 2, 3, 1, 1}, rng)};
    return grad_check([](auto& t) { return conv3d(t[0], t[1]); }, in, rng);
  });
  cases.emplace_back("softmax", [](Rng& rng) {
    std::vector<Tensor> in = {random_tensor({5, 9}, rng, true, -2, 2)};
    return grad_check([](auto& t) { return softmax(t[0]); }, in, rng);
  });
  cases.emplace_back("bilinear_resize", [](Rng& rng) {
    std::vector<Tensor> in = {random_tensor({2, 3, 4}, rng)};
    return grad_check([](auto& t) { return bilinear_resize(t[0], 7, 9); }, in,
                      rng);
  });
  cases.emplace_back("layer_norm", [](Rng& rng) {
    std::vector<Tensor> in = {random_tensor({4, 6}, rng),
                              random_tensor({6}, rng, true, 0.5, 1.5),
                              random_tensor({6}, rng)};
    return grad_check(
        [](auto& t) { return layer_norm(t[0], t[1], t[2]); }, in, rng);
  });
  cases.emplace_back("grid_sample", [](Rng& rng) {
    std::vector<Tensor> in = {random_tensor({2, 6, 6}, rng)};
    std::vector<double> coords;
    for (int i = 0; i < 12; ++i) {
      coords.push_back(rng.uniform(-1.5, 6.5));
      coords.push_back(rng.uniform(-1.5, 6.5));
    }
    return grad_check(
        [coords](auto& t) { return grid_sample_bilinear(t[0], coords, 3, 4); },
        in, rng);
  });
  cases.emplace_back("concat_slice", [](Rng& rng) {
    std::vector<Tensor> in = {random_tensor({3, 4}, rng),
                              random_tensor({2, 4}, rng)};
    return grad_check(
        [](auto& t) {
          Tensor c = concat({t[0], t[1]}, 0);
          return slice(c, 0, 1, 3);
        },
        in, rng);
  });
  cases.emplace_back("transpose_reshape", [](Rng& rng) {
    std::vector<Tensor> in = {random_tensor({4, 6}, rng)};
    return grad_check(
        [](auto& t) { return reshape(transpose2d(t[0]), {8, 3}); }, in, rng);
  });
  return cases;
}

}  // namespace bevfuse::testutil
