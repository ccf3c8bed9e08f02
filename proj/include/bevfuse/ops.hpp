#pragma once

#include <vector>

#include "bevfuse/tensor.hpp"

namespace bevfuse {

// ---- elementwise, with numpy-style right-aligned broadcasting ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& x, double c);
Tensor mul_scalar(const Tensor& x, double c);
Tensor neg(const Tensor& x);

Tensor sigmoid(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor gelu(const Tensor& x);
Tensor log_op(const Tensor& x);
Tensor pow_scalar(const Tensor& x, double p);

// ---- reductions ----
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// ---- shape ----
Tensor reshape(const Tensor& x, Shape shape);
Tensor transpose2d(const Tensor& x);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& x, int axis, int64_t start, int64_t len);

// ---- linear algebra ----
// a: [..., m, k] treated as rows, b: [k, n]
Tensor matmul(const Tensor& a, const Tensor& b);
// y = x * w + bias, broadcasting over leading dims of x;
// x: [..., n_in], w: [n_in, n_out], bias: [n_out] (may be undefined)
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);

// ---- nn primitives ----
// x: [c_in, h, w], k: [c_out, c_in, kh, kw]; cross-correlation
Tensor conv2d(const Tensor& x, const Tensor& k, int stride, int padding);
// x: [c_in, t, h, w], k: [c_out, c_in, kt, kh, kw]; valid (unpadded)
Tensor conv3d(const Tensor& x, const Tensor& k);
// softmax over the last axis, max-subtracted
Tensor softmax(const Tensor& x);
// x: [c, h, w] -> [c, out_h, out_w], align_corners = false
Tensor bilinear_resize(const Tensor& x, int64_t out_h, int64_t out_w);
// normalization over the last axis; gain/bias: [d]
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);
// x: [c, h, w] sampled at fractional (row, col) pairs; coords: [n][2]
// row-major; samples outside the map read 0. Differentiable in x only.
Tensor grid_sample_bilinear(const Tensor& x,
                            const std::vector<double>& coords_rc,
                            int64_t out_h, int64_t out_w);

}  // namespace bevfuse
