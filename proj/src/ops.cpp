#include "bevfuse/ops.hpp"

#include <algorithm>
#include <cmath>

namespace bevfuse {

namespace {

using detail::Node;
using detail::make_op;

// Right-aligned broadcast plan: maps output flat index to each operand's
// flat index via per-axis strides that are 0 on broadcast axes.
struct BroadcastPlan {
  Shape out_shape;
  std::vector<int64_t> a_stride;
  std::vector<int64_t> b_stride;
  std::vector<int64_t> out_dims;
};

BroadcastPlan broadcast_plan(const Shape& a, const Shape& b) {
  size_t ra = a.size(), rb = b.size();
  size_t r = std::max(ra, rb);
  BroadcastPlan p;
  p.out_shape.resize(r);
  p.out_dims.resize(r);
  for (size_t i = 0; i < r; ++i) {
    int64_t da = i < r - ra ? 1 : a[i - (r - ra)];
    int64_t db = i < r - rb ? 1 : b[i - (r - rb)];
    if (da != db && da != 1 && db != 1)
      throw ShapeMismatch("cannot broadcast " + shape_str(a) + " with " +
                          shape_str(b));
    p.out_shape[i] = std::max(da, db);
    p.out_dims[i] = p.out_shape[i];
  }
  auto strides_of = [&](const Shape& s) {
    std::vector<int64_t> st(r, 0);
    int64_t acc = 1;
    for (size_t i = 0; i < s.size(); ++i) {
      size_t ax = s.size() - 1 - i;
      st[r - 1 - i] = (s[ax] == 1) ? 0 : acc;
      acc *= s[ax];
    }
    return st;
  };
  p.a_stride = strides_of(a);
  p.b_stride = strides_of(b);
  return p;
}

template <typename F>
void for_each_broadcast(const BroadcastPlan& p, F&& body) {
  size_t r = p.out_dims.size();
  std::vector<int64_t> idx(r, 0);
  int64_t n = 1;
  for (int64_t d : p.out_dims) n *= d;
  int64_t ia = 0, ib = 0;
  for (int64_t flat = 0; flat < n; ++flat) {
    body(flat, ia, ib);
    for (size_t ax = r; ax-- > 0;) {
      ++idx[ax];
      ia += p.a_stride[ax];
      ib += p.b_stride[ax];
      if (idx[ax] < p.out_dims[ax]) break;
      ia -= p.a_stride[ax] * p.out_dims[ax];
      ib -= p.b_stride[ax] * p.out_dims[ax];
      idx[ax] = 0;
    }
  }
}

Tensor binary_broadcast(const Tensor& a, const Tensor& b,
                        double (*fwd)(double, double),
                        void (*bwd)(double, double, double, double&, double&)) {
  BroadcastPlan plan = broadcast_plan(a.shape(), b.shape());
  std::vector<double> out(static_cast<size_t>(shape_numel(plan.out_shape)));
  auto av = a.values();
  auto bv = b.values();
  for_each_broadcast(plan, [&](int64_t o, int64_t ia, int64_t ib) {
    out[static_cast<size_t>(o)] = fwd(av[static_cast<size_t>(ia)],
                                      bv[static_cast<size_t>(ib)]);
  });
  return make_op(plan.out_shape, std::move(out), {a, b},
                 [plan, bwd](Node& self) {
                   auto& a_node = *self.inputs[0];
                   auto& b_node = *self.inputs[1];
                   std::vector<double>* ga =
                       a_node.requires_grad ? &a_node.grad_buf() : nullptr;
                   std::vector<double>* gb =
                       b_node.requires_grad ? &b_node.grad_buf() : nullptr;
                   double dummy = 0;
                   for_each_broadcast(plan, [&](int64_t o, int64_t ia, int64_t ib) {
                     double g = self.grad[static_cast<size_t>(o)];
                     double da = 0, db = 0;
                     bwd(a_node.value[static_cast<size_t>(ia)],
                         b_node.value[static_cast<size_t>(ib)], g, da, db);
                     (ga ? (*ga)[static_cast<size_t>(ia)] : dummy) += da;
                     (gb ? (*gb)[static_cast<size_t>(ib)] : dummy) += db;
                   });
                 });
}

Tensor unary_op(const Tensor& x, double (*fwd)(double),
                double (*dfdx)(double, double)) {
  auto xv = x.values();
  std::vector<double> out(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
  return make_op(x.shape(), std::move(out), {x}, [dfdx](Node& self) {
    auto& in = *self.inputs[0];
    auto& g = in.grad_buf();
    for (size_t i = 0; i < self.value.size(); ++i)
      g[i] += self.grad[i] * dfdx(in.value[i], self.value[i]);
  });
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_broadcast(
      a, b, [](double x, double y) { return x + y; },
      [](double, double, double g, double& da, double& db) {
        da = g;
        db = g;
      });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_broadcast(
      a, b, [](double x, double y) { return x - y; },
      [](double, double, double g, double& da, double& db) {
        da = g;
        db = -g;
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_broadcast(
      a, b, [](double x, double y) { return x * y; },
      [](double x, double y, double g, double& da, double& db) {
        da = g * y;
        db = g * x;
      });
}

Tensor add_scalar(const Tensor& x, double c) {
  auto xv = x.values();
  std::vector<double> out(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] + c;
  return make_op(x.shape(), std::move(out), {x}, [](Node& self) {
    auto& g = self.inputs[0]->grad_buf();
    for (size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor mul_scalar(const Tensor& x, double c) {
  auto xv = x.values();
  std::vector<double> out(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] * c;
  return make_op(x.shape(), std::move(out), {x}, [c](Node& self) {
    auto& g = self.inputs[0]->grad_buf();
    for (size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * c;
  });
}

Tensor neg(const Tensor& x) { return mul_scalar(x, -1.0); }

Tensor sigmoid(const Tensor& x) {
  return unary_op(
      x,
      [](double v) {
        return v >= 0 ? 1.0 / (1.0 + std::exp(-v))
                      : std::exp(v) / (1.0 + std::exp(v));
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor softplus(const Tensor& x) {
  return unary_op(
      x,
      [](double v) {
        // log(1 + e^v) without overflow
        return v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
      },
      [](double v, double) {
        return v >= 0 ? 1.0 / (1.0 + std::exp(-v))
                      : std::exp(v) / (1.0 + std::exp(v));
      });
}

Tensor gelu(const Tensor& x) {
  return unary_op(
      x,
      [](double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); },
      [](double v, double) {
        double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
        double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
        return cdf + v * pdf;
      });
}

Tensor log_op(const Tensor& x) {
  return unary_op(x, [](double v) { return std::log(v); },
                  [](double v, double) { return 1.0 / v; });
}

Tensor pow_scalar(const Tensor& x, double p) {
  auto xv = x.values();
  std::vector<double> out(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) out[i] = std::pow(xv[i], p);
  return make_op(x.shape(), std::move(out), {x}, [p](Node& self) {
    auto& in = *self.inputs[0];
    auto& g = in.grad_buf();
    for (size_t i = 0; i < self.value.size(); ++i) {
      double d = p == 0.0 ? 0.0 : p * std::pow(in.value[i], p - 1.0);
      g[i] += self.grad[i] * d;
    }
  });
}

Tensor sum(const Tensor& x) {
  double s = 0;
  for (double v : x.values()) s += v;
  return make_op({1}, {s}, {x}, [](Node& self) {
    auto& g = self.inputs[0]->grad_buf();
    double go = self.grad[0];
    for (auto& v : g) v += go;
  });
}

Tensor mean(const Tensor& x) {
  double s = 0;
  for (double v : x.values()) s += v;
  double inv_n = 1.0 / static_cast<double>(x.numel());
  return make_op({1}, {s * inv_n}, {x}, [inv_n](Node& self) {
    auto& g = self.inputs[0]->grad_buf();
    double go = self.grad[0] * inv_n;
    for (auto& v : g) v += go;
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel())
    throw ShapeMismatch("reshape to incompatible size " + shape_str(shape));
  std::vector<double> out(x.values().begin(), x.values().end());
  return make_op(std::move(shape), std::move(out), {x}, [](Node& self) {
    auto& g = self.inputs[0]->grad_buf();
    for (size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor transpose2d(const Tensor& x) {
  if (x.rank() != 2) throw ShapeMismatch("transpose2d needs a rank-2 tensor");
  int64_t r = x.dim(0), c = x.dim(1);
  auto xv = x.values();
  std::vector<double> out(static_cast<size_t>(r * c));
  for (int64_t i = 0; i < r; ++i)
    for (int64_t j = 0; j < c; ++j)
      out[static_cast<size_t>(j * r + i)] = xv[static_cast<size_t>(i * c + j)];
  return make_op({c, r}, std::move(out), {x}, [r, c](Node& self) {
    auto& g = self.inputs[0]->grad_buf();
    for (int64_t i = 0; i < r; ++i)
      for (int64_t j = 0; j < c; ++j)
        g[static_cast<size_t>(i * c + j)] +=
            self.grad[static_cast<size_t>(j * r + i)];
  });
}

namespace {
// flatten a shape into (outer, axis, inner) around `axis`
void axis_split(const Shape& s, int axis, int64_t& outer, int64_t& len,
                int64_t& inner) {
  outer = 1;
  inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s[static_cast<size_t>(i)];
  len = s[static_cast<size_t>(axis)];
  for (size_t i = static_cast<size_t>(axis) + 1; i < s.size(); ++i)
    inner *= s[i];
}
}  // namespace

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ShapeMismatch("concat of zero tensors");
  const Shape& s0 = parts[0].shape();
  if (axis < 0) axis += static_cast<int>(s0.size());
  if (axis < 0 || axis >= static_cast<int>(s0.size()))
    throw ShapeMismatch("concat axis out of range");
  Shape out_shape = s0;
  int64_t total = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != s0.size()) throw ShapeMismatch("concat rank mismatch");
    for (size_t i = 0; i < s.size(); ++i)
      if (static_cast<int>(i) != axis && s[i] != s0[i])
        throw ShapeMismatch("concat shape mismatch");
    total += s[static_cast<size_t>(axis)];
  }
  out_shape[static_cast<size_t>(axis)] = total;

  int64_t outer, len0, inner;
  axis_split(out_shape, axis, outer, len0, inner);
  std::vector<double> out(static_cast<size_t>(shape_numel(out_shape)));
  std::vector<int64_t> lens;
  int64_t off = 0;
  for (const auto& p : parts) {
    int64_t len = p.shape()[static_cast<size_t>(axis)];
    lens.push_back(len);
    auto pv = p.values();
    for (int64_t o = 0; o < outer; ++o) {
      const double* src = pv.data() + o * len * inner;
      double* dst = out.data() + (o * total + off) * inner;
      std::copy(src, src + len * inner, dst);
    }
    off += len;
  }
  return make_op(out_shape, std::move(out), parts,
                 [outer, inner, total, lens](Node& self) {
                   int64_t off2 = 0;
                   for (size_t pi = 0; pi < self.inputs.size(); ++pi) {
                     auto& in = *self.inputs[pi];
                     int64_t len = lens[pi];
                     if (in.requires_grad) {
                       auto& g = in.grad_buf();
                       for (int64_t o = 0; o < outer; ++o) {
                         const double* src =
                             self.grad.data() + (o * total + off2) * inner;
                         double* dst = g.data() + o * len * inner;
                         for (int64_t k = 0; k < len * inner; ++k) dst[k] += src[k];
                       }
                     }
                     off2 += len;
                   }
                 });
}

Tensor slice(const Tensor& x, int axis, int64_t start, int64_t len) {
  const Shape& s = x.shape();
  if (axis < 0) axis += static_cast<int>(s.size());
  if (axis < 0 || axis >= static_cast<int>(s.size()))
    throw ShapeMismatch("slice axis out of range");
  int64_t d = s[static_cast<size_t>(axis)];
  if (start < 0 || len <= 0 || start + len > d)
    throw IndexOutOfRange("slice range out of bounds");
  Shape out_shape = s;
  out_shape[static_cast<size_t>(axis)] = len;
  int64_t outer, dlen, inner;
  axis_split(s, axis, outer, dlen, inner);
  auto xv = x.values();
  std::vector<double> out(static_cast<size_t>(outer * len * inner));
  for (int64_t o = 0; o < outer; ++o) {
    const double* src = xv.data() + (o * d + start) * inner;
    std::copy(src, src + len * inner, out.data() + o * len * inner);
  }
  return make_op(out_shape, std::move(out), {x},
                 [outer, inner, d, start, len](Node& self) {
                   auto& g = self.inputs[0]->grad_buf();
                   for (int64_t o = 0; o < outer; ++o) {
                     double* dst = g.data() + (o * d + start) * inner;
                     const double* src = self.grad.data() + o * len * inner;
                     for (int64_t k = 0; k < len * inner; ++k) dst[k] += src[k];
                   }
                 });
}

}  // namespace bevfuse
