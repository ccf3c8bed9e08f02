#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "bevfuse/ops.hpp"

namespace bevfuse {

namespace {

using detail::Node;
using detail::make_op;

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

CMapMat as_mat(const std::vector<double>& v, int64_t r, int64_t c) {
  return CMapMat(v.data(), r, c);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 2 || b.rank() != 2)
    throw ShapeMismatch("matmul expects [..., m, k] x [k, n]");
  int64_t k = a.dim(-1);
  if (b.dim(0) != k)
    throw ShapeMismatch("matmul inner dims disagree: " + shape_str(a.shape()) +
                        " x " + shape_str(b.shape()));
  int64_t rows = a.numel() / k;
  int64_t n = b.dim(1);
  Shape out_shape = a.shape();
  out_shape.back() = n;

  std::vector<double> out(static_cast<size_t>(rows * n));
  {
    CMapMat ma(a.values().data(), rows, k);
    CMapMat mb(b.values().data(), k, n);
    MapMat mo(out.data(), rows, n);
    mo.noalias() = ma * mb;
  }
  return make_op(out_shape, std::move(out), {a, b}, [rows, k, n](Node& self) {
    auto& na = *self.inputs[0];
    auto& nb = *self.inputs[1];
    CMapMat go(self.grad.data(), rows, n);
    if (na.requires_grad) {
      MapMat ga(na.grad_buf().data(), rows, k);
      CMapMat mb(nb.value.data(), k, n);
      ga.noalias() += go * mb.transpose();
    }
    if (nb.requires_grad) {
      MapMat gb(nb.grad_buf().data(), k, n);
      CMapMat ma(na.value.data(), rows, k);
      gb.noalias() += ma.transpose() * go;
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  if (w.rank() != 2) throw ShapeMismatch("linear weight must be rank 2");
  if (x.dim(-1) != w.dim(0))
    throw ShapeMismatch("linear: input width " + std::to_string(x.dim(-1)) +
                        " vs weight rows " + std::to_string(w.dim(0)));
  Tensor y = matmul(x, w);
  if (!bias.defined()) return y;
  if (bias.rank() != 1 || bias.dim(0) != w.dim(1))
    throw ShapeMismatch("linear bias shape");
  return add(y, bias);
}

Tensor conv2d(const Tensor& x, const Tensor& k, int stride, int padding) {
  if (stride < 1) throw InvalidStride("conv2d stride must be >= 1");
  if (padding < 0) throw Error("conv2d padding must be >= 0");
  if (x.rank() != 3 || k.rank() != 4)
    throw ShapeMismatch("conv2d expects x [c,h,w], k [co,ci,kh,kw]");
  int64_t ci = x.dim(0), h = x.dim(1), w = x.dim(2);
  int64_t co = k.dim(0), kci = k.dim(1), kh = k.dim(2), kw = k.dim(3);
  if (kci != ci) throw ShapeMismatch("conv2d channel mismatch");
  int64_t ho = (h + 2 * padding - kh) / stride + 1;
  int64_t wo = (w + 2 * padding - kw) / stride + 1;
  if (h + 2 * padding < kh || w + 2 * padding < kw)
    throw ShapeMismatch("conv2d kernel larger than padded input");

  // im2col: [ci*kh*kw, ho*wo]
  int64_t patch = ci * kh * kw;
  int64_t cols_n = ho * wo;
  std::vector<double> cols(static_cast<size_t>(patch * cols_n), 0.0);
  auto xv = x.values();
  for (int64_t c = 0; c < ci; ++c) {
    for (int64_t dy = 0; dy < kh; ++dy) {
      for (int64_t dx = 0; dx < kw; ++dx) {
        int64_t row = (c * kh + dy) * kw + dx;
        double* dst = cols.data() + row * cols_n;
        for (int64_t oy = 0; oy < ho; ++oy) {
          int64_t iy = oy * stride + dy - padding;
          if (iy < 0 || iy >= h) continue;
          const double* src = xv.data() + (c * h + iy) * w;
          for (int64_t ox = 0; ox < wo; ++ox) {
            int64_t ix = ox * stride + dx - padding;
            if (ix >= 0 && ix < w) dst[oy * wo + ox] = src[ix];
          }
        }
      }
    }
  }

  std::vector<double> out(static_cast<size_t>(co * cols_n));
  {
    CMapMat mk(k.values().data(), co, patch);
    CMapMat mc(cols.data(), patch, cols_n);
    MapMat mo(out.data(), co, cols_n);
    mo.noalias() = mk * mc;
  }

  auto cols_shared = std::make_shared<std::vector<double>>(std::move(cols));
  int s = stride, p = padding;
  return make_op(
      {co, ho, wo}, std::move(out), {x, k},
      [=](Node& self) {
        auto& nx = *self.inputs[0];
        auto& nk = *self.inputs[1];
        CMapMat go(self.grad.data(), co, cols_n);
        if (nk.requires_grad) {
          MapMat gk(nk.grad_buf().data(), co, patch);
          CMapMat mc(cols_shared->data(), patch, cols_n);
          gk.noalias() += go * mc.transpose();
        }
        if (nx.requires_grad) {
          // d cols = k^T * go, then col2im scatter
          std::vector<double> dcols(static_cast<size_t>(patch * cols_n));
          {
            CMapMat mk(nk.value.data(), co, patch);
            MapMat md(dcols.data(), patch, cols_n);
            md.noalias() = mk.transpose() * go;
          }
          auto& gx = nx.grad_buf();
          for (int64_t c = 0; c < ci; ++c) {
            for (int64_t dy = 0; dy < kh; ++dy) {
              for (int64_t dx = 0; dx < kw; ++dx) {
                int64_t row = (c * kh + dy) * kw + dx;
                const double* src = dcols.data() + row * cols_n;
                for (int64_t oy = 0; oy < ho; ++oy) {
                  int64_t iy = oy * s + dy - p;
                  if (iy < 0 || iy >= h) continue;
                  double* dst = gx.data() + (c * h + iy) * w;
                  for (int64_t ox = 0; ox < wo; ++ox) {
                    int64_t ix = ox * s + dx - p;
                    if (ix >= 0 && ix < w) dst[ix] += src[oy * wo + ox];
                  }
                }
              }
            }
          }
        }
      });
}

Tensor conv3d(const Tensor& x, const Tensor& k) {
  if (x.rank() != 4 || k.rank() != 5)
    throw ShapeMismatch("conv3d expects x [c,t,h,w], k [co,ci,kt,kh,kw]");
  int64_t ci = x.dim(0), t = x.dim(1), h = x.dim(2), w = x.dim(3);
  int64_t co = k.dim(0), kci = k.dim(1), kt = k.dim(2), kh = k.dim(3),
          kw = k.dim(4);
  if (kci != ci) throw ShapeMismatch("conv3d channel mismatch");
  if (kt > t || kh > h || kw > w)
    throw ShapeMismatch("conv3d kernel exceeds input extent");
  int64_t to = t - kt + 1, ho = h - kh + 1, wo = w - kw + 1;

  auto xv = x.values();
  auto kv = k.values();
  std::vector<double> out(static_cast<size_t>(co * to * ho * wo), 0.0);
  auto x_at = [&](int64_t c, int64_t tt, int64_t y, int64_t xx) {
    return xv[static_cast<size_t>(((c * t + tt) * h + y) * w + xx)];
  };
  for (int64_t o = 0; o < co; ++o) {
    for (int64_t ot = 0; ot < to; ++ot)
      for (int64_t oy = 0; oy < ho; ++oy)
        for (int64_t ox = 0; ox < wo; ++ox) {
          double acc = 0;
          for (int64_t c = 0; c < ci; ++c)
            for (int64_t dt = 0; dt < kt; ++dt)
              for (int64_t dy = 0; dy < kh; ++dy)
                for (int64_t dx = 0; dx < kw; ++dx)
                  acc += x_at(c, ot + dt, oy + dy, ox + dx) *
                         kv[static_cast<size_t>(
                             (((o * ci + c) * kt + dt) * kh + dy) * kw + dx)];
          out[static_cast<size_t>(((o * to + ot) * ho + oy) * wo + ox)] = acc;
        }
  }
  return make_op(
      {co, to, ho, wo}, std::move(out), {x, k},
      [=](Node& self) {
        auto& nx = *self.inputs[0];
        auto& nk = *self.inputs[1];
        const auto& kvv = nk.value;
        const auto& xvv = nx.value;
        std::vector<double>* gx = nx.requires_grad ? &nx.grad_buf() : nullptr;
        std::vector<double>* gk = nk.requires_grad ? &nk.grad_buf() : nullptr;
        for (int64_t o = 0; o < co; ++o)
          for (int64_t ot = 0; ot < to; ++ot)
            for (int64_t oy = 0; oy < ho; ++oy)
              for (int64_t ox = 0; ox < wo; ++ox) {
                double g = self.grad[static_cast<size_t>(
                    ((o * to + ot) * ho + oy) * wo + ox)];
                for (int64_t c = 0; c < ci; ++c)
                  for (int64_t dt = 0; dt < kt; ++dt)
                    for (int64_t dy = 0; dy < kh; ++dy)
                      for (int64_t dx = 0; dx < kw; ++dx) {
                        size_t xi = static_cast<size_t>(
                            ((c * t + ot + dt) * h + oy + dy) * w + ox + dx);
                        size_t ki = static_cast<size_t>(
                            (((o * ci + c) * kt + dt) * kh + dy) * kw + dx);
                        if (gx) (*gx)[xi] += g * kvv[ki];
                        if (gk) (*gk)[ki] += g * xvv[xi];
                      }
              }
      });
}

Tensor softmax(const Tensor& x) {
  int64_t n = x.dim(-1);
  int64_t slices = x.numel() / n;
  auto xv = x.values();
  std::vector<double> out(xv.size());
  for (int64_t s = 0; s < slices; ++s) {
    const double* in = xv.data() + s * n;
    double* o = out.data() + s * n;
    double mx = *std::max_element(in, in + n);
    double denom = 0;
    for (int64_t i = 0; i < n; ++i) {
      o[i] = std::exp(in[i] - mx);
      denom += o[i];
    }
    for (int64_t i = 0; i < n; ++i) o[i] /= denom;
  }
  return make_op(x.shape(), std::move(out), {x}, [n, slices](Node& self) {
    auto& g = self.inputs[0]->grad_buf();
    for (int64_t s = 0; s < slices; ++s) {
      const double* y = self.value.data() + s * n;
      const double* gy = self.grad.data() + s * n;
      double dot = 0;
      for (int64_t i = 0; i < n; ++i) dot += gy[i] * y[i];
      double* gx = g.data() + s * n;
      for (int64_t i = 0; i < n; ++i) gx[i] += (gy[i] - dot) * y[i];
    }
  });
}

namespace {
struct LerpWeights {
  int64_t lo, hi;
  double w_hi;
};
LerpWeights resize_axis(int64_t out_i, int64_t in_n, int64_t out_n) {
  double scale = static_cast<double>(in_n) / static_cast<double>(out_n);
  double src = (out_i + 0.5) * scale - 0.5;
  src = std::max(0.0, std::min(src, static_cast<double>(in_n - 1)));
  int64_t lo = static_cast<int64_t>(std::floor(src));
  int64_t hi = std::min(lo + 1, in_n - 1);
  return {lo, hi, src - lo};
}
}  // namespace

Tensor bilinear_resize(const Tensor& x, int64_t out_h, int64_t out_w) {
  if (x.rank() != 3) throw ShapeMismatch("bilinear_resize expects [c,h,w]");
  if (out_h < 1 || out_w < 1) throw ShapeMismatch("resize target must be >= 1");
  int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  std::vector<LerpWeights> rows(static_cast<size_t>(out_h)),
      cols(static_cast<size_t>(out_w));
  for (int64_t i = 0; i < out_h; ++i) rows[static_cast<size_t>(i)] = resize_axis(i, h, out_h);
  for (int64_t j = 0; j < out_w; ++j) cols[static_cast<size_t>(j)] = resize_axis(j, w, out_w);

  auto xv = x.values();
  std::vector<double> out(static_cast<size_t>(c * out_h * out_w));
  for (int64_t ch = 0; ch < c; ++ch) {
    const double* plane = xv.data() + ch * h * w;
    double* o = out.data() + ch * out_h * out_w;
    for (int64_t i = 0; i < out_h; ++i) {
      const auto& r = rows[static_cast<size_t>(i)];
      for (int64_t j = 0; j < out_w; ++j) {
        const auto& cc = cols[static_cast<size_t>(j)];
        double top = plane[r.lo * w + cc.lo] * (1 - cc.w_hi) +
                     plane[r.lo * w + cc.hi] * cc.w_hi;
        double bot = plane[r.hi * w + cc.lo] * (1 - cc.w_hi) +
                     plane[r.hi * w + cc.hi] * cc.w_hi;
        o[i * out_w + j] = top * (1 - r.w_hi) + bot * r.w_hi;
      }
    }
  }
  return make_op({c, out_h, out_w}, std::move(out), {x},
                 [c, h, w, out_h, out_w, rows, cols](Node& self) {
                   auto& g = self.inputs[0]->grad_buf();
                   for (int64_t ch = 0; ch < c; ++ch) {
                     double* gp = g.data() + ch * h * w;
                     const double* go = self.grad.data() + ch * out_h * out_w;
                     for (int64_t i = 0; i < out_h; ++i) {
                       const auto& r = rows[static_cast<size_t>(i)];
                       for (int64_t j = 0; j < out_w; ++j) {
                         const auto& cc = cols[static_cast<size_t>(j)];
                         double gv = go[i * out_w + j];
                         gp[r.lo * w + cc.lo] += gv * (1 - r.w_hi) * (1 - cc.w_hi);
                         gp[r.lo * w + cc.hi] += gv * (1 - r.w_hi) * cc.w_hi;
                         gp[r.hi * w + cc.lo] += gv * r.w_hi * (1 - cc.w_hi);
                         gp[r.hi * w + cc.hi] += gv * r.w_hi * cc.w_hi;
                       }
                     }
                   }
                 });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps) {
  int64_t d = x.dim(-1);
  if (gain.numel() != d || bias.numel() != d)
    throw ShapeMismatch("layer_norm gain/bias must match the last axis");
  int64_t slices = x.numel() / d;
  auto xv = x.values();
  auto gv = gain.values();
  auto bv = bias.values();
  std::vector<double> out(xv.size());
  std::vector<double> inv_std(static_cast<size_t>(slices));
  std::vector<double> means(static_cast<size_t>(slices));
  for (int64_t s = 0; s < slices; ++s) {
    const double* in = xv.data() + s * d;
    double m = 0;
    for (int64_t i = 0; i < d; ++i) m += in[i];
    m /= static_cast<double>(d);
    double var = 0;
    for (int64_t i = 0; i < d; ++i) var += (in[i] - m) * (in[i] - m);
    var /= static_cast<double>(d);
    double is = 1.0 / std::sqrt(var + eps);
    means[static_cast<size_t>(s)] = m;
    inv_std[static_cast<size_t>(s)] = is;
    double* o = out.data() + s * d;
    for (int64_t i = 0; i < d; ++i) o[i] = (in[i] - m) * is * gv[i] + bv[i];
  }
  return make_op(
      x.shape(), std::move(out), {x, gain, bias},
      [d, slices, means, inv_std](Node& self) {
        auto& nx = *self.inputs[0];
        auto& ng = *self.inputs[1];
        auto& nb = *self.inputs[2];
        std::vector<double>* gx = nx.requires_grad ? &nx.grad_buf() : nullptr;
        std::vector<double>* gg = ng.requires_grad ? &ng.grad_buf() : nullptr;
        std::vector<double>* gb = nb.requires_grad ? &nb.grad_buf() : nullptr;
        for (int64_t s = 0; s < slices; ++s) {
          const double* in = nx.value.data() + s * d;
          const double* gy = self.grad.data() + s * d;
          double m = means[static_cast<size_t>(s)];
          double is = inv_std[static_cast<size_t>(s)];
          // xhat = (x - m) * is
          if (gb)
            for (int64_t i = 0; i < d; ++i) (*gb)[static_cast<size_t>(i)] += gy[i];
          if (gg)
            for (int64_t i = 0; i < d; ++i)
              (*gg)[static_cast<size_t>(i)] += gy[i] * (in[i] - m) * is;
          if (gx) {
            double sum_gxh = 0, sum_gxh_xhat = 0;
            const auto& gw = ng.value;
            for (int64_t i = 0; i < d; ++i) {
              double gxh = gy[i] * gw[static_cast<size_t>(i)];
              double xhat = (in[i] - m) * is;
              sum_gxh += gxh;
              sum_gxh_xhat += gxh * xhat;
            }
            double invd = 1.0 / static_cast<double>(d);
            double* gxp = gx->data() + s * d;
            for (int64_t i = 0; i < d; ++i) {
              double gxh = gy[i] * ng.value[static_cast<size_t>(i)];
              double xhat = (in[i] - m) * is;
              gxp[i] += is * (gxh - invd * sum_gxh - xhat * invd * sum_gxh_xhat);
            }
          }
        }
      });
}

Tensor grid_sample_bilinear(const Tensor& x,
                            const std::vector<double>& coords_rc,
                            int64_t out_h, int64_t out_w) {
  if (x.rank() != 3) throw ShapeMismatch("grid_sample expects [c,h,w]");
  if (static_cast<int64_t>(coords_rc.size()) != out_h * out_w * 2)
    throw ShapeMismatch("grid_sample coordinate count mismatch");
  int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  auto xv = x.values();
  std::vector<double> out(static_cast<size_t>(c * out_h * out_w), 0.0);
  int64_t cells = out_h * out_w;
  for (int64_t p = 0; p < cells; ++p) {
    double rf = coords_rc[static_cast<size_t>(2 * p)];
    double cf = coords_rc[static_cast<size_t>(2 * p + 1)];
    if (rf <= -1.0 || cf <= -1.0 || rf >= static_cast<double>(h) ||
        cf >= static_cast<double>(w))
      continue;  // fully outside; reads 0
    int64_t r0 = static_cast<int64_t>(std::floor(rf));
    int64_t c0 = static_cast<int64_t>(std::floor(cf));
    double wr = rf - r0, wc = cf - c0;
    for (int64_t ch = 0; ch < c; ++ch) {
      const double* plane = xv.data() + ch * h * w;
      auto sample = [&](int64_t rr, int64_t cc) -> double {
        if (rr < 0 || cc < 0 || rr >= h || cc >= w) return 0.0;
        return plane[rr * w + cc];
      };
      double v = sample(r0, c0) * (1 - wr) * (1 - wc) +
                 sample(r0, c0 + 1) * (1 - wr) * wc +
                 sample(r0 + 1, c0) * wr * (1 - wc) +
                 sample(r0 + 1, c0 + 1) * wr * wc;
      out[static_cast<size_t>(ch * cells + p)] = v;
    }
  }
  auto coords = std::make_shared<std::vector<double>>(coords_rc);
  return make_op(
      {c, out_h, out_w}, std::move(out), {x},
      [c, h, w, cells, coords](Node& self) {
        auto& g = self.inputs[0]->grad_buf();
        for (int64_t p = 0; p < cells; ++p) {
          double rf = (*coords)[static_cast<size_t>(2 * p)];
          double cf = (*coords)[static_cast<size_t>(2 * p + 1)];
          if (rf <= -1.0 || cf <= -1.0 || rf >= static_cast<double>(h) ||
              cf >= static_cast<double>(w))
            continue;
          int64_t r0 = static_cast<int64_t>(std::floor(rf));
          int64_t c0 = static_cast<int64_t>(std::floor(cf));
          double wr = rf - r0, wc = cf - c0;
          for (int64_t ch = 0; ch < c; ++ch) {
            double* plane = g.data() + ch * h * w;
            double gv = self.grad[static_cast<size_t>(ch * cells + p)];
            auto scatter = [&](int64_t rr, int64_t cc, double wgt) {
              if (rr < 0 || cc < 0 || rr >= h || cc >= w) return;
              plane[rr * w + cc] += gv * wgt;
            };
            scatter(r0, c0, (1 - wr) * (1 - wc));
            scatter(r0, c0 + 1, (1 - wr) * wc);
            scatter(r0 + 1, c0, wr * (1 - wc));
            scatter(r0 + 1, c0 + 1, wr * wc);
          }
        }
      });
}

}  // namespace bevfuse
