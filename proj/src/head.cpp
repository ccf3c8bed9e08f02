#include "bevfuse/head.hpp"

#include <cmath>
#include <limits>

#include "bevfuse/ops.hpp"

namespace bevfuse {

void FocalConfig::validate(int n_classes) const {
  if (gamma < 0) throw ConfigError("focal gamma must be non-negative");
  if (!alpha.empty() && static_cast<int>(alpha.size()) != n_classes)
    throw ConfigError("focal alpha must have one weight per class");
  for (double a : alpha)
    if (a < 0 || a > 1) throw ConfigError("focal alpha weights must be in [0,1]");
}

Tensor focal_loss(const Tensor& logits, const Tensor& target_onehot,
                  const FocalConfig& cfg) {
  if (logits.shape() != target_onehot.shape())
    throw ShapeMismatch("focal loss shape mismatch");
  int n_classes = static_cast<int>(logits.dim(0));
  cfg.validate(n_classes);

  Tensor y = target_onehot;
  Tensor one_minus_y = add_scalar(neg(y), 1.0);
  Tensor neg_x = neg(logits);
  // y = 1: -(1-p)^g log p   = sigmoid(-x)^g softplus(-x)
  // y = 0: -p^g log(1-p)    = sigmoid(x)^g softplus(x)
  Tensor pos = mul(y, mul(pow_scalar(sigmoid(neg_x), cfg.gamma), softplus(neg_x)));
  Tensor negt = mul(one_minus_y,
                    mul(pow_scalar(sigmoid(logits), cfg.gamma), softplus(logits)));
  Tensor per_cell = add(pos, negt);

  if (!cfg.alpha.empty()) {
    Tensor alpha = Tensor::from_vector({n_classes, 1, 1}, cfg.alpha);
    per_cell = mul(per_cell, alpha);
  }
  return mean(per_cell);
}

Tensor cross_entropy_loss(const Tensor& logits, const Tensor& target_onehot) {
  if (logits.shape() != target_onehot.shape())
    throw ShapeMismatch("cross entropy shape mismatch");
  int64_t c = logits.dim(0);
  int64_t cells = logits.numel() / c;
  Tensor by_cell = transpose2d(reshape(logits, {c, cells}));    // [cells, C]
  Tensor t_by_cell = transpose2d(reshape(target_onehot, {c, cells}));
  Tensor log_probs = log_op(softmax(by_cell));
  return neg(mul_scalar(mean(mul(t_by_cell, log_probs)),
                        static_cast<double>(c)));
}

std::vector<int> predict_classes(const Tensor& map) {
  if (map.rank() != 3) throw ShapeMismatch("predict_classes expects [C, h, w]");
  int64_t c = map.dim(0);
  int64_t cells = map.dim(1) * map.dim(2);
  auto v = map.values();
  std::vector<int> out(static_cast<size_t>(cells));
  for (int64_t p = 0; p < cells; ++p) {
    int best = 0;
    double best_v = v[static_cast<size_t>(p)];
    for (int64_t ch = 1; ch < c; ++ch) {
      double x = v[static_cast<size_t>(ch * cells + p)];
      if (x > best_v) {  // strict: ties keep the lowest class index
        best_v = x;
        best = static_cast<int>(ch);
      }
    }
    out[static_cast<size_t>(p)] = best;
  }
  return out;
}

IouResult iou_multiclass(std::span<const int> pred, std::span<const int> gt,
                         int n_classes) {
  if (pred.size() != gt.size())
    throw ShapeMismatch("IoU inputs differ in size");
  std::vector<int64_t> inter(static_cast<size_t>(n_classes), 0);
  std::vector<int64_t> pred_n(static_cast<size_t>(n_classes), 0);
  std::vector<int64_t> gt_n(static_cast<size_t>(n_classes), 0);
  for (size_t i = 0; i < pred.size(); ++i) {
    int p = pred[i], g = gt[i];
    if (p >= 0 && p < n_classes) ++pred_n[static_cast<size_t>(p)];
    if (g >= 0 && g < n_classes) ++gt_n[static_cast<size_t>(g)];
    if (p == g && p >= 0 && p < n_classes) ++inter[static_cast<size_t>(p)];
  }
  IouResult r;
  r.per_class.resize(static_cast<size_t>(n_classes));
  r.present.resize(static_cast<size_t>(n_classes));
  double acc = 0;
  for (int c = 0; c < n_classes; ++c) {
    int64_t uni = pred_n[static_cast<size_t>(c)] + gt_n[static_cast<size_t>(c)] -
                  inter[static_cast<size_t>(c)];
    bool present = uni > 0;
    r.present[static_cast<size_t>(c)] = present;
    if (present) {
      double iou = static_cast<double>(inter[static_cast<size_t>(c)]) /
                   static_cast<double>(uni);
      r.per_class[static_cast<size_t>(c)] = iou;
      acc += iou;
      ++r.present_count;
    } else {
      r.per_class[static_cast<size_t>(c)] =
          std::numeric_limits<double>::quiet_NaN();
    }
  }
  r.mean_iou = r.present_count > 0 ? acc / r.present_count : 0.0;
  return r;
}

Decoder::Decoder(int d_m, int n_classes, ParamStore& params, Rng& rng,
                 const std::string& prefix) {
  int widths[3] = {std::max(d_m / 2, 8), std::max(d_m / 4, 8),
                   std::max(d_m / 8, 8)};
  int in_ch = d_m;
  for (int i = 0; i < 3; ++i) {
    double bound = xavier_bound(in_ch * 9, widths[i] * 9);
    Conv c;
    c.kernel = params.make(prefix + ".up" + std::to_string(i) + ".w",
                           {widths[i], in_ch, 3, 3}, uniform_init(-bound, bound),
                           rng);
    c.bias = params.make_zeros(prefix + ".up" + std::to_string(i) + ".b",
                               {widths[i], 1, 1});
    blocks_.push_back(std::move(c));
    in_ch = widths[i];
  }
  double bound = xavier_bound(in_ch, n_classes);
  final_.kernel = params.make(prefix + ".final.w", {n_classes, in_ch, 1, 1},
                              uniform_init(-bound, bound), rng);
  final_.bias = params.make_zeros(prefix + ".final.b", {n_classes, 1, 1});
}

Tensor Decoder::decode(const Tensor& m_bev_grid, int out_h, int out_w) const {
  if (m_bev_grid.rank() != 3)
    throw ShapeMismatch("decoder expects [d_m, h_q, w_q]");
  Tensor x = m_bev_grid;
  for (const auto& block : blocks_) {
    x = bilinear_resize(x, x.dim(1) * 2, x.dim(2) * 2);
    x = gelu(add(conv2d(x, block.kernel, 1, 1), block.bias));
  }
  if (x.dim(1) != out_h || x.dim(2) != out_w)
    x = bilinear_resize(x, out_h, out_w);
  return add(conv2d(x, final_.kernel, 1, 0), final_.bias);
}

}  // namespace bevfuse
