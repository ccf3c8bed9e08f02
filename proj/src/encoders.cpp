#include "bevfuse/encoders.hpp"

#include <cmath>

#include "bevfuse/ops.hpp"

namespace bevfuse {

namespace {

int ilog2(int v) {
  int p = 0;
  while ((1 << p) < v) ++p;
  return p;
}

Tensor conv_block(const Tensor& x, const Tensor& kernel, const Tensor& bias,
                  int stride) {
  int pad = static_cast<int>(kernel.dim(2)) / 2;
  return add(conv2d(x, kernel, stride, pad), bias);
}

}  // namespace

void EncoderConfig::validate() const {
  if (d_e <= 0) throw ConfigError("d_e must be positive");
  if (scales.empty()) throw ConfigError("at least one scale required");
  for (size_t i = 0; i < scales.size(); ++i) {
    int s = scales[i];
    if (s < 1 || (s & (s - 1)) != 0)
      throw ConfigError("scales must be powers of two");
    if (i > 0 && scales[i] <= scales[i - 1])
      throw ConfigError("scales must be strictly ascending");
    if (image_h % s != 0 || image_w % s != 0)
      throw ConfigError("every scale must divide the image resolution");
  }
  if (static_cast<int>(channels_per_stage.size()) != num_stages())
    throw ConfigError("channels_per_stage must have one entry per stage");
}

int EncoderConfig::num_stages() const { return ilog2(scales.back()); }

Tensor lwir_to_3ch(const Tensor& img) {
  if (img.rank() != 3 || img.dim(0) != 1)
    throw ShapeMismatch("lwir_to_3ch expects a [1, h, w] image");
  return concat({img, img, img}, 0);
}

Tensor pseudo_image_tensor(const PseudoImage& img) {
  int64_t h = img.h, w = img.w;
  std::vector<double> v(static_cast<size_t>(5 * h * w));
  for (int64_t ch = 0; ch < 4; ++ch)
    for (int64_t i = 0; i < h; ++i)
      for (int64_t j = 0; j < w; ++j)
        v[static_cast<size_t>((ch * h + i) * w + j)] =
            img.cells[static_cast<size_t>((i * w + j) * 4 + ch)];
  for (int64_t i = 0; i < h; ++i)
    for (int64_t j = 0; j < w; ++j)
      v[static_cast<size_t>((4 * h + i) * w + j)] =
          img.occupancy[static_cast<size_t>(i * w + j)];
  return Tensor::from_vector({5, h, w}, std::move(v));
}

CameraEncoder::CameraEncoder(const EncoderConfig& cfg, ParamStore& params,
                             Rng& rng, const std::string& prefix)
    : cfg_(cfg) {
  cfg_.validate();
  int stages = cfg_.num_stages();
  int in_ch = 3;
  for (int s = 0; s < stages; ++s) {
    int out_ch = cfg_.channels_per_stage[static_cast<size_t>(s)];
    double bound = xavier_bound(in_ch * 9, out_ch * 9);
    Conv c;
    c.kernel = params.make(prefix + ".stage" + std::to_string(s) + ".w",
                           {out_ch, in_ch, 3, 3}, uniform_init(-bound, bound),
                           rng);
    c.bias = params.make_zeros(prefix + ".stage" + std::to_string(s) + ".b",
                               {out_ch, 1, 1});
    stages_.push_back(std::move(c));
    in_ch = out_ch;
  }
  for (int scale : cfg_.scales) {
    int st = ilog2(scale);
    tap_stage_.push_back(st);
    int ch = cfg_.channels_per_stage[static_cast<size_t>(st - 1)];
    double bound = xavier_bound(ch, cfg_.d_e);
    Conv p;
    p.kernel = params.make(prefix + ".proj" + std::to_string(scale) + ".w",
                           {cfg_.d_e, ch, 1, 1}, uniform_init(-bound, bound),
                           rng);
    p.bias = params.make_zeros(prefix + ".proj" + std::to_string(scale) + ".b",
                               {cfg_.d_e, 1, 1});
    projections_.push_back(std::move(p));
  }
}

std::vector<FeatureMap> CameraEncoder::encode(const Tensor& img) const {
  if (img.rank() != 3 || img.dim(0) != 3 || img.dim(1) != cfg_.image_h ||
      img.dim(2) != cfg_.image_w)
    throw ShapeMismatch("encoder expects a [3, " +
                        std::to_string(cfg_.image_h) + ", " +
                        std::to_string(cfg_.image_w) + "] image");
  std::vector<FeatureMap> out;
  Tensor x = img;
  int stage_idx = 0;
  size_t tap = 0;
  for (const auto& st : stages_) {
    x = gelu(conv_block(x, st.kernel, st.bias, 2));
    ++stage_idx;
    while (tap < tap_stage_.size() && tap_stage_[tap] == stage_idx) {
      FeatureMap fm;
      fm.values = conv_block(x, projections_[tap].kernel,
                             projections_[tap].bias, 1);
      fm.scale = cfg_.scales[tap];
      out.push_back(std::move(fm));
      ++tap;
    }
  }
  return out;
}

PseudoImageEncoder::PseudoImageEncoder(const EncoderConfig& cfg,
                                       ParamStore& params, Rng& rng,
                                       const std::string& prefix)
    : cfg_(cfg) {
  cfg_.validate();
  if (cfg_.channels_per_stage.size() < 2)
    throw ConfigError("pseudo encoder needs at least two stage widths");
  int c0 = cfg_.channels_per_stage[0];
  int c1 = cfg_.channels_per_stage[1];
  int c2 = cfg_.channels_per_stage[std::min<size_t>(
      2, cfg_.channels_per_stage.size() - 1)];

  auto make_conv = [&](const std::string& name, int in, int out) {
    double bound = xavier_bound(in * 9, out * 9);
    Conv c;
    c.kernel = params.make(prefix + "." + name + ".w", {out, in, 3, 3},
                           uniform_init(-bound, bound), rng);
    c.bias = params.make_zeros(prefix + "." + name + ".b", {out, 1, 1});
    return c;
  };

  enc0_ = make_conv("enc0", 5, c0);
  down1_ = make_conv("down1", c0, c1);
  down2_ = make_conv("down2", c1, c2);
  up1_ = make_conv("up1", c2 + c1, c1);
  up0_ = make_conv("up0", c1 + c0, c0);

  // strided chain from the full-resolution decoder output down to each tap
  int stages = cfg_.num_stages();
  int in_ch = c0;
  for (int s = 0; s < stages; ++s) {
    int out_ch = cfg_.channels_per_stage[std::min<size_t>(
        static_cast<size_t>(s), cfg_.channels_per_stage.size() - 1)];
    taps_.push_back(make_conv("tap" + std::to_string(s), in_ch, out_ch));
    in_ch = out_ch;
  }
  for (int scale : cfg_.scales) {
    tap_index_.push_back(ilog2(scale));
    int ch = cfg_.channels_per_stage[std::min<size_t>(
        static_cast<size_t>(ilog2(scale) - 1), cfg_.channels_per_stage.size() - 1)];
    double bound = xavier_bound(ch, cfg_.d_e);
    Conv p;
    p.kernel = params.make(prefix + ".proj" + std::to_string(scale) + ".w",
                           {cfg_.d_e, ch, 1, 1}, uniform_init(-bound, bound),
                           rng);
    p.bias = params.make_zeros(prefix + ".proj" + std::to_string(scale) + ".b",
                               {cfg_.d_e, 1, 1});
    projections_.push_back(std::move(p));
  }
}

std::vector<FeatureMap> PseudoImageEncoder::encode(const Tensor& pimg) const {
  return encode_impl(pimg, true);
}

std::vector<FeatureMap> PseudoImageEncoder::encode_impl(const Tensor& pimg,
                                                        bool use_skips) const {
  if (pimg.rank() != 3 || pimg.dim(0) != 5)
    throw ShapeMismatch("pseudo encoder expects [5, h, w] input");
  if (pimg.dim(1) % cfg_.scales.back() != 0 ||
      pimg.dim(2) % cfg_.scales.back() != 0)
    throw ShapeMismatch("pseudo-image resolution must divide the max scale");

  Tensor e0 = gelu(conv_block(pimg, enc0_.kernel, enc0_.bias, 1));
  Tensor e1 = gelu(conv_block(e0, down1_.kernel, down1_.bias, 2));
  Tensor e2 = gelu(conv_block(e1, down2_.kernel, down2_.bias, 2));

  Tensor skip1 = use_skips ? e1 : mul_scalar(e1, 0.0);
  Tensor skip0 = use_skips ? e0 : mul_scalar(e0, 0.0);

  Tensor u1 = bilinear_resize(e2, e1.dim(1), e1.dim(2));
  Tensor d1 = gelu(conv_block(concat({u1, skip1}, 0), up1_.kernel, up1_.bias, 1));
  Tensor u0 = bilinear_resize(d1, e0.dim(1), e0.dim(2));
  Tensor d0 = gelu(conv_block(concat({u0, skip0}, 0), up0_.kernel, up0_.bias, 1));

  std::vector<FeatureMap> out;
  Tensor x = d0;
  int level = 0;
  size_t tap = 0;
  for (const auto& t : taps_) {
    x = gelu(conv_block(x, t.kernel, t.bias, 2));
    ++level;
    while (tap < tap_index_.size() && tap_index_[tap] == level) {
      FeatureMap fm;
      fm.values = conv_block(x, projections_[tap].kernel,
                             projections_[tap].bias, 1);
      fm.scale = cfg_.scales[tap];
      out.push_back(std::move(fm));
      ++tap;
    }
  }
  return out;
}

EmbeddingSet::EmbeddingSet(int d_e, int d_m, int t, ParamStore& params,
                           Rng& rng, const std::string& prefix)
    : t_(t) {
  double bp = xavier_bound(3, d_e);
  phi_w = params.make(prefix + ".phi_w", {3, d_e}, uniform_init(-bp, bp), rng);
  double be = xavier_bound(3, d_m);
  eps_w = params.make(prefix + ".eps_w", {3, d_m}, uniform_init(-be, be), rng);
  iota_table = params.make(prefix + ".iota", {t, d_e},
                           normal_init(0.02), rng);
}

Tensor EmbeddingSet::embed_direction(const Tensor& dirs) const {
  if (dirs.dim(-1) != 3)
    throw ShapeMismatch("direction embedding expects [..., 3]");
  return matmul(dirs, phi_w);
}

Tensor EmbeddingSet::embed_direction(
    const std::vector<Eigen::Vector3d>& dirs) const {
  std::vector<double> flat;
  flat.reserve(dirs.size() * 3);
  for (const auto& d : dirs) {
    flat.push_back(d.x());
    flat.push_back(d.y());
    flat.push_back(d.z());
  }
  return embed_direction(
      Tensor::from_vector({static_cast<int64_t>(dirs.size()), 3}, std::move(flat)));
}

Tensor EmbeddingSet::embed_center(const Eigen::Vector3d& c) const {
  Tensor v = Tensor::from_vector({1, 3}, {c.x(), c.y(), c.z()});
  return matmul(v, eps_w);
}

Tensor EmbeddingSet::embed_time(int tau) const {
  if (tau < 0 || tau >= t_)
    throw IndexOutOfRange("time index " + std::to_string(tau) +
                          " outside [0, " + std::to_string(t_) + ")");
  return slice(iota_table, 0, tau, 1);
}

}  // namespace bevfuse
