#include "bevfuse/augment.hpp"

#include <cmath>

namespace bevfuse {

void AugmentConfig::validate() const {
  if (crop_max_fraction < 0 || crop_max_fraction >= 0.9)
    throw ConfigError("crop fraction must be in [0, 0.9)");
  if (view_dropout_prob < 0 || view_dropout_prob > 1)
    throw ConfigError("dropout probability must be in [0, 1]");
  if (rotation_max_deg < 0 || brightness_max < 0 || contrast_max < 0)
    throw ConfigError("augmentation magnitudes must be non-negative");
}

bool AugmentConfig::is_identity() const {
  return crop_max_fraction == 0 && rotation_max_deg == 0 &&
         brightness_max == 0 && contrast_max == 0 && view_dropout_prob == 0;
}

namespace {

double sample_at(std::span<const double> plane, int64_t h, int64_t w,
                 double ri, double ci) {
  if (ri <= -1.0 || ci <= -1.0 || ri >= static_cast<double>(h) ||
      ci >= static_cast<double>(w))
    return 0.0;
  int64_t r0 = static_cast<int64_t>(std::floor(ri));
  int64_t c0 = static_cast<int64_t>(std::floor(ci));
  double wr = ri - r0, wc = ci - c0;
  auto v = [&](int64_t r, int64_t c) -> double {
    if (r < 0 || c < 0 || r >= h || c >= w) return 0.0;
    return plane[static_cast<size_t>(r * w + c)];
  };
  return v(r0, c0) * (1 - wr) * (1 - wc) + v(r0, c0 + 1) * (1 - wr) * wc +
         v(r0 + 1, c0) * wr * (1 - wc) + v(r0 + 1, c0 + 1) * wr * wc;
}

Tensor warp_image(const Tensor& img,
                  const std::function<void(double, double, double&, double&)>&
                      dest_to_src) {
  int64_t c = img.dim(0), h = img.dim(1), w = img.dim(2);
  auto iv = img.values();
  std::vector<double> out(iv.size());
  for (int64_t ch = 0; ch < c; ++ch) {
    std::span<const double> plane(iv.data() + ch * h * w,
                                  static_cast<size_t>(h * w));
    for (int64_t r = 0; r < h; ++r)
      for (int64_t col = 0; col < w; ++col) {
        double su, sv;
        dest_to_src(col + 0.5, r + 0.5, su, sv);
        out[static_cast<size_t>((ch * h + r) * w + col)] = static_cast<float>(
            sample_at(plane, h, w, sv - 0.5, su - 0.5));
      }
  }
  return Tensor::from_vector({c, h, w}, std::move(out));
}

}  // namespace

Tensor crop_resize_image(const Tensor& img, double ox, double oy,
                         double crop_w, double crop_h) {
  int64_t h = img.dim(1), w = img.dim(2);
  double sx = static_cast<double>(w) / crop_w;
  double sy = static_cast<double>(h) / crop_h;
  return warp_image(img, [&](double du, double dv, double& su, double& sv) {
    su = du / sx + ox;
    sv = dv / sy + oy;
  });
}

Tensor rotate_image(const Tensor& img, double radians, double cx, double cy) {
  double c = std::cos(-radians), s = std::sin(-radians);
  return warp_image(img, [&](double du, double dv, double& su, double& sv) {
    double x = du - cx, y = dv - cy;
    su = c * x - s * y + cx;
    sv = s * x + c * y + cy;
  });
}

Eigen::Matrix3d crop_resize_intrinsic(const Eigen::Matrix3d& intrinsic,
                                      double ox, double oy, double sx,
                                      double sy) {
  Eigen::Matrix3d a;
  a << sx, 0, -sx * ox,
       0, sy, -sy * oy,
       0, 0, 1;
  return a * intrinsic;
}

DatasetSample augment(const DatasetSample& sample, const AugmentConfig& cfg,
                      Rng& rng) {
  cfg.validate();
  if (cfg.is_identity()) return sample;

  DatasetSample out = sample;
  auto transform_views = [&](std::vector<std::vector<ViewData>>& views) {
    for (auto& per_t : views) {
      for (auto& vd : per_t) {
        int64_t h = vd.image.dim(1), w = vd.image.dim(2);

        if (cfg.crop_max_fraction > 0) {
          double fx = rng.uniform(0.0, cfg.crop_max_fraction);
          double fy = rng.uniform(0.0, cfg.crop_max_fraction);
          double crop_w = w * (1.0 - fx);
          double crop_h = h * (1.0 - fy);
          double ox = rng.uniform(0.0, w - crop_w);
          double oy = rng.uniform(0.0, h - crop_h);
          vd.image = crop_resize_image(vd.image, ox, oy, crop_w, crop_h);
          vd.cal.intrinsic = crop_resize_intrinsic(vd.cal.intrinsic, ox, oy,
                                                   w / crop_w, h / crop_h);
        }

        if (cfg.rotation_max_deg > 0) {
          double theta = rng.uniform(-cfg.rotation_max_deg,
                                     cfg.rotation_max_deg) * M_PI / 180.0;
          double cx = vd.cal.intrinsic(0, 2);
          double cy = vd.cal.intrinsic(1, 2);
          vd.image = rotate_image(vd.image, theta, cx, cy);
          Eigen::Matrix3d rz;
          rz << std::cos(theta), -std::sin(theta), 0,
                std::sin(theta), std::cos(theta), 0,
                0, 0, 1;
          vd.cal.extrinsic = rz * vd.cal.extrinsic;
        }

        if (cfg.brightness_max > 0 || cfg.contrast_max > 0) {
          double gain = 1.0 + rng.uniform(-cfg.contrast_max, cfg.contrast_max);
          double bias = rng.uniform(-cfg.brightness_max, cfg.brightness_max);
          vd.image = vd.image.detach();  // tensors share storage on copy
          auto vals = vd.image.values();
          for (auto& v : vals)
            v = static_cast<float>(std::clamp(v * gain + bias, 0.0, 1.0));
        }

        if (cfg.view_dropout_prob > 0 &&
            rng.uniform() < cfg.view_dropout_prob) {
          vd.image = Tensor::zeros(vd.image.shape());
        }
      }
    }
  };
  transform_views(out.rgb);
  transform_views(out.lwir);
  return out;
}

}  // namespace bevfuse
