#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "bevfuse/optim.hpp"
#include "bevfuse/raster.hpp"
#include "bevfuse/tensor.hpp"

namespace bevfuse {

struct EncoderConfig {
  int d_e = 128;
  std::vector<int> scales = {8, 16};  // ascending downscale factors
  int image_h = 224;
  int image_w = 480;
  std::vector<int> channels_per_stage = {16, 32, 64, 128};

  void validate() const;
  int num_stages() const;  // log2 of the largest scale
};

struct FeatureMap {
  Tensor values;  // [d_e, h_f, w_f]
  int scale = 1;
  std::string source_view;
  int timestamp_index = 0;

  int64_t channels() const { return values.dim(0); }
  int64_t height() const { return values.dim(1); }
  int64_t width() const { return values.dim(2); }
};

// single-channel image replicated to three identical channels
Tensor lwir_to_3ch(const Tensor& img);

// pseudo-image as a [5, h, w] tensor: 4 z-statistics plus occupancy
Tensor pseudo_image_tensor(const PseudoImage& img);

// Strided-conv pyramid shared by the RGB and channel-replicated LWIR paths;
// one tap per configured scale, each projected to d_e.
class CameraEncoder {
 public:
  CameraEncoder(const EncoderConfig& cfg, ParamStore& params, Rng& rng,
                const std::string& prefix);
  std::vector<FeatureMap> encode(const Tensor& img) const;
  const EncoderConfig& config() const { return cfg_; }

 private:
  EncoderConfig cfg_;
  struct Conv {
    Tensor kernel;
    Tensor bias;  // [c, 1, 1]
  };
  std::vector<Conv> stages_;
  std::vector<Conv> projections_;  // 1x1 per scale
  std::vector<int> tap_stage_;
};

// Encoder-decoder with skip connections over the pseudo-image grid, then a
// strided tap chain emitting the same per-scale maps as the camera path.
class PseudoImageEncoder {
 public:
  PseudoImageEncoder(const EncoderConfig& cfg, ParamStore& params, Rng& rng,
                     const std::string& prefix);
  std::vector<FeatureMap> encode(const Tensor& pimg) const;  // [5, h, w]
  // test hook: skip-connection contributions can be zeroed to show they matter
  std::vector<FeatureMap> encode_impl(const Tensor& pimg, bool use_skips) const;

 private:
  EncoderConfig cfg_;
  struct Conv {
    Tensor kernel;
    Tensor bias;
  };
  Conv enc0_, down1_, down2_;
  Conv up1_, up0_;
  std::vector<Conv> taps_;
  std::vector<Conv> projections_;
  std::vector<int> tap_index_;
};

// phi embeds directions into d_e, eps embeds camera centers into d_m, iota
// is a per-time-index table. phi and eps are bias-free.
class EmbeddingSet {
 public:
  EmbeddingSet(int d_e, int d_m, int t, ParamStore& params, Rng& rng,
               const std::string& prefix);

  Tensor embed_direction(const Tensor& dirs) const;  // [n, 3] -> [n, d_e]
  Tensor embed_direction(const std::vector<Eigen::Vector3d>& dirs) const;
  Tensor embed_center(const Eigen::Vector3d& c) const;  // -> [1, d_m]
  Tensor embed_time(int tau) const;                     // -> [1, d_e]
  int time_slots() const { return t_; }

  Tensor phi_w;       // [3, d_e]
  Tensor eps_w;       // [3, d_m]
  Tensor iota_table;  // [t, d_e]

 private:
  int t_;
};

}  // namespace bevfuse
