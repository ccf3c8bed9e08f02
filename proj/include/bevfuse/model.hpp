#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bevfuse/dataset.hpp"
#include "bevfuse/encoders.hpp"
#include "bevfuse/fusion.hpp"
#include "bevfuse/head.hpp"
#include "bevfuse/temporal.hpp"

namespace bevfuse {

struct ModelConfig {
  // latent dims; query construction adds phi(b) to d_m queries, so d_e must
  // equal d_m
  int d_e = 32;
  int d_m = 32;
  int n_heads = 2;
  int head_dim = 16;
  std::vector<int> scales = {8, 16};
  int h_q = 13;
  int w_q = 13;
  int bev_cells_h = 100;
  int bev_cells_w = 100;
  double bev_extent_m = 600.0;
  int n_classes = 5;
  int t = 3;
  int image_h = 64;
  int image_w = 128;
  int pimg_h = 64;
  int pimg_w = 64;
  double pimg_extent_m = 600.0;
  double pseudo_cam_height = 60.0;
  std::vector<int> enc_channels = {8, 16, 32, 32};
  int ffn_mult = 4;
  bool use_lidar = true;
  bool use_lwir = true;

  bool has_temporal() const { return t > 1; }
  void validate() const;
  static ModelConfig paper_dims();

  BevGrid bev_grid() const;
  BevGrid query_grid_meta() const;
  QueryGrid query_grid() const;
  RasterConfig raster_config() const;
  EncoderConfig camera_encoder_config() const;
  EncoderConfig pseudo_encoder_config() const;
  AttentionConfig attention_config() const;
};

struct ForwardOptions {
  bool record_attention = false;
  bool use_lidar = true;  // combined with the model config flags
  bool use_lwir = true;
  int t_limit = 0;  // 0 = all instants; 1 evaluates only the current one
};

struct ForwardResult {
  Tensor logits;                     // [n_classes, bev_h, bev_w]
  std::vector<Tensor> m_bev;         // per evaluated instant, [n_bev, d_m]
  std::vector<std::vector<AttentionRecord>> records;  // [instant][stage]
};

class FusionModel {
 public:
  FusionModel(const ModelConfig& cfg, uint64_t param_seed);

  ForwardResult forward(const DatasetSample& sample,
                        const ForwardOptions& opt = {}) const;
  Tensor training_loss(const DatasetSample& sample, const FocalConfig& focal,
                       bool use_cross_entropy = false) const;

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  void save_checkpoint(const std::string& path, const AdamWState* opt_state,
                       uint64_t config_hash) const;
  // restores parameter values; returns the stored optimizer state if present
  std::optional<AdamWState> load_checkpoint(const std::string& path,
                                            uint64_t expect_config_hash,
                                            bool* hash_matched = nullptr);

 private:
  ModelConfig cfg_;
  ParamStore params_;
  std::unique_ptr<CameraEncoder> cam_enc_;
  std::unique_ptr<PseudoImageEncoder> lidar_enc_;
  std::unique_ptr<EmbeddingSet> emb_;
  Tensor q_tilde_;
  std::vector<FusionStage> stages_;
  std::unique_ptr<TemporalConv> tconv_;
  std::unique_ptr<Decoder> decoder_;
};

}  // namespace bevfuse
