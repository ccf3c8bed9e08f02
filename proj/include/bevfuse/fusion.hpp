#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "bevfuse/encoders.hpp"
#include "bevfuse/geometry.hpp"
#include "bevfuse/optim.hpp"
#include "bevfuse/tensor.hpp"

namespace bevfuse {

struct AttentionConfig {
  int n_heads = 4;
  int head_dim = 64;
  int d_m = 128;
  int d_e = 128;

  int inner_dim() const { return n_heads * head_dim; }
};

struct KeyTokenMeta {
  Eigen::Vector3d direction;  // unit viewing ray
  int time_index = 0;
  std::string view_id;
  double pixel_u = 0;  // feature-grid pixel the ray was lifted from
  double pixel_v = 0;
};

// Batched key tokens; `embedded` holds r = f + phi(rho) + iota(tau), while
// `features` carries the raw f used as attention values.
struct KeySequence {
  Tensor features;  // [L, d_e]
  Tensor embedded;  // [L, d_e]
  std::vector<KeyTokenMeta> meta;

  struct ViewSpan {
    std::string view_id;
    Eigen::Vector3d camera_center;
    int64_t start = 0;
    int64_t len = 0;
    int64_t feat_h = 0;
    int64_t feat_w = 0;
    int time_index = 0;
  };
  std::vector<ViewSpan> spans;

  int64_t length() const { return features.defined() ? features.dim(0) : 0; }
};

// One token per feature cell; rays lifted through the view's intrinsic
// rescaled by 1/scale at the downscaled pixel centers (c + 0.5, r + 0.5).
KeySequence build_keys(const std::vector<FeatureMap>& features,
                       const std::vector<CameraCalibration>& cals, int scale,
                       const EmbeddingSet& emb);

struct BevQuerySet {
  Tensor learned;  // [n_bev, d_m] base queries (q-tilde or a prior stage)
  std::vector<Eigen::Vector3d> directions;
  struct ViewQuery {
    std::string view_id;
    Tensor q;  // [n_bev, d_m] = learned + phi(b) - eps(center)
  };
  std::vector<ViewQuery> per_view;
};

struct ViewRef {
  std::string view_id;
  Eigen::Vector3d camera_center;
};

BevQuerySet build_queries(const Tensor& base, const QueryGrid& qg,
                          const std::vector<ViewRef>& views,
                          const EmbeddingSet& emb);

// Attention capture for saliency: weights laid out [head][query][key].
struct AttentionRecord {
  int n_heads = 0;
  int64_t n_queries = 0;
  int64_t n_keys = 0;
  std::vector<double> weights;
  std::vector<KeyTokenMeta> key_meta;
  std::vector<KeySequence::ViewSpan> spans;

  double weight(int h, int64_t q, int64_t k) const {
    return weights[(static_cast<size_t>(h) * n_queries + q) * n_keys + k];
  }
};

class CrossAttention {
 public:
  CrossAttention(const AttentionConfig& cfg, ParamStore& params, Rng& rng,
                 const std::string& prefix);

  // Scores use each key's view-specific query row; softmax runs jointly over
  // the whole key sequence. Output is projected to d_m and residual-added.
  Tensor attend(const BevQuerySet& queries, const KeySequence& keys,
                const Tensor& residual, AttentionRecord* record) const;

  const AttentionConfig& config() const { return cfg_; }

  Tensor wq, wk, wv, wo;  // projections, bias-free

 private:
  AttentionConfig cfg_;
};

// Pre-norm transformer-decoder block: cross-attention with camera-aware
// queries, then a two-layer feed-forward, residuals around both.
class FusionStage {
 public:
  FusionStage(const AttentionConfig& cfg, int ffn_mult, ParamStore& params,
              Rng& rng, const std::string& prefix);

  Tensor forward(const Tensor& base, const QueryGrid& qg,
                 const std::vector<ViewRef>& views, const KeySequence& keys,
                 const EmbeddingSet& emb, AttentionRecord* record) const;

  CrossAttention attn;
  Tensor ln1_g, ln1_b, ln2_g, ln2_b;
  Tensor ff1_w, ff1_b, ff2_w, ff2_b;
};

// Coarse-to-fine refinement: stage 0 attends the coarsest keys with the
// learned queries, each later stage re-queries finer keys from the previous
// output. Returns [n_bev, d_m].
Tensor fuse_multiscale(const std::vector<FusionStage>& stages,
                       const Tensor& q_tilde,
                       const std::vector<KeySequence>& keys_coarse_to_fine,
                       const QueryGrid& qg, const EmbeddingSet& emb,
                       std::vector<AttentionRecord>* records);

// Probe columns averaged over a BEV index set, reduced over heads by the
// first principal component, reshaped to the view's feature grid, resized to
// (out_h, out_w) and min-max rescaled into [0, 1].
std::vector<double> extract_saliency(const AttentionRecord& rec,
                                     const std::vector<int64_t>& probe,
                                     const std::string& target_view,
                                     int64_t out_h, int64_t out_w);

}  // namespace bevfuse
