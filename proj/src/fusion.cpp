#include "bevfuse/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "bevfuse/ops.hpp"

namespace bevfuse {

KeySequence build_keys(const std::vector<FeatureMap>& features,
                       const std::vector<CameraCalibration>& cals, int scale,
                       const EmbeddingSet& emb) {
  KeySequence seq;
  std::vector<Tensor> feat_parts;
  std::vector<Tensor> embedded_parts;
  int64_t cursor = 0;

  for (const auto& fm : features) {
    if (fm.scale != scale) continue;
    const CameraCalibration* cal = nullptr;
    for (const auto& c : cals)
      if (c.view_id == fm.source_view) cal = &c;
    if (!cal)
      throw MissingCalibration("no calibration for view " + fm.source_view);

    CameraCalibration scaled = cal->downscaled(static_cast<double>(scale));
    int64_t hf = fm.height(), wf = fm.width(), d = fm.channels();

    // [d, h, w] -> [h*w, d]
    Tensor flat = transpose2d(reshape(fm.values, {d, hf * wf}));

    std::vector<Eigen::Vector3d> dirs;
    dirs.reserve(static_cast<size_t>(hf * wf));
    for (int64_t r = 0; r < hf; ++r)
      for (int64_t c = 0; c < wf; ++c) {
        double u = static_cast<double>(c) + 0.5;
        double v = static_cast<double>(r) + 0.5;
        Eigen::Vector3d rho = pixel_to_ray(scaled, u, v);
        dirs.push_back(rho);
        KeyTokenMeta m;
        m.direction = rho;
        m.time_index = fm.timestamp_index;
        m.view_id = fm.source_view;
        m.pixel_u = u;
        m.pixel_v = v;
        seq.meta.push_back(std::move(m));
      }

    Tensor pos = emb.embed_direction(dirs);
    Tensor token = add(add(flat, pos), emb.embed_time(fm.timestamp_index));
    feat_parts.push_back(flat);
    embedded_parts.push_back(token);

    KeySequence::ViewSpan span;
    span.view_id = fm.source_view;
    span.camera_center = cal->center;
    span.start = cursor;
    span.len = hf * wf;
    span.feat_h = hf;
    span.feat_w = wf;
    span.time_index = fm.timestamp_index;
    seq.spans.push_back(std::move(span));
    cursor += hf * wf;
  }

  if (!feat_parts.empty()) {
    seq.features = concat(feat_parts, 0);
    seq.embedded = concat(embedded_parts, 0);
  }
  return seq;
}

BevQuerySet build_queries(const Tensor& base, const QueryGrid& qg,
                          const std::vector<ViewRef>& views,
                          const EmbeddingSet& emb) {
  if (base.rank() != 2 || base.dim(0) != qg.n_bev())
    throw ShapeMismatch("query base must be [n_bev, d_m]");
  BevQuerySet set;
  set.learned = base;
  set.directions = bev_query_directions(qg);
  Tensor phi_b = emb.embed_direction(set.directions);
  Tensor with_pos = add(base, phi_b);
  for (const auto& view : views) {
    Tensor eps_c = emb.embed_center(view.camera_center);
    set.per_view.push_back({view.view_id, sub(with_pos, eps_c)});
  }
  return set;
}

CrossAttention::CrossAttention(const AttentionConfig& cfg, ParamStore& params,
                               Rng& rng, const std::string& prefix)
    : cfg_(cfg) {
  int inner = cfg.inner_dim();
  double bq = xavier_bound(cfg.d_m, inner);
  double bk = xavier_bound(cfg.d_e, inner);
  double bo = xavier_bound(inner, cfg.d_m);
  wq = params.make(prefix + ".wq", {cfg.d_m, inner}, uniform_init(-bq, bq), rng);
  wk = params.make(prefix + ".wk", {cfg.d_e, inner}, uniform_init(-bk, bk), rng);
  wv = params.make(prefix + ".wv", {cfg.d_e, inner}, uniform_init(-bk, bk), rng);
  wo = params.make(prefix + ".wo", {inner, cfg.d_m}, uniform_init(-bo, bo), rng);
}

Tensor CrossAttention::attend(const BevQuerySet& queries,
                              const KeySequence& keys, const Tensor& residual,
                              AttentionRecord* record) const {
  int64_t n_keys = keys.length();
  if (n_keys == 0) throw EmptyKeySequence("cross attention over zero keys");
  int64_t n_q = queries.learned.dim(0);

  Tensor k_proj = matmul(keys.embedded, wk);   // [L, inner]
  Tensor v_proj = matmul(keys.features, wv);   // [L, inner]

  // per-view projected queries, looked up by span
  std::vector<Tensor> q_proj;  // aligned with queries.per_view
  auto view_query = [&](const std::string& id) -> const Tensor& {
    for (size_t i = 0; i < queries.per_view.size(); ++i)
      if (queries.per_view[i].view_id == id) return q_proj[i];
    throw MissingCalibration("no query row built for view " + id);
  };
  q_proj.reserve(queries.per_view.size());
  for (const auto& vq : queries.per_view) q_proj.push_back(matmul(vq.q, wq));

  double scale = 1.0 / std::sqrt(static_cast<double>(cfg_.head_dim));
  if (record) {
    record->n_heads = cfg_.n_heads;
    record->n_queries = n_q;
    record->n_keys = n_keys;
    record->weights.assign(
        static_cast<size_t>(cfg_.n_heads) * n_q * n_keys, 0.0);
    record->key_meta = keys.meta;
    record->spans = keys.spans;
  }

  std::vector<Tensor> head_outputs;
  for (int h = 0; h < cfg_.n_heads; ++h) {
    int64_t off = static_cast<int64_t>(h) * cfg_.head_dim;
    Tensor kh = slice(k_proj, 1, off, cfg_.head_dim);  // [L, dk]
    Tensor vh = slice(v_proj, 1, off, cfg_.head_dim);
    Tensor kh_t = transpose2d(kh);                     // [dk, L]

    // assemble [n_q, L] scores span by span, each span scored with its
    // view's query rows
    std::vector<Tensor> score_blocks;
    for (const auto& span : keys.spans) {
      const Tensor& q_full = view_query(span.view_id);
      Tensor qh = slice(q_full, 1, off, cfg_.head_dim);        // [n_q, dk]
      Tensor kh_span = slice(kh_t, 1, span.start, span.len);   // [dk, len]
      score_blocks.push_back(matmul(qh, kh_span));
    }
    Tensor scores = score_blocks.size() == 1 ? score_blocks[0]
                                             : concat(score_blocks, 1);
    Tensor attn = softmax(mul_scalar(scores, scale));  // [n_q, L]

    if (record) {
      auto av = attn.values();
      double* dst = record->weights.data() +
                    static_cast<size_t>(h) * n_q * n_keys;
      std::copy(av.begin(), av.end(), dst);
    }
    head_outputs.push_back(matmul(attn, vh));  // [n_q, dk]
  }

  Tensor merged = head_outputs.size() == 1 ? head_outputs[0]
                                           : concat(head_outputs, 1);
  return add(matmul(merged, wo), residual);
}

FusionStage::FusionStage(const AttentionConfig& cfg, int ffn_mult,
                         ParamStore& params, Rng& rng,
                         const std::string& prefix)
    : attn(cfg, params, rng, prefix + ".attn") {
  int d = cfg.d_m;
  int hidden = d * ffn_mult;
  ln1_g = params.make_full(prefix + ".ln1.g", {d}, 1.0);
  ln1_b = params.make_zeros(prefix + ".ln1.b", {d});
  ln2_g = params.make_full(prefix + ".ln2.g", {d}, 1.0);
  ln2_b = params.make_zeros(prefix + ".ln2.b", {d});
  double b1 = xavier_bound(d, hidden);
  double b2 = xavier_bound(hidden, d);
  ff1_w = params.make(prefix + ".ff1.w", {d, hidden}, uniform_init(-b1, b1), rng);
  ff1_b = params.make_zeros(prefix + ".ff1.b", {hidden});
  ff2_w = params.make(prefix + ".ff2.w", {hidden, d}, uniform_init(-b2, b2), rng);
  ff2_b = params.make_zeros(prefix + ".ff2.b", {d});
}

Tensor FusionStage::forward(const Tensor& base, const QueryGrid& qg,
                            const std::vector<ViewRef>& views,
                            const KeySequence& keys, const EmbeddingSet& emb,
                            AttentionRecord* record) const {
  Tensor normed = layer_norm(base, ln1_g, ln1_b);
  BevQuerySet queries = build_queries(normed, qg, views, emb);
  Tensor attended = attn.attend(queries, keys, base, record);
  Tensor ff_in = layer_norm(attended, ln2_g, ln2_b);
  Tensor ff = linear(gelu(linear(ff_in, ff1_w, ff1_b)), ff2_w, ff2_b);
  return add(attended, ff);
}

Tensor fuse_multiscale(const std::vector<FusionStage>& stages,
                       const Tensor& q_tilde,
                       const std::vector<KeySequence>& keys_coarse_to_fine,
                       const QueryGrid& qg, const EmbeddingSet& emb,
                       std::vector<AttentionRecord>* records) {
  if (keys_coarse_to_fine.size() != stages.size())
    throw ScaleMismatch("expected " + std::to_string(stages.size()) +
                        " key scales, got " +
                        std::to_string(keys_coarse_to_fine.size()));
  if (records) records->resize(stages.size());
  Tensor x = q_tilde;
  for (size_t s = 0; s < stages.size(); ++s) {
    const KeySequence& keys = keys_coarse_to_fine[s];
    std::vector<ViewRef> views;
    std::set<std::string> seen;
    for (const auto& span : keys.spans)
      if (seen.insert(span.view_id).second)
        views.push_back({span.view_id, span.camera_center});
    x = stages[s].forward(x, qg, views, keys, emb,
                          records ? &(*records)[s] : nullptr);
  }
  return x;
}

std::vector<double> extract_saliency(const AttentionRecord& rec,
                                     const std::vector<int64_t>& probe,
                                     const std::string& target_view,
                                     int64_t out_h, int64_t out_w) {
  if (probe.empty()) throw EmptyProbe("saliency probe set is empty");
  for (int64_t q : probe)
    if (q < 0 || q >= rec.n_queries)
      throw IndexOutOfRange("probe index outside the query grid");

  // keys restricted to the current (latest) time instant of this record
  int current = 0;
  for (const auto& span : rec.spans) current = std::max(current, span.time_index);
  const KeySequence::ViewSpan* span = nullptr;
  for (const auto& s : rec.spans)
    if (s.view_id == target_view && s.time_index == current) span = &s;
  if (!span) throw IndexOutOfRange("view " + target_view + " not in record");

  int64_t len = span->len;
  int nh = rec.n_heads;
  // probe-averaged attention per head and key position
  std::vector<double> a(static_cast<size_t>(nh) * len, 0.0);
  double inv = 1.0 / static_cast<double>(probe.size());
  for (int h = 0; h < nh; ++h)
    for (int64_t p = 0; p < len; ++p) {
      double acc = 0;
      for (int64_t q : probe) acc += rec.weight(h, q, span->start + p);
      a[static_cast<size_t>(h) * len + p] = acc * inv;
    }

  // first principal component across the head dimension
  std::vector<double> mean_vec(static_cast<size_t>(nh), 0.0);
  for (int h = 0; h < nh; ++h) {
    double m = 0;
    for (int64_t p = 0; p < len; ++p) m += a[static_cast<size_t>(h) * len + p];
    mean_vec[static_cast<size_t>(h)] = m / static_cast<double>(len);
  }
  std::vector<double> cov(static_cast<size_t>(nh) * nh, 0.0);
  for (int64_t p = 0; p < len; ++p)
    for (int i = 0; i < nh; ++i)
      for (int j = 0; j < nh; ++j)
        cov[static_cast<size_t>(i) * nh + j] +=
            (a[static_cast<size_t>(i) * len + p] - mean_vec[static_cast<size_t>(i)]) *
            (a[static_cast<size_t>(j) * len + p] - mean_vec[static_cast<size_t>(j)]);

  std::vector<double> u(static_cast<size_t>(nh), 1.0 / std::sqrt(nh));
  for (int iter = 0; iter < 64; ++iter) {
    std::vector<double> next(static_cast<size_t>(nh), 0.0);
    for (int i = 0; i < nh; ++i)
      for (int j = 0; j < nh; ++j)
        next[static_cast<size_t>(i)] +=
            cov[static_cast<size_t>(i) * nh + j] * u[static_cast<size_t>(j)];
    double norm = 0;
    for (double v : next) norm += v * v;
    norm = std::sqrt(norm);
    if (norm < 1e-30) break;  // degenerate (e.g. uniform attention)
    for (int i = 0; i < nh; ++i) u[static_cast<size_t>(i)] = next[static_cast<size_t>(i)] / norm;
  }

  std::vector<double> projected(static_cast<size_t>(len), 0.0);
  for (int64_t p = 0; p < len; ++p) {
    double s = 0;
    for (int h = 0; h < nh; ++h)
      s += u[static_cast<size_t>(h)] *
           (a[static_cast<size_t>(h) * len + p] - mean_vec[static_cast<size_t>(h)]);
    projected[static_cast<size_t>(p)] = s;
  }

  NoGradGuard ng;
  Tensor grid = Tensor::from_vector({1, span->feat_h, span->feat_w}, projected);
  Tensor up = bilinear_resize(grid, out_h, out_w);
  auto uv = up.values();
  double lo = *std::min_element(uv.begin(), uv.end());
  double hi = *std::max_element(uv.begin(), uv.end());
  std::vector<double> out(uv.begin(), uv.end());
  if (hi - lo > 1e-30) {
    for (auto& v : out) v = (v - lo) / (hi - lo);
  } else {
    for (auto& v : out) v = 0.0;
  }
  return out;
}

}  // namespace bevfuse
