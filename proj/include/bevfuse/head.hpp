#pragma once

#include <span>
#include <string>
#include <vector>

#include "bevfuse/geometry.hpp"
#include "bevfuse/optim.hpp"
#include "bevfuse/tensor.hpp"

namespace bevfuse {

// class order doubles as the one-hot priority (later wins on overlap)
inline const std::vector<std::string>& bev_class_names() {
  static const std::vector<std::string> names = {"water", "land", "shoreline",
                                                 "buoy", "target"};
  return names;
}

struct BevMap {
  Tensor values;  // [C, cells_h, cells_w]; logits, probabilities or one-hot
  std::vector<std::string> class_names = bev_class_names();
  BevGrid grid;
};

struct FocalConfig {
  double gamma = 2.0;
  std::vector<double> alpha;  // per class; empty = 1.0 everywhere

  void validate(int n_classes) const;
};

// Per-class sigmoid binary focal loss, mean over all cells and classes.
// gamma = 0 with unit alpha reduces exactly to binary cross-entropy.
Tensor focal_loss(const Tensor& logits, const Tensor& target_onehot,
                  const FocalConfig& cfg);

// softmax cross-entropy over the class channel (the alternative loss)
Tensor cross_entropy_loss(const Tensor& logits, const Tensor& target_onehot);

// softmax + argmax over the channel dimension; ties resolve to the lowest
// class index
std::vector<int> predict_classes(const Tensor& map);

struct IouResult {
  std::vector<double> per_class;  // NaN when absent from both pred and gt
  std::vector<bool> present;
  double mean_iou = 0;  // over present classes only
  int present_count = 0;
};

IouResult iou_multiclass(std::span<const int> pred, std::span<const int> gt,
                         int n_classes);

// Three (bilinear x2 -> 3x3 conv -> gelu) blocks, then a resize to the exact
// output grid and a 1x1 projection to the class channels.
class Decoder {
 public:
  Decoder(int d_m, int n_classes, ParamStore& params, Rng& rng,
          const std::string& prefix);
  Tensor decode(const Tensor& m_bev_grid, int out_h, int out_w) const;

 private:
  struct Conv {
    Tensor kernel;
    Tensor bias;
  };
  std::vector<Conv> blocks_;
  Conv final_;
};

}  // namespace bevfuse
