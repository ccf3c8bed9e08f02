#pragma once

#include "bevfuse/dataset.hpp"
#include "bevfuse/rng.hpp"

namespace bevfuse {

struct AugmentConfig {
  double crop_max_fraction = 0.0;  // per axis, of the image size
  double rotation_max_deg = 0.0;   // in-plane, about the principal point
  double brightness_max = 0.0;     // additive, +- range
  double contrast_max = 0.0;       // multiplicative, 1 +- range
  double view_dropout_prob = 0.0;  // whole-view blackout
  uint64_t seed = 0;

  void validate() const;
  bool is_identity() const;
};

// Geometric augmentations update the calibration so that re-projecting world
// points matches the transformed pixel positions; ground truth and clouds
// are untouched. A zero-magnitude config returns the sample bit-exactly.
DatasetSample augment(const DatasetSample& sample, const AugmentConfig& cfg,
                      Rng& rng);

// exposed for the consistency tests
Tensor crop_resize_image(const Tensor& img, double ox, double oy,
                         double crop_w, double crop_h);
Tensor rotate_image(const Tensor& img, double radians, double cx, double cy);
Eigen::Matrix3d crop_resize_intrinsic(const Eigen::Matrix3d& intrinsic,
                                      double ox, double oy, double sx,
                                      double sy);

}  // namespace bevfuse
