#pragma once

#include <vector>

#include "bevfuse/geometry.hpp"
#include "bevfuse/optim.hpp"
#include "bevfuse/tensor.hpp"

namespace bevfuse {

// Per-instant BEV maps resampled into the current (last) instant's frame.
struct AlignedStack {
  std::vector<Tensor> maps;  // t entries of [d_m, h, w]; index t-1 = current
  std::vector<Pose> poses_used;
};

// Resamples `map` (expressed in pose_then's body frame) into pose_now's
// frame. Motion is restricted to yaw + planar translation; samples outside
// the map read 0. Differentiable in the map values.
Tensor align_bev(const Tensor& map, const Pose& pose_then,
                 const Pose& pose_now, const BevGrid& meta);

AlignedStack align_stack(const std::vector<Tensor>& maps,
                         const std::vector<Pose>& poses, const BevGrid& meta);

// Valid 3D convolution over (t, h, w); kernel [d_out, d_m, kt, kh, kw] with
// kt equal to the stack depth, collapsing time to 1.
Tensor temporal_fuse(const AlignedStack& stack, const Tensor& kernel,
                     const Tensor& bias);

class TemporalConv {
 public:
  TemporalConv(int d_m, int d_out, int t, ParamStore& params, Rng& rng,
               const std::string& prefix);
  Tensor fuse(const AlignedStack& stack) const;

  Tensor kernel;  // [d_out, d_m, t, 1, 1]
  Tensor bias;    // [d_out, 1, 1]
};

}  // namespace bevfuse
