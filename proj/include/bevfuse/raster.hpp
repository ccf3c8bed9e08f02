#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bevfuse/errors.hpp"
#include "bevfuse/geometry.hpp"

namespace bevfuse {

struct PointCloud {
  std::vector<Eigen::Vector3d> points;
  std::string sensor_id;
  double timestamp = 0;
};

struct RasterConfig {
  double cell_size = 3.0;  // meters per grid cell
  int grid_h = 200;
  int grid_w = 200;
  // world offset of cell (0, 0); cell i = floor((x - origin_x) / cell_size)
  double origin_x = -300.0;
  double origin_y = -300.0;

  void validate() const;
};

// H x W x 4 z-statistics grid; channels are (mean, variance, max, min).
// Unoccupied cells are all-zero with occupancy 0.
struct PseudoImage {
  int h = 0;
  int w = 0;
  std::vector<double> cells;      // h * w * 4, row-major, channel-last
  std::vector<uint8_t> occupancy; // h * w
  size_t dropped_points = 0;      // points outside the grid

  double at(int i, int j, int ch) const {
    return cells[(static_cast<size_t>(i) * w + j) * 4 + ch];
  }
  bool occupied(int i, int j) const {
    return occupancy[static_cast<size_t>(i) * w + j] != 0;
  }
};

// Kahan-compensated sum; both the rasterizer and its test oracle go through
// this so their results are comparable bit for bit.
double compensated_sum(std::span<const double> xs);

PseudoImage rasterize(const PointCloud& pcd, const RasterConfig& cfg);

// clouds indexed [time][sensor]; output flattened time-major.
// throws ShapeMismatch when the per-time sensor counts are ragged.
std::vector<PseudoImage> rasterize_batch(
    const std::vector<std::vector<PointCloud>>& clouds, const RasterConfig& cfg);

// Calibration of the virtual camera observing a pseudo-image: positioned
// `height` above the grid center looking straight down, with focal length
// chosen so that one pixel spans one raster cell.
CameraCalibration pseudo_camera_calibration(const RasterConfig& cfg,
                                            double height,
                                            const std::string& view_id);

}  // namespace bevfuse
