#include "bevfuse/raster.hpp"

#include <algorithm>
#include <cmath>

namespace bevfuse {

void RasterConfig::validate() const {
  if (cell_size <= 0) throw Error("raster cell_size must be positive");
  if (grid_h <= 0 || grid_w <= 0) throw Error("raster grid must be positive");
}

double compensated_sum(std::span<const double> xs) {
  double sum = 0.0, comp = 0.0;
  for (double x : xs) {
    double y = x - comp;
    double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum;
}

PseudoImage rasterize(const PointCloud& pcd, const RasterConfig& cfg) {
  cfg.validate();
  PseudoImage out;
  out.h = cfg.grid_h;
  out.w = cfg.grid_w;
  out.cells.assign(static_cast<size_t>(cfg.grid_h) * cfg.grid_w * 4, 0.0);
  out.occupancy.assign(static_cast<size_t>(cfg.grid_h) * cfg.grid_w, 0);

  // bucket z values per cell, preserving input order
  std::vector<std::vector<double>> z_per_cell(
      static_cast<size_t>(cfg.grid_h) * cfg.grid_w);
  for (const auto& p : pcd.points) {
    double fi = std::floor((p.x() - cfg.origin_x) / cfg.cell_size);
    double fj = std::floor((p.y() - cfg.origin_y) / cfg.cell_size);
    if (fi < 0 || fj < 0 || fi >= cfg.grid_h || fj >= cfg.grid_w) {
      ++out.dropped_points;
      continue;
    }
    size_t idx = static_cast<size_t>(fi) * cfg.grid_w + static_cast<size_t>(fj);
    z_per_cell[idx].push_back(p.z());
  }

  for (size_t idx = 0; idx < z_per_cell.size(); ++idx) {
    auto& zs = z_per_cell[idx];
    if (zs.empty()) continue;
    // canonical order makes the statistics bit-exactly permutation invariant
    std::sort(zs.begin(), zs.end());
    double n = static_cast<double>(zs.size());
    double mean = compensated_sum(zs) / n;
    std::vector<double> sq(zs.size());
    for (size_t k = 0; k < zs.size(); ++k) {
      double d = zs[k] - mean;
      sq[k] = d * d;
    }
    double var = compensated_sum(sq) / n;  // population variance
    double zmax = *std::max_element(zs.begin(), zs.end());
    double zmin = *std::min_element(zs.begin(), zs.end());
    out.cells[idx * 4 + 0] = mean;
    out.cells[idx * 4 + 1] = var;
    out.cells[idx * 4 + 2] = zmax;
    out.cells[idx * 4 + 3] = zmin;
    out.occupancy[idx] = 1;
  }
  return out;
}

std::vector<PseudoImage> rasterize_batch(
    const std::vector<std::vector<PointCloud>>& clouds,
    const RasterConfig& cfg) {
  if (!clouds.empty()) {
    size_t v = clouds.front().size();
    for (const auto& row : clouds)
      if (row.size() != v)
        throw ShapeMismatch("ragged (sensor, time) index set");
  }
  std::vector<PseudoImage> out;
  for (const auto& row : clouds)
    for (const auto& cloud : row) out.push_back(rasterize(cloud, cfg));
  return out;
}

CameraCalibration pseudo_camera_calibration(const RasterConfig& cfg,
                                            double height,
                                            const std::string& view_id) {
  CameraCalibration cal;
  cal.view_id = view_id;
  cal.modality = Modality::lidar_pseudo;
  // image x = east (column index j), image y = north (row index i), axis down
  cal.extrinsic << 0, 1, 0,
                   1, 0, 0,
                   0, 0, -1;
  double f = height / cfg.cell_size;
  cal.intrinsic << f, 0, cfg.grid_w / 2.0,
                   0, f, cfg.grid_h / 2.0,
                   0, 0, 1;
  cal.center = Eigen::Vector3d(cfg.origin_x + cfg.grid_h * cfg.cell_size / 2.0,
                               cfg.origin_y + cfg.grid_w * cfg.cell_size / 2.0,
                               height);
  return cal;
}

}  // namespace bevfuse
