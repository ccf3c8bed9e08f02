#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "bevfuse/errors.hpp"

namespace bevfuse {

enum class Modality { rgb, lwir, lidar_pseudo };

std::string modality_name(Modality m);
Modality modality_from_name(const std::string& s);

// Per-view calibration: pixel = intrinsic * extrinsic * (world - center),
// followed by the perspective divide. `extrinsic` rotates world into camera
// coordinates (image x, image y, optical axis).
struct CameraCalibration {
  Eigen::Matrix3d intrinsic = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d extrinsic = Eigen::Matrix3d::Identity();
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  std::string view_id;
  Modality modality = Modality::rgb;

  // throws SingularCalibration / Error on a non-rotation extrinsic
  void validate() const;
  // calibration for the same camera observing at 1/scale resolution
  CameraCalibration downscaled(double scale) const;
};

struct ImagePoint {
  double u = 0;  // horizontal pixel coordinate
  double v = 0;  // vertical pixel coordinate
  double depth = 0;  // distance along the optical axis
};

ImagePoint project_world_to_image(const CameraCalibration& cal,
                                  const Eigen::Vector3d& world);

// unit viewing ray in world coordinates for a pixel
Eigen::Vector3d pixel_to_ray(const CameraCalibration& cal, double u, double v);

struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();  // body -> world
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  double timestamp = 0;

  Eigen::Vector3d to_world(const Eigen::Vector3d& body) const {
    return rotation * body + translation;
  }
};

struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return rotation * p + translation;
  }
};

// transform d with compose(d, a) == b
RigidTransform pose_difference(const Pose& a, const Pose& b);
Pose compose(const RigidTransform& d, const Pose& a);

// Planar (yaw + translation) motion taking coordinates expressed in `src`'s
// body frame to `dst`'s body frame. Roll/pitch and z components are
// projected away.
struct PlanarMotion {
  double yaw = 0;
  double tx = 0;
  double ty = 0;

  Eigen::Vector2d apply(const Eigen::Vector2d& p) const {
    double c = std::cos(yaw), s = std::sin(yaw);
    return {c * p.x() - s * p.y() + tx, s * p.x() + c * p.y() + ty};
  }
};

PlanarMotion planar_motion(const Pose& src, const Pose& dst);

// Own-ship centered orthographic grid on the z = 0 plane. World x points
// north, y east; rows grow southward, columns eastward. Cell (r, c) is
// centered at ((center_row - r) * mpc, (c - center_col) * mpc).
struct BevGrid {
  int cells_h = 200;
  int cells_w = 200;
  double meters_per_cell = 3.0;
  int center_row = 100;
  int center_col = 100;

  double extent_h() const { return cells_h * meters_per_cell; }
  double extent_w() const { return cells_w * meters_per_cell; }
};

Eigen::Vector2d bev_cell_to_world(const BevGrid& g, int row, int col);

struct BevCell {
  int row = 0;
  int col = 0;
};

// throws OutOfMap beyond half the extent in either axis
BevCell world_to_bev_cell(const BevGrid& g, double x, double y);
std::optional<BevCell> try_world_to_bev_cell(const BevGrid& g, double x,
                                             double y);

// Pseudo-camera observing the BEV plane: focal length 1 at (0, 0, 1) looking
// along -z, image x toward east, image y toward north. Query directions are
// E_q^-1 * I_q^-1 * (b_x, b_y, 1) with (b_x, b_y) the cell's centered grid
// coordinate in [-1, 1].
struct QueryGrid {
  int h_q = 25;
  int w_q = 25;
  Eigen::Matrix3d pseudo_intrinsic = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d pseudo_extrinsic;
  Eigen::Vector3d pseudo_center = Eigen::Vector3d(0, 0, 1);

  QueryGrid();
  QueryGrid(int h, int w);
  int n_bev() const { return h_q * w_q; }
};

// row-major h_q x w_q directions; row 0 is the map's north edge
std::vector<Eigen::Vector3d> bev_query_directions(const QueryGrid& qg);

}  // namespace bevfuse
