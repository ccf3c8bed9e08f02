#include "bevfuse/geometry.hpp"

#include <cmath>

namespace bevfuse {

std::string modality_name(Modality m) {
  switch (m) {
    case Modality::rgb: return "rgb";
    case Modality::lwir: return "lwir";
    case Modality::lidar_pseudo: return "lidar_pseudo";
  }
  return "rgb";
}

Modality modality_from_name(const std::string& s) {
  if (s == "rgb") return Modality::rgb;
  if (s == "lwir") return Modality::lwir;
  if (s == "lidar_pseudo") return Modality::lidar_pseudo;
  throw Error("unknown modality: " + s);
}

void CameraCalibration::validate() const {
  if (std::abs(intrinsic.determinant()) < 1e-12)
    throw SingularCalibration("intrinsic matrix is not invertible: " + view_id);
  Eigen::Matrix3d should_be_eye = extrinsic * extrinsic.transpose();
  if ((should_be_eye - Eigen::Matrix3d::Identity()).norm() > 1e-9)
    throw Error("extrinsic is not orthonormal: " + view_id);
  if (std::abs(extrinsic.determinant() - 1.0) > 1e-9)
    throw Error("extrinsic determinant is not +1: " + view_id);
}

CameraCalibration CameraCalibration::downscaled(double scale) const {
  CameraCalibration out = *this;
  Eigen::Matrix3d s = Eigen::Matrix3d::Identity();
  s(0, 0) = 1.0 / scale;
  s(1, 1) = 1.0 / scale;
  out.intrinsic = s * intrinsic;
  return out;
}

ImagePoint project_world_to_image(const CameraCalibration& cal,
                                  const Eigen::Vector3d& world) {
  if (std::abs(cal.intrinsic.determinant()) < 1e-12)
    throw SingularCalibration("intrinsic matrix is not invertible");
  Eigen::Vector3d u = cal.intrinsic * (cal.extrinsic * (world - cal.center));
  if (u.z() <= 0.0) throw BehindCamera("point has non-positive depth");
  return {u.x() / u.z(), u.y() / u.z(), u.z()};
}

Eigen::Vector3d pixel_to_ray(const CameraCalibration& cal, double u, double v) {
  if (std::abs(cal.intrinsic.determinant()) < 1e-12)
    throw SingularCalibration("intrinsic matrix is not invertible");
  Eigen::Vector3d cam = cal.intrinsic.inverse() * Eigen::Vector3d(u, v, 1.0);
  Eigen::Vector3d dir = cal.extrinsic.transpose() * cam;
  return dir.normalized();
}

RigidTransform pose_difference(const Pose& a, const Pose& b) {
  // d = T_b * T_a^{-1} so that compose(d, a) == b
  RigidTransform d;
  d.rotation = b.rotation * a.rotation.transpose();
  d.translation = b.translation - d.rotation * a.translation;
  return d;
}

Pose compose(const RigidTransform& d, const Pose& a) {
  Pose out;
  out.rotation = d.rotation * a.rotation;
  out.translation = d.rotation * a.translation + d.translation;
  out.timestamp = a.timestamp;
  return out;
}

PlanarMotion planar_motion(const Pose& src, const Pose& dst) {
  // full transform: dst_body = R_dst^T (R_src p + t_src - t_dst)
  Eigen::Matrix3d r = dst.rotation.transpose() * src.rotation;
  Eigen::Vector3d t = dst.rotation.transpose() * (src.translation - dst.translation);
  PlanarMotion m;
  m.yaw = std::atan2(r(1, 0), r(0, 0));
  m.tx = t.x();
  m.ty = t.y();
  return m;
}

Eigen::Vector2d bev_cell_to_world(const BevGrid& g, int row, int col) {
  return {(g.center_row - row) * g.meters_per_cell,
          (col - g.center_col) * g.meters_per_cell};
}

std::optional<BevCell> try_world_to_bev_cell(const BevGrid& g, double x,
                                             double y) {
  if (std::abs(x) > g.extent_h() / 2.0 || std::abs(y) > g.extent_w() / 2.0)
    return std::nullopt;
  auto clamp = [](long v, int n) {
    return static_cast<int>(std::max(0l, std::min(static_cast<long>(n) - 1, v)));
  };
  long row = std::lround(g.center_row - x / g.meters_per_cell);
  long col = std::lround(g.center_col + y / g.meters_per_cell);
  return BevCell{clamp(row, g.cells_h), clamp(col, g.cells_w)};
}

BevCell world_to_bev_cell(const BevGrid& g, double x, double y) {
  auto cell = try_world_to_bev_cell(g, x, y);
  if (!cell) throw OutOfMap("world point beyond the map extent");
  return *cell;
}

QueryGrid::QueryGrid() : QueryGrid(25, 25) {}

QueryGrid::QueryGrid(int h, int w) : h_q(h), w_q(w) {
  // image x = east, image y = north, optical axis = down; det +1
  pseudo_extrinsic << 0, 1, 0,
                      1, 0, 0,
                      0, 0, -1;
}

std::vector<Eigen::Vector3d> bev_query_directions(const QueryGrid& qg) {
  Eigen::Matrix3d ie =
      qg.pseudo_extrinsic.inverse() * qg.pseudo_intrinsic.inverse();
  std::vector<Eigen::Vector3d> dirs;
  dirs.reserve(static_cast<size_t>(qg.n_bev()));
  double half_r = (qg.h_q - 1) / 2.0;
  double half_c = (qg.w_q - 1) / 2.0;
  double norm_r = std::max(half_r, 1.0);
  double norm_c = std::max(half_c, 1.0);
  for (int r = 0; r < qg.h_q; ++r) {
    for (int c = 0; c < qg.w_q; ++c) {
      double bx = (c - half_c) / norm_c;       // east
      double by = (half_r - r) / norm_r;       // north (row 0 = north edge)
      dirs.emplace_back(ie * Eigen::Vector3d(bx, by, 1.0));
    }
  }
  return dirs;
}

}  // namespace bevfuse
