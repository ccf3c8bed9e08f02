#include "bevfuse/scene.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

namespace bevfuse {

void SceneSpec::validate() const {
  if (extent_m <= 0) throw InfeasibleSpec("extent must be positive");
  if (land_blobs_min < 0 || land_blobs_max < land_blobs_min)
    throw InfeasibleSpec("bad land blob range");
  if (land_radius_max * 2 > extent_m)
    throw InfeasibleSpec("land blobs larger than the scene extent");
  if (buoy_min < 0 || buoy_max < buoy_min) throw InfeasibleSpec("bad buoy range");
  if (target_min < 0 || target_max < target_min)
    throw InfeasibleSpec("bad target range");
  if (target_speed_max < target_speed_min || target_speed_min < 0)
    throw InfeasibleSpec("bad target speed range");
}

Pose OwnTrajectory::pose_at(double time) const {
  double psi = heading0 + yaw_rate * time;
  Eigen::Vector2d p;
  if (std::abs(yaw_rate) < 1e-9) {
    p = position0 + speed * time * Eigen::Vector2d(std::cos(heading0),
                                                   std::sin(heading0));
  } else {
    double r = speed / yaw_rate;
    p = position0 + r * Eigen::Vector2d(std::sin(psi) - std::sin(heading0),
                                        std::cos(heading0) - std::cos(psi));
  }
  Pose pose;
  pose.rotation = Eigen::AngleAxisd(psi, Eigen::Vector3d::UnitZ())
                      .toRotationMatrix();
  pose.translation = Eigen::Vector3d(p.x(), p.y(), 0.0);
  pose.timestamp = time;
  return pose;
}

bool point_in_polygon(const std::vector<Eigen::Vector2d>& poly,
                      const Eigen::Vector2d& p) {
  bool inside = false;
  size_t n = poly.size();
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    const auto& a = poly[i];
    const auto& b = poly[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      double x_cross = (b.x() - a.x()) * (p.y() - a.y()) / (b.y() - a.y()) + a.x();
      if (p.x() < x_cross) inside = !inside;
    }
  }
  return inside;
}

double distance_to_polygon_boundary(const std::vector<Eigen::Vector2d>& poly,
                                    const Eigen::Vector2d& p) {
  double best = std::numeric_limits<double>::infinity();
  size_t n = poly.size();
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    const auto& a = poly[j];
    const auto& b = poly[i];
    Eigen::Vector2d ab = b - a;
    double len2 = ab.squaredNorm();
    double t = len2 > 0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    best = std::min(best, (p - (a + t * ab)).norm());
  }
  return best;
}

bool point_in_oriented_rect(const Eigen::Vector2d& center, double heading,
                            double length, double width,
                            const Eigen::Vector2d& p) {
  double c = std::cos(heading), s = std::sin(heading);
  Eigen::Vector2d d = p - center;
  double fwd = c * d.x() + s * d.y();
  double side = -s * d.x() + c * d.y();
  return std::abs(fwd) <= length / 2.0 && std::abs(side) <= width / 2.0;
}

int Scene::classify_ground(double x, double y) const {
  Eigen::Vector2d p(x, y);
  bool in_land = false;
  double edge = std::numeric_limits<double>::infinity();
  for (const auto& mass : land) {
    if (point_in_polygon(mass.polygon, p)) in_land = true;
    edge = std::min(edge, distance_to_polygon_boundary(mass.polygon, p));
  }
  if (edge <= spec.shoreline_width_m / 2.0) return kShoreline;
  return in_land ? kLand : kWater;
}

int Scene::classify(double x, double y, double time) const {
  Eigen::Vector2d p(x, y);
  for (const auto& t : targets)
    if (point_in_oriented_rect(t.position(time), t.heading, t.length, t.width, p))
      return kTarget;
  for (const auto& b : buoys)
    if ((p - b.position).norm() <= b.radius) return kBuoy;
  return classify_ground(x, y);
}

namespace {

LandMass random_land(Rng& rng, const Eigen::Vector2d& center, double radius) {
  LandMass mass;
  int verts = static_cast<int>(rng.uniform_int(6, 10));
  std::vector<double> angles;
  for (int i = 0; i < verts; ++i)
    angles.push_back(2.0 * M_PI * (i + rng.uniform(0.05, 0.95)) / verts);
  for (double a : angles) {
    double r = radius * rng.uniform(0.55, 1.0);
    mass.polygon.emplace_back(center.x() + r * std::cos(a),
                              center.y() + r * std::sin(a));
  }
  return mass;
}

}  // namespace

Scene generate_scene(const SceneSpec& spec) {
  spec.validate();
  Scene scene;
  scene.spec = spec;
  Rng rng(spec.seed);

  double half = spec.extent_m / 2.0;

  Rng own_rng = rng.fork(1);
  scene.own.position0 = Eigen::Vector2d::Zero();
  scene.own.heading0 = own_rng.uniform(0.0, 2.0 * M_PI);
  scene.own.speed = own_rng.uniform(spec.own_speed_min, spec.own_speed_max);
  scene.own.yaw_rate =
      own_rng.uniform(spec.own_yaw_rate_min, spec.own_yaw_rate_max);

  Rng land_rng = rng.fork(2);
  int n_land = static_cast<int>(
      land_rng.uniform_int(spec.land_blobs_min, spec.land_blobs_max));
  for (int i = 0; i < n_land; ++i) {
    for (int attempt = 0; attempt < 64; ++attempt) {
      double radius =
          land_rng.uniform(spec.land_radius_min, spec.land_radius_max);
      Eigen::Vector2d center(land_rng.uniform(-half, half),
                             land_rng.uniform(-half, half));
      if (center.norm() < spec.clear_radius_m + radius) continue;
      scene.land.push_back(random_land(land_rng, center, radius));
      break;
    }
  }

  auto in_water = [&](const Eigen::Vector2d& p, double margin) {
    if (p.norm() < spec.clear_radius_m * 0.5) return false;  // not on ship
    for (const auto& mass : scene.land) {
      if (point_in_polygon(mass.polygon, p)) return false;
      if (distance_to_polygon_boundary(mass.polygon, p) <
          spec.shoreline_width_m / 2.0 + margin)
        return false;
    }
    return true;
  };

  Rng buoy_rng = rng.fork(3);
  int n_buoys =
      static_cast<int>(buoy_rng.uniform_int(spec.buoy_min, spec.buoy_max));
  for (int i = 0; i < n_buoys; ++i) {
    for (int attempt = 0; attempt < 128; ++attempt) {
      Eigen::Vector2d p(buoy_rng.uniform(-half * 0.9, half * 0.9),
                        buoy_rng.uniform(-half * 0.9, half * 0.9));
      if (!in_water(p, spec.buoy_radius_m)) continue;
      scene.buoys.push_back({p, spec.buoy_radius_m, spec.buoy_height_m});
      break;
    }
  }

  Rng target_rng = rng.fork(4);
  int n_targets = static_cast<int>(
      target_rng.uniform_int(spec.target_min, spec.target_max));
  for (int i = 0; i < n_targets; ++i) {
    for (int attempt = 0; attempt < 128; ++attempt) {
      Eigen::Vector2d p(target_rng.uniform(-half * 0.7, half * 0.7),
                        target_rng.uniform(-half * 0.7, half * 0.7));
      double speed =
          target_rng.uniform(spec.target_speed_min, spec.target_speed_max);
      double course = target_rng.uniform(0.0, 2.0 * M_PI);
      Eigen::Vector2d vel(speed * std::cos(course), speed * std::sin(course));
      Eigen::Vector2d p_end = p + vel * spec.horizon_s;
      if (!in_water(p, spec.target_length_m) ||
          !in_water(p_end, spec.target_length_m))
        continue;
      if (std::abs(p_end.x()) > half * 0.95 || std::abs(p_end.y()) > half * 0.95)
        continue;
      scene.targets.push_back({p, vel, course, spec.target_length_m,
                               spec.target_width_m, spec.target_height_m});
      break;
    }
  }
  return scene;
}

std::string scene_to_json(const Scene& scene) {
  nlohmann::json j;
  j["extent_m"] = scene.spec.extent_m;
  j["seed"] = scene.spec.seed;
  j["own"] = {{"x", scene.own.position0.x()},
              {"y", scene.own.position0.y()},
              {"heading", scene.own.heading0},
              {"speed", scene.own.speed},
              {"yaw_rate", scene.own.yaw_rate}};
  j["land"] = nlohmann::json::array();
  for (const auto& mass : scene.land) {
    nlohmann::json ring = nlohmann::json::array();
    for (const auto& v : mass.polygon) ring.push_back({v.x(), v.y()});
    j["land"].push_back(ring);
  }
  j["buoys"] = nlohmann::json::array();
  for (const auto& b : scene.buoys)
    j["buoys"].push_back({{"x", b.position.x()},
                          {"y", b.position.y()},
                          {"radius", b.radius},
                          {"height", b.height}});
  j["targets"] = nlohmann::json::array();
  for (const auto& t : scene.targets)
    j["targets"].push_back({{"x", t.position0.x()},
                            {"y", t.position0.y()},
                            {"vx", t.velocity.x()},
                            {"vy", t.velocity.y()},
                            {"heading", t.heading},
                            {"length", t.length},
                            {"width", t.width}});
  return j.dump(2);
}

std::vector<uint8_t> paint_ground_truth(const Scene& scene, double time,
                                        const Pose& body_pose,
                                        const BevGrid& grid) {
  std::vector<uint8_t> classes(
      static_cast<size_t>(grid.cells_h) * grid.cells_w, kWater);
  for (int r = 0; r < grid.cells_h; ++r) {
    for (int c = 0; c < grid.cells_w; ++c) {
      Eigen::Vector2d body = bev_cell_to_world(grid, r, c);
      Eigen::Vector3d world =
          body_pose.to_world(Eigen::Vector3d(body.x(), body.y(), 0.0));
      classes[static_cast<size_t>(r) * grid.cells_w + c] =
          static_cast<uint8_t>(scene.classify(world.x(), world.y(), time));
    }
  }
  return classes;
}

}  // namespace bevfuse
