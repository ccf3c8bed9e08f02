#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "bevfuse/geometry.hpp"
#include "bevfuse/rng.hpp"

namespace bevfuse {

// class ids double as one-hot priority (higher wins on overlap)
enum BevClass : int {
  kWater = 0,
  kLand = 1,
  kShoreline = 2,
  kBuoy = 3,
  kTarget = 4,
};

struct SceneSpec {
  uint64_t seed = 0;
  double extent_m = 600.0;
  int land_blobs_min = 1, land_blobs_max = 3;
  double land_radius_min = 50.0, land_radius_max = 130.0;
  int buoy_min = 1, buoy_max = 4;
  int target_min = 1, target_max = 3;
  double target_speed_min = 1.0, target_speed_max = 5.0;
  double own_speed_min = 2.0, own_speed_max = 6.0;
  double own_yaw_rate_min = -0.015, own_yaw_rate_max = 0.015;  // rad/s
  double shoreline_width_m = 18.0;
  double buoy_radius_m = 7.0;
  double buoy_height_m = 5.0;
  double target_length_m = 30.0, target_width_m = 12.0;
  double target_height_m = 6.0;
  double land_height_m = 6.0;
  double clear_radius_m = 90.0;  // water kept around the own-ship path
  double horizon_s = 15.0;       // targets must stay in-extent this long

  void validate() const;  // throws InfeasibleSpec
};

struct LandMass {
  std::vector<Eigen::Vector2d> polygon;  // CCW ring, world frame
};

struct BuoyInstance {
  Eigen::Vector2d position;
  double radius = 7.0;
  double height = 5.0;
};

struct TargetInstance {
  Eigen::Vector2d position0;  // at scene time 0
  Eigen::Vector2d velocity;   // m/s, world frame
  double heading = 0;
  double length = 30.0, width = 12.0, height = 6.0;

  Eigen::Vector2d position(double time) const {
    return position0 + velocity * time;
  }
};

// constant-speed, constant-yaw-rate unicycle
struct OwnTrajectory {
  Eigen::Vector2d position0 = Eigen::Vector2d::Zero();
  double heading0 = 0;
  double speed = 0;
  double yaw_rate = 0;

  Pose pose_at(double time) const;
};

struct Scene {
  SceneSpec spec;
  std::vector<LandMass> land;
  std::vector<BuoyInstance> buoys;
  std::vector<TargetInstance> targets;
  OwnTrajectory own;

  // water/land/shoreline classification of a ground point, world frame
  int classify_ground(double x, double y) const;
  // full class including buoys and moving targets at `time`
  int classify(double x, double y, double time) const;
};

Scene generate_scene(const SceneSpec& spec);
std::string scene_to_json(const Scene& scene);

// geometry helpers shared with the renderer
bool point_in_polygon(const std::vector<Eigen::Vector2d>& poly,
                      const Eigen::Vector2d& p);
double distance_to_polygon_boundary(const std::vector<Eigen::Vector2d>& poly,
                                    const Eigen::Vector2d& p);
bool point_in_oriented_rect(const Eigen::Vector2d& center, double heading,
                            double length, double width,
                            const Eigen::Vector2d& p);

// one-hot priority resolution of the scene onto a BEV grid in the body frame
// of `body_pose`; returns row-major class indices
std::vector<uint8_t> paint_ground_truth(const Scene& scene, double time,
                                        const Pose& body_pose,
                                        const BevGrid& grid);

}  // namespace bevfuse
