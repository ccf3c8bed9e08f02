#pragma once

#include <string>
#include <vector>

#include "bevfuse/dataset.hpp"
#include "bevfuse/scene.hpp"

namespace bevfuse {

struct SensorRig {
  struct CameraDef {
    std::string id;
    Modality modality = Modality::rgb;
    double yaw = 0;  // body frame, radians
    double mast_height = 3.0;
    Eigen::Vector2d offset = Eigen::Vector2d::Zero();  // body x, y
    int image_h = 64;
    int image_w = 128;
    double hfov_deg = 94.0;
  };
  struct LidarDef {
    std::string id;
    Eigen::Vector3d offset = Eigen::Vector3d(0, 0, 3.0);
    double max_range = 200.0;
    double range_noise = 0.12;
  };

  std::vector<CameraDef> cameras;
  std::vector<LidarDef> lidars;

  // evenly-yawed RGB ring, forward/aft LWIR pair, front/rear lidars
  static SensorRig standard(int n_rgb, int n_lwir, int n_lidar, int image_h,
                            int image_w);
};

// body-frame calibration of a rig camera
CameraCalibration rig_calibration(const SensorRig::CameraDef& def);

// flat-shaded ray-cast render of the scene from one camera at `time`
Tensor render_view(const Scene& scene, double time,
                   const SensorRig::CameraDef& def);

PointCloud sample_lidar(const Scene& scene, double time,
                        const SensorRig::LidarDef& def, Rng& rng);

DatasetSample render_sample(const Scene& scene,
                            const std::vector<double>& instants,
                            const SensorRig& rig, const BevGrid& gt_grid,
                            Rng& rng, const std::string& sample_id);

// 8-bit PGM writer shared by the CLI outputs
void write_pgm(const std::string& path, const std::vector<double>& values,
               int64_t h, int64_t w);

}  // namespace bevfuse
