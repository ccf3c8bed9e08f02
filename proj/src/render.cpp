#include "bevfuse/render.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace bevfuse {

namespace {

constexpr double kMaxRenderDist = 2500.0;
constexpr double kSky = -1.0;  // sentinel class for above-horizon rays

const double kRgbPalette[6][3] = {
    {0.05, 0.16, 0.34},  // water
    {0.36, 0.30, 0.16},  // land
    {0.78, 0.72, 0.48},  // shoreline
    {0.88, 0.16, 0.10},  // buoy
    {0.92, 0.52, 0.12},  // target
    {0.60, 0.74, 0.90},  // sky
};
const double kLwirPalette[6] = {0.08, 0.45, 0.55, 0.82, 0.95, 0.02};

// smallest positive t with the hit inside the vertical cylinder
bool ray_cylinder(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                  const Eigen::Vector2d& center, double radius, double height,
                  double& t_hit) {
  double ox = origin.x() - center.x(), oy = origin.y() - center.y();
  double a = dir.x() * dir.x() + dir.y() * dir.y();
  double b = 2.0 * (ox * dir.x() + oy * dir.y());
  double c = ox * ox + oy * oy - radius * radius;
  if (a < 1e-12) return false;
  double disc = b * b - 4 * a * c;
  if (disc < 0) return false;
  double root = std::sqrt(disc);
  for (double t : {(-b - root) / (2 * a), (-b + root) / (2 * a)}) {
    if (t <= 1e-6) continue;
    double z = origin.z() + t * dir.z();
    if (z >= 0.0 && z <= height) {
      t_hit = t;
      return true;
    }
  }
  return false;
}

// axis-aligned slab test after rotating into the box frame
bool ray_box(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
             const Eigen::Vector2d& center, double heading, double length,
             double width, double height, double& t_hit) {
  double c = std::cos(-heading), s = std::sin(-heading);
  Eigen::Vector3d o((origin.x() - center.x()) * c - (origin.y() - center.y()) * s,
                    (origin.x() - center.x()) * s + (origin.y() - center.y()) * c,
                    origin.z());
  Eigen::Vector3d d(dir.x() * c - dir.y() * s, dir.x() * s + dir.y() * c,
                    dir.z());
  double lo = 1e-6, hi = kMaxRenderDist;
  double mins[3] = {-length / 2, -width / 2, 0.0};
  double maxs[3] = {length / 2, width / 2, height};
  for (int ax = 0; ax < 3; ++ax) {
    if (std::abs(d[ax]) < 1e-12) {
      if (o[ax] < mins[ax] || o[ax] > maxs[ax]) return false;
      continue;
    }
    double t0 = (mins[ax] - o[ax]) / d[ax];
    double t1 = (maxs[ax] - o[ax]) / d[ax];
    if (t0 > t1) std::swap(t0, t1);
    lo = std::max(lo, t0);
    hi = std::min(hi, t1);
    if (lo > hi) return false;
  }
  t_hit = lo;
  return true;
}

struct LandBound {
  Eigen::Vector2d center;
  double radius;
};

std::vector<LandBound> land_bounds(const Scene& scene) {
  std::vector<LandBound> out;
  for (const auto& mass : scene.land) {
    Eigen::Vector2d c = Eigen::Vector2d::Zero();
    for (const auto& v : mass.polygon) c += v;
    c /= static_cast<double>(mass.polygon.size());
    double r = 0;
    for (const auto& v : mass.polygon) r = std::max(r, (v - c).norm());
    out.push_back({c, r});
  }
  return out;
}

// [t_in, t_out] of the ray against a 2D circle; false when it misses
bool ray_circle_range(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                      const LandBound& bound, double& t_in, double& t_out) {
  double ox = origin.x() - bound.center.x(), oy = origin.y() - bound.center.y();
  double a = dir.x() * dir.x() + dir.y() * dir.y();
  double b = 2.0 * (ox * dir.x() + oy * dir.y());
  double c = ox * ox + oy * oy - bound.radius * bound.radius;
  if (a < 1e-12) return c <= 0;  // vertical ray: inside iff within the circle
  double disc = b * b - 4 * a * c;
  if (disc < 0) return false;
  double root = std::sqrt(disc);
  t_in = (-b - root) / (2 * a);
  t_out = (-b + root) / (2 * a);
  return t_out > 0;
}

int cast_ray(const Scene& scene, const std::vector<LandBound>& bounds,
             double time, const Eigen::Vector3d& origin,
             const Eigen::Vector3d& dir) {
  double best_t = kMaxRenderDist;
  int best_class = static_cast<int>(kSky);
  bool hit = false;

  for (const auto& b : scene.buoys) {
    double t;
    if (ray_cylinder(origin, dir, b.position, b.radius, b.height, t) &&
        t < best_t) {
      best_t = t;
      best_class = kBuoy;
      hit = true;
    }
  }
  for (const auto& tg : scene.targets) {
    double t;
    if (ray_box(origin, dir, tg.position(time), tg.heading, tg.length,
                tg.width, tg.height, t) &&
        t < best_t) {
      best_t = t;
      best_class = kTarget;
      hit = true;
    }
  }

  // land is an extruded prism; march the ray across the blob's bounding
  // circle within the z slab [0, land_height]
  for (size_t li = 0; li < scene.land.size(); ++li) {
    double h = scene.spec.land_height_m;
    double ta, tb;
    if (!ray_circle_range(origin, dir, bounds[li], ta, tb)) continue;
    double t0 = std::max(ta, 1e-6), t1 = std::min(tb, best_t);
    if (std::abs(dir.z()) > 1e-12) {
      double za = (h - origin.z()) / dir.z();
      double zb = (0.0 - origin.z()) / dir.z();
      if (za > zb) std::swap(za, zb);
      t0 = std::max(t0, za);
      t1 = std::min(t1, zb);
    } else if (origin.z() > h) {
      continue;
    }
    double step = 4.0;
    for (double t = t0; t <= t1; t += step) {
      Eigen::Vector3d p = origin + t * dir;
      if (point_in_polygon(scene.land[li].polygon, {p.x(), p.y()})) {
        if (t < best_t) {
          best_t = t;
          best_class = kLand;
          hit = true;
        }
        break;
      }
    }
  }

  if (dir.z() < -1e-9) {
    double t = -origin.z() / dir.z();
    if (t > 0 && t < best_t) {
      Eigen::Vector3d p = origin + t * dir;
      best_class = scene.classify_ground(p.x(), p.y());
      hit = true;
    }
  }
  return hit ? best_class : static_cast<int>(kSky);
}

float quantize(double v) { return static_cast<float>(v); }

}  // namespace

SensorRig SensorRig::standard(int n_rgb, int n_lwir, int n_lidar, int image_h,
                              int image_w) {
  SensorRig rig;
  for (int i = 0; i < n_rgb; ++i) {
    CameraDef def;
    def.id = "rgb" + std::to_string(i);
    def.modality = Modality::rgb;
    def.yaw = 2.0 * M_PI * i / std::max(1, n_rgb);
    def.image_h = image_h;
    def.image_w = image_w;
    def.hfov_deg = 94.0;
    rig.cameras.push_back(def);
  }
  for (int i = 0; i < n_lwir; ++i) {
    CameraDef def;
    def.id = "lwir" + std::to_string(i);
    def.modality = Modality::lwir;
    def.yaw = n_lwir == 1 ? 0.0 : (i == 0 ? 0.0 : M_PI);
    def.image_h = image_h;
    def.image_w = image_w;
    def.hfov_deg = 50.0;
    rig.cameras.push_back(def);
  }
  for (int i = 0; i < n_lidar; ++i) {
    LidarDef def;
    def.id = "lidar" + std::to_string(i);
    def.offset = Eigen::Vector3d(i == 0 ? 5.0 : -5.0, 0.0, 3.0);
    rig.lidars.push_back(def);
  }
  return rig;
}

CameraCalibration rig_calibration(const SensorRig::CameraDef& def) {
  CameraCalibration cal;
  cal.view_id = def.id;
  cal.modality = def.modality;
  double c = std::cos(def.yaw), s = std::sin(def.yaw);
  // optical axis along the body yaw, image y pointing down
  cal.extrinsic << s, -c, 0,
                   0, 0, -1,
                   c, s, 0;
  double f = (def.image_w / 2.0) /
             std::tan(def.hfov_deg * M_PI / 180.0 / 2.0);
  cal.intrinsic << f, 0, def.image_w / 2.0,
                   0, f, def.image_h / 2.0,
                   0, 0, 1;
  cal.center = Eigen::Vector3d(def.offset.x(), def.offset.y(), def.mast_height);
  return cal;
}

Tensor render_view(const Scene& scene, double time,
                   const SensorRig::CameraDef& def) {
  CameraCalibration cal = rig_calibration(def);
  Pose pose = scene.own.pose_at(time);
  Eigen::Vector3d origin = pose.to_world(cal.center);

  int h = def.image_h, w = def.image_w;
  bool rgb = def.modality == Modality::rgb;
  int channels = rgb ? 3 : 1;
  std::vector<double> img(static_cast<size_t>(channels) * h * w);
  std::vector<LandBound> bounds = land_bounds(scene);

#pragma omp parallel for schedule(static)
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      Eigen::Vector3d ray_body = pixel_to_ray(cal, u + 0.5, v + 0.5);
      Eigen::Vector3d ray_world = pose.rotation * ray_body;
      int cls = cast_ray(scene, bounds, time, origin, ray_world);
      size_t px = static_cast<size_t>(v) * w + u;
      int palette = cls < 0 ? 5 : cls;
      if (rgb) {
        for (int ch = 0; ch < 3; ++ch)
          img[static_cast<size_t>(ch) * h * w + px] =
              quantize(kRgbPalette[palette][ch]);
      } else {
        img[px] = quantize(kLwirPalette[palette]);
      }
    }
  }
  return Tensor::from_vector({channels, h, w}, std::move(img));
}

PointCloud sample_lidar(const Scene& scene, double time,
                        const SensorRig::LidarDef& def, Rng& rng) {
  PointCloud cloud;
  cloud.sensor_id = def.id;
  cloud.timestamp = time;
  Pose pose = scene.own.pose_at(time);
  Eigen::Vector3d sensor_w = pose.to_world(def.offset);
  Eigen::Vector2d sensor_xy(sensor_w.x(), sensor_w.y());

  auto push_world = [&](const Eigen::Vector3d& p_world) {
    Eigen::Vector3d ray = p_world - sensor_w;
    double range = ray.norm();
    if (range > def.max_range || range < 0.3) return;
    Eigen::Vector3d noisy =
        p_world + ray / range * rng.normal(0.0, def.range_noise);
    // store in the own-ship body frame
    Eigen::Vector3d body = pose.rotation.transpose() * (noisy - pose.translation);
    cloud.points.push_back(body);
  };

  for (const auto& b : scene.buoys) {
    double dist = (b.position - sensor_xy).norm();
    if (dist > def.max_range) continue;
    int n = std::clamp(static_cast<int>(2000.0 / std::max(dist, 5.0)), 6, 60);
    double facing = std::atan2(sensor_xy.y() - b.position.y(),
                               sensor_xy.x() - b.position.x());
    for (int i = 0; i < n; ++i) {
      double phi = facing + rng.uniform(-M_PI / 2, M_PI / 2);
      double z = rng.uniform(0.0, b.height);
      push_world({b.position.x() + b.radius * std::cos(phi),
                  b.position.y() + b.radius * std::sin(phi), z});
    }
  }

  for (const auto& tg : scene.targets) {
    Eigen::Vector2d c = tg.position(time);
    double dist = (c - sensor_xy).norm();
    if (dist > def.max_range) continue;
    int n = std::clamp(static_cast<int>(3000.0 / std::max(dist, 5.0)), 8, 80);
    double hc = std::cos(tg.heading), hs = std::sin(tg.heading);
    for (int i = 0; i < n; ++i) {
      // uniform over the footprint perimeter, visible side only
      double per = 2 * (tg.length + tg.width);
      for (int attempt = 0; attempt < 8; ++attempt) {
        double s = rng.uniform(0.0, per);
        Eigen::Vector2d local;
        Eigen::Vector2d normal_local;
        if (s < tg.length) {
          local = {s - tg.length / 2, -tg.width / 2};
          normal_local = {0, -1};
        } else if (s < tg.length + tg.width) {
          local = {tg.length / 2, s - tg.length - tg.width / 2};
          normal_local = {1, 0};
        } else if (s < 2 * tg.length + tg.width) {
          local = {s - tg.length - tg.width - tg.length / 2, tg.width / 2};
          normal_local = {0, 1};
        } else {
          local = {-tg.length / 2,
                   s - 2 * tg.length - tg.width - tg.width / 2};
          normal_local = {-1, 0};
        }
        Eigen::Vector2d world(c.x() + hc * local.x() - hs * local.y(),
                              c.y() + hs * local.x() + hc * local.y());
        Eigen::Vector2d normal(hc * normal_local.x() - hs * normal_local.y(),
                               hs * normal_local.x() + hc * normal_local.y());
        if (normal.dot(sensor_xy - world) <= 0) continue;
        push_world({world.x(), world.y(), rng.uniform(0.0, tg.height)});
        break;
      }
    }
  }

  for (const auto& mass : scene.land) {
    size_t nv = mass.polygon.size();
    for (size_t i = 0, j = nv - 1; i < nv; j = i++) {
      Eigen::Vector2d a = mass.polygon[j];
      Eigen::Vector2d b = mass.polygon[i];
      double len = (b - a).norm();
      int steps = std::max(1, static_cast<int>(len / 4.0));
      for (int k = 0; k < steps; ++k) {
        Eigen::Vector2d p = a + (b - a) * ((k + rng.uniform()) / steps);
        if ((p - sensor_xy).norm() > def.max_range) continue;
        push_world({p.x(), p.y(), rng.uniform(0.0, scene.spec.land_height_m)});
      }
    }
  }
  return cloud;
}

DatasetSample render_sample(const Scene& scene,
                            const std::vector<double>& instants,
                            const SensorRig& rig, const BevGrid& gt_grid,
                            Rng& rng, const std::string& sample_id) {
  if (instants.empty()) throw DatasetError("render_sample with no instants");
  bool has_rgb = false;
  for (const auto& cam : rig.cameras)
    if (cam.modality == Modality::rgb) has_rgb = true;
  if (!has_rgb) throw DatasetError("rig must include at least one RGB view");

  DatasetSample sample;
  sample.sample_id = sample_id;
  sample.timestamps = instants;
  sample.grid = gt_grid;
  sample.class_names = {"water", "land", "shoreline", "buoy", "target"};
  sample.rgb.resize(instants.size());
  sample.lwir.resize(instants.size());
  sample.clouds.resize(instants.size());

  for (size_t ti = 0; ti < instants.size(); ++ti) {
    double time = instants[ti];
    sample.poses.push_back(scene.own.pose_at(time));
    for (const auto& cam : rig.cameras) {
      ViewData vd;
      vd.cal = rig_calibration(cam);
      vd.image = render_view(scene, time, cam);
      if (cam.modality == Modality::rgb)
        sample.rgb[ti].push_back(std::move(vd));
      else
        sample.lwir[ti].push_back(std::move(vd));
    }
    for (size_t li = 0; li < rig.lidars.size(); ++li) {
      Rng lidar_rng = rng.fork(1000 + ti * 64 + li);
      sample.clouds[ti].push_back(
          sample_lidar(scene, time, rig.lidars[li], lidar_rng));
    }
  }
  sample.gt_classes = paint_ground_truth(scene, instants.back(),
                                         sample.poses.back(), gt_grid);
  return sample;
}

void write_pgm(const std::string& path, const std::vector<double>& values,
               int64_t h, int64_t w) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open for write: " + path);
  os << "P5\n" << w << " " << h << "\n255\n";
  for (double v : values) {
    int byte = static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    os.put(static_cast<char>(byte));
  }
}

}  // namespace bevfuse
