#include "bevfuse/dataset.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace bevfuse {

namespace fs = std::filesystem;
using nlohmann::json;

Tensor gt_onehot(const DatasetSample& sample, int n_classes) {
  int64_t cells = static_cast<int64_t>(sample.gt_classes.size());
  int64_t h = sample.grid.cells_h, w = sample.grid.cells_w;
  if (cells != h * w) throw DatasetError("ground truth size mismatch");
  std::vector<double> v(static_cast<size_t>(n_classes) * cells, 0.0);
  for (int64_t i = 0; i < cells; ++i) {
    int cls = sample.gt_classes[static_cast<size_t>(i)];
    if (cls < 0 || cls >= n_classes)
      throw DatasetError("ground truth class out of range");
    v[static_cast<size_t>(cls) * cells + i] = 1.0;
  }
  return Tensor::from_vector({n_classes, h, w}, std::move(v));
}

namespace {

json matrix_json(const Eigen::Matrix3d& m) {
  json a = json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) a.push_back(m(r, c));
  return a;
}

Eigen::Matrix3d matrix_from_json(const json& a) {
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = a.at(static_cast<size_t>(r * 3 + c));
  return m;
}

json vector_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Eigen::Vector3d vector_from_json(const json& a) {
  return {a.at(0), a.at(1), a.at(2)};
}

json cal_json(const CameraCalibration& cal) {
  return {{"view_id", cal.view_id},
          {"modality", modality_name(cal.modality)},
          {"intrinsic", matrix_json(cal.intrinsic)},
          {"extrinsic", matrix_json(cal.extrinsic)},
          {"center", vector_json(cal.center)}};
}

CameraCalibration cal_from_json(const json& j) {
  CameraCalibration cal;
  cal.view_id = j.at("view_id");
  cal.modality = modality_from_name(j.at("modality"));
  cal.intrinsic = matrix_from_json(j.at("intrinsic"));
  cal.extrinsic = matrix_from_json(j.at("extrinsic"));
  cal.center = vector_from_json(j.at("center"));
  return cal;
}

void write_image_ten(const std::string& path, const Tensor& img) {
  std::vector<float> payload(img.values().begin(), img.values().end());
  std::vector<uint64_t> dims;
  for (int64_t d : img.shape()) dims.push_back(static_cast<uint64_t>(d));
  write_ten_file(path, TenDtype::f32, dims, payload.data());
}

Tensor read_image_ten(const std::string& path) {
  TenData t = read_ten_file(path);
  if (t.dtype != TenDtype::f32) throw CorruptContainer("image dtype must be f32");
  Shape shape;
  for (uint64_t d : t.dims) shape.push_back(static_cast<int64_t>(d));
  return Tensor::from_vector(std::move(shape), t.as_f64());
}

void write_cloud_ten(const std::string& path, const PointCloud& cloud) {
  std::vector<double> payload;
  payload.reserve(cloud.points.size() * 3);
  for (const auto& p : cloud.points) {
    payload.push_back(p.x());
    payload.push_back(p.y());
    payload.push_back(p.z());
  }
  std::vector<uint64_t> dims = {cloud.points.size(), 3};
  write_ten_file(path, TenDtype::f64, dims, payload.data());
}

std::vector<Eigen::Vector3d> read_cloud_ten(const std::string& path) {
  TenData t = read_ten_file(path);
  if (t.dtype != TenDtype::f64 || t.dims.size() != 2 || t.dims[1] != 3)
    throw CorruptContainer("point cloud container must be f64 [n, 3]");
  std::vector<Eigen::Vector3d> out(t.dims[0]);
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = {t.f64[i * 3], t.f64[i * 3 + 1], t.f64[i * 3 + 2]};
  return out;
}

std::string sample_dir_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "sample_%04d", index);
  return buf;
}

}  // namespace

void write_dataset(const std::vector<DatasetSample>& samples,
                   const std::string& dir) {
  fs::create_directories(dir);
  json root;
  root["num_samples"] = samples.size();
  if (!samples.empty()) {
    root["class_names"] = samples[0].class_names;
    root["grid"] = {{"cells_h", samples[0].grid.cells_h},
                    {"cells_w", samples[0].grid.cells_w},
                    {"meters_per_cell", samples[0].grid.meters_per_cell},
                    {"center_row", samples[0].grid.center_row},
                    {"center_col", samples[0].grid.center_col}};
  }
  {
    std::ofstream os(fs::path(dir) / "dataset.json");
    os << root.dump(2) << "\n";
  }

  for (size_t si = 0; si < samples.size(); ++si) {
    const DatasetSample& s = samples[si];
    fs::path sdir = fs::path(dir) / sample_dir_name(static_cast<int>(si));
    fs::create_directories(sdir);

    json manifest;
    manifest["sample_id"] = s.sample_id;
    manifest["timestamps"] = s.timestamps;
    manifest["class_names"] = s.class_names;
    manifest["grid"] = {{"cells_h", s.grid.cells_h},
                        {"cells_w", s.grid.cells_w},
                        {"meters_per_cell", s.grid.meters_per_cell},
                        {"center_row", s.grid.center_row},
                        {"center_col", s.grid.center_col}};
    manifest["poses"] = json::array();
    for (const auto& p : s.poses)
      manifest["poses"].push_back({{"rotation", matrix_json(p.rotation)},
                                   {"translation", vector_json(p.translation)},
                                   {"timestamp", p.timestamp}});

    auto dump_views = [&](const std::vector<std::vector<ViewData>>& views,
                          const std::string& kind) {
      json arr = json::array();
      for (size_t ti = 0; ti < views.size(); ++ti) {
        json per_t = json::array();
        for (size_t vi = 0; vi < views[ti].size(); ++vi) {
          std::string file =
              kind + "_t" + std::to_string(ti) + "_v" + std::to_string(vi) + ".ten";
          write_image_ten((sdir / file).string(), views[ti][vi].image);
          json entry = cal_json(views[ti][vi].cal);
          entry["file"] = file;
          per_t.push_back(entry);
        }
        arr.push_back(per_t);
      }
      return arr;
    };
    manifest["rgb"] = dump_views(s.rgb, "rgb");
    manifest["lwir"] = dump_views(s.lwir, "lwir");

    json clouds = json::array();
    for (size_t ti = 0; ti < s.clouds.size(); ++ti) {
      json per_t = json::array();
      for (size_t vi = 0; vi < s.clouds[ti].size(); ++vi) {
        std::string file =
            "cloud_t" + std::to_string(ti) + "_v" + std::to_string(vi) + ".ten";
        write_cloud_ten((sdir / file).string(), s.clouds[ti][vi]);
        per_t.push_back({{"sensor_id", s.clouds[ti][vi].sensor_id},
                         {"timestamp", s.clouds[ti][vi].timestamp},
                         {"file", file}});
      }
      clouds.push_back(per_t);
    }
    manifest["clouds"] = clouds;

    {
      std::vector<uint64_t> dims = {static_cast<uint64_t>(s.grid.cells_h),
                                    static_cast<uint64_t>(s.grid.cells_w)};
      write_ten_file((sdir / "gt.ten").string(), TenDtype::u8, dims,
                     s.gt_classes.data());
      manifest["gt"] = "gt.ten";
    }

    std::ofstream os(sdir / "manifest.json");
    os << manifest.dump(2) << "\n";
  }
}

int dataset_sample_count(const std::string& dir) {
  fs::path root_path = fs::path(dir) / "dataset.json";
  if (!fs::exists(root_path)) throw MissingManifest("no dataset.json in " + dir);
  std::ifstream is(root_path);
  json root = json::parse(is, nullptr, false);
  if (root.is_discarded()) throw MissingManifest("unparseable dataset.json");
  return root.at("num_samples");
}

DatasetSample read_sample(const std::string& dir, int index) {
  fs::path sdir = fs::path(dir) / sample_dir_name(index);
  fs::path mpath = sdir / "manifest.json";
  if (!fs::exists(mpath))
    throw MissingManifest("no manifest.json in " + sdir.string());
  std::ifstream is(mpath);
  json manifest = json::parse(is, nullptr, false);
  if (manifest.is_discarded())
    throw MissingManifest("unparseable manifest in " + sdir.string());

  DatasetSample s;
  s.sample_id = manifest.at("sample_id");
  s.timestamps = manifest.at("timestamps").get<std::vector<double>>();
  s.class_names = manifest.at("class_names").get<std::vector<std::string>>();
  const json& g = manifest.at("grid");
  s.grid.cells_h = g.at("cells_h");
  s.grid.cells_w = g.at("cells_w");
  s.grid.meters_per_cell = g.at("meters_per_cell");
  s.grid.center_row = g.at("center_row");
  s.grid.center_col = g.at("center_col");

  for (const auto& pj : manifest.at("poses")) {
    Pose p;
    p.rotation = matrix_from_json(pj.at("rotation"));
    p.translation = vector_from_json(pj.at("translation"));
    p.timestamp = pj.at("timestamp");
    s.poses.push_back(p);
  }

  auto load_views = [&](const json& arr) {
    std::vector<std::vector<ViewData>> views;
    for (const auto& per_t : arr) {
      std::vector<ViewData> row;
      for (const auto& entry : per_t) {
        ViewData vd;
        vd.cal = cal_from_json(entry);
        vd.image = read_image_ten((sdir / entry.at("file").get<std::string>()).string());
        row.push_back(std::move(vd));
      }
      views.push_back(std::move(row));
    }
    return views;
  };
  s.rgb = load_views(manifest.at("rgb"));
  s.lwir = load_views(manifest.at("lwir"));

  for (const auto& per_t : manifest.at("clouds")) {
    std::vector<PointCloud> row;
    for (const auto& entry : per_t) {
      PointCloud cloud;
      cloud.sensor_id = entry.at("sensor_id");
      cloud.timestamp = entry.at("timestamp");
      cloud.points =
          read_cloud_ten((sdir / entry.at("file").get<std::string>()).string());
      row.push_back(std::move(cloud));
    }
    s.clouds.push_back(std::move(row));
  }

  TenData gt = read_ten_file((sdir / manifest.at("gt").get<std::string>()).string());
  if (gt.dtype != TenDtype::u8)
    throw CorruptContainer("ground truth container must be u8");
  s.gt_classes = gt.u8;
  return s;
}

std::vector<DatasetSample> read_dataset(const std::string& dir) {
  int n = dataset_sample_count(dir);
  std::vector<DatasetSample> out;
  out.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(read_sample(dir, i));
  return out;
}

}  // namespace bevfuse
