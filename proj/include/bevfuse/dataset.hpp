#pragma once

#include <string>
#include <vector>

#include "bevfuse/geometry.hpp"
#include "bevfuse/raster.hpp"
#include "bevfuse/tensor.hpp"

namespace bevfuse {

struct ViewData {
  CameraCalibration cal;  // own-ship body frame
  Tensor image;           // [3, h, w] rgb or [1, h, w] lwir, values in [0, 1]
};

struct DatasetSample {
  std::string sample_id;
  std::vector<double> timestamps;               // ascending; back() = current
  std::vector<std::vector<ViewData>> rgb;       // [t][view]
  std::vector<std::vector<ViewData>> lwir;      // [t][view]
  std::vector<std::vector<PointCloud>> clouds;  // [t][sensor], body frame
  std::vector<Pose> poses;                      // [t], world frame
  std::vector<uint8_t> gt_classes;  // cells_h * cells_w, current instant
  BevGrid grid;
  std::vector<std::string> class_names;

  int t() const { return static_cast<int>(timestamps.size()); }
};

// one-hot [C, cells_h, cells_w] tensor from the class-index ground truth
Tensor gt_onehot(const DatasetSample& sample, int n_classes);

void write_dataset(const std::vector<DatasetSample>& samples,
                   const std::string& dir);
std::vector<DatasetSample> read_dataset(const std::string& dir);
int dataset_sample_count(const std::string& dir);
DatasetSample read_sample(const std::string& dir, int index);

}  // namespace bevfuse
