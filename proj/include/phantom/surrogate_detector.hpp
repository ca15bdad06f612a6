#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "phantom/geometry.hpp"
#include "phantom/kitti_io.hpp"

namespace phantom {

class KeyValueConfig;

// Deterministic LiDAR-only stand-in for a learned 3D detector:
// ground removal -> BEV grid clustering -> PCA box fit -> size gates ->
// point-count score. It exists to close the attack loop without a
// pretrained model, not to imitate one.

struct Detection {
  Box3D box;
  double score = 0.0;
  std::size_t point_count = 0;
};

struct SizeGate {
  std::string class_name;
  Dims min;
  Dims max;
  double saturation_count = 1.0;

  bool accepts(const Dims& d) const {
    return d.h >= min.h && d.h <= max.h && d.w >= min.w && d.w <= max.w && d.l >= min.l &&
           d.l <= max.l;
  }
};

struct DetectorConfig {
  double ground_height_offset = 0.25;
  double ground_tile_size = 2.0;
  double cell_size = 0.4;
  std::size_t min_cluster_points = 15;
  std::vector<SizeGate> gates = {
      {"Car", {1.2, 1.3, 3.0}, {2.3, 2.2, 5.5}, 400.0},
      {"Pedestrian", {1.2, 0.3, 0.3}, {2.1, 1.2, 1.2}, 120.0},
  };

  // Validates and throws ConfigError.
  void validate() const;

  static DetectorConfig from_config(const KeyValueConfig& cfg);
  void to_config(KeyValueConfig& cfg) const;
};

std::vector<std::size_t> remove_ground(const PointCloud& pc, const DetectorConfig& cfg);

using Cluster = std::vector<std::size_t>;

// 8-connected components of occupied BEV cells, ordered by their smallest
// point index. Components below min_cluster_points are dropped.
std::vector<Cluster> cluster_points(const PointCloud& pc, const std::vector<std::size_t>& indices,
                                    const DetectorConfig& cfg);

// PCA-aligned box around the cluster, rectified camera frame, class unset.
Box3D fit_box(const PointCloud& pc, const Cluster& cluster, const Calibration& calib);

// Detections sorted by descending score; ties keep cluster order.
std::vector<Detection> detect(const PointCloud& pc, const Calibration& calib,
                              const DetectorConfig& cfg = {});

// Result-file rows for detections that project into the image.
std::vector<ObjectLabel> detections_to_labels(const std::vector<Detection>& detections,
                                              const Calibration& calib, ImageSize size);

// Inverse of detections_to_labels for labels that carry a score.
std::vector<Detection> labels_to_detections(const std::vector<ObjectLabel>& labels);

}  // namespace phantom
