#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "phantom/image.hpp"

namespace phantom {

// One LiDAR return in the sensor frame (x forward, y left, z up).
struct Point {
  float x = 0.0F;
  float y = 0.0F;
  float z = 0.0F;
  float intensity = 0.0F;

  friend bool operator==(const Point&, const Point&) = default;
};

struct PointCloud {
  std::vector<Point> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }

  friend bool operator==(const PointCloud&, const PointCloud&) = default;
};

using Matrix34 = Eigen::Matrix<double, 3, 4>;

// The P2 / R0_rect / Tr_velo_to_cam chain from a KITTI calib file.
struct Calibration {
  Matrix34 p2 = Matrix34::Zero();
  Eigen::Matrix3d r0_rect = Eigen::Matrix3d::Identity();
  Matrix34 tr_velo_to_cam = Matrix34::Zero();
};

struct ObjectLabel {
  std::string class_name;
  double truncation = 0.0;
  int occlusion = 0;
  double alpha = 0.0;
  std::array<double, 4> bbox2d{};  // left, top, right, bottom
  std::array<double, 3> dims{};    // h, w, l
  std::array<double, 3> location{};  // rectified camera frame, bottom center
  double rotation_y = 0.0;
  std::optional<double> score;

  bool is_dont_care() const { return class_name == "DontCare"; }
};

struct Scene {
  std::string scene_id;
  Image image;
  PointCloud cloud;
  Calibration calib;
  std::vector<ObjectLabel> labels;
  // Calibration file text as read, so copies of the scene stay byte-exact.
  std::string calib_text;
};

// Velodyne .bin codec: packed little-endian float32 (x, y, z, intensity).
PointCloud parse_point_cloud(std::span<const std::byte> bytes);
std::vector<std::byte> write_point_cloud(const PointCloud& pc);

Calibration parse_calibration(std::string_view text);
std::string write_calibration(const Calibration& calib);

std::vector<ObjectLabel> parse_labels(std::string_view text);
std::string write_labels(std::span<const ObjectLabel> labels);

std::vector<std::byte> read_bytes(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path,
                 std::span<const std::byte> bytes);
void write_text(const std::filesystem::path& path, std::string_view text);

// Paths of the four KITTI components for a scene.
struct ScenePaths {
  std::filesystem::path image;
  std::filesystem::path velodyne;
  std::filesystem::path calib;
  std::filesystem::path label;
};
ScenePaths scene_paths(const std::filesystem::path& root,
                       std::string_view scene_id);

struct LoadOptions {
  // Augmented output trees carry no label_2/; loading them sets this false.
  bool require_labels = true;
};

Scene load_scene(const std::filesystem::path& root, std::string_view scene_id,
                 const LoadOptions& options = {});

// Writes image_2 (PNG), velodyne, calib (verbatim text when available) and,
// if `with_labels`, label_2.
void save_scene(const Scene& scene, const std::filesystem::path& root,
                bool with_labels = true);

// Scene ids present under <root>/velodyne, sorted.
std::vector<std::string> list_scene_ids(const std::filesystem::path& root);

}  // namespace phantom
