#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "phantom/geometry.hpp"
#include "phantom/kitti_io.hpp"
#include "phantom/random.hpp"

namespace phantom {

// Procedural KITTI-layout scenes: flat ground, optional roadside walls and
// box-shaped Car / Pedestrian objects whose point count falls off as
// 1/range^2, plus a camera image with the objects painted in.

struct SyntheticObject {
  std::string class_name;
  Eigen::Vector3d bottom_center = Eigen::Vector3d::Zero();  // LiDAR frame
  double yaw = 0.0;                                         // LiDAR frame
  Dims dims;
};

struct SyntheticConfig {
  int image_width = 1242;
  int image_height = 375;
  double ground_z = -1.73;
  double ground_noise = 0.02;
  std::size_t ground_points = 20000;
  double ground_min_range = 3.0;
  double ground_max_range = 80.0;
  bool walls = true;
  // Points on an object at 10 m; scaled by (10 / range)^2.
  double car_points_at_10m = 5000.0;
  double pedestrian_points_at_10m = 1500.0;
  std::size_t max_object_points = 8000;
  int min_cars = 1;
  int max_cars = 3;
  int min_pedestrians = 0;
  int max_pedestrians = 2;
  double object_forward_min = 5.0;
  double object_forward_max = 35.0;
};

// KITTI training frame 000000's calibration values.
std::string reference_calibration_text();
Calibration reference_calibration();

Dims sample_dims(const std::string& class_name, Rng& rng);

// Surface samples of the object's box (four sides and roof), already in the
// LiDAR frame.
std::vector<Point> sample_object_points(const SyntheticObject& object, const Calibration& calib,
                                        std::size_t count, Rng& rng);

std::size_t object_point_budget(const SyntheticObject& object, const SyntheticConfig& cfg);

Box3D object_box(const SyntheticObject& object, const Calibration& calib);

// Scene with exactly the given objects.
Scene make_scene(const std::string& scene_id, std::uint64_t seed,
                 const std::vector<SyntheticObject>& objects,
                 const SyntheticConfig& cfg = {});

// Scene with randomly drawn objects per cfg.
Scene make_synthetic_scene(const std::string& scene_id, std::uint64_t seed,
                           const SyntheticConfig& cfg = {});

// Writes `count` scenes (ids 000000, 000001, ...) under root in KITTI
// layout and returns their ids.
std::vector<std::string> write_synthetic_dataset(const std::filesystem::path& root,
                                                 std::size_t count, std::uint64_t seed,
                                                 const SyntheticConfig& cfg = {});

std::string format_scene_id(std::size_t index);

}  // namespace phantom
