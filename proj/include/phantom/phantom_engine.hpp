#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "phantom/geometry.hpp"
#include "phantom/image.hpp"
#include "phantom/kitti_io.hpp"

namespace phantom {

class KeyValueConfig;

// A template point in the canonical object frame: the source box's
// rectified-camera axes with the footprint center at the origin and yaw
// removed (x along length, y down, z along width).
struct TemplatePoint {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  float intensity = 0.0F;
};

struct ObjectTemplate {
  std::string template_id;
  std::string class_name;
  std::vector<TemplatePoint> points;
  Image patch;  // RGB crop of the source bbox
  Image mask;   // single-channel opacity, same size as patch
  double source_depth = 0.0;
  Dims source_dims;
  ImageBBox source_bbox;
};

class TemplateLibrary {
 public:
  void add(ObjectTemplate tpl);

  const std::vector<ObjectTemplate>& templates() const { return templates_; }
  bool empty() const { return templates_.empty(); }
  std::size_t size() const { return templates_.size(); }

  const ObjectTemplate* find(std::string_view id) const;
  // Throws MissingTemplate.
  const ObjectTemplate& at(std::string_view id) const;
  std::vector<const ObjectTemplate*> of_class(std::string_view class_name) const;
  // Per-dimension median over the class; throws EmptyLibrary.
  Dims median_dims(std::string_view class_name) const;

  // Directory layout: library.json index, <id>.points (little-endian
  // float64 x y z + float32 intensity), <id>.patch.png, <id>.mask.png.
  void save(const std::filesystem::path& dir) const;
  static TemplateLibrary load(const std::filesystem::path& dir);

 private:
  std::vector<ObjectTemplate> templates_;
};

TemplateLibrary extract_templates(std::span<const Scene> scenes,
                                  const std::set<std::string>& classes,
                                  std::size_t min_points);

struct PhantomSpec {
  std::string class_name;
  Eigen::Vector3d target_location = Eigen::Vector3d::Zero();  // LiDAR frame
  double yaw = 0.0;                                            // LiDAR frame
  std::string template_id;
  std::uint64_t seed = 0;
};

struct PlacementConfig {
  double forward_min = 20.0;
  double forward_max = 40.0;
  double lateral_half_width = 6.0;
  int max_attempts = 100;
  double min_bbox_area = 400.0;
  double ground_radius = 5.0;
  double ground_percentile = 0.05;
  std::size_t ground_min_points = 20;
  double fallback_ground_z = -1.73;
  // Free margin around the candidate footprint that no real box may enter.
  double clearance = 1.0;

  static PlacementConfig from_config(const KeyValueConfig& cfg);
  void to_config(KeyValueConfig& cfg) const;
};

struct Placement {
  Eigen::Vector3d target_location = Eigen::Vector3d::Zero();
  double yaw = 0.0;
  int attempts = 0;
};

// Ground height under (x, y): low percentile of nearby LiDAR z, or the
// configured fallback when too few points are nearby.
double estimate_ground_height(const PointCloud& pc, double x, double y,
                              const PlacementConfig& cfg = {});

// The forward distance is drawn once per call; lateral offset and yaw are
// redrawn up to cfg.max_attempts times. nullopt means no valid placement.
std::optional<Placement> sample_placement(const Scene& scene, const Dims& candidate_dims,
                                          std::uint64_t seed,
                                          const PlacementConfig& cfg = {});
std::optional<Placement> sample_placement(const Scene& scene, const TemplateLibrary& library,
                                          std::string_view class_name, std::uint64_t seed,
                                          const PlacementConfig& cfg = {});

struct InjectionConfig {
  std::size_t min_injected_points = 20;
};

// The template's source box re-posed at spec's target, rectified frame.
Box3D phantom_box_for(const PhantomSpec& spec, const ObjectTemplate& tpl,
                      const Calibration& calib);

struct LidarInjection {
  PointCloud cloud;  // PC_real followed by the spoofed points
  Box3D phantom_box;
  std::vector<std::size_t> injected_indices;
};

// Keep probability per template point is min(1, (source_depth/target_depth)^2).
LidarInjection inject_lidar(const Scene& scene, const PhantomSpec& spec,
                            const ObjectTemplate& tpl, const InjectionConfig& cfg = {});

struct ImageInjection {
  Image image;
  ImageBBox patch_bbox;
};

ImageInjection inject_image(const Scene& scene, const PhantomSpec& spec,
                            const ObjectTemplate& tpl, const Box3D& phantom_box);

// Point-wise fusion association: each point is projected and, when it lands
// in the image, takes the RGB value of the pixel it hits.
struct PaintedPoint {
  std::size_t index = 0;
  double u = 0.0;
  double v = 0.0;
  bool painted = false;
  std::array<std::uint8_t, 3> rgb{};
};

std::vector<PaintedPoint> paint_points(const Image& image, const PointCloud& pc,
                                       std::span<const std::size_t> indices,
                                       const Calibration& calib);

inline constexpr double kConsistencyDilationPx = 2.0;

// Fraction of injected points that are painted from inside patch_bbox
// dilated by 2 px. Throws UndefinedConsistency for an empty index set.
double verify_consistency(const Image& adv_image, const PointCloud& adv_cloud,
                          std::span<const std::size_t> injected,
                          const ImageBBox& patch_bbox, const Calibration& calib,
                          ImageSize image_size);

struct AttackManifest {
  std::string scene_id;         // id of the augmented scene in the output tree
  std::string source_scene_id;  // id of the clean scene it was built from
  PhantomSpec spec;
  Box3D phantom_box;
  std::size_t original_point_count = 0;
  std::size_t injected_point_count = 0;
  ImageBBox patch_bbox;
  double consistency_fraction = 0.0;
  std::string created_at;

  std::vector<std::size_t> injected_indices() const;
};

void to_json(nlohmann::json& j, const AttackManifest& m);
void from_json(const nlohmann::json& j, AttackManifest& m);
void to_json(nlohmann::json& j, const Box3D& b);
void from_json(const nlohmann::json& j, Box3D& b);

AttackManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const AttackManifest& m);

struct AugmentOptions {
  std::optional<std::string> output_scene_id;
  // Recorded verbatim. Kept caller-supplied so output trees are reproducible.
  std::string created_at = "1970-01-01T00:00:00Z";
  InjectionConfig injection;
  bool write_outputs = true;
};

struct AugmentedScene {
  AttackManifest manifest;
  PointCloud cloud;  // PC_adv
  Image image;       // I_adv
};

// inject_lidar, inject_image and verify_consistency in one step; writes
// <out>/{image_2,velodyne,calib}/<id> and <out>/manifests/<id>.json.
AugmentedScene augment_scene(const Scene& scene, const PhantomSpec& spec,
                             const TemplateLibrary& library,
                             const std::filesystem::path& output_root,
                             const AugmentOptions& options = {});

// Reloads an augmented scene and recomputes its consistency fraction.
double reverify_manifest(const std::filesystem::path& output_root, const AttackManifest& m);

// Timestamp string for manifests: SOURCE_DATE_EPOCH when set, else the epoch.
std::string reproducible_timestamp();

}  // namespace phantom
