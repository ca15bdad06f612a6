#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "phantom/kitti_io.hpp"

namespace phantom {

inline constexpr double kPi = 3.14159265358979323846;

struct Dims {
  double h = 0.0;
  double w = 0.0;
  double l = 0.0;

  friend bool operator==(const Dims&, const Dims&) = default;
};

// Cuboid in the rectified camera frame (x right, y down, z forward).
// center_bottom is the center of the bottom face; the box extends to
// y - h. rotation_y turns the length axis about camera y.
struct Box3D {
  Eigen::Vector3d center_bottom = Eigen::Vector3d::Zero();
  Dims dims;
  double rotation_y = 0.0;
  std::string class_name;
};

struct ImageBBox {
  double left = 0.0;
  double top = 0.0;
  double right = 0.0;
  double bottom = 0.0;

  double width() const { return right - left; }
  double height() const { return bottom - top; }
  double area() const { return width() * height(); }
  ImageBBox dilated(double px) const {
    return {left - px, top - px, right + px, bottom + px};
  }
  bool contains(double u, double v) const {
    return u >= left && u <= right && v >= top && v <= bottom;
  }
};

struct ImageSize {
  int width = 0;
  int height = 0;
};

struct ImageProjection {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
  // Set when depth < 1e-9. u and v are still reported for negative depth and
  // are NaN when the depth is within 1e-9 of zero.
  bool behind_camera = false;
};

struct ProjectedPoint {
  std::size_t index = 0;
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
  bool in_frustum = false;
};

// Maps angles into (-pi, pi].
double normalize_angle(double a);

Eigen::Vector3d lidar_to_rect(const Eigen::Vector3d& p, const Calibration& calib);
Eigen::Vector3d rect_to_lidar(const Eigen::Vector3d& p, const Calibration& calib);
ImageProjection rect_to_image(const Eigen::Vector3d& p, const Calibration& calib);

std::vector<ProjectedPoint> project_cloud(const PointCloud& pc,
                                          const Calibration& calib,
                                          ImageSize size);

// Heading conversions between a LiDAR-frame yaw (about z, from x toward y)
// and KITTI rotation_y. They are exact inverses of each other for any
// calibration whose ground plane is not perpendicular to the image plane.
double rotation_y_from_yaw(double yaw, const Calibration& calib);
double yaw_from_rotation_y(double rotation_y, const Calibration& calib);

// Corner order: bottom face 0..3, then top face 4..7 directly above.
std::array<Eigen::Vector3d, 8> box_corners(const Box3D& box);

// Footprint corners in the x-z plane, counter-clockwise when viewed with x
// right and z up.
std::array<Eigen::Vector2d, 4> bev_footprint(const Box3D& box);

// Hull of the projected corners that lie in front of the camera, clipped to
// the image. nullopt when nothing is in view.
std::optional<ImageBBox> box_to_image_bbox(const Box3D& box, const Calibration& calib,
                                           ImageSize size);

// Unclipped hull; nullopt unless all eight corners are in front of the camera.
std::optional<ImageBBox> box_image_hull(const Box3D& box, const Calibration& calib);

double bev_iou(const Box3D& a, const Box3D& b);

// Indices of points inside the cuboid, boundary inclusive.
std::vector<std::size_t> points_in_box(const PointCloud& pc, const Box3D& box,
                                       const Calibration& calib);

// Scales all dimensions by `factor` about the volumetric center.
Box3D inflated(const Box3D& box, double factor);

Box3D box_from_label(const ObjectLabel& label);

// Builds a KITTI label for a box. nullopt when the box is out of view.
std::optional<ObjectLabel> label_from_box(const Box3D& box, const Calibration& calib,
                                          ImageSize size,
                                          std::optional<double> score = std::nullopt);

}  // namespace phantom
