#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "phantom/geometry.hpp"
#include "phantom/image.hpp"
#include "phantom/kitti_io.hpp"
#include "phantom/raster.hpp"

namespace phantom {

class KeyValueConfig;

enum class BoxRole { kReal, kPhantom, kDetection };

struct StyledBox {
  Box3D box;
  BoxRole role = BoxRole::kReal;
  std::optional<double> score;
};

struct RenderStyle {
  double forward_min = 0.0;
  double forward_max = 60.0;
  double lateral_min = -25.0;
  double lateral_max = 25.0;
  double pixels_per_meter = 10.0;
  double height_low = -2.0;  // LiDAR z mapped to the start of the ramp
  double height_high = 1.0;
  Rgb ramp_low{40, 80, 200};
  Rgb ramp_high{250, 230, 60};
  Rgb background{0, 0, 0};
  Rgb real_color{0, 220, 0};
  Rgb phantom_color{200, 60, 230};
  Rgb detection_color{255, 140, 0};
  int font_px = 14;
  bool draw_scores = true;

  // Throws ConfigError.
  void validate() const;
  ImageSize bev_size() const;
  Rgb color_for(BoxRole role) const;

  static RenderStyle from_config(const KeyValueConfig& cfg);
  void to_config(KeyValueConfig& cfg) const;
};

// Continuous BEV raster coordinate of a LiDAR-frame (x, y): column grows with
// -y, row grows with -x, so forward is up and left is left.
Eigen::Vector2d bev_pixel(double x, double y, const RenderStyle& style);

Image render_bev(const PointCloud& pc, std::span<const StyledBox> boxes, const Calibration& calib,
                 const RenderStyle& style = {});

// 8-corner wireframes over a copy of `image`. Boxes with any corner behind
// the camera are skipped.
Image render_overlay(const Image& image, std::span<const StyledBox> boxes, const Calibration& calib,
                     const RenderStyle& style = {});

}  // namespace phantom
