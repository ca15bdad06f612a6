#include <doctest.h>

#include <cmath>

#include "phantom/config.hpp"
#include "phantom/errors.hpp"
#include "phantom/raster.hpp"
#include "phantom/render.hpp"
#include "phantom/synthetic.hpp"

using namespace phantom;

namespace {

bool is_color(const Image& img, int x, int y, Rgb c) {
  if (!img.contains(x, y)) return false;
  const auto* p = img.at(x, y);
  return p[0] == c.r && p[1] == c.g && p[2] == c.b;
}

bool color_near(const Image& img, double x, double y, Rgb c, int radius = 1) {
  const int cx = static_cast<int>(std::lround(x));
  const int cy = static_cast<int>(std::lround(y));
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      if (is_color(img, cx + dx, cy + dy, c)) return true;
    }
  }
  return false;
}

}  // namespace

TEST_CASE("convex hull drops interior and collinear points") {
  std::vector<Eigen::Vector2d> pts = {{0, 0}, {2, 0}, {1, 0}, {2, 2}, {0, 2}, {1, 1}, {0.5, 1.5}};
  const auto hull = convex_hull(pts);
  REQUIRE(hull.size() == 4);
  double area = 0;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const auto& a = hull[i];
    const auto& b = hull[(i + 1) % hull.size()];
    area += a.x() * b.y() - b.x() * a.y();
  }
  CHECK(area / 2 == doctest::Approx(4.0));
  CHECK(signed_distance_to_convex(hull, {1, 1}) == doctest::Approx(-1.0));
  CHECK(signed_distance_to_convex(hull, {3, 1}) == doctest::Approx(1.0));
}

TEST_CASE("draw_line hits both endpoints and survives far-off segments") {
  Image img(50, 40);
  const Rgb red{255, 0, 0};
  draw_line(img, {3, 4}, {40, 30}, red);
  CHECK(is_color(img, 3, 4, red));
  CHECK(is_color(img, 40, 30, red));
  Image blank(50, 40);
  Image off = blank;
  draw_line(off, {-1e7, -1e7}, {-1e6, 5e6}, red);
  CHECK(off == blank);
}

TEST_CASE("fill_convex covers the polygon area") {
  Image img(100, 100);
  fill_convex(img, {{10, 10}, {60, 10}, {60, 40}, {10, 40}}, {1, 2, 3});
  int count = 0;
  for (int y = 0; y < 100; ++y) {
    for (int x = 0; x < 100; ++x) count += is_color(img, x, y, {1, 2, 3});
  }
  CHECK(count == 50 * 30);
}

TEST_CASE("render style validation and config round-trip") {
  RenderStyle s;
  s.pixels_per_meter = 0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  RenderStyle def;
  KeyValueConfig cfg;
  def.to_config(cfg);
  const RenderStyle back = RenderStyle::from_config(KeyValueConfig::parse(cfg.to_text()));
  CHECK(back.phantom_color == def.phantom_color);
  CHECK(back.bev_size().width == def.bev_size().width);
  CHECK_THROWS_AS(RenderStyle::from_config(KeyValueConfig::parse("render.real_color = 1,2\n")), ConfigError);
}

TEST_CASE("render_bev: empty input gives a blank canvas") {
  RenderStyle style;
  style.background = {7, 8, 9};
  const Image img = render_bev(PointCloud{}, {}, reference_calibration(), style);
  CHECK(img.width == 500);
  CHECK(img.height == 600);
  for (int y = 0; y < img.height; y += 7) {
    for (int x = 0; x < img.width; x += 7) CHECK(is_color(img, x, y, style.background));
  }
}

TEST_CASE("render_bev: footprint corners land on the affine raster map") {
  const Calibration c = reference_calibration();
  RenderStyle style;
  style.draw_scores = false;
  Box3D b;
  b.center_bottom = lidar_to_rect({30.0, -4.0, -1.7}, c);
  b.dims = {1.5, 1.8, 4.2};
  b.rotation_y = rotation_y_from_yaw(0.4, c);
  const std::vector<StyledBox> boxes = {{b, BoxRole::kPhantom, std::nullopt}};
  const Image img = render_bev(PointCloud{}, boxes, c, style);
  const auto corners = box_corners(b);
  for (int k = 0; k < 4; ++k) {
    const Eigen::Vector3d l = rect_to_lidar(corners[k], c);
    // analytic: col = (lateral_max - y) * ppm, row = (forward_max - x) * ppm
    const double col = (style.lateral_max - l.y()) * style.pixels_per_meter;
    const double row = (style.forward_max - l.x()) * style.pixels_per_meter;
    CHECK(color_near(img, col, row, style.phantom_color));
  }
}

TEST_CASE("render_bev: points colored by height, deterministic, inputs untouched") {
  const Scene s = make_synthetic_scene("000001", 2);
  const PointCloud before = s.cloud;
  std::vector<StyledBox> boxes;
  for (const auto& l : s.labels) boxes.push_back({box_from_label(l), BoxRole::kReal, 0.8});
  const Image a = render_bev(s.cloud, boxes, s.calib);
  const Image b = render_bev(s.cloud, boxes, s.calib);
  CHECK(a == b);
  CHECK(s.cloud == before);
  RenderStyle style;
  PointCloud one;
  one.points.push_back({10.0F, 0.0F, 5.0F, 0.0F});
  const Image img = render_bev(one, {}, s.calib, style);
  const Eigen::Vector2d px = bev_pixel(10.0, 0.0, style);
  CHECK(is_color(img, static_cast<int>(px.x()), static_cast<int>(px.y()), style.ramp_high));
}

TEST_CASE("render_overlay identity and behind-camera cases") {
  const Scene s = make_synthetic_scene("000002", 4);
  CHECK(render_overlay(s.image, {}, s.calib) == s.image);
  Box3D behind;
  behind.center_bottom = {0, 1.6, -10};
  behind.dims = {1.5, 1.6, 4};
  const std::vector<StyledBox> boxes = {{behind, BoxRole::kPhantom, 0.9}};
  CHECK(render_overlay(s.image, boxes, s.calib) == s.image);
  // straddling the camera plane is also skipped
  behind.center_bottom.z() = 0.5;
  const std::vector<StyledBox> straddle = {{behind, BoxRole::kPhantom, 0.9}};
  CHECK(render_overlay(s.image, straddle, s.calib) == s.image);
}

TEST_CASE("render_overlay: an on-axis box draws a mirror-symmetric wireframe") {
  Calibration c = reference_calibration();
  c.p2.col(3).setZero();
  const double cx = c.p2(0, 2);
  Box3D b;
  b.center_bottom = {0.0, 1.6, 15.0};
  b.dims = {1.5, 1.7, 4.0};
  RenderStyle style;
  style.draw_scores = false;
  Image canvas(1242, 375);
  const std::vector<StyledBox> boxes = {{b, BoxRole::kPhantom, std::nullopt}};
  const Image img = render_overlay(canvas, boxes, c, style);
  int drawn = 0;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      if (!is_color(img, x, y, style.phantom_color)) continue;
      ++drawn;
      CHECK(color_near(img, 2 * cx - x, y, style.phantom_color));
    }
  }
  CHECK(drawn > 100);
}

TEST_CASE("draw_text renders digits") {
  Image img(60, 20);
  draw_text(img, 2, 2, "0.59", 14, {255, 255, 255});
  int lit = 0;
  for (auto v : img.data) lit += v == 255;
  CHECK(lit > 0);
}
