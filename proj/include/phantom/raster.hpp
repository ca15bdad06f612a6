#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "phantom/geometry.hpp"
#include "phantom/image.hpp"

namespace phantom {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

// Integer pixel rectangle [x0, x1) x [y0, y1).
struct PixelRect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  bool empty() const { return x1 <= x0 || y1 <= y0; }
};

// Rounds each edge to the nearest pixel boundary and clips to the image.
PixelRect pixel_rect(const ImageBBox& bb, ImageSize size);

// Counter-clockwise hull (Andrew's monotone chain); collinear points dropped.
std::vector<Eigen::Vector2d> convex_hull(std::vector<Eigen::Vector2d> points);

// Distance to a CCW convex polygon; negative inside.
double signed_distance_to_convex(const std::vector<Eigen::Vector2d>& hull,
                                 const Eigen::Vector2d& p);

void set_pixel(Image& image, int x, int y, Rgb color);

// Integer Bresenham line. Endpoints are clipped to the image first so far
// off-screen segments cost nothing.
void draw_line(Image& image, const Eigen::Vector2d& a, const Eigen::Vector2d& b, Rgb color);

void fill_convex(Image& image, const std::vector<Eigen::Vector2d>& hull, Rgb color);

// 5x7 bitmap glyphs scaled to `pixel_height`; characters without a glyph
// advance the cursor only.
void draw_text(Image& image, int x, int y, std::string_view text, int pixel_height, Rgb color);

}  // namespace phantom
