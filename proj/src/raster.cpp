#include "phantom/raster.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace phantom {

namespace {

double cross(const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

// Liang-Barsky clip of segment a-b to [lo, hi] box.
bool clip_segment(Eigen::Vector2d& a, Eigen::Vector2d& b, const Eigen::Vector2d& lo,
                  const Eigen::Vector2d& hi) {
  double t0 = 0.0;
  double t1 = 1.0;
  const Eigen::Vector2d d = b - a;
  const std::array<double, 4> p = {-d.x(), d.x(), -d.y(), d.y()};
  const std::array<double, 4> q = {a.x() - lo.x(), hi.x() - a.x(), a.y() - lo.y(), hi.y() - a.y()};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return false;
      continue;
    }
    const double r = q[i] / p[i];
    if (p[i] < 0.0) {
      if (r > t1) return false;
      t0 = std::max(t0, r);
    } else {
      if (r < t0) return false;
      t1 = std::min(t1, r);
    }
  }
  const Eigen::Vector2d start = a + t0 * d;
  const Eigen::Vector2d end = a + t1 * d;
  a = start;
  b = end;
  return true;
}

// Rows top to bottom, 5 bits each (MSB = leftmost column).
struct Glyph {
  char c;
  std::array<std::uint8_t, 7> rows;
};

constexpr std::array<Glyph, 17> kGlyphs = {{
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
    {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
    {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
    {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
    {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
    {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
    {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
    {':', {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}},
    {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
    {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
    {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
    {'?', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x00, 0x04}},
}};

const Glyph* find_glyph(char c) {
  for (const auto& g : kGlyphs) {
    if (g.c == c) return &g;
  }
  return nullptr;
}

}  // namespace

PixelRect pixel_rect(const ImageBBox& bb, ImageSize size) {
  PixelRect r;
  r.x0 = std::clamp(static_cast<int>(std::lround(bb.left)), 0, size.width);
  r.x1 = std::clamp(static_cast<int>(std::lround(bb.right)), 0, size.width);
  r.y0 = std::clamp(static_cast<int>(std::lround(bb.top)), 0, size.height);
  r.y1 = std::clamp(static_cast<int>(std::lround(bb.bottom)), 0, size.height);
  return r;
}

std::vector<Eigen::Vector2d> convex_hull(std::vector<Eigen::Vector2d> points) {
  std::sort(points.begin(), points.end(), [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  points.erase(std::unique(points.begin(), points.end()), points.end());
  if (points.size() < 3) return points;
  std::vector<Eigen::Vector2d> hull(2 * points.size());
  std::size_t k = 0;
  for (const auto& p : points) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = points.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], points[i]) <= 0.0) --k;
    hull[k++] = points[i];
  }
  hull.resize(k - 1);
  return hull;
}

double signed_distance_to_convex(const std::vector<Eigen::Vector2d>& hull,
                                 const Eigen::Vector2d& p) {
  if (hull.empty()) return std::numeric_limits<double>::infinity();
  if (hull.size() == 1) return (p - hull[0]).norm();
  bool inside = hull.size() >= 3;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const auto& a = hull[i];
    const auto& b = hull[(i + 1) % hull.size()];
    if (cross(a, b, p) < 0.0) inside = false;
    const Eigen::Vector2d ab = b - a;
    const double len2 = ab.squaredNorm();
    const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    best = std::min(best, (a + t * ab - p).norm());
  }
  return inside ? -best : best;
}

void set_pixel(Image& image, int x, int y, Rgb color) {
  if (!image.contains(x, y)) return;
  std::uint8_t* px = image.at(x, y);
  if (image.channels >= 3) {
    px[0] = color.r;
    px[1] = color.g;
    px[2] = color.b;
  } else {
    px[0] = color.r;
  }
}

void draw_line(Image& image, const Eigen::Vector2d& a_in, const Eigen::Vector2d& b_in, Rgb color) {
  Eigen::Vector2d a = a_in;
  Eigen::Vector2d b = b_in;
  if (!std::isfinite(a.x()) || !std::isfinite(a.y()) || !std::isfinite(b.x()) ||
      !std::isfinite(b.y())) {
    return;
  }
  if (!clip_segment(a, b, {0.0, 0.0},
                    {static_cast<double>(image.width - 1), static_cast<double>(image.height - 1)})) {
    return;
  }
  int x0 = static_cast<int>(std::lround(a.x()));
  int y0 = static_cast<int>(std::lround(a.y()));
  const int x1 = static_cast<int>(std::lround(b.x()));
  const int y1 = static_cast<int>(std::lround(b.y()));
  const int dx = std::abs(x1 - x0);
  const int dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1;
  const int sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    set_pixel(image, x0, y0, color);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

void fill_convex(Image& image, const std::vector<Eigen::Vector2d>& hull, Rgb color) {
  if (hull.size() < 3) return;
  double min_x = hull[0].x(), max_x = min_x, min_y = hull[0].y(), max_y = min_y;
  for (const auto& p : hull) {
    min_x = std::min(min_x, p.x());
    max_x = std::max(max_x, p.x());
    min_y = std::min(min_y, p.y());
    max_y = std::max(max_y, p.y());
  }
  const int x0 = std::max(0, static_cast<int>(std::floor(min_x)));
  const int x1 = std::min(image.width - 1, static_cast<int>(std::ceil(max_x)));
  const int y0 = std::max(0, static_cast<int>(std::floor(min_y)));
  const int y1 = std::min(image.height - 1, static_cast<int>(std::ceil(max_y)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      if (signed_distance_to_convex(hull, {x + 0.5, y + 0.5}) <= 0.0) set_pixel(image, x, y, color);
    }
  }
}

void draw_text(Image& image, int x, int y, std::string_view text, int pixel_height, Rgb color) {
  const int scale = std::max(1, pixel_height / 7);
  int cursor = x;
  for (char c : text) {
    if (const Glyph* g = find_glyph(c)) {
      for (int row = 0; row < 7; ++row) {
        for (int col = 0; col < 5; ++col) {
          if ((g->rows[row] >> (4 - col)) & 1U) {
            for (int dy = 0; dy < scale; ++dy) {
              for (int dx = 0; dx < scale; ++dx) {
                set_pixel(image, cursor + col * scale + dx, y + row * scale + dy, color);
              }
            }
          }
        }
      }
    }
    cursor += 6 * scale;
  }
}

}  // namespace phantom
