#include "phantom/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "phantom/config.hpp"
#include "phantom/errors.hpp"

namespace phantom {

namespace {

std::string score_text(double score) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.2f", score);
  return buf;
}

Rgb lerp(Rgb a, Rgb b, double t) {
  auto mix = [t](std::uint8_t x, std::uint8_t y) {
    return static_cast<std::uint8_t>(std::lround(x + (y - x) * t));
  };
  return {mix(a.r, b.r), mix(a.g, b.g), mix(a.b, b.b)};
}

Rgb parse_rgb(const std::string& text, const std::string& key) {
  unsigned r = 0;
  unsigned g = 0;
  unsigned b = 0;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%u,%u,%u%c", &r, &g, &b, &tail) != 3 || r > 255 || g > 255 ||
      b > 255) {
    throw ConfigError("'" + key + "' must be r,g,b with components in 0..255");
  }
  return {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)};
}

std::string rgb_text(Rgb c) {
  return std::to_string(c.r) + "," + std::to_string(c.g) + "," + std::to_string(c.b);
}

}  // namespace

void RenderStyle::validate() const {
  if (!(pixels_per_meter > 0.0)) throw ConfigError("render.pixels_per_meter must be positive");
  if (!(forward_max > forward_min) || !(lateral_max > lateral_min)) {
    throw ConfigError("render extents must be positive");
  }
  if (!(height_high > height_low)) throw ConfigError("render.height_high must exceed height_low");
  if (font_px <= 0) throw ConfigError("render.font_px must be positive");
  const ImageSize s = bev_size();
  if (s.width > 20000 || s.height > 20000) throw ConfigError("render canvas too large");
}

ImageSize RenderStyle::bev_size() const {
  return {static_cast<int>(std::lround((lateral_max - lateral_min) * pixels_per_meter)),
          static_cast<int>(std::lround((forward_max - forward_min) * pixels_per_meter))};
}

Rgb RenderStyle::color_for(BoxRole role) const {
  switch (role) {
    case BoxRole::kPhantom: return phantom_color;
    case BoxRole::kDetection: return detection_color;
    case BoxRole::kReal: break;
  }
  return real_color;
}

RenderStyle RenderStyle::from_config(const KeyValueConfig& cfg) {
  RenderStyle s;
  s.forward_min = cfg.get_double("render.forward_min", s.forward_min);
  s.forward_max = cfg.get_double("render.forward_max", s.forward_max);
  s.lateral_min = cfg.get_double("render.lateral_min", s.lateral_min);
  s.lateral_max = cfg.get_double("render.lateral_max", s.lateral_max);
  s.pixels_per_meter = cfg.get_double("render.pixels_per_meter", s.pixels_per_meter);
  s.height_low = cfg.get_double("render.height_low", s.height_low);
  s.height_high = cfg.get_double("render.height_high", s.height_high);
  s.font_px = static_cast<int>(cfg.get_int("render.font_px", s.font_px));
  s.draw_scores = cfg.get_int("render.draw_scores", s.draw_scores ? 1 : 0) != 0;
  auto color = [&](const char* key, Rgb fallback) {
    return cfg.contains(key) ? parse_rgb(cfg.get_string(key, ""), key) : fallback;
  };
  s.ramp_low = color("render.ramp_low", s.ramp_low);
  s.ramp_high = color("render.ramp_high", s.ramp_high);
  s.background = color("render.background", s.background);
  s.real_color = color("render.real_color", s.real_color);
  s.phantom_color = color("render.phantom_color", s.phantom_color);
  s.detection_color = color("render.detection_color", s.detection_color);
  s.validate();
  return s;
}

void RenderStyle::to_config(KeyValueConfig& cfg) const {
  cfg.set("render.forward_min", forward_min);
  cfg.set("render.forward_max", forward_max);
  cfg.set("render.lateral_min", lateral_min);
  cfg.set("render.lateral_max", lateral_max);
  cfg.set("render.pixels_per_meter", pixels_per_meter);
  cfg.set("render.height_low", height_low);
  cfg.set("render.height_high", height_high);
  cfg.set("render.font_px", static_cast<double>(font_px));
  cfg.set("render.draw_scores", draw_scores ? 1.0 : 0.0);
  cfg.set("render.ramp_low", rgb_text(ramp_low));
  cfg.set("render.ramp_high", rgb_text(ramp_high));
  cfg.set("render.background", rgb_text(background));
  cfg.set("render.real_color", rgb_text(real_color));
  cfg.set("render.phantom_color", rgb_text(phantom_color));
  cfg.set("render.detection_color", rgb_text(detection_color));
}

Eigen::Vector2d bev_pixel(double x, double y, const RenderStyle& style) {
  return {(style.lateral_max - y) * style.pixels_per_meter,
          (style.forward_max - x) * style.pixels_per_meter};
}

Image render_bev(const PointCloud& pc, std::span<const StyledBox> boxes, const Calibration& calib,
                 const RenderStyle& style) {
  style.validate();
  const ImageSize size = style.bev_size();
  Image img;
  img.width = size.width;
  img.height = size.height;
  img.channels = 3;
  img.data.resize(static_cast<std::size_t>(size.width) * size.height * 3);
  for (std::size_t i = 0; i < img.data.size(); i += 3) {
    img.data[i] = style.background.r;
    img.data[i + 1] = style.background.g;
    img.data[i + 2] = style.background.b;
  }

  for (const Point& p : pc.points) {
    const Eigen::Vector2d px = bev_pixel(p.x, p.y, style);
    const int col = static_cast<int>(std::floor(px.x()));
    const int row = static_cast<int>(std::floor(px.y()));
    if (col < 0 || row < 0 || col >= size.width || row >= size.height) continue;
    const double t = std::clamp((p.z - style.height_low) / (style.height_high - style.height_low),
                                0.0, 1.0);
    set_pixel(img, col, row, lerp(style.ramp_low, style.ramp_high, t));
  }

  for (const StyledBox& sb : boxes) {
    const Rgb color = style.color_for(sb.role);
    const auto corners = box_corners(sb.box);
    std::array<Eigen::Vector2d, 4> fp;
    for (int k = 0; k < 4; ++k) {
      const Eigen::Vector3d l = rect_to_lidar(corners[k], calib);
      fp[k] = bev_pixel(l.x(), l.y(), style);
    }
    for (int k = 0; k < 4; ++k) draw_line(img, fp[k], fp[(k + 1) % 4], color);
    // heading tick from the center to the front edge midpoint
    const Eigen::Vector2d center = 0.25 * (fp[0] + fp[1] + fp[2] + fp[3]);
    draw_line(img, center, 0.5 * (fp[0] + fp[1]), color);
    if (sb.score && style.draw_scores) {
      double min_x = fp[0].x();
      double min_y = fp[0].y();
      for (const auto& q : fp) {
        min_x = std::min(min_x, q.x());
        min_y = std::min(min_y, q.y());
      }
      draw_text(img, static_cast<int>(std::lround(min_x)),
                static_cast<int>(std::lround(min_y)) - style.font_px - 2, score_text(*sb.score),
                style.font_px, color);
    }
  }
  return img;
}

Image render_overlay(const Image& image, std::span<const StyledBox> boxes, const Calibration& calib,
                     const RenderStyle& style) {
  Image out = image;
  if (out.channels != 3) throw ImageError("overlay needs an RGB image");
  static constexpr int kEdges[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                                        {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};
  for (const StyledBox& sb : boxes) {
    const auto corners = box_corners(sb.box);
    std::array<Eigen::Vector2d, 8> uv;
    bool visible = true;
    for (int k = 0; k < 8; ++k) {
      const ImageProjection p = rect_to_image(corners[k], calib);
      if (p.behind_camera) {
        visible = false;
        break;
      }
      uv[k] = {p.u, p.v};
    }
    if (!visible) continue;
    const Rgb color = style.color_for(sb.role);
    for (const auto& e : kEdges) draw_line(out, uv[e[0]], uv[e[1]], color);
    if (sb.score && style.draw_scores) {
      double min_x = uv[0].x();
      double min_y = uv[0].y();
      for (const auto& q : uv) {
        min_x = std::min(min_x, q.x());
        min_y = std::min(min_y, q.y());
      }
      draw_text(out, static_cast<int>(std::lround(min_x)),
                static_cast<int>(std::lround(min_y)) - style.font_px - 2, score_text(*sb.score),
                style.font_px, color);
    }
  }
  return out;
}

}  // namespace phantom
