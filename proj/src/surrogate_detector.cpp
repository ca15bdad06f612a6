#include "phantom/surrogate_detector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <unordered_map>

#include "phantom/config.hpp"
#include "phantom/errors.hpp"

namespace phantom {

namespace {

constexpr double kMinExtent = 0.05;

std::int64_t cell_key(double x, double y, double size) {
  const auto cx = static_cast<std::int64_t>(std::floor(x / size));
  const auto cy = static_cast<std::int64_t>(std::floor(y / size));
  return (cx << 32) ^ (cy & 0xFFFFFFFFLL);
}

std::int64_t pack(std::int64_t cx, std::int64_t cy) { return (cx << 32) ^ (cy & 0xFFFFFFFFLL); }

}  // namespace

void DetectorConfig::validate() const {
  if (!(cell_size > 0.0)) throw ConfigError("detector cell_size must be positive");
  if (!(ground_tile_size > 0.0)) throw ConfigError("detector ground_tile_size must be positive");
  if (min_cluster_points < 1) throw ConfigError("detector min_cluster_points must be >= 1");
  for (const auto& g : gates) {
    if (!(g.min.h < g.max.h && g.min.w < g.max.w && g.min.l < g.max.l)) {
      throw ConfigError("degenerate size gate for " + g.class_name);
    }
    if (!(g.saturation_count > 0.0)) {
      throw ConfigError("saturation count must be positive for " + g.class_name);
    }
  }
}

DetectorConfig DetectorConfig::from_config(const KeyValueConfig& cfg) {
  DetectorConfig out;
  out.ground_height_offset = cfg.get_double("detector.ground_height_offset", out.ground_height_offset);
  out.ground_tile_size = cfg.get_double("detector.ground_tile_size", out.ground_tile_size);
  out.cell_size = cfg.get_double("detector.cell_size", out.cell_size);
  out.min_cluster_points = static_cast<std::size_t>(
      cfg.get_int("detector.min_cluster_points", static_cast<long long>(out.min_cluster_points)));
  for (auto& g : out.gates) {
    const std::string p = "detector.gate." + g.class_name + ".";
    g.min.h = cfg.get_double(p + "h_min", g.min.h);
    g.max.h = cfg.get_double(p + "h_max", g.max.h);
    g.min.w = cfg.get_double(p + "w_min", g.min.w);
    g.max.w = cfg.get_double(p + "w_max", g.max.w);
    g.min.l = cfg.get_double(p + "l_min", g.min.l);
    g.max.l = cfg.get_double(p + "l_max", g.max.l);
    g.saturation_count = cfg.get_double(p + "saturation", g.saturation_count);
  }
  out.validate();
  return out;
}

void DetectorConfig::to_config(KeyValueConfig& cfg) const {
  cfg.set("detector.ground_height_offset", ground_height_offset);
  cfg.set("detector.ground_tile_size", ground_tile_size);
  cfg.set("detector.cell_size", cell_size);
  cfg.set("detector.min_cluster_points", static_cast<double>(min_cluster_points));
  for (const auto& g : gates) {
    const std::string p = "detector.gate." + g.class_name + ".";
    cfg.set(p + "h_min", g.min.h);
    cfg.set(p + "h_max", g.max.h);
    cfg.set(p + "w_min", g.min.w);
    cfg.set(p + "w_max", g.max.w);
    cfg.set(p + "l_min", g.min.l);
    cfg.set(p + "l_max", g.max.l);
    cfg.set(p + "saturation", g.saturation_count);
  }
}

std::vector<std::size_t> remove_ground(const PointCloud& pc, const DetectorConfig& cfg) {
  std::unordered_map<std::int64_t, float> tile_min;
  tile_min.reserve(pc.size() / 8 + 1);
  for (const Point& p : pc.points) {
    const auto key = cell_key(p.x, p.y, cfg.ground_tile_size);
    auto [it, inserted] = tile_min.try_emplace(key, p.z);
    if (!inserted) it->second = std::min(it->second, p.z);
  }
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < pc.size(); ++i) {
    const Point& p = pc.points[i];
    const float floor_z = tile_min.at(cell_key(p.x, p.y, cfg.ground_tile_size));
    if (static_cast<double>(p.z) - floor_z > cfg.ground_height_offset) kept.push_back(i);
  }
  return kept;
}

std::vector<Cluster> cluster_points(const PointCloud& pc, const std::vector<std::size_t>& indices,
                                    const DetectorConfig& cfg) {
  struct Cell {
    std::int64_t cx;
    std::int64_t cy;
    std::vector<std::size_t> members;
    int component = -1;
  };
  std::unordered_map<std::int64_t, std::size_t> lookup;
  std::vector<Cell> cells;
  for (std::size_t i : indices) {
    const Point& p = pc.points[i];
    const auto cx = static_cast<std::int64_t>(std::floor(p.x / cfg.cell_size));
    const auto cy = static_cast<std::int64_t>(std::floor(p.y / cfg.cell_size));
    auto [it, inserted] = lookup.try_emplace(pack(cx, cy), cells.size());
    if (inserted) cells.push_back({cx, cy, {}, -1});
    cells[it->second].members.push_back(i);
  }

  std::vector<Cluster> clusters;
  std::deque<std::size_t> frontier;
  for (std::size_t seed = 0; seed < cells.size(); ++seed) {
    if (cells[seed].component >= 0) continue;
    const int id = static_cast<int>(clusters.size());
    clusters.emplace_back();
    cells[seed].component = id;
    frontier.push_back(seed);
    while (!frontier.empty()) {
      const std::size_t c = frontier.front();
      frontier.pop_front();
      clusters.back().insert(clusters.back().end(), cells[c].members.begin(), cells[c].members.end());
      for (std::int64_t dx = -1; dx <= 1; ++dx) {
        for (std::int64_t dy = -1; dy <= 1; ++dy) {
          if (dx == 0 && dy == 0) continue;
          auto it = lookup.find(pack(cells[c].cx + dx, cells[c].cy + dy));
          if (it == lookup.end() || cells[it->second].component >= 0) continue;
          cells[it->second].component = id;
          frontier.push_back(it->second);
        }
      }
    }
  }

  std::vector<Cluster> kept;
  for (auto& c : clusters) {
    if (c.size() < cfg.min_cluster_points) continue;
    std::sort(c.begin(), c.end());
    kept.push_back(std::move(c));
  }
  std::sort(kept.begin(), kept.end(),
            [](const Cluster& a, const Cluster& b) { return a.front() < b.front(); });
  return kept;
}

Box3D fit_box(const PointCloud& pc, const Cluster& cluster, const Calibration& calib) {
  if (cluster.empty()) throw Error("fit_box needs a nonempty cluster");
  double mx = 0.0, my = 0.0;
  for (std::size_t i : cluster) {
    mx += pc.points[i].x;
    my += pc.points[i].y;
  }
  const double n = static_cast<double>(cluster.size());
  mx /= n;
  my /= n;
  double cxx = 0.0, cyy = 0.0, cxy = 0.0;
  for (std::size_t i : cluster) {
    const double dx = pc.points[i].x - mx;
    const double dy = pc.points[i].y - my;
    cxx += dx * dx;
    cyy += dy * dy;
    cxy += dx * dy;
  }
  cxx /= n;
  cyy /= n;
  cxy /= n;
  const double trace = cxx + cyy;
  const double det = cxx * cyy - cxy * cxy;
  double yaw = 0.0;
  if (trace > 1e-12 && det > 1e-9 * trace * trace) {
    yaw = 0.5 * std::atan2(2.0 * cxy, cxx - cyy);
  }

  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  double a_min = INFINITY, a_max = -INFINITY, b_min = INFINITY, b_max = -INFINITY;
  double z_min = INFINITY, z_max = -INFINITY;
  for (std::size_t i : cluster) {
    const Point& p = pc.points[i];
    const double a = c * p.x + s * p.y;
    const double b = -s * p.x + c * p.y;
    a_min = std::min(a_min, a);
    a_max = std::max(a_max, a);
    b_min = std::min(b_min, b);
    b_max = std::max(b_max, b);
    z_min = std::min(z_min, static_cast<double>(p.z));
    z_max = std::max(z_max, static_cast<double>(p.z));
  }
  const double mid_a = 0.5 * (a_min + a_max);
  const double mid_b = 0.5 * (b_min + b_max);
  const Eigen::Vector3d center(c * mid_a - s * mid_b, s * mid_a + c * mid_b, z_min);
  double length = std::max(a_max - a_min, kMinExtent);
  double width = std::max(b_max - b_min, kMinExtent);
  if (width > length) {
    std::swap(width, length);
    yaw += kPi / 2.0;
  }

  Box3D box;
  box.center_bottom = lidar_to_rect(center, calib);
  box.dims = {std::max(z_max - z_min, kMinExtent), width, length};
  box.rotation_y = rotation_y_from_yaw(normalize_angle(yaw), calib);
  return box;
}

std::vector<Detection> detect(const PointCloud& pc, const Calibration& calib,
                              const DetectorConfig& cfg) {
  const auto non_ground = remove_ground(pc, cfg);
  const auto clusters = cluster_points(pc, non_ground, cfg);
  std::vector<Detection> out;
  for (const auto& cluster : clusters) {
    Box3D box = fit_box(pc, cluster, calib);
    for (const auto& gate : cfg.gates) {
      if (!gate.accepts(box.dims)) continue;
      box.class_name = gate.class_name;
      const double score = std::min(1.0, static_cast<double>(cluster.size()) / gate.saturation_count);
      out.push_back({box, score, cluster.size()});
      break;
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Detection& a, const Detection& b) { return a.score > b.score; });
  return out;
}

std::vector<ObjectLabel> detections_to_labels(const std::vector<Detection>& detections,
                                              const Calibration& calib, ImageSize size) {
  std::vector<ObjectLabel> out;
  for (const auto& d : detections) {
    if (auto label = label_from_box(d.box, calib, size, d.score)) out.push_back(*label);
  }
  return out;
}

std::vector<Detection> labels_to_detections(const std::vector<ObjectLabel>& labels) {
  std::vector<Detection> out;
  for (const auto& l : labels) {
    if (l.is_dont_care()) continue;
    out.push_back({box_from_label(l), l.score.value_or(0.0), 0});
  }
  return out;
}

}  // namespace phantom
