#pragma once

// Independent reference implementations used as test oracles. None of these
// call into the library's geometry code.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "phantom/geometry.hpp"
#include "phantom/kitti_io.hpp"
#include "phantom/random.hpp"

namespace oracle {

// P2 * R0(4x4) * Tr(4x4) * [x y z 1]^T, then divide.
inline Eigen::Vector2d project(const phantom::Calibration& c, const Eigen::Vector3d& p) {
  Eigen::Matrix4d r0 = Eigen::Matrix4d::Identity();
  r0.topLeftCorner<3, 3>() = c.r0_rect;
  Eigen::Matrix4d tr = Eigen::Matrix4d::Identity();
  tr.topRows<3>() = c.tr_velo_to_cam;
  const Eigen::Vector3d h = c.p2 * r0 * tr * p.homogeneous();
  return {h.x() / h.z(), h.y() / h.z()};
}

using Poly = std::vector<Eigen::Vector2d>;

inline double shoelace(const Poly& p) {
  double a = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto& u = p[i];
    const auto& v = p[(i + 1) % p.size()];
    a += u.x() * v.y() - v.x() * u.y();
  }
  return 0.5 * a;
}

// Footprint in (x, z) built from first principles: l along the heading, w
// across it, heading rotated by ry about camera y.
inline Poly footprint(const phantom::Box3D& b) {
  const double c = std::cos(b.rotation_y);
  const double s = std::sin(b.rotation_y);
  const double hl = b.dims.l / 2;
  const double hw = b.dims.w / 2;
  Poly p;
  for (auto [dx, dz] : std::array<std::pair<double, double>, 4>{
           {{hl, hw}, {-hl, hw}, {-hl, -hw}, {hl, -hw}}}) {
    p.emplace_back(b.center_bottom.x() + c * dx + s * dz, b.center_bottom.z() - s * dx + c * dz);
  }
  if (shoelace(p) < 0) std::reverse(p.begin(), p.end());
  return p;
}

// Sutherland-Hodgman: clip `subject` by each edge of convex CCW `clip`.
inline Poly clip_polygon(Poly subject, const Poly& clip) {
  for (std::size_t i = 0; i < clip.size() && !subject.empty(); ++i) {
    const Eigen::Vector2d a = clip[i];
    const Eigen::Vector2d b = clip[(i + 1) % clip.size()];
    auto side = [&](const Eigen::Vector2d& p) {
      return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
    };
    Poly out;
    for (std::size_t j = 0; j < subject.size(); ++j) {
      const Eigen::Vector2d cur = subject[j];
      const Eigen::Vector2d prev = subject[(j + subject.size() - 1) % subject.size()];
      const double sc = side(cur);
      const double sp = side(prev);
      if (sc >= 0) {
        if (sp < 0) out.push_back(prev + (cur - prev) * (sp / (sp - sc)));
        out.push_back(cur);
      } else if (sp >= 0) {
        out.push_back(prev + (cur - prev) * (sp / (sp - sc)));
      }
    }
    subject = std::move(out);
  }
  return subject;
}

inline double bev_iou(const phantom::Box3D& a, const phantom::Box3D& b) {
  const Poly pa = footprint(a);
  const Poly pb = footprint(b);
  const Poly inter = clip_polygon(pa, pb);
  const double ai = inter.size() < 3 ? 0.0 : std::abs(shoelace(inter));
  const double u = std::abs(shoelace(pa)) + std::abs(shoelace(pb)) - ai;
  return u <= 0 ? 0.0 : ai / u;
}

// Membership by rotating the point into the box frame.
inline bool inside_box(const phantom::Box3D& b, const Eigen::Vector3d& rect, double tol = 1e-9) {
  const Eigen::Vector3d d = rect - b.center_bottom;
  const double c = std::cos(b.rotation_y);
  const double s = std::sin(b.rotation_y);
  const double local_x = c * d.x() - s * d.z();
  const double local_z = s * d.x() + c * d.z();
  return std::abs(local_x) <= b.dims.l / 2 + tol && std::abs(local_z) <= b.dims.w / 2 + tol &&
         d.y() <= tol && d.y() >= -b.dims.h - tol;
}

// Union-find over BEV cells with 8-connectivity.
inline std::vector<std::vector<std::size_t>> cluster(const phantom::PointCloud& pc,
                                                     const std::vector<std::size_t>& idx,
                                                     double cell, std::size_t min_pts) {
  std::vector<std::size_t> parent(idx.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  std::map<std::pair<long, long>, std::size_t> first_in_cell;
  std::vector<std::pair<long, long>> cells(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto& p = pc.points[idx[k]];
    cells[k] = {static_cast<long>(std::floor(p.x / cell)), static_cast<long>(std::floor(p.y / cell))};
    auto [it, fresh] = first_in_cell.emplace(cells[k], k);
    if (!fresh) parent[find(k)] = find(it->second);
  }
  for (const auto& [c, k] : first_in_cell) {
    for (long dx = -1; dx <= 1; ++dx) {
      for (long dy = -1; dy <= 1; ++dy) {
        auto it = first_in_cell.find({c.first + dx, c.second + dy});
        if (it != first_in_cell.end()) parent[find(k)] = find(it->second);
      }
    }
  }
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t k = 0; k < idx.size(); ++k) groups[find(k)].push_back(idx[k]);
  std::vector<std::vector<std::size_t>> out;
  for (auto& [root, members] : groups) {
    if (members.size() < min_pts) continue;
    std::sort(members.begin(), members.end());
    out.push_back(members);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return out;
}

// Random generators.

inline phantom::Box3D random_box(phantom::Rng& rng, double spread = 4.0) {
  phantom::Box3D b;
  b.center_bottom = {rng.uniform(-spread, spread), rng.uniform(0.5, 2.0), rng.uniform(5.0, 5.0 + 2 * spread)};
  b.dims = {rng.uniform(0.5, 3.0), rng.uniform(0.3, 3.0), rng.uniform(0.3, 6.0)};
  b.rotation_y = rng.uniform(-phantom::kPi, phantom::kPi);
  b.class_name = "Car";
  return b;
}

inline double round2(double v) { return std::round(v * 100.0) / 100.0; }

inline phantom::ObjectLabel random_label(phantom::Rng& rng, bool with_score) {
  static const char* kClasses[] = {"Car", "Pedestrian", "Cyclist", "Van", "Truck", "DontCare"};
  phantom::ObjectLabel l;
  l.class_name = kClasses[rng.below(6)];
  if (l.is_dont_care()) {
    l.truncation = -1;
    l.occlusion = -1;
    l.alpha = -10;
    l.bbox2d = {round2(rng.uniform(0, 600)), round2(rng.uniform(0, 180)), 0, 0};
    l.bbox2d[2] = round2(l.bbox2d[0] + rng.uniform(1, 100));
    l.bbox2d[3] = round2(l.bbox2d[1] + rng.uniform(1, 100));
    l.dims = {-1, -1, -1};
    l.location = {-1000, -1000, -1000};
    l.rotation_y = -10;
  } else {
    l.truncation = round2(rng.uniform(0, 1));
    l.occlusion = static_cast<int>(rng.below(4));
    l.alpha = round2(rng.uniform(-3.14, 3.14));
    l.bbox2d = {round2(rng.uniform(0, 600)), round2(rng.uniform(0, 180)), 0, 0};
    l.bbox2d[2] = round2(l.bbox2d[0] + rng.uniform(1, 300));
    l.bbox2d[3] = round2(l.bbox2d[1] + rng.uniform(1, 150));
    l.dims = {round2(rng.uniform(0.5, 4)), round2(rng.uniform(0.3, 3)), round2(rng.uniform(0.3, 12))};
    l.location = {round2(rng.uniform(-30, 30)), round2(rng.uniform(-1, 3)), round2(rng.uniform(1, 80))};
    l.rotation_y = round2(rng.uniform(-3.14, 3.14));
  }
  if (with_score && !l.is_dont_care()) l.score = round2(rng.uniform(0, 1));
  return l;
}

inline phantom::PointCloud random_cloud(phantom::Rng& rng, std::size_t n) {
  phantom::PointCloud pc;
  for (std::size_t i = 0; i < n; ++i) {
    pc.points.push_back({static_cast<float>(rng.uniform(-80, 80)), static_cast<float>(rng.uniform(-80, 80)),
                         static_cast<float>(rng.uniform(-3, 3)), static_cast<float>(rng.uniform(0, 1))});
  }
  return pc;
}

}  // namespace oracle
