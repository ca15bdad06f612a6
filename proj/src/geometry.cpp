#include "phantom/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

namespace phantom {

namespace {

Eigen::Matrix4d velo_to_cam4(const Calibration& calib) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topRows<3>() = calib.tr_velo_to_cam;
  return m;
}

Eigen::Matrix3d rotation_about_y(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Eigen::Matrix3d r;
  r << c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c;
  return r;
}

// LiDAR-to-rectified rotation, used for heading conversions.
Eigen::Matrix3d heading_matrix(const Calibration& calib) {
  return calib.r0_rect * calib.tr_velo_to_cam.leftCols<3>();
}

double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

bool inside_convex(const std::array<Eigen::Vector2d, 4>& poly, const Eigen::Vector2d& p) {
  constexpr double kEps = 1e-12;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& a = poly[i];
    const auto& b = poly[(i + 1) % poly.size()];
    if (cross2(b - a, p - a) < -kEps) return false;
  }
  return true;
}

std::optional<Eigen::Vector2d> segment_intersection(const Eigen::Vector2d& p0,
                                                    const Eigen::Vector2d& p1,
                                                    const Eigen::Vector2d& q0,
                                                    const Eigen::Vector2d& q1) {
  const Eigen::Vector2d r = p1 - p0;
  const Eigen::Vector2d s = q1 - q0;
  const double denom = cross2(r, s);
  if (std::abs(denom) < 1e-14) return std::nullopt;
  const double t = cross2(q0 - p0, s) / denom;
  const double u = cross2(q0 - p0, r) / denom;
  if (t < 0.0 || t > 1.0 || u < 0.0 || u > 1.0) return std::nullopt;
  return p0 + t * r;
}

double polygon_area(const std::array<Eigen::Vector2d, 4>& poly) {
  double acc = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    acc += cross2(poly[i], poly[(i + 1) % poly.size()]);
  }
  return std::abs(acc) * 0.5;
}

double convex_intersection_area(const std::array<Eigen::Vector2d, 4>& a,
                                const std::array<Eigen::Vector2d, 4>& b) {
  std::vector<Eigen::Vector2d> pts;
  pts.reserve(24);
  for (const auto& v : a) {
    if (inside_convex(b, v)) pts.push_back(v);
  }
  for (const auto& v : b) {
    if (inside_convex(a, v)) pts.push_back(v);
  }
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      if (auto x = segment_intersection(a[i], a[(i + 1) % 4], b[j], b[(j + 1) % 4])) {
        pts.push_back(*x);
      }
    }
  }
  if (pts.size() < 3) return 0.0;

  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());
  std::sort(pts.begin(), pts.end(), [&](const Eigen::Vector2d& p, const Eigen::Vector2d& q) {
    return std::atan2(p.y() - centroid.y(), p.x() - centroid.x()) <
           std::atan2(q.y() - centroid.y(), q.x() - centroid.x());
  });
  double acc = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    acc += cross2(pts[i] - centroid, pts[(i + 1) % pts.size()] - centroid);
  }
  return std::abs(acc) * 0.5;
}

}  // namespace

double normalize_angle(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  if (a > kPi) a -= 2.0 * kPi;
  return a;
}

Eigen::Vector3d lidar_to_rect(const Eigen::Vector3d& p, const Calibration& calib) {
  const Eigen::Vector3d cam = calib.tr_velo_to_cam * p.homogeneous();
  return calib.r0_rect * cam;
}

Eigen::Vector3d rect_to_lidar(const Eigen::Vector3d& p, const Calibration& calib) {
  const Eigen::Vector3d cam = calib.r0_rect.inverse() * p;
  const Eigen::Vector4d velo = velo_to_cam4(calib).inverse() * cam.homogeneous();
  return velo.head<3>();
}

ImageProjection rect_to_image(const Eigen::Vector3d& p, const Calibration& calib) {
  const Eigen::Vector3d h = calib.p2 * p.homogeneous();
  ImageProjection out;
  out.depth = h.z();
  if (std::abs(h.z()) < 1e-9) {
    out.u = out.v = std::numeric_limits<double>::quiet_NaN();
    out.behind_camera = true;
    return out;
  }
  out.u = h.x() / h.z();
  out.v = h.y() / h.z();
  out.behind_camera = h.z() < 1e-9;
  return out;
}

std::vector<ProjectedPoint> project_cloud(const PointCloud& pc, const Calibration& calib,
                                          ImageSize size) {
  std::vector<ProjectedPoint> out;
  out.reserve(pc.size());
  for (std::size_t i = 0; i < pc.size(); ++i) {
    const Point& pt = pc.points[i];
    const Eigen::Vector3d rect = lidar_to_rect({pt.x, pt.y, pt.z}, calib);
    const ImageProjection proj = rect_to_image(rect, calib);
    ProjectedPoint rec;
    rec.index = i;
    rec.u = proj.u;
    rec.v = proj.v;
    rec.depth = proj.depth;
    rec.in_frustum = !proj.behind_camera && proj.depth > 0.0 && proj.u >= 0.0 &&
                     proj.u < size.width && proj.v >= 0.0 && proj.v < size.height;
    out.push_back(rec);
  }
  return out;
}

double rotation_y_from_yaw(double yaw, const Calibration& calib) {
  const Eigen::Vector3d d = heading_matrix(calib) * Eigen::Vector3d(std::cos(yaw), std::sin(yaw), 0.0);
  return normalize_angle(std::atan2(-d.z(), d.x()));
}

double yaw_from_rotation_y(double rotation_y, const Calibration& calib) {
  // Find the LiDAR ground-plane heading whose rectified image has the given
  // x-z direction: zero the component orthogonal to (cos ry, -sin ry).
  const Eigen::Matrix3d m = heading_matrix(calib);
  const double s = std::sin(rotation_y);
  const double c = std::cos(rotation_y);
  const double a = m(0, 0) * s + m(2, 0) * c;
  const double b = m(0, 1) * s + m(2, 1) * c;
  Eigen::Vector2d dir(b, -a);
  const Eigen::Vector3d mapped = m * Eigen::Vector3d(dir.x(), dir.y(), 0.0);
  if (mapped.x() * c - mapped.z() * s < 0.0) dir = -dir;
  return normalize_angle(std::atan2(dir.y(), dir.x()));
}

std::array<Eigen::Vector3d, 8> box_corners(const Box3D& box) {
  const double hl = box.dims.l / 2.0;
  const double hw = box.dims.w / 2.0;
  const double h = box.dims.h;
  const std::array<Eigen::Vector3d, 8> local = {
      Eigen::Vector3d(hl, 0.0, hw),  Eigen::Vector3d(hl, 0.0, -hw),
      Eigen::Vector3d(-hl, 0.0, -hw), Eigen::Vector3d(-hl, 0.0, hw),
      Eigen::Vector3d(hl, -h, hw),   Eigen::Vector3d(hl, -h, -hw),
      Eigen::Vector3d(-hl, -h, -hw), Eigen::Vector3d(-hl, -h, hw)};
  const Eigen::Matrix3d r = rotation_about_y(box.rotation_y);
  std::array<Eigen::Vector3d, 8> out;
  for (std::size_t i = 0; i < 8; ++i) out[i] = r * local[i] + box.center_bottom;
  return out;
}

std::array<Eigen::Vector2d, 4> bev_footprint(const Box3D& box) {
  const auto corners = box_corners(box);
  // Bottom corners 3, 2, 1, 0 run counter-clockwise in (x, z).
  return {Eigen::Vector2d(corners[3].x(), corners[3].z()),
          Eigen::Vector2d(corners[2].x(), corners[2].z()),
          Eigen::Vector2d(corners[1].x(), corners[1].z()),
          Eigen::Vector2d(corners[0].x(), corners[0].z())};
}

std::optional<ImageBBox> box_to_image_bbox(const Box3D& box, const Calibration& calib,
                                           ImageSize size) {
  double left = std::numeric_limits<double>::infinity();
  double top = left;
  double right = -left;
  double bottom = -left;
  bool any = false;
  for (const auto& c : box_corners(box)) {
    const ImageProjection p = rect_to_image(c, calib);
    if (p.behind_camera || p.depth <= 0.0) continue;
    any = true;
    left = std::min(left, p.u);
    right = std::max(right, p.u);
    top = std::min(top, p.v);
    bottom = std::max(bottom, p.v);
  }
  if (!any) return std::nullopt;
  ImageBBox bb{std::clamp(left, 0.0, static_cast<double>(size.width)),
               std::clamp(top, 0.0, static_cast<double>(size.height)),
               std::clamp(right, 0.0, static_cast<double>(size.width)),
               std::clamp(bottom, 0.0, static_cast<double>(size.height))};
  if (!(bb.left < bb.right) || !(bb.top < bb.bottom)) return std::nullopt;
  return bb;
}

std::optional<ImageBBox> box_image_hull(const Box3D& box, const Calibration& calib) {
  ImageBBox bb{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
               -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& c : box_corners(box)) {
    const ImageProjection p = rect_to_image(c, calib);
    if (p.behind_camera || p.depth <= 0.0) return std::nullopt;
    bb.left = std::min(bb.left, p.u);
    bb.right = std::max(bb.right, p.u);
    bb.top = std::min(bb.top, p.v);
    bb.bottom = std::max(bb.bottom, p.v);
  }
  return bb;
}

double bev_iou(const Box3D& a, const Box3D& b) {
  const auto fa = bev_footprint(a);
  const auto fb = bev_footprint(b);
  if (fa == fb) return 1.0;
  const double area_a = polygon_area(fa);
  const double area_b = polygon_area(fb);
  const double inter = convex_intersection_area(fa, fb);
  const double uni = area_a + area_b - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

std::vector<std::size_t> points_in_box(const PointCloud& pc, const Box3D& box,
                                       const Calibration& calib) {
  // Parallelepiped test along the three edges leaving corner 2.
  const auto c = box_corners(box);
  const Eigen::Vector3d origin = c[2];
  const std::array<Eigen::Vector3d, 3> edges = {c[1] - origin, c[3] - origin, c[6] - origin};
  std::array<double, 3> lengths2{};
  for (std::size_t k = 0; k < 3; ++k) lengths2[k] = edges[k].squaredNorm();

  std::vector<std::size_t> inside;
  for (std::size_t i = 0; i < pc.size(); ++i) {
    const Point& pt = pc.points[i];
    const Eigen::Vector3d d = lidar_to_rect({pt.x, pt.y, pt.z}, calib) - origin;
    bool ok = true;
    for (std::size_t k = 0; k < 3 && ok; ++k) {
      const double proj = d.dot(edges[k]);
      const double tol = 1e-9 * lengths2[k];
      ok = proj >= -tol && proj <= lengths2[k] + tol;
    }
    if (ok) inside.push_back(i);
  }
  return inside;
}

Box3D inflated(const Box3D& box, double factor) {
  Box3D out = box;
  out.dims = {box.dims.h * factor, box.dims.w * factor, box.dims.l * factor};
  // Keep the volumetric center fixed: the bottom moves down (+y) by half
  // the height gain.
  out.center_bottom.y() += (out.dims.h - box.dims.h) / 2.0;
  return out;
}

Box3D box_from_label(const ObjectLabel& label) {
  Box3D box;
  box.center_bottom = {label.location[0], label.location[1], label.location[2]};
  box.dims = {label.dims[0], label.dims[1], label.dims[2]};
  box.rotation_y = label.rotation_y;
  box.class_name = label.class_name;
  return box;
}

std::optional<ObjectLabel> label_from_box(const Box3D& box, const Calibration& calib,
                                          ImageSize size, std::optional<double> score) {
  const auto bb = box_to_image_bbox(box, calib, size);
  if (!bb) return std::nullopt;
  ObjectLabel label;
  label.class_name = box.class_name;
  label.truncation = 0.0;
  label.occlusion = 0;
  const auto& c = box.center_bottom;
  label.alpha = normalize_angle(box.rotation_y - std::atan2(c.x(), c.z()));
  label.bbox2d = {bb->left, bb->top, bb->right, bb->bottom};
  label.dims = {box.dims.h, box.dims.w, box.dims.l};
  label.location = {c.x(), c.y(), c.z()};
  label.rotation_y = box.rotation_y;
  label.score = score;
  return label;
}

}  // namespace phantom
