#include "phantom/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include <Eigen/Dense>

#include "phantom/raster.hpp"

namespace phantom {

namespace {

constexpr double kFaceInset = 0.03;

Eigen::Matrix3d rotation_about_y(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Eigen::Matrix3d r;
  r << c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c;
  return r;
}

bool inside_footprint(const Box3D& box, const Eigen::Vector3d& rect, double margin) {
  const Eigen::Vector3d local = rotation_about_y(box.rotation_y).transpose() * (rect - box.center_bottom);
  return std::abs(local.x()) <= box.dims.l / 2.0 + margin &&
         std::abs(local.z()) <= box.dims.w / 2.0 + margin;
}

Rgb object_color(const std::string& class_name, Rng& rng) {
  if (class_name == "Pedestrian") {
    return {static_cast<std::uint8_t>(150 + rng.below(60)), static_cast<std::uint8_t>(60 + rng.below(40)),
            static_cast<std::uint8_t>(40 + rng.below(40))};
  }
  return {static_cast<std::uint8_t>(30 + rng.below(120)), static_cast<std::uint8_t>(40 + rng.below(80)),
          static_cast<std::uint8_t>(120 + rng.below(120))};
}

Image render_background(const Calibration& calib, const SyntheticConfig& cfg, Rng& rng) {
  Image image(cfg.image_width, cfg.image_height, 3);
  const auto horizon = rect_to_image(lidar_to_rect({1000.0, 0.0, cfg.ground_z}, calib), calib);
  const double horizon_v = std::isfinite(horizon.v) ? horizon.v : cfg.image_height / 2.0;
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      std::uint8_t* px = image.at(x, y);
      const int noise = static_cast<int>(rng.below(12));
      if (y < horizon_v) {
        const double t = std::clamp(y / std::max(horizon_v, 1.0), 0.0, 1.0);
        px[0] = static_cast<std::uint8_t>(120 + 60 * t + noise);
        px[1] = static_cast<std::uint8_t>(150 + 50 * t + noise);
        px[2] = static_cast<std::uint8_t>(200 + 30 * t + noise / 2);
      } else {
        px[0] = px[1] = px[2] = static_cast<std::uint8_t>(85 + noise);
      }
    }
  }
  return image;
}

}  // namespace

std::string reference_calibration_text() {
  return "P0: 7.070912000000e+02 0.000000000000e+00 6.018873000000e+02 0.000000000000e+00 "
         "0.000000000000e+00 7.070912000000e+02 1.831104000000e+02 0.000000000000e+00 "
         "0.000000000000e+00 0.000000000000e+00 1.000000000000e+00 0.000000000000e+00\n"
         "P1: 7.070912000000e+02 0.000000000000e+00 6.018873000000e+02 -3.798145000000e+02 "
         "0.000000000000e+00 7.070912000000e+02 1.831104000000e+02 0.000000000000e+00 "
         "0.000000000000e+00 0.000000000000e+00 1.000000000000e+00 0.000000000000e+00\n"
         "P2: 7.215377000000e+02 0.000000000000e+00 6.095593000000e+02 4.485728000000e+01 "
         "0.000000000000e+00 7.215377000000e+02 1.728540000000e+02 2.163791000000e-01 "
         "0.000000000000e+00 0.000000000000e+00 1.000000000000e+00 2.745884000000e-03\n"
         "P3: 7.215377000000e+02 0.000000000000e+00 6.095593000000e+02 -3.395242000000e+02 "
         "0.000000000000e+00 7.215377000000e+02 1.728540000000e+02 2.199936000000e+00 "
         "0.000000000000e+00 0.000000000000e+00 1.000000000000e+00 2.729905000000e-03\n"
         "R0_rect: 9.999239000000e-01 9.837760000000e-03 -7.445048000000e-03 "
         "-9.869795000000e-03 9.999421000000e-01 -4.278459000000e-03 "
         "7.402527000000e-03 4.351614000000e-03 9.999631000000e-01\n"
         "Tr_velo_to_cam: 7.533745000000e-03 -9.999714000000e-01 -6.166020000000e-04 "
         "-4.069766000000e-03 1.480249000000e-02 7.280733000000e-04 -9.998902000000e-01 "
         "-7.631618000000e-02 9.998621000000e-01 7.523790000000e-03 1.480755000000e-02 "
         "-2.717806000000e-01\n"
         "Tr_imu_to_velo: 9.999976000000e-01 7.553071000000e-04 -2.035826000000e-03 "
         "-8.086759000000e-01 -7.854027000000e-04 9.998898000000e-01 -1.482298000000e-02 "
         "3.195559000000e-01 2.024406000000e-03 1.482454000000e-02 9.998881000000e-01 "
         "-7.997231000000e-01\n";
}

Calibration reference_calibration() { return parse_calibration(reference_calibration_text()); }

Dims sample_dims(const std::string& class_name, Rng& rng) {
  if (class_name == "Pedestrian") {
    return {rng.uniform(1.6, 1.9), rng.uniform(0.5, 0.7), rng.uniform(0.6, 0.9)};
  }
  return {rng.uniform(1.5, 1.75), rng.uniform(1.55, 1.85), rng.uniform(3.6, 4.6)};
}

Box3D object_box(const SyntheticObject& object, const Calibration& calib) {
  Box3D box;
  box.center_bottom = lidar_to_rect(object.bottom_center, calib);
  box.dims = object.dims;
  box.rotation_y = rotation_y_from_yaw(object.yaw, calib);
  box.class_name = object.class_name;
  return box;
}

std::size_t object_point_budget(const SyntheticObject& object, const SyntheticConfig& cfg) {
  const double range = std::hypot(object.bottom_center.x(), object.bottom_center.y());
  const double at10 = object.class_name == "Pedestrian" ? cfg.pedestrian_points_at_10m
                                                         : cfg.car_points_at_10m;
  const double n = at10 * (10.0 / std::max(range, 1.0)) * (10.0 / std::max(range, 1.0));
  return std::min(cfg.max_object_points, static_cast<std::size_t>(std::lround(n)));
}

std::vector<Point> sample_object_points(const SyntheticObject& object, const Calibration& calib,
                                        std::size_t count, Rng& rng) {
  const Box3D box = object_box(object, calib);
  const double hl = box.dims.l / 2.0 - kFaceInset;
  const double hw = box.dims.w / 2.0 - kFaceInset;
  const double h = box.dims.h - kFaceInset;
  // Faces: +x, -x (l-ends, area w*h), +z, -z (sides, area l*h), roof (l*w).
  const std::array<double, 5> areas = {box.dims.w * box.dims.h, box.dims.w * box.dims.h,
                                       box.dims.l * box.dims.h, box.dims.l * box.dims.h,
                                       box.dims.l * box.dims.w};
  double total = 0.0;
  for (double a : areas) total += a;

  const Eigen::Matrix3d rotate = rotation_about_y(box.rotation_y);
  std::vector<Point> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    double pick = rng.uniform() * total;
    std::size_t face = 0;
    while (face + 1 < areas.size() && pick >= areas[face]) {
      pick -= areas[face];
      ++face;
    }
    const double a = rng.uniform();
    const double b = rng.uniform();
    Eigen::Vector3d local;
    switch (face) {
      case 0: local = {hl, -kFaceInset - a * (h - kFaceInset), -hw + 2.0 * hw * b}; break;
      case 1: local = {-hl, -kFaceInset - a * (h - kFaceInset), -hw + 2.0 * hw * b}; break;
      case 2: local = {-hl + 2.0 * hl * b, -kFaceInset - a * (h - kFaceInset), hw}; break;
      case 3: local = {-hl + 2.0 * hl * b, -kFaceInset - a * (h - kFaceInset), -hw}; break;
      default: local = {-hl + 2.0 * hl * a, -h, -hw + 2.0 * hw * b}; break;
    }
    const Eigen::Vector3d velo = rect_to_lidar(rotate * local + box.center_bottom, calib);
    out.push_back({static_cast<float>(velo.x()), static_cast<float>(velo.y()),
                   static_cast<float>(velo.z()), static_cast<float>(rng.uniform())});
  }
  return out;
}

Scene make_scene(const std::string& scene_id, std::uint64_t seed,
                 const std::vector<SyntheticObject>& objects, const SyntheticConfig& cfg) {
  Rng rng(seed);
  Scene scene;
  scene.scene_id = scene_id;
  scene.calib_text = reference_calibration_text();
  scene.calib = parse_calibration(scene.calib_text);
  const ImageSize size{cfg.image_width, cfg.image_height};

  std::vector<Box3D> boxes;
  boxes.reserve(objects.size());
  for (const auto& o : objects) boxes.push_back(object_box(o, scene.calib));

  // Ground: log-uniform range gives a 1/r^2 areal density.
  const double log_lo = std::log(cfg.ground_min_range);
  const double log_hi = std::log(cfg.ground_max_range);
  for (std::size_t i = 0; i < cfg.ground_points; ++i) {
    const double r = std::exp(rng.uniform(log_lo, log_hi));
    const double az = rng.uniform(-kPi, kPi);
    const double z = cfg.ground_z + rng.uniform(-cfg.ground_noise, cfg.ground_noise);
    const Eigen::Vector3d p(r * std::cos(az), r * std::sin(az), z);
    const Eigen::Vector3d rect = lidar_to_rect(p, scene.calib);
    bool occluded = false;
    for (const auto& box : boxes) {
      if (inside_footprint(box, rect, 0.05)) {
        occluded = true;
        break;
      }
    }
    if (occluded) continue;
    scene.cloud.points.push_back({static_cast<float>(p.x()), static_cast<float>(p.y()),
                                  static_cast<float>(p.z()), static_cast<float>(rng.uniform(0.0, 0.3))});
  }

  if (cfg.walls) {
    for (double side : {-1.0, 1.0}) {
      const double offset = side * rng.uniform(12.0, 16.0);
      for (int i = 0; i < 1500; ++i) {
        const double x = rng.uniform(3.0, 60.0);
        const double z = cfg.ground_z + rng.uniform(0.0, 3.0);
        scene.cloud.points.push_back({static_cast<float>(x),
                                      static_cast<float>(offset + rng.uniform(-0.05, 0.05)),
                                      static_cast<float>(z), static_cast<float>(rng.uniform())});
      }
    }
  }

  for (const auto& o : objects) {
    const auto pts = sample_object_points(o, scene.calib, object_point_budget(o, cfg), rng);
    scene.cloud.points.insert(scene.cloud.points.end(), pts.begin(), pts.end());
  }

  scene.image = render_background(scene.calib, cfg, rng);
  std::vector<std::size_t> order(objects.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return boxes[a].center_bottom.z() > boxes[b].center_bottom.z();
  });
  for (std::size_t i : order) {
    std::vector<Eigen::Vector2d> projected;
    for (const auto& c : box_corners(boxes[i])) {
      const auto p = rect_to_image(c, scene.calib);
      if (!p.behind_camera) projected.emplace_back(p.u, p.v);
    }
    const auto hull = convex_hull(projected);
    const Rgb color = object_color(objects[i].class_name, rng);
    fill_convex(scene.image, hull, color);
    const Rgb edge{static_cast<std::uint8_t>(color.r / 2), static_cast<std::uint8_t>(color.g / 2),
                   static_cast<std::uint8_t>(color.b / 2)};
    for (std::size_t k = 0; k < hull.size(); ++k) {
      draw_line(scene.image, hull[k], hull[(k + 1) % hull.size()], edge);
    }
  }

  for (const auto& box : boxes) {
    if (auto label = label_from_box(box, scene.calib, size)) scene.labels.push_back(*label);
  }
  return scene;
}

Scene make_synthetic_scene(const std::string& scene_id, std::uint64_t seed,
                           const SyntheticConfig& cfg) {
  Rng rng(derive_seed(seed, 0x0b1ec7));
  const Calibration calib = reference_calibration();
  std::vector<SyntheticObject> objects;
  std::vector<Box3D> boxes;
  auto try_add = [&](const std::string& cls) {
    for (int attempt = 0; attempt < 50; ++attempt) {
      SyntheticObject o;
      o.class_name = cls;
      const double forward = rng.uniform(cfg.object_forward_min, cfg.object_forward_max);
      const double lateral = rng.uniform(-0.3, 0.3) * forward;
      o.bottom_center = {forward, lateral, cfg.ground_z};
      o.yaw = rng.uniform(-kPi, kPi);
      o.dims = sample_dims(cls, rng);
      Box3D box = object_box(o, calib);
      const auto hull = box_image_hull(box, calib);
      if (!hull || hull->left < 0.0 || hull->right > cfg.image_width || hull->top < 0.0 ||
          hull->bottom > cfg.image_height) {
        continue;
      }
      const Box3D padded = inflated(box, 1.3);
      bool overlaps = false;
      for (const auto& other : boxes) {
        if (bev_iou(padded, inflated(other, 1.3)) > 0.0) {
          overlaps = true;
          break;
        }
      }
      if (overlaps) continue;
      objects.push_back(o);
      boxes.push_back(box);
      return;
    }
  };
  const int cars = cfg.min_cars + static_cast<int>(rng.below(
                                      static_cast<std::uint64_t>(cfg.max_cars - cfg.min_cars + 1)));
  const int peds = cfg.min_pedestrians +
                   static_cast<int>(rng.below(
                       static_cast<std::uint64_t>(cfg.max_pedestrians - cfg.min_pedestrians + 1)));
  for (int i = 0; i < cars; ++i) try_add("Car");
  for (int i = 0; i < peds; ++i) try_add("Pedestrian");
  return make_scene(scene_id, seed, objects, cfg);
}

std::string format_scene_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06zu", index);
  return buf;
}

std::vector<std::string> write_synthetic_dataset(const std::filesystem::path& root,
                                                 std::size_t count, std::uint64_t seed,
                                                 const SyntheticConfig& cfg) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < count; ++i) {
    const std::string id = format_scene_id(i);
    save_scene(make_synthetic_scene(id, derive_seed(seed, i), cfg), root);
    ids.push_back(id);
  }
  return ids;
}

}  // namespace phantom
