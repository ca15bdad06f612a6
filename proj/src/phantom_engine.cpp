#include "phantom/phantom_engine.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <map>

#include <Eigen/Dense>

#include "phantom/config.hpp"
#include "phantom/errors.hpp"
#include "phantom/random.hpp"
#include "phantom/raster.hpp"

namespace phantom {

namespace fs = std::filesystem;

namespace {

constexpr double kMaskFeatherPx = 2.0;

Eigen::Matrix3d rotation_about_y(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Eigen::Matrix3d r;
  r << c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c;
  return r;
}

ImageSize size_of(const Image& image) { return {image.width, image.height}; }

// Opacity from the convex hull of the source object's projected points,
// feathered outward.
Image build_mask(const std::vector<Eigen::Vector2d>& projected, const PixelRect& rect) {
  Image mask(rect.width(), rect.height(), 1, 0);
  std::vector<Eigen::Vector2d> local;
  local.reserve(projected.size());
  for (const auto& p : projected) local.emplace_back(p.x() - rect.x0, p.y() - rect.y0);
  const auto hull = convex_hull(std::move(local));
  if (hull.size() < 3) {
    std::fill(mask.data.begin(), mask.data.end(), 255);
    return mask;
  }
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      const double d = signed_distance_to_convex(hull, {x + 0.5, y + 0.5});
      std::uint8_t alpha = 0;
      if (d <= 0.0) {
        alpha = 255;
      } else if (d < kMaskFeatherPx) {
        alpha = static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - d / kMaskFeatherPx)));
      }
      *mask.at(x, y) = alpha;
    }
  }
  return mask;
}

double sample_bilinear(const Image& img, double sx, double sy, int channel) {
  sx = std::clamp(sx, 0.0, static_cast<double>(img.width - 1));
  sy = std::clamp(sy, 0.0, static_cast<double>(img.height - 1));
  const int x0 = static_cast<int>(std::floor(sx));
  const int y0 = static_cast<int>(std::floor(sy));
  const int x1 = std::min(x0 + 1, img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const double fx = sx - x0;
  const double fy = sy - y0;
  const double top = img.at(x0, y0)[channel] * (1.0 - fx) + img.at(x1, y0)[channel] * fx;
  const double bot = img.at(x0, y1)[channel] * (1.0 - fx) + img.at(x1, y1)[channel] * fx;
  return top * (1.0 - fy) + bot * fy;
}

void write_le(std::vector<std::byte>& out, const void* src, std::size_t n) {
  const auto* b = static_cast<const std::byte*>(src);
  if constexpr (std::endian::native == std::endian::little) {
    out.insert(out.end(), b, b + n);
  } else {
    for (std::size_t i = n; i-- > 0;) out.push_back(b[i]);
  }
}

void read_le(const std::byte* src, void* dst, std::size_t n) {
  auto* d = static_cast<std::byte*>(dst);
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(d, src, n);
  } else {
    for (std::size_t i = 0; i < n; ++i) d[i] = src[n - 1 - i];
  }
}

nlohmann::json bbox_json(const ImageBBox& b) {
  return {{"left", b.left}, {"top", b.top}, {"right", b.right}, {"bottom", b.bottom}};
}

ImageBBox bbox_from_json(const nlohmann::json& j) {
  return {j.at("left").get<double>(), j.at("top").get<double>(), j.at("right").get<double>(),
          j.at("bottom").get<double>()};
}

}  // namespace

// ---------------------------------------------------------------------------
// Template library

void TemplateLibrary::add(ObjectTemplate tpl) { templates_.push_back(std::move(tpl)); }

const ObjectTemplate* TemplateLibrary::find(std::string_view id) const {
  for (const auto& t : templates_) {
    if (t.template_id == id) return &t;
  }
  return nullptr;
}

const ObjectTemplate& TemplateLibrary::at(std::string_view id) const {
  if (const auto* t = find(id)) return *t;
  throw MissingTemplate("missing template '" + std::string(id) + "'");
}

std::vector<const ObjectTemplate*> TemplateLibrary::of_class(std::string_view class_name) const {
  std::vector<const ObjectTemplate*> out;
  for (const auto& t : templates_) {
    if (t.class_name == class_name) out.push_back(&t);
  }
  return out;
}

Dims TemplateLibrary::median_dims(std::string_view class_name) const {
  const auto members = of_class(class_name);
  if (members.empty()) {
    throw EmptyLibrary("no templates of class '" + std::string(class_name) + "'");
  }
  auto median = [&](auto field) {
    std::vector<double> v;
    v.reserve(members.size());
    for (const auto* t : members) v.push_back(field(t->source_dims));
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };
  return {median([](const Dims& d) { return d.h; }), median([](const Dims& d) { return d.w; }),
          median([](const Dims& d) { return d.l; })};
}

void TemplateLibrary::save(const fs::path& dir) const {
  fs::create_directories(dir);
  nlohmann::json index = nlohmann::json::array();
  for (const auto& t : templates_) {
    std::vector<std::byte> blob;
    blob.reserve(t.points.size() * 28);
    for (const auto& p : t.points) {
      for (int k = 0; k < 3; ++k) {
        const double v = p.position[k];
        write_le(blob, &v, sizeof(v));
      }
      write_le(blob, &p.intensity, sizeof(p.intensity));
    }
    write_bytes(dir / (t.template_id + ".points"), blob);
    write_png(dir / (t.template_id + ".patch.png"), t.patch);
    write_png(dir / (t.template_id + ".mask.png"), t.mask);
    index.push_back({{"template_id", t.template_id},
                     {"class_name", t.class_name},
                     {"point_count", t.points.size()},
                     {"source_depth", t.source_depth},
                     {"source_dims", {{"h", t.source_dims.h}, {"w", t.source_dims.w}, {"l", t.source_dims.l}}},
                     {"source_bbox", bbox_json(t.source_bbox)}});
  }
  write_text(dir / "library.json", index.dump(2) + "\n");
}

TemplateLibrary TemplateLibrary::load(const fs::path& dir) {
  const fs::path index_path = dir / "library.json";
  if (!fs::exists(index_path)) throw MissingTemplate("no template library at " + dir.string());
  const auto index = nlohmann::json::parse(read_text(index_path));
  TemplateLibrary lib;
  for (const auto& entry : index) {
    ObjectTemplate t;
    t.template_id = entry.at("template_id").get<std::string>();
    t.class_name = entry.at("class_name").get<std::string>();
    t.source_depth = entry.at("source_depth").get<double>();
    const auto& d = entry.at("source_dims");
    t.source_dims = {d.at("h").get<double>(), d.at("w").get<double>(), d.at("l").get<double>()};
    t.source_bbox = bbox_from_json(entry.at("source_bbox"));
    const auto blob = read_bytes(dir / (t.template_id + ".points"));
    constexpr std::size_t kRecord = 3 * sizeof(double) + sizeof(float);
    if (blob.size() % kRecord != 0) {
      throw MalformedFile("template points file has a partial record: " + t.template_id);
    }
    t.points.resize(blob.size() / kRecord);
    for (std::size_t i = 0; i < t.points.size(); ++i) {
      const std::byte* rec = blob.data() + i * kRecord;
      for (int k = 0; k < 3; ++k) read_le(rec + k * sizeof(double), &t.points[i].position[k], sizeof(double));
      read_le(rec + 3 * sizeof(double), &t.points[i].intensity, sizeof(float));
    }
    t.patch = read_png(dir / (t.template_id + ".patch.png"), 3);
    t.mask = read_png(dir / (t.template_id + ".mask.png"), 1);
    lib.add(std::move(t));
  }
  return lib;
}

TemplateLibrary extract_templates(std::span<const Scene> scenes,
                                  const std::set<std::string>& classes, std::size_t min_points) {
  TemplateLibrary lib;
  for (const Scene& scene : scenes) {
    const ImageSize size = size_of(scene.image);
    for (std::size_t li = 0; li < scene.labels.size(); ++li) {
      const ObjectLabel& label = scene.labels[li];
      if (label.is_dont_care() || classes.count(label.class_name) == 0) continue;
      const Box3D box = box_from_label(label);
      const auto indices = points_in_box(scene.cloud, box, scene.calib);
      if (indices.empty() || indices.size() < min_points) continue;
      const auto bbox = box_to_image_bbox(box, scene.calib, size);
      if (!bbox) continue;
      const PixelRect rect = pixel_rect(*bbox, size);
      if (rect.empty()) continue;

      ObjectTemplate tpl;
      char idx[16];
      std::snprintf(idx, sizeof(idx), "%03zu", li);
      tpl.template_id = scene.scene_id + "_" + idx;
      tpl.class_name = label.class_name;
      tpl.source_depth = box.center_bottom.z();
      tpl.source_dims = box.dims;
      tpl.source_bbox = *bbox;

      const Eigen::Matrix3d unrotate = rotation_about_y(box.rotation_y).transpose();
      std::vector<Eigen::Vector2d> projected;
      projected.reserve(indices.size());
      tpl.points.reserve(indices.size());
      for (std::size_t i : indices) {
        const Point& p = scene.cloud.points[i];
        const Eigen::Vector3d rect_pt = lidar_to_rect({p.x, p.y, p.z}, scene.calib);
        tpl.points.push_back({unrotate * (rect_pt - box.center_bottom), p.intensity});
        const ImageProjection proj = rect_to_image(rect_pt, scene.calib);
        if (!proj.behind_camera && proj.depth > 0.0) projected.emplace_back(proj.u, proj.v);
      }

      tpl.patch = Image(rect.width(), rect.height(), 3);
      for (int y = 0; y < rect.height(); ++y) {
        std::memcpy(tpl.patch.at(0, y), scene.image.at(rect.x0, rect.y0 + y),
                    static_cast<std::size_t>(rect.width()) * 3);
      }
      tpl.mask = build_mask(projected, rect);
      lib.add(std::move(tpl));
    }
  }
  for (const auto& cls : classes) {
    if (lib.of_class(cls).empty()) {
      throw EmptyLibrary("no templates extracted for class '" + cls + "'");
    }
  }
  return lib;
}

// ---------------------------------------------------------------------------
// Placement

PlacementConfig PlacementConfig::from_config(const KeyValueConfig& cfg) {
  PlacementConfig out;
  out.forward_min = cfg.get_double("placement.forward_min", out.forward_min);
  out.forward_max = cfg.get_double("placement.forward_max", out.forward_max);
  out.lateral_half_width = cfg.get_double("placement.lateral_half_width", out.lateral_half_width);
  out.max_attempts = static_cast<int>(cfg.get_int("placement.max_attempts", out.max_attempts));
  out.min_bbox_area = cfg.get_double("placement.min_bbox_area", out.min_bbox_area);
  out.ground_radius = cfg.get_double("placement.ground_radius", out.ground_radius);
  out.ground_percentile = cfg.get_double("placement.ground_percentile", out.ground_percentile);
  out.ground_min_points = static_cast<std::size_t>(
      cfg.get_int("placement.ground_min_points", static_cast<long long>(out.ground_min_points)));
  out.fallback_ground_z = cfg.get_double("placement.fallback_ground_z", out.fallback_ground_z);
  out.clearance = cfg.get_double("placement.clearance", out.clearance);
  if (out.clearance < 0.0) throw ConfigError("placement.clearance must be non-negative");
  if (!(out.forward_min > 0.0 && out.forward_min < out.forward_max)) {
    throw ConfigError("placement forward band must satisfy 0 < min < max");
  }
  if (out.lateral_half_width < 0.0 || out.max_attempts < 1) {
    throw ConfigError("placement lateral band and attempt budget must be positive");
  }
  return out;
}

void PlacementConfig::to_config(KeyValueConfig& cfg) const {
  cfg.set("placement.forward_min", forward_min);
  cfg.set("placement.forward_max", forward_max);
  cfg.set("placement.lateral_half_width", lateral_half_width);
  cfg.set("placement.max_attempts", static_cast<double>(max_attempts));
  cfg.set("placement.min_bbox_area", min_bbox_area);
  cfg.set("placement.ground_radius", ground_radius);
  cfg.set("placement.ground_percentile", ground_percentile);
  cfg.set("placement.ground_min_points", static_cast<double>(ground_min_points));
  cfg.set("placement.fallback_ground_z", fallback_ground_z);
  cfg.set("placement.clearance", clearance);
}

double estimate_ground_height(const PointCloud& pc, double x, double y,
                              const PlacementConfig& cfg) {
  std::vector<double> zs;
  const double r2 = cfg.ground_radius * cfg.ground_radius;
  for (const Point& p : pc.points) {
    const double dx = p.x - x;
    const double dy = p.y - y;
    if (dx * dx + dy * dy <= r2) zs.push_back(p.z);
  }
  if (zs.size() < cfg.ground_min_points) return cfg.fallback_ground_z;
  const auto k = static_cast<std::size_t>(std::floor(cfg.ground_percentile * (zs.size() - 1)));
  std::nth_element(zs.begin(), zs.begin() + static_cast<std::ptrdiff_t>(k), zs.end());
  return zs[k];
}

std::optional<Placement> sample_placement(const Scene& scene, const Dims& candidate_dims,
                                          std::uint64_t seed, const PlacementConfig& cfg) {
  Rng rng(seed);
  std::vector<Box3D> occupied;
  for (const auto& label : scene.labels) {
    if (!label.is_dont_care()) occupied.push_back(box_from_label(label));
  }
  const double w = scene.image.width;
  const double h = scene.image.height;

  // forward is drawn once so rejections cannot reshape its distribution
  const double forward = rng.uniform(cfg.forward_min, cfg.forward_max);
  for (int attempt = 1; attempt <= cfg.max_attempts; ++attempt) {
    const double lateral = rng.uniform(-cfg.lateral_half_width, cfg.lateral_half_width);
    const double yaw = kPi - 2.0 * kPi * rng.uniform();  // (-pi, pi]
    const double ground = estimate_ground_height(scene.cloud, forward, lateral, cfg);

    Box3D candidate;
    candidate.center_bottom = lidar_to_rect({forward, lateral, ground}, scene.calib);
    candidate.dims = candidate_dims;
    candidate.rotation_y = rotation_y_from_yaw(yaw, scene.calib);

    Box3D grown = candidate;
    grown.dims.l += 2.0 * cfg.clearance;
    grown.dims.w += 2.0 * cfg.clearance;
    bool collides = false;
    for (const auto& box : occupied) {
      if (bev_iou(grown, box) > 0.0) {
        collides = true;
        break;
      }
    }
    if (collides) continue;
    const auto hull = box_image_hull(candidate, scene.calib);
    if (!hull) continue;
    if (hull->left < 0.0 || hull->top < 0.0 || hull->right > w || hull->bottom > h) continue;
    if (hull->area() < cfg.min_bbox_area) continue;
    return Placement{{forward, lateral, ground}, yaw, attempt};
  }
  return std::nullopt;
}

std::optional<Placement> sample_placement(const Scene& scene, const TemplateLibrary& library,
                                          std::string_view class_name, std::uint64_t seed,
                                          const PlacementConfig& cfg) {
  return sample_placement(scene, library.median_dims(class_name), seed, cfg);
}

// ---------------------------------------------------------------------------
// Injection

Box3D phantom_box_for(const PhantomSpec& spec, const ObjectTemplate& tpl,
                      const Calibration& calib) {
  Box3D box;
  box.center_bottom = lidar_to_rect(spec.target_location, calib);
  box.dims = tpl.source_dims;
  box.rotation_y = rotation_y_from_yaw(spec.yaw, calib);
  box.class_name = spec.class_name;
  return box;
}

LidarInjection inject_lidar(const Scene& scene, const PhantomSpec& spec,
                            const ObjectTemplate& tpl, const InjectionConfig& cfg) {
  if (tpl.class_name != spec.class_name) {
    throw Error("template class '" + tpl.class_name + "' does not match phantom class '" +
                spec.class_name + "'");
  }
  LidarInjection out;
  out.phantom_box = phantom_box_for(spec, tpl, scene.calib);

  const double target_depth = out.phantom_box.center_bottom.z();
  if (target_depth <= 0.0) throw CannotProject("phantom target is behind the camera");
  const double ratio = tpl.source_depth / target_depth;
  const double keep_probability = std::min(1.0, ratio * ratio);

  // Rectified -> LiDAR as one affine map.
  Eigen::Matrix4d velo_to_cam = Eigen::Matrix4d::Identity();
  velo_to_cam.topRows<3>() = scene.calib.tr_velo_to_cam;
  Eigen::Matrix4d rect_from_cam = Eigen::Matrix4d::Identity();
  rect_from_cam.topLeftCorner<3, 3>() = scene.calib.r0_rect;
  const Eigen::Matrix4d rect_to_velo = (rect_from_cam * velo_to_cam).inverse();
  const Eigen::Matrix3d rotate = rotation_about_y(out.phantom_box.rotation_y);

  Rng rng(spec.seed);
  std::vector<Point> spoofed;
  spoofed.reserve(tpl.points.size());
  for (const auto& tp : tpl.points) {
    if (keep_probability < 1.0 && rng.uniform() >= keep_probability) continue;
    const Eigen::Vector3d rect = rotate * tp.position + out.phantom_box.center_bottom;
    const Eigen::Vector4d velo = rect_to_velo * rect.homogeneous();
    spoofed.push_back({static_cast<float>(velo.x()), static_cast<float>(velo.y()),
                       static_cast<float>(velo.z()), tp.intensity});
  }
  if (spoofed.size() < cfg.min_injected_points) {
    throw TooSparse(spoofed.size(), cfg.min_injected_points);
  }

  out.cloud.points.reserve(scene.cloud.size() + spoofed.size());
  out.cloud.points = scene.cloud.points;
  out.injected_indices.reserve(spoofed.size());
  for (const Point& p : spoofed) {
    out.injected_indices.push_back(out.cloud.points.size());
    out.cloud.points.push_back(p);
  }
  return out;
}

ImageInjection inject_image(const Scene& scene, const PhantomSpec& spec,
                            const ObjectTemplate& tpl, const Box3D& phantom_box) {
  (void)spec;
  const ImageSize size = size_of(scene.image);
  const auto bbox = box_to_image_bbox(phantom_box, scene.calib, size);
  if (!bbox) throw CannotProject("phantom box does not project into the image");
  const PixelRect rect = pixel_rect(*bbox, size);
  if (rect.empty()) throw CannotProject("phantom patch rounds to zero pixels");
  if (tpl.patch.empty() || tpl.mask.width != tpl.patch.width || tpl.mask.height != tpl.patch.height) {
    throw Error("template '" + tpl.template_id + "' has no usable patch");
  }

  ImageInjection out{scene.image, *bbox};
  // The unclipped projection drives the resampling so a partly clipped box
  // keeps its scale.
  const auto hull = box_image_hull(phantom_box, scene.calib);
  const ImageBBox full = hull ? *hull : *bbox;
  const double sx_scale = tpl.patch.width / std::max(full.width(), 1e-9);
  const double sy_scale = tpl.patch.height / std::max(full.height(), 1e-9);

  for (int y = rect.y0; y < rect.y1; ++y) {
    for (int x = rect.x0; x < rect.x1; ++x) {
      const double sx = (x + 0.5 - full.left) * sx_scale - 0.5;
      const double sy = (y + 0.5 - full.top) * sy_scale - 0.5;
      const double alpha = sample_bilinear(tpl.mask, sx, sy, 0);
      if (alpha <= 0.0) continue;
      std::uint8_t* dst = out.image.at(x, y);
      for (int c = 0; c < 3; ++c) {
        const double src = sample_bilinear(tpl.patch, sx, sy, c);
        const double blended = (alpha * src + (255.0 - alpha) * dst[c]) / 255.0;
        dst[c] = static_cast<std::uint8_t>(std::clamp(std::lround(blended), 0L, 255L));
      }
    }
  }
  return out;
}

std::vector<PaintedPoint> paint_points(const Image& image, const PointCloud& pc,
                                       std::span<const std::size_t> indices,
                                       const Calibration& calib) {
  std::vector<PaintedPoint> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    const Point& p = pc.points.at(i);
    const ImageProjection proj = rect_to_image(lidar_to_rect({p.x, p.y, p.z}, calib), calib);
    PaintedPoint rec;
    rec.index = i;
    rec.u = proj.u;
    rec.v = proj.v;
    if (!proj.behind_camera && proj.depth > 0.0 && proj.u >= 0.0 && proj.u < image.width &&
        proj.v >= 0.0 && proj.v < image.height) {
      const std::uint8_t* px = image.at(static_cast<int>(proj.u), static_cast<int>(proj.v));
      rec.painted = true;
      rec.rgb = image.channels >= 3 ? std::array<std::uint8_t, 3>{px[0], px[1], px[2]}
                                    : std::array<std::uint8_t, 3>{px[0], px[0], px[0]};
    }
    out.push_back(rec);
  }
  return out;
}

double verify_consistency(const Image& adv_image, const PointCloud& adv_cloud,
                          std::span<const std::size_t> injected, const ImageBBox& patch_bbox,
                          const Calibration& calib, ImageSize image_size) {
  if (injected.empty()) throw UndefinedConsistency("no injected points to verify");
  if (adv_image.width != image_size.width || adv_image.height != image_size.height) {
    throw Error("image size does not match the adversarial image");
  }
  const ImageBBox region = patch_bbox.dilated(kConsistencyDilationPx);
  std::size_t hits = 0;
  for (const auto& painted : paint_points(adv_image, adv_cloud, injected, calib)) {
    if (painted.painted && region.contains(painted.u, painted.v)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(injected.size());
}

// ---------------------------------------------------------------------------
// Manifests and augmentation

std::vector<std::size_t> AttackManifest::injected_indices() const {
  std::vector<std::size_t> out(injected_point_count);
  for (std::size_t i = 0; i < injected_point_count; ++i) out[i] = original_point_count + i;
  return out;
}

void to_json(nlohmann::json& j, const Box3D& b) {
  j = {{"center_bottom", {b.center_bottom.x(), b.center_bottom.y(), b.center_bottom.z()}},
       {"dims", {{"h", b.dims.h}, {"w", b.dims.w}, {"l", b.dims.l}}},
       {"rotation_y", b.rotation_y},
       {"class_name", b.class_name}};
}

void from_json(const nlohmann::json& j, Box3D& b) {
  const auto& c = j.at("center_bottom");
  b.center_bottom = {c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>()};
  const auto& d = j.at("dims");
  b.dims = {d.at("h").get<double>(), d.at("w").get<double>(), d.at("l").get<double>()};
  b.rotation_y = j.at("rotation_y").get<double>();
  b.class_name = j.at("class_name").get<std::string>();
}

void to_json(nlohmann::json& j, const AttackManifest& m) {
  j = {{"scene_id", m.scene_id},
       {"source_scene_id", m.source_scene_id},
       {"spec",
        {{"class_name", m.spec.class_name},
         {"target_location",
          {m.spec.target_location.x(), m.spec.target_location.y(), m.spec.target_location.z()}},
         {"yaw", m.spec.yaw},
         {"template_id", m.spec.template_id},
         {"seed", m.spec.seed}}},
       {"phantom_box", m.phantom_box},
       {"original_point_count", m.original_point_count},
       {"injected_point_count", m.injected_point_count},
       {"patch_bbox", bbox_json(m.patch_bbox)},
       {"consistency_fraction", m.consistency_fraction},
       {"seed", m.spec.seed},
       {"rng", "mt19937_64"},
       {"created_at", m.created_at}};
}

void from_json(const nlohmann::json& j, AttackManifest& m) {
  m.scene_id = j.at("scene_id").get<std::string>();
  m.source_scene_id = j.value("source_scene_id", m.scene_id);
  const auto& s = j.at("spec");
  m.spec.class_name = s.at("class_name").get<std::string>();
  const auto& t = s.at("target_location");
  m.spec.target_location = {t.at(0).get<double>(), t.at(1).get<double>(), t.at(2).get<double>()};
  m.spec.yaw = s.at("yaw").get<double>();
  m.spec.template_id = s.at("template_id").get<std::string>();
  m.spec.seed = s.at("seed").get<std::uint64_t>();
  m.phantom_box = j.at("phantom_box").get<Box3D>();
  m.original_point_count = j.at("original_point_count").get<std::size_t>();
  m.injected_point_count = j.at("injected_point_count").get<std::size_t>();
  m.patch_bbox = bbox_from_json(j.at("patch_bbox"));
  m.consistency_fraction = j.at("consistency_fraction").get<double>();
  m.created_at = j.value("created_at", "");
}

AttackManifest read_manifest(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_text(path)).get<AttackManifest>();
  } catch (const nlohmann::json::exception& e) {
    throw MalformedFile("bad manifest " + path.string() + ": " + e.what());
  }
}

void write_manifest(const fs::path& path, const AttackManifest& m) {
  write_text(path, nlohmann::json(m).dump(2) + "\n");
}

AugmentedScene augment_scene(const Scene& scene, const PhantomSpec& spec,
                             const TemplateLibrary& library, const fs::path& output_root,
                             const AugmentOptions& options) {
  const ObjectTemplate& tpl = library.at(spec.template_id);
  LidarInjection lidar = inject_lidar(scene, spec, tpl, options.injection);
  ImageInjection camera = inject_image(scene, spec, tpl, lidar.phantom_box);
  const double consistency =
      verify_consistency(camera.image, lidar.cloud, lidar.injected_indices, camera.patch_bbox,
                         scene.calib, size_of(camera.image));

  AugmentedScene out;
  AttackManifest& m = out.manifest;
  m.scene_id = options.output_scene_id.value_or(scene.scene_id);
  m.source_scene_id = scene.scene_id;
  m.spec = spec;
  m.phantom_box = lidar.phantom_box;
  m.original_point_count = scene.cloud.size();
  m.injected_point_count = lidar.injected_indices.size();
  m.patch_bbox = camera.patch_bbox;
  m.consistency_fraction = consistency;
  m.created_at = options.created_at;
  out.cloud = std::move(lidar.cloud);
  out.image = std::move(camera.image);

  if (options.write_outputs) {
    const ScenePaths paths = scene_paths(output_root, m.scene_id);
    write_png(paths.image, out.image);
    write_bytes(paths.velodyne, write_point_cloud(out.cloud));
    write_text(paths.calib,
               scene.calib_text.empty() ? write_calibration(scene.calib) : scene.calib_text);
    write_manifest(output_root / "manifests" / (m.scene_id + ".json"), m);
  }
  return out;
}

double reverify_manifest(const fs::path& output_root, const AttackManifest& m) {
  const Scene adv = load_scene(output_root, m.scene_id, {.require_labels = false});
  if (adv.cloud.size() != m.original_point_count + m.injected_point_count) {
    throw MalformedFile("point count of " + m.scene_id + " does not match its manifest");
  }
  const auto indices = m.injected_indices();
  return verify_consistency(adv.image, adv.cloud, indices, m.patch_bbox, adv.calib,
                            size_of(adv.image));
}

std::string reproducible_timestamp() {
  std::time_t t = 0;
  if (const char* env = std::getenv("SOURCE_DATE_EPOCH")) {
    t = static_cast<std::time_t>(std::strtoll(env, nullptr, 10));
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace phantom
