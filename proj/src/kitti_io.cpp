#include "phantom/kitti_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "phantom/errors.hpp"

namespace phantom {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kBytesPerPoint = 16;
constexpr double kOrthonormalTolerance = 1e-3;

float load_le_float(const std::byte* p) {
  std::uint32_t bits = 0;
  std::memcpy(&bits, p, sizeof(bits));
  if constexpr (std::endian::native == std::endian::big) {
    bits = __builtin_bswap32(bits);
  }
  return std::bit_cast<float>(bits);
}

void store_le_float(float value, std::byte* p) {
  auto bits = std::bit_cast<std::uint32_t>(value);
  if constexpr (std::endian::native == std::endian::big) {
    bits = __builtin_bswap32(bits);
  }
  std::memcpy(p, &bits, sizeof(bits));
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) {
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

std::optional<double> parse_double(std::string_view token) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double value = 0.0;
  const auto* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::optional<int> parse_int(std::string_view token) {
  int value = 0;
  const auto* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

bool nearly_orthonormal(const Eigen::Matrix3d& r) {
  const Eigen::Matrix3d residual = r * r.transpose() - Eigen::Matrix3d::Identity();
  return residual.cwiseAbs().maxCoeff() <= kOrthonormalTolerance;
}

void append_fixed2(std::string& out, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), " %.2f", v);
  out += buf;
}

}  // namespace

PointCloud parse_point_cloud(std::span<const std::byte> bytes) {
  if (bytes.size() % kBytesPerPoint != 0) {
    throw MalformedFile("velodyne byte length " + std::to_string(bytes.size()) +
                        " is not a multiple of 16");
  }
  PointCloud pc;
  const std::size_t count = bytes.size() / kBytesPerPoint;
  pc.points.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::byte* rec = bytes.data() + i * kBytesPerPoint;
    Point& p = pc.points[i];
    p.x = load_le_float(rec);
    p.y = load_le_float(rec + 4);
    p.z = load_le_float(rec + 8);
    p.intensity = load_le_float(rec + 12);
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z) ||
        !std::isfinite(p.intensity)) {
      throw MalformedPoint(i, "non-finite value");
    }
  }
  return pc;
}

std::vector<std::byte> write_point_cloud(const PointCloud& pc) {
  std::vector<std::byte> out(pc.size() * kBytesPerPoint);
  for (std::size_t i = 0; i < pc.size(); ++i) {
    std::byte* rec = out.data() + i * kBytesPerPoint;
    const Point& p = pc.points[i];
    store_le_float(p.x, rec);
    store_le_float(p.y, rec + 4);
    store_le_float(p.z, rec + 8);
    store_le_float(p.intensity, rec + 12);
  }
  return out;
}

Calibration parse_calibration(std::string_view text) {
  std::map<std::string, std::vector<double>, std::less<>> entries;
  for (std::string_view line : split_lines(text)) {
    const std::size_t colon = line.find(':');
    if (colon == std::string_view::npos) continue;
    auto key_tokens = split_ws(line.substr(0, colon));
    if (key_tokens.size() != 1) continue;
    const std::string key(key_tokens.front());
    if (key != "P2" && key != "R0_rect" && key != "Tr_velo_to_cam") continue;
    std::vector<double> values;
    for (std::string_view tok : split_ws(line.substr(colon + 1))) {
      auto v = parse_double(tok);
      if (!v) throw MalformedCalibration(key, "unparsable number '" + std::string(tok) + "'");
      values.push_back(*v);
    }
    entries[key] = std::move(values);
  }

  auto take = [&](const char* key, std::size_t count) -> const std::vector<double>& {
    auto it = entries.find(key);
    if (it == entries.end()) throw MalformedCalibration(key, "missing key");
    if (it->second.size() != count) {
      throw MalformedCalibration(key, "expected " + std::to_string(count) +
                                          " numbers, got " +
                                          std::to_string(it->second.size()));
    }
    return it->second;
  };

  Calibration calib;
  const auto& p2 = take("P2", 12);
  const auto& r0 = take("R0_rect", 9);
  const auto& tr = take("Tr_velo_to_cam", 12);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) {
      calib.p2(r, c) = p2[r * 4 + c];
      calib.tr_velo_to_cam(r, c) = tr[r * 4 + c];
    }
    for (int c = 0; c < 3; ++c) calib.r0_rect(r, c) = r0[r * 3 + c];
  }
  if (!nearly_orthonormal(calib.r0_rect)) {
    throw MalformedCalibration("R0_rect", "not orthonormal within 1e-3");
  }
  if (!nearly_orthonormal(calib.tr_velo_to_cam.leftCols<3>())) {
    throw MalformedCalibration("Tr_velo_to_cam", "rotation block not orthonormal within 1e-3");
  }
  return calib;
}

std::string write_calibration(const Calibration& calib) {
  std::string out;
  char buf[64];
  auto emit = [&](const char* key, auto&& matrix, int rows, int cols) {
    out += key;
    out += ':';
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        std::snprintf(buf, sizeof(buf), " %.12e", matrix(r, c));
        out += buf;
      }
    }
    out += '\n';
  };
  emit("P2", calib.p2, 3, 4);
  emit("R0_rect", calib.r0_rect, 3, 3);
  emit("Tr_velo_to_cam", calib.tr_velo_to_cam, 3, 4);
  return out;
}

std::vector<ObjectLabel> parse_labels(std::string_view text) {
  std::vector<ObjectLabel> labels;
  std::size_t line_no = 0;
  for (std::string_view line : split_lines(text)) {
    ++line_no;
    const auto fields = split_ws(line);
    if (fields.empty()) continue;
    if (fields.size() != 15 && fields.size() != 16) {
      throw MalformedLabel(line_no, "expected 15 or 16 fields, got " +
                                        std::to_string(fields.size()));
    }
    auto num = [&](std::size_t i) {
      auto v = parse_double(fields[i]);
      if (!v) {
        throw MalformedLabel(line_no, "unparsable field " + std::to_string(i + 1) +
                                          " '" + std::string(fields[i]) + "'");
      }
      return *v;
    };
    ObjectLabel label;
    label.class_name = std::string(fields[0]);
    label.truncation = num(1);
    auto occ = parse_int(fields[2]);
    if (!occ) throw MalformedLabel(line_no, "occlusion is not an integer");
    label.occlusion = *occ;
    label.alpha = num(3);
    for (std::size_t k = 0; k < 4; ++k) label.bbox2d[k] = num(4 + k);
    for (std::size_t k = 0; k < 3; ++k) label.dims[k] = num(8 + k);
    for (std::size_t k = 0; k < 3; ++k) label.location[k] = num(11 + k);
    label.rotation_y = num(14);
    if (fields.size() == 16) {
      const double s = num(15);
      if (s < 0.0 || s > 1.0) throw MalformedLabel(line_no, "score outside [0,1]");
      label.score = s;
    }
    // DontCare regions carry placeholder geometry (-1 dims, -1000 location).
    if (!label.is_dont_care()) {
      if (label.dims[0] <= 0.0 || label.dims[1] <= 0.0 || label.dims[2] <= 0.0) {
        throw MalformedLabel(line_no, "non-positive box dimensions");
      }
      if (!(label.bbox2d[0] < label.bbox2d[2]) || !(label.bbox2d[1] < label.bbox2d[3])) {
        throw MalformedLabel(line_no, "degenerate 2D box");
      }
    }
    labels.push_back(std::move(label));
  }
  return labels;
}

std::string write_labels(std::span<const ObjectLabel> labels) {
  std::string out;
  char buf[32];
  for (const auto& l : labels) {
    out += l.class_name;
    append_fixed2(out, l.truncation);
    std::snprintf(buf, sizeof(buf), " %d", l.occlusion);
    out += buf;
    append_fixed2(out, l.alpha);
    for (double v : l.bbox2d) append_fixed2(out, v);
    for (double v : l.dims) append_fixed2(out, v);
    for (double v : l.location) append_fixed2(out, v);
    append_fixed2(out, l.rotation_y);
    if (l.score) append_fixed2(out, *l.score);
    out += '\n';
  }
  return out;
}

std::vector<std::byte> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MalformedFile("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  std::vector<std::byte> bytes(size);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
  if (!in) throw MalformedFile("short read from " + path.string());
  return bytes;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MalformedFile("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& path, std::span<const std::byte> bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw MalformedFile("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw MalformedFile("short write to " + path.string());
}

void write_text(const fs::path& path, std::string_view text) {
  write_bytes(path, std::as_bytes(std::span(text.data(), text.size())));
}

ScenePaths scene_paths(const fs::path& root, std::string_view scene_id) {
  const std::string id(scene_id);
  return {root / "image_2" / (id + ".png"), root / "velodyne" / (id + ".bin"),
          root / "calib" / (id + ".txt"), root / "label_2" / (id + ".txt")};
}

Scene load_scene(const fs::path& root, std::string_view scene_id,
                 const LoadOptions& options) {
  const ScenePaths paths = scene_paths(root, scene_id);
  if (!fs::exists(paths.image)) throw SceneNotFound("image_2", paths.image.string());
  if (!fs::exists(paths.velodyne)) throw SceneNotFound("velodyne", paths.velodyne.string());
  if (!fs::exists(paths.calib)) throw SceneNotFound("calib", paths.calib.string());
  const bool has_labels = fs::exists(paths.label);
  if (options.require_labels && !has_labels) {
    throw SceneNotFound("label_2", paths.label.string());
  }

  Scene scene;
  scene.scene_id = std::string(scene_id);
  scene.image = read_png(paths.image);
  scene.cloud = parse_point_cloud(read_bytes(paths.velodyne));
  if (scene.cloud.empty()) {
    throw MalformedFile("empty point cloud: " + paths.velodyne.string());
  }
  scene.calib_text = read_text(paths.calib);
  scene.calib = parse_calibration(scene.calib_text);
  if (has_labels) scene.labels = parse_labels(read_text(paths.label));
  return scene;
}

void save_scene(const Scene& scene, const fs::path& root, bool with_labels) {
  const ScenePaths paths = scene_paths(root, scene.scene_id);
  write_png(paths.image, scene.image);
  write_bytes(paths.velodyne, write_point_cloud(scene.cloud));
  write_text(paths.calib, scene.calib_text.empty() ? write_calibration(scene.calib)
                                                   : scene.calib_text);
  if (with_labels) write_text(paths.label, write_labels(scene.labels));
}

std::vector<std::string> list_scene_ids(const fs::path& root) {
  std::vector<std::string> ids;
  const fs::path dir = root / "velodyne";
  if (!fs::is_directory(dir)) return ids;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".bin") {
      ids.push_back(entry.path().stem().string());
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace phantom
