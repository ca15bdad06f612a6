#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "phantom/cli.hpp"
#include "phantom/errors.hpp"
#include "phantom/evaluation.hpp"
#include "phantom/phantom_engine.hpp"
#include "phantom/render.hpp"
#include "phantom/surrogate_detector.hpp"
#include "phantom/synthetic.hpp"

namespace py = pybind11;
using namespace phantom;

namespace {

py::array_t<float> cloud_to_array(const PointCloud& pc) {
  py::array_t<float> out({static_cast<py::ssize_t>(pc.size()), py::ssize_t{4}});
  auto v = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < pc.size(); ++i) {
    const Point& p = pc.points[i];
    v(i, 0) = p.x;
    v(i, 1) = p.y;
    v(i, 2) = p.z;
    v(i, 3) = p.intensity;
  }
  return out;
}

PointCloud array_to_cloud(const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2 || a.shape(1) != 4) throw std::invalid_argument("point array must have shape (N, 4)");
  PointCloud pc;
  pc.points.resize(static_cast<std::size_t>(a.shape(0)));
  auto v = a.unchecked<2>();
  for (std::size_t i = 0; i < pc.size(); ++i) pc.points[i] = {v(i, 0), v(i, 1), v(i, 2), v(i, 3)};
  return pc;
}

py::array_t<std::uint8_t> image_to_array(const Image& img) {
  py::array_t<std::uint8_t> out({img.height, img.width, img.channels});
  std::memcpy(out.mutable_data(), img.data.data(), img.data.size());
  return out;
}

Image array_to_image(const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw std::invalid_argument("image array must have shape (H, W, 3)");
  Image img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)), 3);
  std::memcpy(img.data.data(), a.data(), img.data.size());
  return img;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Camera-LiDAR phantom object injection and evaluation";

  auto base = py::register_exception<Error>(m, "PhantomError", PyExc_RuntimeError);
  py::register_exception<AttemptAborted>(m, "AttemptAborted", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

  py::class_<Dims>(m, "Dims")
      .def(py::init<>())
      .def(py::init([](double h, double w, double l) { return Dims{h, w, l}; }), py::arg("h"), py::arg("w"),
           py::arg("l"))
      .def_readwrite("h", &Dims::h)
      .def_readwrite("w", &Dims::w)
      .def_readwrite("l", &Dims::l);

  py::class_<Box3D>(m, "Box3D")
      .def(py::init<>())
      .def(py::init([](const Eigen::Vector3d& c, const Dims& d, double ry, std::string cls) {
             return Box3D{c, d, ry, std::move(cls)};
           }),
           py::arg("center_bottom"), py::arg("dims"), py::arg("rotation_y") = 0.0, py::arg("class_name") = "")
      .def_readwrite("center_bottom", &Box3D::center_bottom)
      .def_readwrite("dims", &Box3D::dims)
      .def_readwrite("rotation_y", &Box3D::rotation_y)
      .def_readwrite("class_name", &Box3D::class_name);

  py::class_<Calibration>(m, "Calibration")
      .def_readwrite("p2", &Calibration::p2)
      .def_readwrite("r0_rect", &Calibration::r0_rect)
      .def_readwrite("tr_velo_to_cam", &Calibration::tr_velo_to_cam);

  py::class_<Scene>(m, "Scene")
      .def_readonly("scene_id", &Scene::scene_id)
      .def_readonly("calib", &Scene::calib)
      .def_property_readonly("points", [](const Scene& s) { return cloud_to_array(s.cloud); })
      .def_property_readonly("image", [](const Scene& s) { return image_to_array(s.image); })
      .def_property_readonly("boxes", [](const Scene& s) {
        std::vector<Box3D> out;
        for (const auto& l : s.labels) {
          if (!l.is_dont_care()) out.push_back(box_from_label(l));
        }
        return out;
      });

  m.def("parse_calibration", &parse_calibration, py::arg("text"));
  m.def("reference_calibration", &reference_calibration);
  m.def("load_scene", [](const std::filesystem::path& root, const std::string& id, bool require_labels) {
    return load_scene(root, id, LoadOptions{.require_labels = require_labels});
  }, py::arg("root"), py::arg("scene_id"), py::arg("require_labels") = true);
  m.def("read_points", [](const std::filesystem::path& path) { return cloud_to_array(parse_point_cloud(read_bytes(path))); },
        py::arg("path"));
  m.def("write_points", [](const std::filesystem::path& path, const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
    write_bytes(path, write_point_cloud(array_to_cloud(a)));
  }, py::arg("path"), py::arg("points"));
  m.def("write_synthetic_dataset", [](const std::filesystem::path& root, std::size_t count, std::uint64_t seed) {
    return write_synthetic_dataset(root, count, seed);
  }, py::arg("root"), py::arg("count"), py::arg("seed") = 0);

  m.def("project", [](const py::array_t<float, py::array::c_style | py::array::forcecast>& pts, const Calibration& c) {
    const PointCloud pc = array_to_cloud(pts);
    py::array_t<double> out({static_cast<py::ssize_t>(pc.size()), py::ssize_t{3}});
    auto v = out.mutable_unchecked<2>();
    for (std::size_t i = 0; i < pc.size(); ++i) {
      const auto& p = pc.points[i];
      const ImageProjection proj = rect_to_image(lidar_to_rect({p.x, p.y, p.z}, c), c);
      v(i, 0) = proj.u;
      v(i, 1) = proj.v;
      v(i, 2) = proj.depth;
    }
    return out;
  }, py::arg("points"), py::arg("calib"), "Returns (N, 3) array of u, v, depth.");
  m.def("bev_iou", &bev_iou, py::arg("a"), py::arg("b"));
  m.def("rotation_y_from_yaw", &rotation_y_from_yaw, py::arg("yaw"), py::arg("calib"));
  m.def("yaw_from_rotation_y", &yaw_from_rotation_y, py::arg("rotation_y"), py::arg("calib"));

  py::class_<TemplateLibrary>(m, "TemplateLibrary")
      .def_static("load", &TemplateLibrary::load, py::arg("dir"))
      .def("save", &TemplateLibrary::save, py::arg("dir"))
      .def("__len__", &TemplateLibrary::size)
      .def("ids", [](const TemplateLibrary& lib, const std::string& cls) {
        std::vector<std::string> out;
        for (const auto* t : lib.of_class(cls)) out.push_back(t->template_id);
        return out;
      }, py::arg("class_name"));

  m.def("extract_templates", [](const std::filesystem::path& root, const std::vector<std::string>& classes,
                                std::size_t min_points) {
    std::vector<Scene> scenes;
    for (const auto& id : list_scene_ids(root)) scenes.push_back(load_scene(root, id));
    return extract_templates(scenes, std::set<std::string>(classes.begin(), classes.end()), min_points);
  }, py::arg("data_root"), py::arg("classes") = std::vector<std::string>{"Car", "Pedestrian"},
        py::arg("min_points") = 50);

  py::class_<Detection>(m, "Detection")
      .def_readonly("box", &Detection::box)
      .def_readonly("score", &Detection::score)
      .def_readonly("point_count", &Detection::point_count);
  m.def("detect", [](const py::array_t<float, py::array::c_style | py::array::forcecast>& pts, const Calibration& c) {
    return detect(array_to_cloud(pts), c);
  }, py::arg("points"), py::arg("calib"));

  py::class_<AttackOutcome>(m, "AttackOutcome")
      .def_readonly("scene_id", &AttackOutcome::scene_id)
      .def_readonly("class_name", &AttackOutcome::class_name)
      .def_readonly("success", &AttackOutcome::success)
      .def_readonly("matched_score", &AttackOutcome::matched_score)
      .def_readonly("matched_iou", &AttackOutcome::matched_iou)
      .def_property_readonly("failure_reason", [](const AttackOutcome& o) -> std::optional<std::string> {
        if (!o.failure_reason) return std::nullopt;
        return std::string(to_string(*o.failure_reason));
      });

  m.def("run_campaign", [](const std::filesystem::path& data_root, const TemplateLibrary& lib,
                           const std::filesystem::path& out, std::vector<std::string> classes, std::size_t attempts,
                           std::uint64_t seed, bool inject, unsigned workers) {
    CampaignOptions opts;
    opts.data_root = data_root;
    opts.scene_ids = list_scene_ids(data_root);
    opts.classes = std::move(classes);
    opts.attempts_per_class = attempts;
    opts.seed = seed;
    opts.output_root = out;
    opts.inject = inject;
    opts.workers = workers;
    py::gil_scoped_release release;
    const auto result = run_campaign(lib, surrogate_detector(), opts);
    return std::make_pair(result.outcomes, render_summary_table(result.summary));
  }, py::arg("data_root"), py::arg("library"), py::arg("out"),
        py::arg("classes") = std::vector<std::string>{"Car", "Pedestrian"}, py::arg("attempts") = 200,
        py::arg("seed") = 0, py::arg("inject") = true, py::arg("workers") = 0,
        "Returns (outcomes, summary table text).");

  m.def("summarize_log", [](const std::string& text) {
    const auto s = summarize(parse_results_log(text));
    return py::module_::import("json").attr("loads")(summary_to_json(s).dump());
  }, py::arg("text"));
  m.def("render_summary_log", [](const std::string& text) {
    return render_summary_table(summarize(parse_results_log(text)));
  }, py::arg("text"));

  m.def("render_bev", [](const py::array_t<float, py::array::c_style | py::array::forcecast>& pts,
                         const std::vector<Box3D>& boxes, const Calibration& c) {
    std::vector<StyledBox> styled;
    for (const auto& b : boxes) styled.push_back({b, BoxRole::kReal, std::nullopt});
    return image_to_array(render_bev(array_to_cloud(pts), styled, c));
  }, py::arg("points"), py::arg("boxes"), py::arg("calib"));
  m.def("render_overlay", [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& img,
                             const std::vector<Box3D>& boxes, const Calibration& c) {
    std::vector<StyledBox> styled;
    for (const auto& b : boxes) styled.push_back({b, BoxRole::kPhantom, std::nullopt});
    return image_to_array(render_overlay(array_to_image(img), styled, c));
  }, py::arg("image"), py::arg("boxes"), py::arg("calib"));

  m.def("cli", [](std::vector<std::string> args) {
    args.insert(args.begin(), "phantom");
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli(args, out, err);
    return py::make_tuple(code, out.str(), err.str());
  }, py::arg("args"), "Runs a CLI command in-process; returns (exit_code, stdout, stderr).");
}
