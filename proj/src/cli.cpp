#include "phantom/cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "phantom/config.hpp"
#include "phantom/errors.hpp"
#include "phantom/evaluation.hpp"
#include "phantom/phantom_engine.hpp"
#include "phantom/random.hpp"
#include "phantom/render.hpp"
#include "phantom/surrogate_detector.hpp"
#include "phantom/synthetic.hpp"

namespace phantom {

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::uint64_t seed = 0;
  std::string out;
  std::string config;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "random seed");
  sub->add_option("--out", c.out, "output path");
  sub->add_option("--config", c.config, "key = value configuration file")->check(CLI::ExistingFile);
}

KeyValueConfig load_config(const Common& c) {
  return c.config.empty() ? KeyValueConfig{} : KeyValueConfig::load(c.config);
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string(flag) + " is required");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::pair<double, double> parse_range(const std::string& text) {
  const auto colon = text.find(':');
  double lo = 0.0;
  double hi = 0.0;
  if (colon == std::string::npos) throw UsageError("--range must look like 20:40");
  const char* b = text.data();
  const char* e = b + text.size();
  auto r1 = std::from_chars(b, b + colon, lo);
  auto r2 = std::from_chars(b + colon + 1, e, hi);
  if (r1.ec != std::errc{} || r1.ptr != b + colon || r2.ec != std::errc{} || r2.ptr != e ||
      !(hi > lo) || !(lo > 0.0)) {
    throw UsageError("--range must look like 20:40 with 0 < min < max");
  }
  return {lo, hi};
}

std::vector<std::string> scene_list(const fs::path& root, const std::string& explicit_ids) {
  std::vector<std::string> ids = explicit_ids.empty() ? list_scene_ids(root) : split_list(explicit_ids);
  if (ids.empty()) throw ConfigError("no scenes found under " + root.string());
  return ids;
}

MatchThresholds thresholds_from(const KeyValueConfig& cfg, std::optional<double> confidence,
                                std::optional<double> overlap) {
  MatchThresholds t;
  t.confidence = confidence.value_or(cfg.get_double("evaluation.confidence_threshold", t.confidence));
  t.overlap = overlap.value_or(cfg.get_double("evaluation.overlap_iou", t.overlap));
  if (!(t.confidence >= 0.0 && t.confidence <= 1.0)) {
    throw UsageError("confidence threshold must be in [0, 1]");
  }
  if (!(t.overlap >= 0.0 && t.overlap <= 1.0)) throw UsageError("overlap IoU must be in [0, 1]");
  return t;
}

void print_summary(std::ostream& out, const CampaignSummary& s) { out << render_summary_table(s); }

std::vector<StyledBox> label_boxes(const std::vector<ObjectLabel>& labels, BoxRole role) {
  std::vector<StyledBox> out;
  for (const auto& l : labels) {
    if (l.is_dont_care()) continue;
    out.push_back({box_from_label(l), role, l.score});
  }
  return out;
}

}  // namespace

int cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Camera-LiDAR phantom object toolkit", "phantom"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  // synth
  Common synth_c;
  std::size_t synth_count = 20;
  auto* synth = app.add_subcommand("synth", "write procedural KITTI-layout scenes");
  add_common(synth, synth_c);
  synth->add_option("--count", synth_count, "number of scenes")->check(CLI::PositiveNumber);

  // extract-templates
  Common ext_c;
  std::string ext_root;
  std::string ext_classes = "Car,Pedestrian";
  std::string ext_scenes;
  std::size_t ext_min_points = 50;
  auto* ext = app.add_subcommand("extract-templates", "build a template library from labeled scenes");
  add_common(ext, ext_c);
  ext->add_option("--data-root", ext_root, "KITTI-layout root");
  ext->add_option("--classes", ext_classes, "comma-separated classes");
  ext->add_option("--scenes", ext_scenes, "comma-separated scene ids (default: all)");
  ext->add_option("--min-points", ext_min_points, "minimum points per template");

  // inject
  Common inj_c;
  std::string inj_root;
  std::string inj_scene;
  std::string inj_library;
  std::string inj_class = "Car";
  std::string inj_template;
  std::string inj_output_id;
  std::optional<double> inj_x;
  std::optional<double> inj_y;
  std::optional<double> inj_yaw;
  std::string inj_range;
  auto* inj = app.add_subcommand("inject", "augment one scene with a phantom object");
  add_common(inj, inj_c);
  inj->add_option("--data-root", inj_root, "KITTI-layout root");
  inj->add_option("--scene", inj_scene, "source scene id");
  inj->add_option("--library", inj_library, "template library directory");
  inj->add_option("--class", inj_class, "phantom class");
  inj->add_option("--template", inj_template, "template id (default: seeded pick)");
  inj->add_option("--output-id", inj_output_id, "scene id in the output tree");
  inj->add_option("--x", inj_x, "target forward distance, LiDAR frame");
  inj->add_option("--y", inj_y, "target lateral offset, LiDAR frame");
  inj->add_option("--yaw", inj_yaw, "target yaw, LiDAR frame");
  inj->add_option("--range", inj_range, "forward band for sampled placement, e.g. 20:40");

  // campaign
  Common cam_c;
  std::string cam_root;
  std::string cam_library;
  std::string cam_classes = "Car,Pedestrian";
  std::string cam_scenes;
  std::size_t cam_attempts = 200;
  std::string cam_range;
  std::optional<double> cam_conf;
  std::optional<double> cam_iou;
  unsigned cam_workers = 0;
  bool cam_no_attack = false;
  bool cam_exclude_aborted = false;
  bool cam_no_scenes = false;
  auto* cam = app.add_subcommand("campaign", "run a batch attack campaign");
  add_common(cam, cam_c);
  cam->add_option("--data-root", cam_root, "KITTI-layout root");
  cam->add_option("--library", cam_library, "template library directory");
  cam->add_option("--classes", cam_classes, "comma-separated classes");
  cam->add_option("--scenes", cam_scenes, "comma-separated scene ids (default: all)");
  cam->add_option("--attempts", cam_attempts, "attempts per class")->check(CLI::PositiveNumber);
  cam->add_option("--range", cam_range, "forward placement band, e.g. 20:40");
  cam->add_option("--confidence-threshold", cam_conf, "success needs score above this");
  cam->add_option("--overlap-iou", cam_iou, "minimum BEV IoU with the phantom box");
  cam->add_option("--workers", cam_workers, "worker threads (0: all cores)");
  cam->add_flag("--no-attack", cam_no_attack, "control run without injection");
  cam->add_flag("--exclude-aborted", cam_exclude_aborted, "drop aborted attempts from denominators");
  cam->add_flag("--no-scenes", cam_no_scenes, "skip writing augmented scenes");

  // detect
  Common det_c;
  std::string det_root;
  std::string det_scenes;
  auto* det = app.add_subcommand("detect", "run the surrogate detector and write result files");
  add_common(det, det_c);
  det->add_option("--data-root", det_root, "KITTI-layout root");
  det->add_option("--scenes", det_scenes, "comma-separated scene ids (default: all)");

  // evaluate
  Common ev_c;
  std::string ev_root;
  std::string ev_manifests;
  std::string ev_results;
  std::optional<double> ev_conf;
  std::optional<double> ev_iou;
  bool ev_exclude_aborted = false;
  auto* ev = app.add_subcommand("evaluate", "score result files against manifests");
  add_common(ev, ev_c);
  ev->add_option("--data-root", ev_root,
                 "directory holding manifests/ and results/, or a results.jsonl log");
  ev->add_option("--manifests", ev_manifests, "manifest directory");
  ev->add_option("--results", ev_results, "result file directory");
  ev->add_option("--confidence-threshold", ev_conf, "success needs score above this");
  ev->add_option("--overlap-iou", ev_iou, "minimum BEV IoU with the phantom box");
  ev->add_flag("--exclude-aborted", ev_exclude_aborted, "drop aborted attempts from denominators");

  // render
  Common ren_c;
  std::string ren_mode = "bev";
  std::string ren_root;
  std::string ren_scene;
  std::string ren_manifest;
  std::string ren_results;
  bool ren_no_labels = false;
  auto* ren = app.add_subcommand("render", "draw a BEV raster or a camera overlay");
  add_common(ren, ren_c);
  ren->add_option("--mode", ren_mode, "bev or overlay")->check(CLI::IsMember({"bev", "overlay"}));
  ren->add_option("--data-root", ren_root, "KITTI-layout root");
  ren->add_option("--scene", ren_scene, "scene id");
  ren->add_option("--manifest", ren_manifest, "manifest whose phantom box is drawn");
  ren->add_option("--results", ren_results, "result file whose detections are drawn");
  ren->add_flag("--no-labels", ren_no_labels, "do not draw ground-truth labels");

  // replay
  Common rep_c;
  std::string rep_root;
  std::string rep_manifest;
  auto* rep = app.add_subcommand("replay", "re-verify a persisted augmentation");
  add_common(rep, rep_c);
  rep->add_option("--data-root", rep_root, "augmented output tree");
  rep->add_option("--manifest", rep_manifest, "manifest path (default: every manifest)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    for (char& ch : msg) {
      if (ch == '\n') ch = ' ';
    }
    err << "phantom: usage error: " << msg << "\n";
    return 2;
  }

  try {
    if (*synth) {
      require(synth_c.out, "--out");
      const auto ids = write_synthetic_dataset(synth_c.out, synth_count, synth_c.seed);
      out << "wrote " << ids.size() << " scenes to " << synth_c.out << "\n";
    } else if (*ext) {
      require(ext_root, "--data-root");
      require(ext_c.out, "--out");
      const auto classes = split_list(ext_classes);
      if (classes.empty()) throw UsageError("--classes is empty");
      std::vector<Scene> scenes;
      for (const auto& id : scene_list(ext_root, ext_scenes)) scenes.push_back(load_scene(ext_root, id));
      const TemplateLibrary lib =
          extract_templates(scenes, std::set<std::string>(classes.begin(), classes.end()), ext_min_points);
      lib.save(ext_c.out);
      for (const auto& cls : classes) {
        out << cls << ": " << lib.of_class(cls).size() << " templates\n";
      }
    } else if (*inj) {
      require(inj_root, "--data-root");
      require(inj_scene, "--scene");
      require(inj_library, "--library");
      require(inj_c.out, "--out");
      if (inj_x.has_value() != inj_y.has_value()) throw UsageError("--x and --y go together");
      std::optional<std::pair<double, double>> band;
      if (!inj_range.empty()) band = parse_range(inj_range);
      const KeyValueConfig cfg = load_config(inj_c);
      PlacementConfig pcfg = PlacementConfig::from_config(cfg);
      if (band) std::tie(pcfg.forward_min, pcfg.forward_max) = *band;
      const TemplateLibrary lib = TemplateLibrary::load(inj_library);
      const Scene scene = load_scene(inj_root, inj_scene);
      Rng rng(derive_seed(inj_c.seed, hash_string(inj_scene), hash_string(inj_class)));
      PhantomSpec spec;
      spec.class_name = inj_class;
      if (inj_template.empty()) {
        const auto candidates = lib.of_class(inj_class);
        if (candidates.empty()) throw EmptyLibrary("library has no '" + inj_class + "' templates");
        spec.template_id = candidates[rng.below(candidates.size())]->template_id;
      } else {
        spec.template_id = lib.at(inj_template).template_id;
      }
      const std::uint64_t placement_seed = rng.next_u64();
      if (inj_x) {
        spec.target_location = {*inj_x, *inj_y, estimate_ground_height(scene.cloud, *inj_x, *inj_y, pcfg)};
        spec.yaw = normalize_angle(inj_yaw.value_or(0.0));
      } else {
        const auto placement = sample_placement(scene, lib, inj_class, placement_seed, pcfg);
        if (!placement) throw NoValidPlacement("no valid placement for scene " + inj_scene);
        spec.target_location = placement->target_location;
        spec.yaw = inj_yaw ? normalize_angle(*inj_yaw) : placement->yaw;
      }
      spec.seed = rng.next_u64();
      AugmentOptions opts;
      if (!inj_output_id.empty()) opts.output_scene_id = inj_output_id;
      opts.created_at = reproducible_timestamp();
      opts.injection.min_injected_points = static_cast<std::size_t>(
          cfg.get_int("injection.min_injected_points", static_cast<long long>(opts.injection.min_injected_points)));
      const AugmentedScene adv = augment_scene(scene, spec, lib, inj_c.out, opts);
      char buf[160];
      std::snprintf(buf, sizeof(buf), "%s: injected %zu points, consistency %.4f\n",
                    adv.manifest.scene_id.c_str(), adv.manifest.injected_point_count,
                    adv.manifest.consistency_fraction);
      out << buf;
    } else if (*cam) {
      require(cam_root, "--data-root");
      require(cam_library, "--library");
      require(cam_c.out, "--out");
      std::optional<std::pair<double, double>> band;
      if (!cam_range.empty()) band = parse_range(cam_range);
      const KeyValueConfig cfg = load_config(cam_c);
      CampaignOptions opts;
      opts.data_root = cam_root;
      opts.scene_ids = scene_list(cam_root, cam_scenes);
      opts.classes = split_list(cam_classes);
      if (opts.classes.empty()) throw UsageError("--classes is empty");
      opts.attempts_per_class = cam_attempts;
      opts.seed = cam_c.seed;
      opts.output_root = cam_c.out;
      opts.thresholds = thresholds_from(cfg, cam_conf, cam_iou);
      opts.placement = PlacementConfig::from_config(cfg);
      if (band) std::tie(opts.placement.forward_min, opts.placement.forward_max) = *band;
      opts.injection.min_injected_points = static_cast<std::size_t>(
          cfg.get_int("injection.min_injected_points", static_cast<long long>(opts.injection.min_injected_points)));
      opts.inject = !cam_no_attack;
      opts.policy = cam_exclude_aborted ? DenominatorPolicy::kExcludeAborted : DenominatorPolicy::kCountAborted;
      opts.workers = cam_workers;
      opts.write_scenes = !cam_no_scenes;
      opts.created_at = reproducible_timestamp();
      const TemplateLibrary lib = TemplateLibrary::load(cam_library);
      const CampaignResult result = run_campaign(lib, surrogate_detector(DetectorConfig::from_config(cfg)), opts);
      print_summary(out, result.summary);
    } else if (*det) {
      require(det_root, "--data-root");
      require(det_c.out, "--out");
      const KeyValueConfig cfg = load_config(det_c);
      const DetectorConfig dcfg = DetectorConfig::from_config(cfg);
      fs::create_directories(det_c.out);
      std::size_t total = 0;
      const auto ids = scene_list(det_root, det_scenes);
      for (const auto& id : ids) {
        const Scene scene = load_scene(det_root, id, LoadOptions{.require_labels = false});
        const auto detections = detect(scene.cloud, scene.calib, dcfg);
        const auto labels = detections_to_labels(
            detections, scene.calib, ImageSize{scene.image.width, scene.image.height});
        write_text(fs::path(det_c.out) / (id + ".txt"), write_labels(labels));
        total += labels.size();
      }
      out << "wrote " << ids.size() << " result files, " << total << " detections\n";
    } else if (*ev) {
      const KeyValueConfig cfg = load_config(ev_c);
      const MatchThresholds t = thresholds_from(cfg, ev_conf, ev_iou);
      std::vector<AttackOutcome> outcomes;
      fs::path manifests = ev_manifests;
      fs::path results = ev_results;
      if (!ev_root.empty()) {
        if (manifests.empty()) manifests = fs::path(ev_root) / "manifests";
        if (results.empty()) results = fs::path(ev_root) / "results";
      }
      if (manifests.empty()) throw UsageError("--data-root or --manifests is required");
      if (!fs::is_directory(manifests) && !ev_root.empty() &&
          fs::exists(fs::path(ev_root) / "results.jsonl")) {
        outcomes = parse_results_log(read_text(fs::path(ev_root) / "results.jsonl"));
      } else {
        outcomes = evaluate_result_files(manifests, results, t);
      }
      const CampaignSummary s = summarize(
          outcomes, ev_exclude_aborted ? DenominatorPolicy::kExcludeAborted : DenominatorPolicy::kCountAborted);
      if (!ev_c.out.empty()) {
        fs::create_directories(ev_c.out);
        write_text(fs::path(ev_c.out) / "results.jsonl", format_results_log(outcomes));
        write_text(fs::path(ev_c.out) / "summary.json", summary_to_json(s).dump(2) + "\n");
        write_text(fs::path(ev_c.out) / "summary.txt", render_summary_table(s));
      }
      print_summary(out, s);
    } else if (*ren) {
      require(ren_root, "--data-root");
      require(ren_scene, "--scene");
      require(ren_c.out, "--out");
      const KeyValueConfig cfg = load_config(ren_c);
      const RenderStyle style = RenderStyle::from_config(cfg);
      const Scene scene = load_scene(ren_root, ren_scene, LoadOptions{.require_labels = false});
      std::vector<StyledBox> boxes;
      if (!ren_no_labels) boxes = label_boxes(scene.labels, BoxRole::kReal);
      if (!ren_manifest.empty()) {
        const AttackManifest m = read_manifest(ren_manifest);
        boxes.push_back({m.phantom_box, BoxRole::kPhantom, std::nullopt});
      }
      if (!ren_results.empty()) {
        for (auto& b : label_boxes(parse_labels(read_text(ren_results)), BoxRole::kDetection)) {
          boxes.push_back(std::move(b));
        }
      }
      const Image img = ren_mode == "bev" ? render_bev(scene.cloud, boxes, scene.calib, style)
                                          : render_overlay(scene.image, boxes, scene.calib, style);
      if (fs::path(ren_c.out).has_parent_path()) fs::create_directories(fs::path(ren_c.out).parent_path());
      write_png(ren_c.out, img);
      out << "wrote " << ren_c.out << "\n";
    } else if (*rep) {
      require(rep_root, "--data-root");
      std::vector<fs::path> paths;
      if (!rep_manifest.empty()) {
        paths.push_back(rep_manifest);
      } else {
        const fs::path dir = fs::path(rep_root) / "manifests";
        if (!fs::is_directory(dir)) throw MalformedFile("no manifests under " + rep_root);
        for (const auto& e : fs::directory_iterator(dir)) {
          if (e.path().extension() == ".json") paths.push_back(e.path());
        }
        std::sort(paths.begin(), paths.end());
      }
      std::size_t mismatches = 0;
      for (const auto& p : paths) {
        const AttackManifest m = read_manifest(p);
        const double c = reverify_manifest(rep_root, m);
        const bool ok = std::abs(c - m.consistency_fraction) <= 1e-12;
        if (!ok) ++mismatches;
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%s: consistency %.4f (recorded %.4f) %s\n", m.scene_id.c_str(), c,
                      m.consistency_fraction, ok ? "ok" : "MISMATCH");
        out << buf;
      }
      if (mismatches > 0) {
        err << "phantom: " << mismatches << " manifest(s) failed re-verification\n";
        return 1;
      }
    }
  } catch (const UsageError& e) {
    err << "phantom: usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (char& ch : msg) {
      if (ch == '\n') ch = ' ';
    }
    err << "phantom: error: " << msg << "\n";
    return 1;
  }
  return 0;
}

int cli(int argc, const char* const* argv) {
  std::vector<std::string> args(argv, argv + argc);
  return cli(args, std::cout, std::cerr);
}

}  // namespace phantom
