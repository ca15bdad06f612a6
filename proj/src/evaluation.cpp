#include "phantom/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

#include "phantom/errors.hpp"
#include "phantom/random.hpp"
#include "phantom/synthetic.hpp"

namespace phantom {

namespace fs = std::filesystem;

namespace {

int class_rank(const std::string& name) {
  if (name == "Car") return 0;
  if (name == "Pedestrian") return 1;
  return 2;
}

std::optional<double> median_of(std::vector<double> v) {
  if (v.empty()) return std::nullopt;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt_score(const std::optional<double>& v) {
  if (!v) return "N/A";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", *v);
  return buf;
}

std::string fmt_rate(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f%%", v);
  return buf;
}

std::string table_row(const std::string& name, const std::string& attempts,
                      const std::string& successes, const std::string& asr,
                      const std::string& mean, const std::string& median) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-14s %10s %11s %9s %12s %14s\n", name.c_str(),
                attempts.c_str(), successes.c_str(), asr.c_str(), mean.c_str(), median.c_str());
  return buf;
}

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

std::string_view to_string(FailureReason reason) {
  switch (reason) {
    case FailureReason::kNoDetection: return "no-detection";
    case FailureReason::kWrongClass: return "wrong-class";
    case FailureReason::kNoOverlap: return "no-overlap";
    case FailureReason::kLowConfidence: return "low-confidence";
    case FailureReason::kAttemptAborted: return "attempt-aborted";
  }
  return "unknown";
}

FailureReason parse_failure_reason(std::string_view text) {
  for (auto r : {FailureReason::kNoDetection, FailureReason::kWrongClass, FailureReason::kNoOverlap,
                 FailureReason::kLowConfidence, FailureReason::kAttemptAborted}) {
    if (to_string(r) == text) return r;
  }
  throw MalformedFile("unknown failure reason '" + std::string(text) + "'");
}

void to_json(nlohmann::json& j, const AttackOutcome& o) {
  j = {{"scene_id", o.scene_id},
       {"class_name", o.class_name},
       {"success", o.success},
       {"matched_score", optional_json(o.matched_score)},
       {"matched_iou", optional_json(o.matched_iou)},
       {"failure_reason",
        o.failure_reason ? nlohmann::json(std::string(to_string(*o.failure_reason)))
                         : nlohmann::json(nullptr)},
       {"detail", o.detail}};
}

void from_json(const nlohmann::json& j, AttackOutcome& o) {
  o.scene_id = j.at("scene_id").get<std::string>();
  o.class_name = j.at("class_name").get<std::string>();
  o.success = j.at("success").get<bool>();
  o.matched_score = j.at("matched_score").is_null()
                        ? std::nullopt
                        : std::optional<double>(j.at("matched_score").get<double>());
  o.matched_iou = j.at("matched_iou").is_null()
                      ? std::nullopt
                      : std::optional<double>(j.at("matched_iou").get<double>());
  o.failure_reason = j.at("failure_reason").is_null()
                         ? std::nullopt
                         : std::optional<FailureReason>(
                               parse_failure_reason(j.at("failure_reason").get<std::string>()));
  o.detail = j.value("detail", "");
}

std::string canonical_class(std::string_view name) {
  if (name == "Vehicle") return "Car";
  return std::string(name);
}

AttackOutcome match_detection(const AttackManifest& manifest,
                              const std::vector<Detection>& detections,
                              const MatchThresholds& thresholds) {
  AttackOutcome out;
  out.scene_id = manifest.scene_id;
  out.class_name = canonical_class(manifest.spec.class_name);
  if (detections.empty()) {
    out.failure_reason = FailureReason::kNoDetection;
    return out;
  }

  bool any_class = false;
  std::optional<std::size_t> best;
  double best_iou = 0.0;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const Detection& d = detections[i];
    if (canonical_class(d.box.class_name) != out.class_name) continue;
    any_class = true;
    const double iou = bev_iou(d.box, manifest.phantom_box);
    if (iou < thresholds.overlap) continue;
    if (!best || d.score > detections[*best].score ||
        (d.score == detections[*best].score && iou > best_iou)) {
      best = i;
      best_iou = iou;
    }
  }
  if (!any_class) {
    out.failure_reason = FailureReason::kWrongClass;
    return out;
  }
  if (!best) {
    out.failure_reason = FailureReason::kNoOverlap;
    return out;
  }
  out.matched_score = detections[*best].score;
  out.matched_iou = best_iou;
  out.success = *out.matched_score > thresholds.confidence;
  if (!out.success) out.failure_reason = FailureReason::kLowConfidence;
  return out;
}

AttackOutcome aborted_outcome(std::string scene_id, std::string class_name, std::string detail) {
  AttackOutcome out;
  out.scene_id = std::move(scene_id);
  out.class_name = canonical_class(class_name);
  out.failure_reason = FailureReason::kAttemptAborted;
  out.detail = std::move(detail);
  return out;
}

CampaignSummary summarize(std::span<const AttackOutcome> outcomes, DenominatorPolicy policy) {
  CampaignSummary summary;
  summary.policy = policy;
  std::map<std::string, std::vector<const AttackOutcome*>> by_class;
  for (const auto& o : outcomes) by_class[canonical_class(o.class_name)].push_back(&o);

  std::vector<double> all_scores;
  for (const auto& [name, members] : by_class) {
    ClassRow row;
    row.class_name = name;
    std::vector<double> scores;
    for (const auto* o : members) {
      const bool aborted = o->failure_reason == FailureReason::kAttemptAborted;
      if (aborted) ++row.aborted;
      if (aborted && policy == DenominatorPolicy::kExcludeAborted) continue;
      ++row.attempts;
      if (o->success) {
        ++row.successes;
        scores.push_back(o->matched_score.value_or(0.0));
      }
    }
    row.asr = row.attempts == 0 ? 0.0
                                : 100.0 * static_cast<double>(row.successes) /
                                      static_cast<double>(row.attempts);
    if (!scores.empty()) {
      double sum = 0.0;
      for (double s : scores) sum += s;
      row.mean_score = sum / static_cast<double>(scores.size());
    }
    row.median_score = median_of(scores);
    all_scores.insert(all_scores.end(), scores.begin(), scores.end());
    summary.attempts += row.attempts;
    summary.successes += row.successes;
    summary.aborted += row.aborted;
    summary.rows.push_back(std::move(row));
  }
  std::stable_sort(summary.rows.begin(), summary.rows.end(), [](const ClassRow& a, const ClassRow& b) {
    const int ra = class_rank(a.class_name);
    const int rb = class_rank(b.class_name);
    return ra != rb ? ra < rb : a.class_name < b.class_name;
  });
  summary.asr = summary.attempts == 0 ? 0.0
                                      : 100.0 * static_cast<double>(summary.successes) /
                                            static_cast<double>(summary.attempts);
  // Weighted by per-class success counts, i.e. sum(successes_c * mean_c) / sum(successes_c).
  double weighted = 0.0;
  for (const auto& row : summary.rows) {
    if (row.mean_score) weighted += static_cast<double>(row.successes) * *row.mean_score;
  }
  if (summary.successes > 0) {
    summary.weighted_mean_score = weighted / static_cast<double>(summary.successes);
  }
  return summary;
}

std::string render_summary_table(const CampaignSummary& summary) {
  std::string out = table_row("Object Class", "Attempts", "Successes", "ASR (%)", "Mean Score",
                              "Median Score");
  out += std::string(75, '-') + "\n";
  if (summary.rows.empty()) return out;
  for (const auto& row : summary.rows) {
    out += table_row(row.class_name, std::to_string(row.attempts), std::to_string(row.successes),
                     fmt_rate(row.asr), fmt_score(row.mean_score), fmt_score(row.median_score));
  }
  out += std::string(75, '-') + "\n";
  out += table_row("Total", std::to_string(summary.attempts), std::to_string(summary.successes),
                   fmt_rate(summary.asr), fmt_score(summary.weighted_mean_score), "N/A");
  return out;
}

nlohmann::json summary_to_json(const CampaignSummary& summary) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : summary.rows) {
    rows.push_back({{"class_name", r.class_name},
                    {"attempts", r.attempts},
                    {"successes", r.successes},
                    {"aborted", r.aborted},
                    {"asr", r.asr},
                    {"mean_score", optional_json(r.mean_score)},
                    {"median_score", optional_json(r.median_score)}});
  }
  return {{"rows", rows},
          {"total",
           {{"attempts", summary.attempts},
            {"successes", summary.successes},
            {"aborted", summary.aborted},
            {"asr", summary.asr},
            {"weighted_mean_score", optional_json(summary.weighted_mean_score)}}},
          {"denominator_policy", summary.policy == DenominatorPolicy::kCountAborted
                                     ? "aborted-count-as-failures"
                                     : "aborted-excluded"}};
}

std::string format_results_log(std::span<const AttackOutcome> outcomes) {
  std::string out;
  for (const auto& o : outcomes) {
    out += nlohmann::json(o).dump();
    out += '\n';
  }
  return out;
}

std::vector<AttackOutcome> parse_results_log(std::string_view text) {
  std::vector<AttackOutcome> out;
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      out.push_back(nlohmann::json::parse(line).get<AttackOutcome>());
    } catch (const nlohmann::json::exception& e) {
      throw MalformedFile("results log line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

DetectorFn surrogate_detector(DetectorConfig cfg) {
  cfg.validate();
  return [cfg](const DetectorInput& in) { return detect(in.cloud, in.calib, cfg); };
}

CampaignResult run_campaign(const TemplateLibrary& library, const DetectorFn& detector,
                            const CampaignOptions& options) {
  if (options.scene_ids.empty()) throw ConfigError("campaign needs at least one scene");
  if (options.classes.empty()) throw ConfigError("campaign needs at least one class");
  for (const auto& cls : options.classes) {
    if (library.of_class(cls).empty()) {
      throw EmptyLibrary("template library has no '" + cls + "' templates");
    }
  }
  const SceneLoader loader = options.loader ? options.loader : [&](const std::string& id) {
    return load_scene(options.data_root, id);
  };

  struct Attempt {
    std::string output_id;
    std::string class_name;
    std::string source_scene;
    std::uint64_t seed = 0;
  };
  std::vector<Attempt> attempts;
  CampaignResult result;
  const std::size_t n_scenes = options.scene_ids.size();
  result.scenes_with_replacement = n_scenes < options.attempts_per_class;
  for (std::size_t c = 0; c < options.classes.size(); ++c) {
    const std::string& cls = options.classes[c];
    Rng pick(derive_seed(options.seed, hash_string(cls), 1));
    std::vector<std::string> order = options.scene_ids;
    if (!result.scenes_with_replacement) {
      for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[pick.below(i)]);
      }
    }
    for (std::size_t a = 0; a < options.attempts_per_class; ++a) {
      Attempt at;
      at.output_id = format_scene_id(c * options.attempts_per_class + a);
      at.class_name = cls;
      at.source_scene = result.scenes_with_replacement ? options.scene_ids[pick.below(n_scenes)]
                                                       : order[a];
      at.seed = derive_seed(options.seed, hash_string(cls), 1000 + a);
      attempts.push_back(std::move(at));
    }
  }

  const fs::path& out = options.output_root;
  const bool persist = !out.empty();
  if (persist) {
    fs::create_directories(out / "results");
    if (options.write_scenes && options.inject) {
      for (const char* sub : {"image_2", "velodyne", "calib", "manifests"}) {
        fs::create_directories(out / sub);
      }
    }
  }

  std::vector<AttackOutcome> outcomes(attempts.size());
  std::vector<std::optional<AttackManifest>> manifests(attempts.size());
  std::vector<std::string> result_files(attempts.size());

  auto run_one = [&](std::size_t idx) {
    const Attempt& at = attempts[idx];
    const Scene scene = loader(at.source_scene);
    Rng rng(at.seed);
    const auto candidates = library.of_class(at.class_name);
    const ObjectTemplate& tpl = *candidates[rng.below(candidates.size())];
    const auto placement =
        sample_placement(scene, library, at.class_name, rng.next_u64(), options.placement);
    if (!placement) {
      outcomes[idx] = aborted_outcome(at.output_id, at.class_name, "no-valid-placement");
      return;
    }
    PhantomSpec spec;
    spec.class_name = at.class_name;
    spec.target_location = placement->target_location;
    spec.yaw = placement->yaw;
    spec.template_id = tpl.template_id;
    spec.seed = rng.next_u64();

    const ImageSize size{scene.image.width, scene.image.height};
    std::vector<Detection> detections;
    AttackManifest manifest;
    try {
      if (options.inject) {
        AugmentOptions aug;
        aug.output_scene_id = at.output_id;
        aug.created_at = options.created_at;
        aug.injection = options.injection;
        aug.write_outputs = persist && options.write_scenes;
        AugmentedScene adv = augment_scene(scene, spec, library, out, aug);
        detections = detector({adv.cloud, adv.image, scene.calib});
        manifest = adv.manifest;
        manifests[idx] = manifest;
      } else {
        manifest.scene_id = at.output_id;
        manifest.source_scene_id = scene.scene_id;
        manifest.spec = spec;
        manifest.phantom_box = phantom_box_for(spec, tpl, scene.calib);
        manifest.original_point_count = scene.cloud.size();
        detections = detector({scene.cloud, scene.image, scene.calib});
      }
    } catch (const AttemptAborted& e) {
      outcomes[idx] = aborted_outcome(at.output_id, at.class_name, e.what());
      return;
    }
    outcomes[idx] = match_detection(manifest, detections, options.thresholds);
    if (persist) {
      const auto labels = detections_to_labels(detections, scene.calib, size);
      result_files[idx] = write_labels(labels);
    }
  };

  unsigned workers = options.workers == 0 ? std::max(1U, std::thread::hardware_concurrency())
                                          : options.workers;
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, attempts.size()));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= attempts.size()) return;
      try {
        run_one(idx);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = attempts.size();
        return;
      }
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  result.outcomes = std::move(outcomes);
  for (auto& m : manifests) {
    if (m) result.manifests.push_back(std::move(*m));
  }
  result.summary = summarize(result.outcomes, options.policy);

  if (persist) {
    for (std::size_t i = 0; i < attempts.size(); ++i) {
      if (result.outcomes[i].failure_reason != FailureReason::kAttemptAborted) {
        write_text(out / "results" / (attempts[i].output_id + ".txt"), result_files[i]);
      }
    }
    write_text(out / "results.jsonl", format_results_log(result.outcomes));
    write_text(out / "summary.json", summary_to_json(result.summary).dump(2) + "\n");
    write_text(out / "summary.txt", render_summary_table(result.summary));
    nlohmann::json meta = {
        {"seed", options.seed},
        {"classes", options.classes},
        {"attempts_per_class", options.attempts_per_class},
        {"scene_ids", options.scene_ids},
        {"scenes_with_replacement", result.scenes_with_replacement},
        {"inject", options.inject},
        {"confidence_threshold", options.thresholds.confidence},
        {"overlap_threshold", options.thresholds.overlap},
        {"forward_band", {options.placement.forward_min, options.placement.forward_max}},
        {"denominator_policy", summary_to_json(result.summary).at("denominator_policy")},
        {"attempts",
         [&] {
           nlohmann::json a = nlohmann::json::array();
           for (const auto& at : attempts) {
             a.push_back({{"scene_id", at.output_id},
                          {"source_scene_id", at.source_scene},
                          {"class_name", at.class_name},
                          {"seed", at.seed}});
           }
           return a;
         }()}};
    write_text(out / "campaign.json", meta.dump(2) + "\n");
  }
  return result;
}

std::vector<AttackOutcome> evaluate_result_files(const fs::path& manifests_dir,
                                                 const fs::path& results_dir,
                                                 const MatchThresholds& thresholds) {
  if (!fs::is_directory(manifests_dir)) {
    throw MalformedFile("manifest directory not found: " + manifests_dir.string());
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(manifests_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<AttackOutcome> outcomes;
  outcomes.reserve(files.size());
  for (const auto& path : files) {
    const AttackManifest m = read_manifest(path);
    const fs::path result = results_dir / (m.scene_id + ".txt");
    std::vector<Detection> detections;
    std::string detail;
    if (fs::exists(result)) {
      detections = labels_to_detections(parse_labels(read_text(result)));
    } else {
      detail = "missing result file";
    }
    AttackOutcome o = match_detection(m, detections, thresholds);
    o.detail = detail;
    outcomes.push_back(std::move(o));
  }
  return outcomes;
}

}  // namespace phantom
