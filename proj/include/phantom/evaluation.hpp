#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "phantom/phantom_engine.hpp"
#include "phantom/surrogate_detector.hpp"

namespace phantom {

enum class FailureReason { kNoDetection, kWrongClass, kNoOverlap, kLowConfidence, kAttemptAborted };

std::string_view to_string(FailureReason reason);
FailureReason parse_failure_reason(std::string_view text);

struct AttackOutcome {
  std::string scene_id;
  std::string class_name;
  bool success = false;
  std::optional<double> matched_score;
  std::optional<double> matched_iou;
  std::optional<FailureReason> failure_reason;
  std::string detail;  // abort cause, empty otherwise

  friend bool operator==(const AttackOutcome&, const AttackOutcome&) = default;
};

void to_json(nlohmann::json& j, const AttackOutcome& o);
void from_json(const nlohmann::json& j, AttackOutcome& o);

// "Vehicle" and "Car" name the same class; everything else passes through.
std::string canonical_class(std::string_view name);

struct MatchThresholds {
  double confidence = 0.5;  // success needs score strictly above this
  double overlap = 0.1;     // BEV IoU lower bound, inclusive
};

AttackOutcome match_detection(const AttackManifest& manifest,
                              const std::vector<Detection>& detections,
                              const MatchThresholds& thresholds = {});

AttackOutcome aborted_outcome(std::string scene_id, std::string class_name, std::string detail);

enum class DenominatorPolicy { kCountAborted, kExcludeAborted };

struct ClassRow {
  std::string class_name;
  std::size_t attempts = 0;
  std::size_t successes = 0;
  std::size_t aborted = 0;
  double asr = 0.0;  // percent
  std::optional<double> mean_score;
  std::optional<double> median_score;
};

struct CampaignSummary {
  std::vector<ClassRow> rows;
  std::size_t attempts = 0;
  std::size_t successes = 0;
  std::size_t aborted = 0;
  double asr = 0.0;
  std::optional<double> weighted_mean_score;
  DenominatorPolicy policy = DenominatorPolicy::kCountAborted;
};

CampaignSummary summarize(std::span<const AttackOutcome> outcomes,
                          DenominatorPolicy policy = DenominatorPolicy::kCountAborted);

// Fixed-width text table, one row per class plus a total.
std::string render_summary_table(const CampaignSummary& summary);

nlohmann::json summary_to_json(const CampaignSummary& summary);

// Line-delimited results log, one outcome per line.
std::string format_results_log(std::span<const AttackOutcome> outcomes);
std::vector<AttackOutcome> parse_results_log(std::string_view text);

struct DetectorInput {
  const PointCloud& cloud;
  const Image& image;
  const Calibration& calib;
};
using DetectorFn = std::function<std::vector<Detection>(const DetectorInput&)>;

DetectorFn surrogate_detector(DetectorConfig cfg = {});

using SceneLoader = std::function<Scene(const std::string& scene_id)>;

struct CampaignOptions {
  std::filesystem::path data_root;
  SceneLoader loader;  // overrides data_root when set
  std::vector<std::string> scene_ids;
  std::vector<std::string> classes = {"Car", "Pedestrian"};
  std::size_t attempts_per_class = 200;
  std::uint64_t seed = 0;
  std::filesystem::path output_root;
  MatchThresholds thresholds;
  PlacementConfig placement;
  InjectionConfig injection;
  // false runs the no-attack control: same placements, clean sensor data.
  bool inject = true;
  DenominatorPolicy policy = DenominatorPolicy::kCountAborted;
  unsigned workers = 0;  // 0 = hardware concurrency
  bool write_scenes = true;
  std::string created_at = "1970-01-01T00:00:00Z";
};

struct CampaignResult {
  std::vector<AttackOutcome> outcomes;
  std::vector<AttackManifest> manifests;
  CampaignSummary summary;
  bool scenes_with_replacement = false;
};

// Writes <out>/results.jsonl, summary.json, summary.txt, campaign.json,
// per-attempt detector results under results/ and, with write_scenes, the
// augmented KITTI tree plus manifests/.
CampaignResult run_campaign(const TemplateLibrary& library, const DetectorFn& detector,
                            const CampaignOptions& options);

// Scores <results>/<scene_id>.txt against every manifest in `manifests_dir`.
std::vector<AttackOutcome> evaluate_result_files(const std::filesystem::path& manifests_dir,
                                                 const std::filesystem::path& results_dir,
                                                 const MatchThresholds& thresholds = {});

}  // namespace phantom
