#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <sstream>

#include "phantom/errors.hpp"
#include "phantom/evaluation.hpp"
#include "phantom/synthetic.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace phantom;
namespace fs = std::filesystem;

namespace {

AttackManifest manifest_for(const std::string& cls) {
  AttackManifest m;
  m.scene_id = "000000";
  m.spec.class_name = cls;
  m.phantom_box.center_bottom = {1.0, 1.7, 25.0};
  m.phantom_box.dims = cls != "Pedestrian" ? Dims{1.5, 1.7, 4.0} : Dims{1.8, 0.6, 0.8};
  m.phantom_box.rotation_y = 0.3;
  m.phantom_box.class_name = cls;
  return m;
}

Detection det(const AttackManifest& m, double score, double shift = 0.0, std::string cls = "") {
  Detection d;
  d.box = m.phantom_box;
  d.box.center_bottom.x() += shift;
  d.box.class_name = cls.empty() ? m.phantom_box.class_name : cls;
  d.score = score;
  return d;
}

std::vector<std::string> split_cols(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

const TemplateLibrary& library() {
  static const TemplateLibrary lib = [] {
    std::vector<Scene> s;
    for (std::size_t i = 0; i < 6; ++i) s.push_back(make_synthetic_scene(format_scene_id(i), 500 + i));
    return extract_templates(s, {"Car", "Pedestrian"}, 50);
  }();
  return lib;
}

}  // namespace

TEST_CASE("match_detection examples") {
  const auto ped = manifest_for("Pedestrian");
  auto o = match_detection(ped, {det(ped, 0.59)});
  CHECK(o.success);
  CHECK(*o.matched_score == doctest::Approx(0.59));
  CHECK_FALSE(o.failure_reason.has_value());

  o = match_detection(ped, {det(ped, 0.49)});
  CHECK_FALSE(o.success);
  CHECK(o.failure_reason == FailureReason::kLowConfidence);

  o = match_detection(ped, {det(ped, 0.5)});
  CHECK_FALSE(o.success);  // strictly above

  o = match_detection(ped, {det(ped, 0.6), det(ped, 0.8)});
  CHECK(*o.matched_score == doctest::Approx(0.8));
}

TEST_CASE("match_detection failure order") {
  const auto car = manifest_for("Car");
  CHECK(match_detection(car, {}).failure_reason == FailureReason::kNoDetection);
  CHECK(match_detection(car, {det(car, 0.9, 0.0, "Pedestrian")}).failure_reason == FailureReason::kWrongClass);
  CHECK(match_detection(car, {det(car, 0.9, 30.0)}).failure_reason == FailureReason::kNoOverlap);
  CHECK(match_detection(car, {det(car, 0.2, 30.0), det(car, 0.3)}).failure_reason ==
        FailureReason::kLowConfidence);
  // Vehicle and Car are the same class
  CHECK(match_detection(manifest_for("Vehicle"), {det(car, 0.9, 0.0, "Car")}).success);
  CHECK(match_detection(car, {det(car, 0.9, 0.0, "Vehicle")}).success);
}

TEST_CASE("match_detection tie rule: higher IoU, then earlier index") {
  const auto car = manifest_for("Car");
  auto o = match_detection(car, {det(car, 0.7, 0.8), det(car, 0.7, 0.1)});
  CHECK(*o.matched_iou == doctest::Approx(bev_iou(det(car, 0.7, 0.1).box, car.phantom_box)));
}

TEST_CASE("property: permutation invariance and threshold monotonicity") {
  Rng rng(12);
  const auto car = manifest_for("Car");
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Detection> dets;
    for (std::uint64_t i = 0, n = rng.below(6); i < n; ++i) {
      dets.push_back(det(car, oracle::round2(rng.uniform(0, 1)), rng.uniform(-5, 5),
                         rng.below(4) == 0 ? "Pedestrian" : "Car"));
    }
    const MatchThresholds t{rng.uniform(0.2, 0.8), rng.uniform(0.0, 0.5)};
    const auto base = match_detection(car, dets, t);
    auto shuffled = dets;
    for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[rng.below(i)]);
    const auto perm = match_detection(car, shuffled, t);
    CHECK(perm.success == base.success);
    CHECK(perm.matched_score == base.matched_score);
    CHECK(perm.failure_reason == base.failure_reason);
    if (base.success) {
      CHECK(*base.matched_score > t.confidence);
      CHECK(*base.matched_iou >= t.overlap);
    }
    MatchThresholds stricter = t;
    stricter.confidence += rng.uniform(0, 0.3);
    if (!base.success) CHECK_FALSE(match_detection(car, dets, stricter).success);
  }
}

TEST_CASE("summarize reproduces the reference summary arithmetic") {
  const auto outcomes = fixture::reference_outcomes();
  const auto s = summarize(outcomes);
  REQUIRE(s.rows.size() == 2);
  CHECK(s.rows[0].class_name == "Car");
  CHECK(s.rows[0].attempts == 200);
  CHECK(s.rows[0].successes == 176);
  CHECK(s.rows[0].asr == doctest::Approx(88.0));
  CHECK(std::abs(*s.rows[0].mean_score - 132.08 / 176) <= 1e-12);
  CHECK(*s.rows[0].median_score == doctest::Approx(0.79));
  CHECK(s.rows[1].asr == doctest::Approx(83.0));
  CHECK(*s.rows[1].median_score == doctest::Approx(0.56));
  CHECK(s.asr == doctest::Approx(85.5));
  CHECK(std::abs(*s.weighted_mean_score - 0.6578) <= 0.0005);

  const std::string table = render_summary_table(s);
  CHECK(table.find("88.0%") != std::string::npos);
  CHECK(table.find("0.79") != std::string::npos);
  CHECK(table.find("85.5%") != std::string::npos);
  CHECK(table.find("0.66") != std::string::npos);
  CHECK(table.find("Car") < table.find("Pedestrian"));
  CHECK(table.find("Pedestrian") < table.find("Total"));
}

TEST_CASE("constructed weighted mean: 176 x 0.75 and 166 x 0.56") {
  std::vector<AttackOutcome> outcomes;
  for (int i = 0; i < 176 + 166; ++i) {
    AttackOutcome o;
    o.class_name = i < 176 ? "Car" : "Pedestrian";
    o.success = true;
    o.matched_score = i < 176 ? 0.75 : 0.56;
    outcomes.push_back(o);
  }
  const auto s = summarize(outcomes);
  CHECK(*s.weighted_mean_score == doctest::Approx((176 * 0.75 + 166 * 0.56) / 342));
  CHECK(render_summary_table(s).find("0.66") != std::string::npos);
}

TEST_CASE("summary table re-parses into the same numbers") {
  const auto s = summarize(fixture::reference_outcomes());
  std::istringstream in(render_summary_table(s));
  std::string line;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '-' || line.rfind("Object", 0) == 0) continue;
    rows.push_back(split_cols(line));
  }
  REQUIRE(rows.size() == 3);
  for (std::size_t i = 0; i < 2; ++i) {
    REQUIRE(rows[i].size() == 6);
    CHECK(rows[i][0] == s.rows[i].class_name);
    CHECK(std::stoul(rows[i][1]) == s.rows[i].attempts);
    CHECK(std::stoul(rows[i][2]) == s.rows[i].successes);
    CHECK(std::stod(rows[i][3]) == doctest::Approx(s.rows[i].asr).epsilon(1e-3));
    CHECK(std::abs(std::stod(rows[i][4]) - *s.rows[i].mean_score) <= 0.005);
    CHECK(std::abs(std::stod(rows[i][5]) - *s.rows[i].median_score) <= 0.005);
  }
  CHECK(rows[2][0] == "Total");
  CHECK(std::stoul(rows[2][2]) == s.successes);
}

TEST_CASE("summarize edge cases and invariants") {
  const auto empty = summarize({});
  CHECK(empty.attempts == 0);
  CHECK(empty.rows.empty());
  const std::string table = render_summary_table(empty);
  CHECK(std::count(table.begin(), table.end(), '\n') == 2);
  CHECK(table.find("Total") == std::string::npos);

  std::vector<AttackOutcome> four;
  for (double v : {0.6, 0.9, 0.7, 0.8}) {
    AttackOutcome o;
    o.class_name = "Car";
    o.success = true;
    o.matched_score = v;
    four.push_back(o);
  }
  CHECK(*summarize(four).rows[0].median_score == doctest::Approx(0.75));

  auto outcomes = fixture::reference_outcomes();
  outcomes.push_back(aborted_outcome("x", "Car", "no-valid-placement"));
  const auto counted = summarize(outcomes);
  const auto excluded = summarize(outcomes, DenominatorPolicy::kExcludeAborted);
  CHECK(counted.rows[0].attempts == 201);
  CHECK(excluded.rows[0].attempts == 200);
  CHECK(excluded.rows[0].aborted == 1);

  Rng rng(2);
  for (std::size_t i = outcomes.size(); i > 1; --i) std::swap(outcomes[i - 1], outcomes[rng.below(i)]);
  const auto shuffled = summarize(outcomes);
  CHECK(shuffled.successes == counted.successes);
  CHECK(*shuffled.weighted_mean_score == doctest::Approx(*counted.weighted_mean_score));
  std::size_t sum = 0;
  for (const auto& r : shuffled.rows) sum += r.successes;
  CHECK(sum == shuffled.successes);
}

TEST_CASE("results log round-trips exactly") {
  auto outcomes = fixture::reference_outcomes();
  outcomes.push_back(aborted_outcome("000999", "Pedestrian", "too sparse"));
  const std::string log = format_results_log(outcomes);
  CHECK(std::count(log.begin(), log.end(), '\n') == static_cast<long>(outcomes.size()));
  CHECK(parse_results_log(log) == outcomes);
  CHECK_THROWS_AS(parse_results_log("{not json}\n"), MalformedFile);
}

TEST_CASE("campaign cardinality, determinism and replay") {
  std::vector<Scene> pool;
  for (std::size_t i = 0; i < 6; ++i) pool.push_back(make_synthetic_scene(format_scene_id(i), 900 + i));
  CampaignOptions opts;
  opts.loader = [&](const std::string& id) { return pool.at(std::stoul(id)); };
  for (const auto& s : pool) opts.scene_ids.push_back(s.scene_id);
  opts.attempts_per_class = 3;
  opts.seed = 17;
  opts.workers = 1;
  const fs::path out1 = fs::temp_directory_path() / "phantom_test_campaign1";
  const fs::path out2 = fs::temp_directory_path() / "phantom_test_campaign2";
  fs::remove_all(out1);
  fs::remove_all(out2);
  opts.output_root = out1;
  const auto r1 = run_campaign(library(), surrogate_detector(), opts);
  opts.output_root = out2;
  opts.workers = 3;
  const auto r2 = run_campaign(library(), surrogate_detector(), opts);

  CHECK(r1.outcomes.size() == 6);
  const std::string log1 = read_text(out1 / "results.jsonl");
  CHECK(std::count(log1.begin(), log1.end(), '\n') == 6);
  CHECK(log1 == read_text(out2 / "results.jsonl"));
  CHECK(read_text(out1 / "summary.json") == read_text(out2 / "summary.json"));
  CHECK_FALSE(r1.scenes_with_replacement);

  // replay from persisted artifacts
  const auto replayed = summarize(parse_results_log(log1));
  CHECK(summary_to_json(replayed) == summary_to_json(r1.summary));
  const auto rescored = evaluate_result_files(out1 / "manifests", out1 / "results");
  REQUIRE(rescored.size() == r1.manifests.size());
  for (const auto& o : rescored) {
    const auto it = std::find_if(r1.outcomes.begin(), r1.outcomes.end(),
                                 [&](const AttackOutcome& x) { return x.scene_id == o.scene_id; });
    REQUIRE(it != r1.outcomes.end());
    if (it->matched_score && std::abs(*it->matched_score - 0.5) < 0.005) continue;
    CHECK(o.success == it->success);
  }

  CampaignOptions bad = opts;
  bad.scene_ids.clear();
  CHECK_THROWS_AS(run_campaign(library(), surrogate_detector(), bad), ConfigError);
  CampaignOptions few = opts;
  few.attempts_per_class = 10;
  few.output_root.clear();
  CHECK(run_campaign(library(), surrogate_detector(), few).scenes_with_replacement);
  fs::remove_all(out1);
  fs::remove_all(out2);
}

TEST_CASE("no-attack control never succeeds") {
  std::vector<Scene> pool;
  for (std::size_t i = 0; i < 5; ++i) pool.push_back(make_synthetic_scene(format_scene_id(i), 700 + i));
  CampaignOptions opts;
  opts.loader = [&](const std::string& id) { return pool.at(std::stoul(id)); };
  for (const auto& s : pool) opts.scene_ids.push_back(s.scene_id);
  opts.attempts_per_class = 5;
  opts.inject = false;
  const auto r = run_campaign(library(), surrogate_detector(), opts);
  CHECK(r.summary.successes == 0);
}
