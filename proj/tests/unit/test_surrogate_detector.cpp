#include <doctest.h>

#include <cmath>

#include "phantom/errors.hpp"
#include "phantom/surrogate_detector.hpp"
#include "phantom/synthetic.hpp"
#include "support/oracles.hpp"

using namespace phantom;

namespace {

Scene scene_with(std::vector<SyntheticObject> objects, std::uint64_t seed) {
  SyntheticConfig cfg;
  cfg.walls = false;
  return make_scene("000000", seed, objects, cfg);
}

// Snap to odd multiples of 1/2048 so that BEV translations by whole tiles are
// exact in float and never land on a cell boundary.
PointCloud quantized(const PointCloud& pc) {
  auto q = [](float v) { return static_cast<float>((2.0 * std::floor(v * 1024.0) + 1.0) / 2048.0); };
  PointCloud out = pc;
  for (auto& p : out.points) {
    p.x = q(p.x);
    p.y = q(p.y);
    p.z = q(p.z);
  }
  return out;
}

}  // namespace

TEST_CASE("ground removal strips the flat floor only") {
  const Scene s = scene_with({}, 1);
  CHECK(remove_ground(s.cloud, {}).empty());
  PointCloud pc = s.cloud;
  pc.points.push_back({10.0F, 0.0F, 0.0F, 0.0F});
  const auto kept = remove_ground(pc, {});
  REQUIRE(kept.size() == 1);
  CHECK(kept[0] == pc.size() - 1);
}

TEST_CASE("clustering matches the union-find oracle") {
  Rng rng(3);
  DetectorConfig cfg;
  for (int trial = 0; trial < 30; ++trial) {
    PointCloud pc;
    const int blobs = 1 + static_cast<int>(rng.below(8));
    for (int b = 0; b < blobs; ++b) {
      const double cx = rng.uniform(-20, 20);
      const double cy = rng.uniform(-20, 20);
      const double r = rng.uniform(0.2, 2.0);
      for (std::uint64_t i = 0, n = 5 + rng.below(60); i < n; ++i) {
        pc.points.push_back({static_cast<float>(cx + rng.uniform(-r, r)),
                             static_cast<float>(cy + rng.uniform(-r, r)), 0.0F, 0.0F});
      }
    }
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < pc.size(); ++i) {
      if (rng.below(10) != 0) idx.push_back(i);
    }
    CHECK(cluster_points(pc, idx, cfg) == oracle::cluster(pc, idx, cfg.cell_size, cfg.min_cluster_points));
  }
}

TEST_CASE("fit_box recovers a car's pose and extents") {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    SyntheticObject car{"Car", {rng.uniform(10, 25), rng.uniform(-5, 5), -1.73}, rng.uniform(-3, 3),
                        {1.6, 1.75, 4.2}};
    const Scene s = scene_with({car}, 10 + trial);
    const auto dets = detect(s.cloud, s.calib);
    REQUIRE(dets.size() == 1);
    CHECK(dets[0].box.class_name == "Car");
    CHECK(std::abs(dets[0].box.dims.l - 4.2) <= 0.4);
    CHECK(std::abs(dets[0].box.dims.w - 1.75) <= 0.3);
    CHECK(bev_iou(dets[0].box, object_box(car, s.calib)) > 0.7);
    CHECK(dets[0].score > 0.5);
  }
}

TEST_CASE("size gates classify pedestrians and reject clutter") {
  SyntheticObject ped{"Pedestrian", {15, 2, -1.73}, 0.5, {1.75, 0.6, 0.8}};
  const Scene s = scene_with({ped}, 5);
  const auto dets = detect(s.cloud, s.calib);
  REQUIRE(dets.size() == 1);
  CHECK(dets[0].box.class_name == "Pedestrian");
  CHECK(dets[0].score == doctest::Approx(std::min(1.0, dets[0].point_count / 120.0)));

  SyntheticObject pole{"Car", {15, -3, -1.73}, 0.0, {4.0, 0.3, 0.3}};
  const Scene s2 = scene_with({pole}, 6);
  CHECK(detect(s2.cloud, s2.calib).empty());
}

TEST_CASE("detections are sorted by score, stable on ties") {
  SyntheticObject near{"Car", {12, -4, -1.73}, 0.0, {1.6, 1.7, 4.0}};
  SyntheticObject far{"Car", {38, 4, -1.73}, 0.0, {1.6, 1.7, 4.0}};
  const Scene s = scene_with({far, near}, 7);
  const auto dets = detect(s.cloud, s.calib);
  REQUIRE(dets.size() == 2);
  CHECK(dets[0].score >= dets[1].score);
}

TEST_CASE("rigid BEV translation moves detections by the same offset") {
  SyntheticObject car{"Car", {18, 3, -1.73}, 0.4, {1.6, 1.7, 4.0}};
  SyntheticObject ped{"Pedestrian", {12, -3, -1.73}, 1.0, {1.7, 0.6, 0.8}};
  const Scene s = scene_with({car, ped}, 8);
  const PointCloud base = quantized(s.cloud);
  PointCloud moved = base;
  for (auto& p : moved.points) {
    p.x += 4.0F;
    p.y -= 2.0F;
  }
  const auto a = detect(base, s.calib);
  const auto b = detect(moved, s.calib);
  REQUIRE(a.size() == b.size());
  REQUIRE(a.size() == 2);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Eigen::Vector3d la = rect_to_lidar(a[i].box.center_bottom, s.calib);
    const Eigen::Vector3d lb = rect_to_lidar(b[i].box.center_bottom, s.calib);
    CHECK((lb - la - Eigen::Vector3d(4.0, -2.0, 0.0)).norm() <= 1e-6);
    CHECK(std::abs(a[i].box.dims.l - b[i].box.dims.l) <= 1e-6);
    CHECK(a[i].score == b[i].score);
  }
}

TEST_CASE("result-file conversion round-trips") {
  SyntheticObject car{"Car", {20, 1, -1.73}, 0.2, {1.6, 1.7, 4.0}};
  const Scene s = scene_with({car}, 9);
  const auto dets = detect(s.cloud, s.calib);
  const auto labels = detections_to_labels(dets, s.calib, {1242, 375});
  REQUIRE(labels.size() == dets.size());
  const auto back = labels_to_detections(parse_labels(write_labels(labels)));
  REQUIRE(back.size() == dets.size());
  CHECK(back[0].score == doctest::Approx(dets[0].score).epsilon(0.01));
  CHECK(bev_iou(back[0].box, dets[0].box) > 0.95);
  ObjectLabel no_score = labels[0];
  no_score.score.reset();
  CHECK(labels_to_detections({no_score})[0].score == 0.0);
}

TEST_CASE("detector config validation") {
  DetectorConfig cfg;
  cfg.cell_size = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
