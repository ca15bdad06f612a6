#pragma once

#include <string>
#include <vector>

#include "phantom/evaluation.hpp"
#include "phantom/synthetic.hpp"

namespace fixture {

// 200 Vehicle attempts with 176 successes (mean 0.75045, median 0.79) and
// 200 Pedestrian attempts with 166 successes at 0.56.
inline std::vector<phantom::AttackOutcome> reference_outcomes() {
  std::vector<phantom::AttackOutcome> out;
  std::size_t next = 0;
  auto add = [&](const char* cls, std::size_t n, std::optional<double> score) {
    for (std::size_t i = 0; i < n; ++i) {
      phantom::AttackOutcome o;
      o.scene_id = phantom::format_scene_id(next++);
      o.class_name = cls;
      if (score) {
        o.success = true;
        o.matched_score = *score;
        o.matched_iou = 0.5;
      } else {
        o.failure_reason = phantom::FailureReason::kNoDetection;
      }
      out.push_back(o);
    }
  };
  add("Vehicle", 87, 0.65);
  add("Vehicle", 2, 0.79);
  add("Vehicle", 87, 0.85);
  add("Vehicle", 24, std::nullopt);
  add("Pedestrian", 166, 0.56);
  add("Pedestrian", 34, std::nullopt);
  return out;
}

}  // namespace fixture
