#pragma once

#include <string>

#include "semcal/calibrate.hpp"
#include "semcal/geometry.hpp"

namespace semcal {

// Ground-truth sidecar written by the scene generator.
struct GroundTruth {
  CalibrationParams params;
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
};

void save_gt_json(const GroundTruth& gt, const std::string& path);
GroundTruth load_gt_json(const std::string& path);

// result.json carries both the axis-angle and quaternion forms so metric
// consumers never re-derive a convention.
std::string result_to_json(const CalibrationResult& result);
void save_result_json(const CalibrationResult& result, const std::string& path);
CalibrationResult load_result_json(const std::string& path);

}  // namespace semcal
