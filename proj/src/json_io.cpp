#include "semcal/json_io.hpp"

#include <fstream>

#include <json.hpp>

#include "semcal/error.hpp"

namespace semcal {

namespace {

using nlohmann::json;

json vec3(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Eigen::Vector3d to_vec3(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_array() || j[key].size() != 3)
    throw Error(std::string("json: missing or malformed 3-vector '") + key + "'");
  return {j[key][0].get<double>(), j[key][1].get<double>(),
          j[key][2].get<double>()};
}

json read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open file");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ParseError(path, 0, e.what());
  }
  return j;
}

void write_file(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path, "cannot open for writing");
  out << j.dump(2) << "\n";
}

CalibrationStatus status_from_string(const std::string& s) {
  if (s == "converged") return CalibrationStatus::Converged;
  if (s == "max_iterations") return CalibrationStatus::MaxIterations;
  if (s == "failed") return CalibrationStatus::Failed;
  throw Error("json: unknown status '" + s + "'");
}

}  // namespace

void save_gt_json(const GroundTruth& gt, const std::string& path) {
  json j;
  j["axis_angle_rad"] = vec3(gt.params.axis_angle);
  j["translation_m"] = vec3(gt.params.translation);
  j["delay_s"] = gt.params.delay;
  j["velocity_mps"] = vec3(gt.velocity);
  write_file(j, path);
}

GroundTruth load_gt_json(const std::string& path) {
  const json j = read_file(path);
  GroundTruth gt;
  gt.params = CalibrationParams(to_vec3(j, "axis_angle_rad"),
                                to_vec3(j, "translation_m"),
                                j.value("delay_s", 0.0));
  gt.velocity = j.contains("velocity_mps") ? to_vec3(j, "velocity_mps")
                                           : Eigen::Vector3d::Zero();
  return gt;
}

std::string result_to_json(const CalibrationResult& result) {
  json j;
  j["axis_angle_rad"] = vec3(result.params.axis_angle);
  j["translation_m"] = vec3(result.params.translation);
  const Eigen::Vector4d q =
      matrix_to_quaternion(axis_angle_to_matrix(result.params.axis_angle));
  j["quaternion_wxyz"] = json::array({q[0], q[1], q[2], q[3]});
  j["delay_s"] = result.params.delay;
  j["status"] = to_string(result.status);
  j["final_loss"] = result.final_loss;
  j["iterations"] = result.trace.size();
  j["matched_elements"] = result.matched_elements;
  if (!result.failure_reason.empty()) j["failure_reason"] = result.failure_reason;
  json trace = json::array();
  for (const auto& entry : result.trace) {
    json t;
    t["iteration"] = entry.iteration;
    t["w"] = entry.w;
    t["loss"] = entry.loss;
    t["axis_angle_rad"] = vec3(entry.params.axis_angle);
    t["translation_m"] = vec3(entry.params.translation);
    t["delay_s"] = entry.params.delay;
    trace.push_back(t);
  }
  j["trace"] = trace;
  return j.dump(2) + "\n";
}

void save_result_json(const CalibrationResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path, "cannot open for writing");
  out << result_to_json(result);
}

CalibrationResult load_result_json(const std::string& path) {
  const json j = read_file(path);
  CalibrationResult result;
  result.params = CalibrationParams(to_vec3(j, "axis_angle_rad"),
                                    to_vec3(j, "translation_m"),
                                    j.value("delay_s", 0.0));
  result.status = status_from_string(j.value("status", "failed"));
  result.final_loss = j.value("final_loss", 0.0);
  result.matched_elements = j.value("matched_elements", std::size_t{0});
  result.failure_reason = j.value("failure_reason", "");
  if (j.contains("trace")) {
    for (const auto& t : j["trace"]) {
      TraceEntry entry;
      entry.iteration = t.value("iteration", 0);
      entry.w = t.value("w", 0.0);
      entry.loss = t.value("loss", 0.0);
      entry.params = CalibrationParams(to_vec3(t, "axis_angle_rad"),
                                       to_vec3(t, "translation_m"),
                                       t.value("delay_s", 0.0));
      result.trace.push_back(entry);
    }
  }
  return result;
}

}  // namespace semcal
