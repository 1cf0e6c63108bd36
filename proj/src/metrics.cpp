#include "semcal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "semcal/error.hpp"
#include "semcal/geometry.hpp"

namespace semcal {

namespace {

constexpr double kRadToDeg = 180.0 / M_PI;

double wrap_abs_degrees(double degrees) {
  double d = std::fmod(std::abs(degrees), 360.0);
  return d > 180.0 ? 360.0 - d : d;
}

}  // namespace

double qad(const Eigen::Matrix3d& r_gt, const Eigen::Matrix3d& r_est) {
  const Eigen::Vector4d p = matrix_to_quaternion(r_gt);
  const Eigen::Vector4d q = matrix_to_quaternion(r_est);
  const double dot = std::clamp(std::abs(p.dot(q)), 0.0, 1.0);
  return 2.0 * std::acos(dot) * kRadToDeg;
}

EulerAngles matrix_to_euler(const Eigen::Matrix3d& r) {
  // R = Rx(roll) * Ry(pitch) * Rz(yaw):
  //   r02 = sin(pitch), r12 = -sin(roll) cos(pitch), r01 = -cos(pitch) sin(yaw)
  EulerAngles e;
  const double sp = std::clamp(r(0, 2), -1.0, 1.0);
  e.pitch = std::asin(sp);
  e.gimbal_warning = std::abs(std::abs(e.pitch) - M_PI / 2.0) < 0.5 / kRadToDeg;
  if (!e.gimbal_warning) {
    e.roll = std::atan2(-r(1, 2), r(2, 2));
    e.yaw = std::atan2(-r(0, 1), r(0, 0));
  } else {
    // cos(pitch) ~ 0: only roll +- yaw is observable; put it all in roll.
    e.roll = std::atan2(r(2, 1), r(1, 1));
    e.yaw = 0.0;
  }
  return e;
}

Eigen::Matrix3d euler_to_matrix(double roll, double pitch, double yaw) {
  const Eigen::Matrix3d rx =
      axis_angle_to_matrix(Eigen::Vector3d(roll, 0.0, 0.0));
  const Eigen::Matrix3d ry =
      axis_angle_to_matrix(Eigen::Vector3d(0.0, pitch, 0.0));
  const Eigen::Matrix3d rz =
      axis_angle_to_matrix(Eigen::Vector3d(0.0, 0.0, yaw));
  return rx * ry * rz;
}

AeadResult aead(const Eigen::Matrix3d& r_gt, const Eigen::Matrix3d& r_est) {
  if (!((r_gt.transpose() * r_gt - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= 1e-6))
    throw NotARotation("aead: first argument is not a rotation");
  if (!((r_est.transpose() * r_est - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= 1e-6))
    throw NotARotation("aead: second argument is not a rotation");
  const EulerAngles a = matrix_to_euler(r_gt);
  const EulerAngles b = matrix_to_euler(r_est);
  const double droll = wrap_abs_degrees((a.roll - b.roll) * kRadToDeg);
  const double dpitch = wrap_abs_degrees((a.pitch - b.pitch) * kRadToDeg);
  const double dyaw = wrap_abs_degrees((a.yaw - b.yaw) * kRadToDeg);
  return {(droll + dpitch + dyaw) / 3.0, a.gimbal_warning || b.gimbal_warning};
}

double atd(const Eigen::Vector3d& t_gt, const Eigen::Vector3d& t_est) {
  return (t_gt - t_est).cwiseAbs().sum() / 3.0 * 100.0;
}

double delay_error(double delta_gt_s, double delta_est_s) {
  return std::abs(delta_gt_s - delta_est_s) * 1000.0;
}

double mean(const std::vector<double>& values) {
  if (values.empty()) throw Error("mean of an empty set");
  double sum = 0.0;
  for (const double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double median(std::vector<double> values) {
  if (values.empty()) throw Error("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::string format_error_text(const CalibrationError& error) {
  std::ostringstream out;
  out.precision(17);
  out << "qad_deg=" << error.qad_deg << "\n";
  out << "aead_deg=" << error.aead_deg << "\n";
  out << "atd_cm=" << error.atd_cm << "\n";
  if (error.delay_error_ms) out << "delay_error_ms=" << *error.delay_error_ms << "\n";
  return out.str();
}

}  // namespace semcal
