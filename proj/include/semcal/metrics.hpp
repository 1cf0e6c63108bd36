#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

namespace semcal {

// Per-run errors in the reporting units: degrees, centimeters, milliseconds.
struct CalibrationError {
  double qad_deg = 0.0;
  double aead_deg = 0.0;
  double atd_cm = 0.0;
  std::optional<double> delay_error_ms;  // absent for static-only runs
};

// Quaternion angle difference 2*acos(|p.q|) in degrees; equals the geodesic
// angle between the rotations. Throws NotARotation on invalid inputs.
double qad(const Eigen::Matrix3d& r_gt, const Eigen::Matrix3d& r_est);

// Intrinsic x-y-z (roll, pitch, yaw) Euler angles in radians, the
// convention used by the average Euler angle difference below.
struct EulerAngles {
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;
  bool gimbal_warning = false;  // |pitch| within 0.5 deg of +-90 deg
};

EulerAngles matrix_to_euler(const Eigen::Matrix3d& rotation);
Eigen::Matrix3d euler_to_matrix(double roll, double pitch, double yaw);

struct AeadResult {
  double degrees = 0.0;
  bool gimbal_warning = false;
};

// Mean of the absolute roll/pitch/yaw differences in degrees, each wrapped
// into [0, 180].
AeadResult aead(const Eigen::Matrix3d& r_gt, const Eigen::Matrix3d& r_est);

// Mean absolute per-axis translation difference, in centimeters.
double atd(const Eigen::Vector3d& t_gt, const Eigen::Vector3d& t_est);

// |delta_gt - delta_est| in milliseconds.
double delay_error(double delta_gt_s, double delta_est_s);

// Mean and median over a frame set; median of an even count is the midpoint
// of the two central values.
double mean(const std::vector<double>& values);
double median(std::vector<double> values);

// Flat key=value block, one metric per line.
std::string format_error_text(const CalibrationError& error);

}  // namespace semcal
