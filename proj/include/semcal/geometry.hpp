#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <optional>
#include <string>

namespace semcal {

// Points with camera-frame depth at or below this are treated as
// non-projectable; keeps the homogeneous division away from the image plane.
inline constexpr double kMinProjectionDepth = 1e-3;  // meters

// Rigid body transform mapping LIDAR-frame points into the camera frame.
struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return rotation * p + translation;
  }

  // True when rotation is orthonormal with det +1 within 1e-9 elementwise.
  bool valid() const;
};

RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform inverse(const RigidTransform& a);

// Pure pinhole camera, no skew or distortion.
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  Eigen::Matrix3d matrix() const {
    Eigen::Matrix3d k;
    k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return k;
  }

  void validate() const;  // throws Error on violated invariants
};

// Loads fx, fy, cx, cy, width, height from a key=value text file.
// '#' starts a comment; all six keys are required.
CameraIntrinsics load_intrinsics(const std::string& path);
void save_intrinsics(const CameraIntrinsics& k, const std::string& path);

// The 7-dim optimization vector: rotation as an unconstrained axis-angle
// 3-vector, translation in meters, acquisition delay in seconds.
struct CalibrationParams {
  Eigen::Vector3d axis_angle = Eigen::Vector3d::Zero();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  double delay = 0.0;

  CalibrationParams() = default;
  CalibrationParams(const Eigen::Vector3d& aa, const Eigen::Vector3d& t,
                    double d);

  RigidTransform transform() const;
};

// Continuous image coordinates of one projected cloud point.
struct PixelPoint {
  double u = 0.0;
  double v = 0.0;
  std::size_t source_index = 0;
};

// Rodrigues' formula; the zero vector maps to the identity.
Eigen::Matrix3d axis_angle_to_matrix(const Eigen::Vector3d& axis_angle);

// Inverse of the above, canonical range ||result|| in [0, pi].
Eigen::Vector3d matrix_to_axis_angle(const Eigen::Matrix3d& rotation);

// Unit quaternion (w, x, y, z) with w >= 0; throws NotARotation when the
// input fails the orthonormality check at 1e-6.
Eigen::Vector4d matrix_to_quaternion(const Eigen::Matrix3d& rotation);

Eigen::Matrix3d quaternion_to_matrix(const Eigen::Vector4d& wxyz);

// Wraps an axis-angle vector into the canonical ||aa|| <= pi range.
Eigen::Vector3d canonicalize_axis_angle(const Eigen::Vector3d& axis_angle);

// Projects p through (u, v, z) = K [R p + t]; returns the dehomogenized
// pixel when z > kMinProjectionDepth, absent otherwise. No field-of-view
// clipping happens here.
std::optional<PixelPoint> project_point(const Eigen::Vector3d& p,
                                        const RigidTransform& transform,
                                        const CameraIntrinsics& intrinsics);

// Projection with the translation augmented by velocity * delay; with
// delay = 0 this matches project_point bit for bit.
std::optional<PixelPoint> project_point_delayed(
    const Eigen::Vector3d& p, const RigidTransform& transform,
    const Eigen::Vector3d& velocity, double delay,
    const CameraIntrinsics& intrinsics);

}  // namespace semcal
