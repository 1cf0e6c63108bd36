#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "semcal/geometry.hpp"
#include "semcal/semantic_io.hpp"

namespace semcal {

// Essential matrix with the (1, 1, 0) singular-value structure enforced.
struct EssentialMatrix {
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
};

// Relative pose between two camera frames: x2 = R x1 + t (up to scale).
struct RelativePose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation_direction = Eigen::Vector3d::UnitZ();
  int inlier_count = 0;
  double inlier_ratio = 0.0;
};

// Metric velocity between two camera frames, camera coordinates of the
// newer image.
struct VelocityEstimate {
  Eigen::Vector3d v = Eigen::Vector3d::Zero();  // m/s
  enum class ScaleSource { SuppliedSpeed, SuppliedVector } scale_source =
      ScaleSource::SuppliedVector;
  double frame_dt = 0.0;  // seconds
  int frame_id = 0;
};

struct RansacConfig {
  int iterations = 500;
  double inlier_threshold_px = 1.0;  // Sampson distance
  std::uint64_t seed = 1;
};

struct EssentialEstimate {
  EssentialMatrix essential;
  std::vector<bool> inlier_mask;
  int inlier_count = 0;
};

// Normalized eight-point solver inside a RANSAC loop: coordinates pass
// through K^-1 and a Hartley isotropic normalization, models are scored by
// truncated squared Sampson distance in pixels (MSAC), and the best model
// is refit once on all its inliers. Deterministic for a fixed seed.
// Throws InsufficientCorrespondences (< 8 pairs) and
// DegenerateConfiguration (best support below 8).
EssentialEstimate estimate_essential_ransac(const FeatureCorrespondences& correspondences,
                                            const CameraIntrinsics& intrinsics,
                                            const RansacConfig& config);

// Four-way decomposition disambiguated by cheirality voting over the
// inliers. Throws CheiralityAmbiguous when no candidate wins strictly or
// when too few triangulations are well conditioned.
RelativePose decompose_essential(const EssentialMatrix& essential,
                                 const FeatureCorrespondences& correspondences,
                                 const std::vector<bool>& inlier_mask,
                                 const CameraIntrinsics& intrinsics);

// Applies a metric speed along the recovered direction.
VelocityEstimate velocity_from_pose(const RelativePose& pose, double speed_mps,
                                    double frame_dt_s);

// CSV "frame_id,vx,vy,vz" in m/s, camera frame.
std::vector<VelocityEstimate> load_velocity_csv(const std::string& path);
void save_velocity_csv(const std::vector<VelocityEstimate>& velocities,
                       const std::string& path);

}  // namespace semcal
