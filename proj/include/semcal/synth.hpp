#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>

#include "semcal/geometry.hpp"
#include "semcal/semantic_io.hpp"

namespace semcal {

// Recipe for a synthetic scene with known calibration: car-like boxes in the
// camera viewing volume, their surface points expressed in the LIDAR frame
// through the inverse of the ground-truth transform.
struct SceneConfig {
  int n_clusters = 5;
  double cluster_size_min = 1.5;  // box edge, meters
  double cluster_size_max = 4.0;
  double depth_min = 6.0;  // camera-frame z of cluster centers, meters
  double depth_max = 22.0;
  double lateral_range = 8.0;  // camera-frame |x| of cluster centers, meters
  int points_per_cluster = 200;
  RigidTransform gt_transform;  // LIDAR -> camera
  double gt_delay = 0.0;        // seconds
  Eigen::Vector3d gt_velocity = Eigen::Vector3d::Zero();  // camera frame, m/s
  CameraIntrinsics intrinsics{525.0, 525.0, 320.0, 240.0, 640, 480};
  std::uint64_t seed = 1;
  std::uint32_t cloud_class_id = 10;
  std::uint16_t mask_class_id = 13;
  std::uint16_t background_class_id = 0;
  // Fraction of mask pixels whose class membership is flipped, simulating
  // segmentation errors. Breaks the exact-alignment oracle when nonzero.
  double label_flip_rate = 0.0;
  // Extra class pixels per cluster (as a fraction of points_per_cluster)
  // sampled from the same surfaces but hosting no cloud point. They are
  // only placed at least 2 px away from every existing class pixel, so each
  // projected point keeps matching its own pixel near the optimum while the
  // pixel-to-point direction gains support the point set does not cover.
  double mask_extra_fraction = 0.0;
  // When set, the mask footprint is densified with a 20x surface
  // over-sampling so it strictly contains the projected points. The default
  // keeps class pixels exactly on projected point positions, which makes the
  // ground truth the exact global minimum of both loss directions.
  bool dense_mask = false;

  void validate() const;
};

// A consistent (cloud, mask, velocity) triple: projecting the cloud with the
// ground-truth parameters lands every surviving point on a class pixel.
struct SceneBundle {
  SemanticPointCloud cloud;  // LIDAR frame, class-filtered by construction
  SemanticMask mask;
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  CalibrationParams gt;
  CameraIntrinsics intrinsics;
};

// Deterministic per seed. Throws EmptyScene when nothing lands in the image.
SceneBundle generate_scene(const SceneConfig& config);

// Uniform noise on translation (per axis, +-trans_range meters) and on the
// rotation (per Euler axis, +-rot_range_deg degrees, composed on the camera
// side). The delay is left untouched.
CalibrationParams perturb_params(const CalibrationParams& gt,
                                 double trans_range_m, double rot_range_deg,
                                 std::uint64_t seed);

struct TwoViewConfig {
  int n_points = 100;
  double outlier_fraction = 0.0;
  CameraIntrinsics intrinsics{525.0, 525.0, 320.0, 240.0, 640, 480};
  double depth_min = 4.0;
  double depth_max = 40.0;
  std::uint64_t seed = 1;
};

struct TwoViewData {
  FeatureCorrespondences pairs;
  RigidTransform pose;  // ground truth: x2 = R x1 + t
  std::vector<bool> is_outlier;
};

// Projects shared 3D points into two camera poses; an exact round(fraction
// * n) of the pairs is corrupted into epipolar-violating outliers.
// pose_delta must have nonzero translation. Throws TooFewVisible when
// fewer than 8 shared points survive.
TwoViewData make_two_view_correspondences(const TwoViewConfig& config,
                                          const RigidTransform& pose_delta);

// Writes cloud.csv, mask.pgm, velocity.csv, intrinsics.txt, gt.json and,
// for moving scenes, correspondences.csv into the directory.
void write_scene_files(const SceneBundle& bundle, const SceneConfig& config,
                       const std::string& directory, double frame_dt_s = 0.1);

}  // namespace semcal
