#include "semcal/synth.hpp"

#include <cmath>
#include <filesystem>

#include "semcal/error.hpp"
#include "semcal/json_io.hpp"
#include "semcal/metrics.hpp"
#include "semcal/odometry.hpp"
#include "semcal/rng.hpp"

namespace semcal {

void SceneConfig::validate() const {
  intrinsics.validate();
  if (n_clusters < 1) throw Error("scene needs at least one cluster");
  if (points_per_cluster < 10) throw Error("points_per_cluster must be >= 10");
  if (!(cluster_size_min > 0.0 && cluster_size_max >= cluster_size_min))
    throw Error("bad cluster size range");
  if (!(depth_min > kMinProjectionDepth && depth_max >= depth_min))
    throw Error("depth range must sit in front of the camera");
  if (!(lateral_range >= 0.0)) throw Error("lateral_range must be >= 0");
  if (!(label_flip_rate >= 0.0 && label_flip_rate <= 1.0))
    throw Error("label_flip_rate must be in [0, 1]");
  if (!(mask_extra_fraction >= 0.0))
    throw Error("mask_extra_fraction must be >= 0");
  if (!gt_transform.valid()) throw Error("gt_transform is not a rigid transform");
  if (!std::isfinite(gt_delay) || !gt_velocity.allFinite())
    throw Error("gt delay/velocity must be finite");
}

namespace {

// Snaps a camera-frame point onto the ray of its rounded pixel, preserving
// depth, so its projection is an exact integer pixel.
bool snap_to_pixel(const Eigen::Vector3d& cam, const CameraIntrinsics& k,
                   Eigen::Vector3d& snapped, int& pu, int& pv) {
  if (!(cam.z() > kMinProjectionDepth)) return false;
  const double u = k.fx * cam.x() / cam.z() + k.cx;
  const double v = k.fy * cam.y() / cam.z() + k.cy;
  const long ru = std::lround(u);
  const long rv = std::lround(v);
  if (ru < 0 || ru >= k.width || rv < 0 || rv >= k.height) return false;
  pu = static_cast<int>(ru);
  pv = static_cast<int>(rv);
  snapped = {(pu - k.cx) / k.fx * cam.z(), (pv - k.cy) / k.fy * cam.z(), cam.z()};
  return true;
}

Eigen::Vector3d sample_box_surface(SplitMix64& rng, const Eigen::Vector3d& half) {
  const std::uint64_t face = rng.below(6);
  Eigen::Vector3d p(rng.uniform(-half.x(), half.x()),
                    rng.uniform(-half.y(), half.y()),
                    rng.uniform(-half.z(), half.z()));
  const int axis = static_cast<int>(face / 2);
  p[axis] = (face % 2 == 0) ? -half[axis] : half[axis];
  return p;
}

}  // namespace

SceneBundle generate_scene(const SceneConfig& config) {
  config.validate();
  SplitMix64 rng(config.seed);
  const CameraIntrinsics& k = config.intrinsics;

  // Effective camera placement at image time: Eq-style t + v * delta.
  const Eigen::Vector3d t_eff =
      config.gt_transform.translation + config.gt_velocity * config.gt_delay;
  const Eigen::Matrix3d rot_inv = config.gt_transform.rotation.transpose();

  SceneBundle bundle;
  bundle.intrinsics = k;
  bundle.velocity = config.gt_velocity;
  bundle.gt = CalibrationParams(matrix_to_axis_angle(config.gt_transform.rotation),
                                config.gt_transform.translation, config.gt_delay);
  bundle.mask.width = k.width;
  bundle.mask.height = k.height;
  bundle.mask.classes.assign(static_cast<std::size_t>(k.width) * k.height,
                             config.background_class_id);

  const double margin_u = 0.14 * k.width;
  const double margin_v = 0.16 * k.height;
  int placed_clusters = 0;
  for (int c = 0; c < config.n_clusters; ++c) {
    // Place the cluster center so it projects well inside the image.
    Eigen::Vector3d center;
    bool placed = false;
    for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
      const double z = rng.uniform(config.depth_min, config.depth_max);
      const double x = rng.uniform(-config.lateral_range, config.lateral_range);
      const double y = rng.uniform(-config.lateral_range / 3.0,
                                   config.lateral_range / 3.0);
      const double u = k.fx * x / z + k.cx;
      const double v = k.fy * y / z + k.cy;
      if (u < margin_u || u > k.width - margin_u || v < margin_v ||
          v > k.height - margin_v)
        continue;
      center = {x, y, z};
      placed = true;
    }
    if (!placed) continue;
    ++placed_clusters;

    const Eigen::Vector3d half(
        rng.uniform(config.cluster_size_min, config.cluster_size_max) / 2.0,
        rng.uniform(config.cluster_size_min, config.cluster_size_max) / 2.0,
        rng.uniform(config.cluster_size_min, config.cluster_size_max) / 2.0);

    int emitted = 0;
    for (int i = 0; i < config.points_per_cluster; ++i) {
      bool done = false;
      for (int attempt = 0; attempt < 50 && !done; ++attempt) {
        const Eigen::Vector3d cam = center + sample_box_surface(rng, half);
        Eigen::Vector3d snapped;
        int pu = 0, pv = 0;
        if (!snap_to_pixel(cam, k, snapped, pu, pv)) continue;
        bundle.cloud.points.push_back(rot_inv * (snapped - t_eff));
        bundle.cloud.labels.push_back(config.cloud_class_id);
        bundle.mask.at(pu, pv) = config.mask_class_id;
        ++emitted;
        done = true;
      }
    }
    if (config.mask_extra_fraction > 0.0) {
      const int extras = static_cast<int>(
          std::llround(config.mask_extra_fraction * config.points_per_cluster));
      const auto clear_of_class = [&](int pu, int pv) {
        for (int dv = -2; dv <= 2; ++dv) {
          for (int du = -2; du <= 2; ++du) {
            const int u = pu + du;
            const int v = pv + dv;
            if (u >= 0 && u < k.width && v >= 0 && v < k.height &&
                bundle.mask.at(u, v) == config.mask_class_id)
              return false;
          }
        }
        return true;
      };
      for (int i = 0; i < extras; ++i) {
        const Eigen::Vector3d cam = center + sample_box_surface(rng, half);
        Eigen::Vector3d snapped;
        int pu = 0, pv = 0;
        if (snap_to_pixel(cam, k, snapped, pu, pv) && clear_of_class(pu, pv))
          bundle.mask.at(pu, pv) = config.mask_class_id;
      }
    }
    if (config.dense_mask) {
      for (int i = 0; i < 20 * config.points_per_cluster; ++i) {
        const Eigen::Vector3d cam = center + sample_box_surface(rng, half);
        Eigen::Vector3d snapped;
        int pu = 0, pv = 0;
        if (snap_to_pixel(cam, k, snapped, pu, pv))
          bundle.mask.at(pu, pv) = config.mask_class_id;
      }
    }
    (void)emitted;
  }

  if (placed_clusters == 0 || bundle.cloud.points.empty())
    throw EmptyScene("no cluster projects into the image");

  if (config.label_flip_rate > 0.0) {
    for (auto& cls : bundle.mask.classes) {
      if (rng.uniform() < config.label_flip_rate)
        cls = (cls == config.mask_class_id) ? config.background_class_id
                                            : config.mask_class_id;
    }
  }
  return bundle;
}

CalibrationParams perturb_params(const CalibrationParams& gt,
                                 double trans_range_m, double rot_range_deg,
                                 std::uint64_t seed) {
  if (trans_range_m < 0.0 || rot_range_deg < 0.0)
    throw Error("perturbation ranges must be >= 0");
  SplitMix64 rng(seed);
  Eigen::Vector3d dt;
  for (int i = 0; i < 3; ++i) dt[i] = rng.uniform(-trans_range_m, trans_range_m);
  const double r = rot_range_deg * M_PI / 180.0;
  const double droll = rng.uniform(-r, r);
  const double dpitch = rng.uniform(-r, r);
  const double dyaw = rng.uniform(-r, r);
  const Eigen::Matrix3d noisy =
      euler_to_matrix(droll, dpitch, dyaw) * axis_angle_to_matrix(gt.axis_angle);
  return CalibrationParams(matrix_to_axis_angle(noisy), gt.translation + dt,
                           gt.delay);
}

TwoViewData make_two_view_correspondences(const TwoViewConfig& config,
                                          const RigidTransform& pose_delta) {
  config.intrinsics.validate();
  if (config.n_points < 8) throw Error("two-view scene needs >= 8 points");
  if (!(config.outlier_fraction >= 0.0 && config.outlier_fraction < 1.0))
    throw Error("outlier_fraction must be in [0, 1)");
  if (!(pose_delta.translation.norm() > 0.0))
    throw Error("pose_delta must have nonzero translation");
  const CameraIntrinsics& k = config.intrinsics;
  SplitMix64 rng(config.seed);

  TwoViewData data;
  data.pose = pose_delta;
  for (int i = 0; i < config.n_points; ++i) {
    bool done = false;
    for (int attempt = 0; attempt < 200 && !done; ++attempt) {
      const double u1 = rng.uniform(0.05 * k.width, 0.95 * k.width);
      const double v1 = rng.uniform(0.05 * k.height, 0.95 * k.height);
      const double z1 = rng.uniform(config.depth_min, config.depth_max);
      const Eigen::Vector3d x1((u1 - k.cx) / k.fx * z1, (v1 - k.cy) / k.fy * z1,
                               z1);
      const Eigen::Vector3d x2 = pose_delta.apply(x1);
      if (!(x2.z() > kMinProjectionDepth)) continue;
      const double u2 = k.fx * x2.x() / x2.z() + k.cx;
      const double v2 = k.fy * x2.y() / x2.z() + k.cy;
      if (u2 < 0.0 || u2 >= k.width || v2 < 0.0 || v2 >= k.height) continue;
      data.pairs.pairs.push_back(
          {Eigen::Vector2d(u1, v1), Eigen::Vector2d(u2, v2)});
      done = true;
    }
  }
  if (data.pairs.size() < 8)
    throw TooFewVisible("only " + std::to_string(data.pairs.size()) +
                        " shared points are visible in both views");

  const std::size_t n = data.pairs.size();
  data.is_outlier.assign(n, false);
  const std::size_t n_outliers = static_cast<std::size_t>(
      std::llround(config.outlier_fraction * static_cast<double>(n)));
  if (n_outliers > 0) {
    // Ground-truth fundamental matrix for rejection-testing the corruption.
    Eigen::Matrix3d tx;
    const Eigen::Vector3d& t = pose_delta.translation;
    tx << 0.0, -t.z(), t.y(), t.z(), 0.0, -t.x(), -t.y(), t.x(), 0.0;
    const Eigen::Matrix3d e = tx * pose_delta.rotation;
    const Eigen::Matrix3d kinv = k.matrix().inverse();
    const Eigen::Matrix3d f = kinv.transpose() * e * kinv;
    const auto sampson = [&](const Eigen::Vector2d& p1, const Eigen::Vector2d& p2) {
      const Eigen::Vector3d fx1 = f * p1.homogeneous();
      const Eigen::Vector3d ftx2 = f.transpose() * p2.homogeneous();
      const double num = p2.homogeneous().dot(fx1);
      const double den = fx1.head<2>().squaredNorm() + ftx2.head<2>().squaredNorm();
      return den > 0.0 ? std::sqrt(num * num / den)
                       : std::numeric_limits<double>::infinity();
    };
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = 0; i < n_outliers; ++i) {
      const std::size_t j = i + rng.below(n - i);
      std::swap(order[i], order[j]);
    }
    for (std::size_t i = 0; i < n_outliers; ++i) {
      auto& pair = data.pairs.pairs[order[i]];
      for (int attempt = 0; attempt < 200; ++attempt) {
        const Eigen::Vector2d corrupted(rng.uniform(0.0, k.width - 1.0),
                                        rng.uniform(0.0, k.height - 1.0));
        if (sampson(pair.first, corrupted) > 5.0) {
          pair.second = corrupted;
          break;
        }
      }
      data.is_outlier[order[i]] = true;
    }
  }
  return data;
}

void write_scene_files(const SceneBundle& bundle, const SceneConfig& config,
                       const std::string& directory, double frame_dt_s) {
  namespace fs = std::filesystem;
  fs::create_directories(directory);
  const fs::path dir(directory);
  save_point_cloud_csv(bundle.cloud, (dir / "cloud.csv").string());
  save_mask_pgm(bundle.mask, (dir / "mask.pgm").string());
  save_intrinsics(bundle.intrinsics, (dir / "intrinsics.txt").string());

  VelocityEstimate vel;
  vel.frame_id = 0;
  vel.v = bundle.velocity;
  vel.frame_dt = frame_dt_s;
  save_velocity_csv({vel}, (dir / "velocity.csv").string());

  GroundTruth gt;
  gt.params = bundle.gt;
  gt.velocity = bundle.velocity;
  save_gt_json(gt, (dir / "gt.json").string());

  if (bundle.velocity.norm() > 0.0) {
    TwoViewConfig tv;
    tv.intrinsics = bundle.intrinsics;
    tv.seed = SplitMix64::derive(config.seed, 0x7477);
    const RigidTransform pose{Eigen::Matrix3d::Identity(),
                              bundle.velocity * frame_dt_s};
    const TwoViewData two_view = make_two_view_correspondences(tv, pose);
    save_correspondences_csv(two_view.pairs,
                             (dir / "correspondences.csv").string());
  }
}

}  // namespace semcal
