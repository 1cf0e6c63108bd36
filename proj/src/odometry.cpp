#include "semcal/odometry.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "semcal/error.hpp"
#include "semcal/rng.hpp"

namespace semcal {

namespace {

// Camera-normalized coordinates: K^-1 [u, v, 1].
Eigen::Vector2d normalize_pixel(const Eigen::Vector2d& px,
                                const CameraIntrinsics& k) {
  return {(px.x() - k.cx) / k.fx, (px.y() - k.cy) / k.fy};
}

// Hartley isotropic normalization: centroid to origin, mean norm sqrt(2).
Eigen::Matrix3d hartley_transform(const std::vector<Eigen::Vector2d>& pts) {
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());
  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += (p - centroid).norm();
  mean_dist /= static_cast<double>(pts.size());
  const double scale = mean_dist > 1e-12 ? std::sqrt(2.0) / mean_dist : 1.0;
  Eigen::Matrix3d t;
  t << scale, 0.0, -scale * centroid.x(), 0.0, scale, -scale * centroid.y(),
      0.0, 0.0, 1.0;
  return t;
}

// Least-squares epipolar solve over the given normalized pairs; the pairs
// are Hartley-normalized internally.
Eigen::Matrix3d solve_eight_point(const std::vector<Eigen::Vector2d>& x1,
                                  const std::vector<Eigen::Vector2d>& x2) {
  const Eigen::Matrix3d t1 = hartley_transform(x1);
  const Eigen::Matrix3d t2 = hartley_transform(x2);
  const std::size_t n = x1.size();
  Eigen::MatrixXd a(n, 9);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d p1 = t1 * x1[i].homogeneous();
    const Eigen::Vector3d p2 = t2 * x2[i].homogeneous();
    a.row(i) << p2.x() * p1.x(), p2.x() * p1.y(), p2.x(), p2.y() * p1.x(),
        p2.y() * p1.y(), p2.y(), p1.x(), p1.y(), 1.0;
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd e = svd.matrixV().col(8);
  Eigen::Matrix3d em;
  em << e[0], e[1], e[2], e[3], e[4], e[5], e[6], e[7], e[8];
  return t2.transpose() * em * t1;
}

Eigen::Matrix3d enforce_essential(const Eigen::Matrix3d& raw) {
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      raw, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * Eigen::Vector3d(1.0, 1.0, 0.0).asDiagonal() *
         svd.matrixV().transpose();
}

// First-order (Sampson) epipolar distance in pixels, via F = K^-T E K^-1.
double sampson_distance_px(const Eigen::Matrix3d& f, const Eigen::Vector2d& px1,
                           const Eigen::Vector2d& px2) {
  const Eigen::Vector3d x1 = px1.homogeneous();
  const Eigen::Vector3d x2 = px2.homogeneous();
  const Eigen::Vector3d fx1 = f * x1;
  const Eigen::Vector3d ftx2 = f.transpose() * x2;
  const double num = x2.dot(fx1);
  const double den = fx1.head<2>().squaredNorm() + ftx2.head<2>().squaredNorm();
  if (den <= 0.0) return std::numeric_limits<double>::infinity();
  return std::sqrt(num * num / den);
}

Eigen::Matrix3d fundamental_from_essential(const Eigen::Matrix3d& e,
                                           const CameraIntrinsics& k) {
  const Eigen::Matrix3d kinv = k.matrix().inverse();
  return kinv.transpose() * e * kinv;
}

// Depth of the triangulated point in both views; x1, x2 are normalized
// image coordinates. Returns false when the triangulation is too poorly
// conditioned to vote on.
bool triangulate_depths(const Eigen::Matrix3d& r, const Eigen::Vector3d& t,
                        const Eigen::Vector2d& x1, const Eigen::Vector2d& x2,
                        double& z1, double& z2) {
  const Eigen::Vector3d ray1 = x1.homogeneous();
  const Eigen::Vector3d ray2 = x2.homogeneous();
  // z2 * x2 = z1 * R x1 + t; eliminate z2 with a cross product.
  const Eigen::Vector3d a = ray2.cross(r * ray1);
  const Eigen::Vector3d b = ray2.cross(t);
  const double denom = a.squaredNorm();
  if (denom < 1e-12) return false;
  z1 = -a.dot(b) / denom;
  z2 = (z1 * (r * ray1) + t).z();
  return true;
}

}  // namespace

EssentialEstimate estimate_essential_ransac(const FeatureCorrespondences& correspondences,
                                            const CameraIntrinsics& intrinsics,
                                            const RansacConfig& config) {
  intrinsics.validate();
  const std::size_t n = correspondences.size();
  if (n < 8)
    throw InsufficientCorrespondences(
        "essential-matrix estimation needs at least 8 pairs, got " +
        std::to_string(n));
  const double margin_u = 0.1 * intrinsics.width;
  const double margin_v = 0.1 * intrinsics.height;
  for (const auto& pair : correspondences.pairs) {
    for (const Eigen::Vector2d& p : {pair.first, pair.second}) {
      if (!p.allFinite() || p.x() < -margin_u ||
          p.x() > intrinsics.width + margin_u || p.y() < -margin_v ||
          p.y() > intrinsics.height + margin_v)
        throw Error("correspondence outside the expanded image rectangle");
    }
  }

  std::vector<Eigen::Vector2d> norm1(n), norm2(n);
  for (std::size_t i = 0; i < n; ++i) {
    norm1[i] = normalize_pixel(correspondences.pairs[i].first, intrinsics);
    norm2[i] = normalize_pixel(correspondences.pairs[i].second, intrinsics);
  }

  // Truncated squared Sampson score (MSAC): a plain inlier count would let
  // a slightly corrupted model absorb one extra outlier and outrank the
  // exact one on noise-free data.
  struct Score {
    double cost = std::numeric_limits<double>::infinity();
    int inliers = 0;
  };
  const auto score = [&](const Eigen::Matrix3d& e, std::vector<bool>& mask) {
    const Eigen::Matrix3d f = fundamental_from_essential(e, intrinsics);
    const double thr2 = config.inlier_threshold_px * config.inlier_threshold_px;
    Score s;
    s.cost = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = sampson_distance_px(f, correspondences.pairs[i].first,
                                           correspondences.pairs[i].second);
      const double d2 = d * d;
      const bool in = d2 <= thr2;
      mask[i] = in;
      if (in) ++s.inliers;
      s.cost += std::min(d2, thr2);
    }
    return s;
  };

  SplitMix64 rng(config.seed);
  std::vector<std::size_t> indices(n);
  std::vector<Eigen::Vector2d> s1(8), s2(8);
  Eigen::Matrix3d best_e = Eigen::Matrix3d::Zero();
  Score best_score;
  std::vector<bool> mask(n), best_mask(n);
  for (int trial = 0; trial < config.iterations; ++trial) {
    for (std::size_t i = 0; i < n; ++i) indices[i] = i;
    for (int k = 0; k < 8; ++k) {
      const std::size_t j = k + rng.below(n - k);
      std::swap(indices[k], indices[j]);
      s1[k] = norm1[indices[k]];
      s2[k] = norm2[indices[k]];
    }
    const Eigen::Matrix3d e = enforce_essential(solve_eight_point(s1, s2));
    const Score s = score(e, mask);
    if (s.cost < best_score.cost) {
      best_score = s;
      best_e = e;
      best_mask = mask;
    }
  }
  if (best_score.inliers < 8)
    throw DegenerateConfiguration("best RANSAC support is " +
                                  std::to_string(best_score.inliers) +
                                  " inliers");

  // One refit on all inliers of the best model.
  std::vector<Eigen::Vector2d> in1, in2;
  for (std::size_t i = 0; i < n; ++i) {
    if (best_mask[i]) {
      in1.push_back(norm1[i]);
      in2.push_back(norm2[i]);
    }
  }
  EssentialEstimate result;
  result.essential.m = enforce_essential(solve_eight_point(in1, in2));
  result.inlier_mask.assign(n, false);
  result.inlier_count = score(result.essential.m, result.inlier_mask).inliers;
  if (result.inlier_count < 8)
    throw DegenerateConfiguration("refit lost the inlier support");
  return result;
}

RelativePose decompose_essential(const EssentialMatrix& essential,
                                 const FeatureCorrespondences& correspondences,
                                 const std::vector<bool>& inlier_mask,
                                 const CameraIntrinsics& intrinsics) {
  if (correspondences.size() != inlier_mask.size())
    throw Error("inlier mask size does not match correspondences");
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      essential.m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  Eigen::Matrix3d v = svd.matrixV();
  if (u.determinant() < 0.0) u.col(2) *= -1.0;
  if (v.determinant() < 0.0) v.col(2) *= -1.0;
  Eigen::Matrix3d w;
  w << 0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0;
  const Eigen::Matrix3d r1 = u * w * v.transpose();
  const Eigen::Matrix3d r2 = u * w.transpose() * v.transpose();
  const Eigen::Vector3d t = u.col(2);

  struct Candidate {
    Eigen::Matrix3d r;
    Eigen::Vector3d t;
    int votes = 0;
  };
  std::array<Candidate, 4> candidates = {
      Candidate{r1, t}, Candidate{r1, -t}, Candidate{r2, t}, Candidate{r2, -t}};

  int inliers = 0;
  for (std::size_t i = 0; i < correspondences.size(); ++i) {
    if (!inlier_mask[i]) continue;
    ++inliers;
    const Eigen::Vector2d x1 =
        normalize_pixel(correspondences.pairs[i].first, intrinsics);
    const Eigen::Vector2d x2 =
        normalize_pixel(correspondences.pairs[i].second, intrinsics);
    for (auto& c : candidates) {
      double z1 = 0.0, z2 = 0.0;
      if (!triangulate_depths(c.r, c.t, x1, x2, z1, z2)) continue;
      if (z1 > 0.0 && z2 > 0.0) ++c.votes;
    }
  }
  if (inliers < 8) throw Error("decomposition needs at least 8 inliers");

  int best = 0;
  for (int i = 1; i < 4; ++i)
    if (candidates[i].votes > candidates[best].votes) best = i;
  int runner_up = 0;
  for (int i = 0; i < 4; ++i)
    if (i != best && candidates[i].votes > runner_up)
      runner_up = candidates[i].votes;
  if (candidates[best].votes <= runner_up)
    throw CheiralityAmbiguous("no decomposition candidate wins strictly");
  // A genuine pose explains nearly all inliers; scattered votes indicate a
  // translation too small to resolve the four-fold ambiguity.
  const int required = std::max(8, (3 * inliers + 3) / 4);
  if (candidates[best].votes < required)
    throw CheiralityAmbiguous("winning candidate explains only " +
                              std::to_string(candidates[best].votes) + " of " +
                              std::to_string(inliers) + " inliers");

  RelativePose pose;
  pose.rotation = candidates[best].r;
  pose.translation_direction = candidates[best].t.normalized();
  pose.inlier_count = inliers;
  pose.inlier_ratio =
      static_cast<double>(inliers) / static_cast<double>(correspondences.size());
  return pose;
}

VelocityEstimate velocity_from_pose(const RelativePose& pose, double speed_mps,
                                    double frame_dt_s) {
  if (speed_mps < 0.0) throw Error("speed must be >= 0");
  if (!(frame_dt_s > 0.0)) throw Error("frame_dt must be > 0");
  VelocityEstimate estimate;
  estimate.v = pose.translation_direction * speed_mps;
  estimate.scale_source = VelocityEstimate::ScaleSource::SuppliedSpeed;
  estimate.frame_dt = frame_dt_s;
  return estimate;
}

std::vector<VelocityEstimate> load_velocity_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open file");
  std::vector<VelocityEstimate> result;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string body = line;
    const auto hash = body.find('#');
    if (hash != std::string::npos) body.erase(hash);
    if (body.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::stringstream ss(body);
    std::string field;
    std::vector<double> row;
    while (std::getline(ss, field, ',')) {
      try {
        std::size_t used = 0;
        const double d = std::stod(field, &used);
        while (used < field.size() && std::isspace(static_cast<unsigned char>(field[used])))
          ++used;
        if (used != field.size() || !std::isfinite(d))
          throw std::invalid_argument(field);
        row.push_back(d);
      } catch (const std::exception&) {
        throw ParseError(path, lineno, "bad numeric field '" + field + "'");
      }
    }
    if (row.size() != 4)
      throw ParseError(path, lineno, "expected frame_id,vx,vy,vz");
    if (row[0] != std::floor(row[0]))
      throw ParseError(path, lineno, "frame_id must be an integer");
    VelocityEstimate estimate;
    estimate.frame_id = static_cast<int>(row[0]);
    estimate.v = Eigen::Vector3d(row[1], row[2], row[3]);
    estimate.scale_source = VelocityEstimate::ScaleSource::SuppliedVector;
    result.push_back(estimate);
  }
  return result;
}

void save_velocity_csv(const std::vector<VelocityEstimate>& velocities,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path, "cannot open for writing");
  char buf[160];
  for (const auto& v : velocities) {
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g\n", v.frame_id, v.v.x(),
                  v.v.y(), v.v.z());
    out << buf;
  }
}

}  // namespace semcal
