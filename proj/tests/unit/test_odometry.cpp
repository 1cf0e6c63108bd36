#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "semcal/error.hpp"
#include "semcal/geometry.hpp"
#include "semcal/metrics.hpp"
#include "semcal/odometry.hpp"
#include "semcal/rng.hpp"
#include "semcal/synth.hpp"
#include "test_util.hpp"

using namespace semcal;

namespace {

const CameraIntrinsics kCam{525.0, 525.0, 320.0, 240.0, 640, 480};

double sampson_px(const Eigen::Matrix3d& e, const CameraIntrinsics& k,
                  const PixelPair& pair) {
  const Eigen::Matrix3d kinv = k.matrix().inverse();
  const Eigen::Matrix3d f = kinv.transpose() * e * kinv;
  const Eigen::Vector3d fx1 = f * pair.first.homogeneous();
  const Eigen::Vector3d ftx2 = f.transpose() * pair.second.homogeneous();
  const double num = pair.second.homogeneous().dot(fx1);
  return std::sqrt(num * num /
                   (fx1.head<2>().squaredNorm() + ftx2.head<2>().squaredNorm()));
}

RigidTransform forward_pose() {
  return {axis_angle_to_matrix({0.01, -0.02, 0.005}), {0.12, -0.05, 0.9}};
}

double direction_angle_deg(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const double dot = std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0);
  return std::acos(dot) * 180.0 / M_PI;
}

}  // namespace

TEST_CASE("essential estimation on exact correspondences") {
  TwoViewConfig config;
  config.n_points = 100;
  config.seed = 71;
  const TwoViewData data = make_two_view_correspondences(config, forward_pose());
  const EssentialEstimate estimate =
      estimate_essential_ransac(data.pairs, kCam, RansacConfig{});

  CHECK(estimate.inlier_count == 100);
  for (const auto& pair : data.pairs.pairs)
    CHECK(sampson_px(estimate.essential.m, kCam, pair) < 1e-6);

  // Enforced singular structure: sigma1 = sigma2, sigma3 = 0.
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(estimate.essential.m);
  const Eigen::Vector3d s = svd.singularValues();
  CHECK(std::abs(s[0] - s[1]) / s[0] < 1e-9);
  CHECK(s[2] / s[0] < 1e-9);
}

TEST_CASE("ransac excludes injected outliers") {
  TwoViewConfig config;
  config.n_points = 100;
  config.outlier_fraction = 0.2;
  config.seed = 72;
  const TwoViewData data = make_two_view_correspondences(config, forward_pose());
  const EssentialEstimate estimate =
      estimate_essential_ransac(data.pairs, kCam, RansacConfig{});

  for (std::size_t i = 0; i < data.pairs.size(); ++i) {
    if (data.is_outlier[i])
      CHECK_FALSE(estimate.inlier_mask[i]);
    else
      CHECK(estimate.inlier_mask[i]);
  }
}

TEST_CASE("ransac error paths") {
  SUBCASE("fewer than eight pairs") {
    FeatureCorrespondences seven;
    for (int i = 0; i < 7; ++i)
      seven.pairs.push_back({Eigen::Vector2d(i, i), Eigen::Vector2d(i + 1, i)});
    CHECK_THROWS_AS(estimate_essential_ransac(seven, kCam, RansacConfig{}),
                    InsufficientCorrespondences);
  }

  SUBCASE("coordinates outside the expanded rectangle") {
    TwoViewConfig config;
    config.seed = 73;
    TwoViewData data = make_two_view_correspondences(config, forward_pose());
    data.pairs.pairs[0].first = {-200.0, 10.0};  // beyond the 10% margin
    CHECK_THROWS_AS(estimate_essential_ransac(data.pairs, kCam, RansacConfig{}),
                    Error);
  }
}

TEST_CASE("ransac is deterministic for a fixed seed") {
  TwoViewConfig config;
  config.n_points = 80;
  config.outlier_fraction = 0.15;
  config.seed = 74;
  const TwoViewData data = make_two_view_correspondences(config, forward_pose());
  RansacConfig ransac;
  ransac.seed = 5;
  const EssentialEstimate a = estimate_essential_ransac(data.pairs, kCam, ransac);
  const EssentialEstimate b = estimate_essential_ransac(data.pairs, kCam, ransac);
  CHECK(a.essential.m == b.essential.m);
  CHECK(a.inlier_mask == b.inlier_mask);
}

TEST_CASE("decomposition recovers the constructed pose") {
  SplitMix64 rng(75);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::Vector3d axis(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    while (axis.norm() < 1e-3)
      axis = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const RigidTransform pose{
        axis_angle_to_matrix(axis.normalized() * rng.uniform(0.0, 0.15)),
        Eigen::Vector3d(rng.uniform(-0.5, 0.5), rng.uniform(-0.3, 0.3),
                        rng.uniform(0.4, 1.5))};

    TwoViewConfig config;
    config.n_points = 60;
    config.seed = 700 + trial;
    const TwoViewData data = make_two_view_correspondences(config, pose);
    const EssentialEstimate estimate =
        estimate_essential_ransac(data.pairs, kCam, RansacConfig{});
    const RelativePose recovered = decompose_essential(
        estimate.essential, data.pairs, estimate.inlier_mask, kCam);

    CHECK(qad(pose.rotation, recovered.rotation) < 0.1);
    CHECK(direction_angle_deg(pose.translation, recovered.translation_direction) < 0.5);
    CHECK(recovered.translation_direction.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(recovered.inlier_count >= 8);
  }
}

TEST_CASE("pure rotation is flagged as ambiguous") {
  // Build correspondences with zero parallax by hand.
  SplitMix64 rng(76);
  const Eigen::Matrix3d r = axis_angle_to_matrix({0.0, 0.03, 0.0});
  FeatureCorrespondences pairs;
  for (int i = 0; i < 80; ++i) {
    const double u = rng.uniform(40.0, 600.0);
    const double v = rng.uniform(40.0, 440.0);
    const double z = rng.uniform(4.0, 30.0);
    const Eigen::Vector3d x1((u - kCam.cx) / kCam.fx * z, (v - kCam.cy) / kCam.fy * z, z);
    const Eigen::Vector3d x2 = r * x1;
    if (!(x2.z() > 0)) continue;
    const double u2 = kCam.fx * x2.x() / x2.z() + kCam.cx;
    const double v2 = kCam.fy * x2.y() / x2.z() + kCam.cy;
    if (u2 < 0 || u2 >= kCam.width || v2 < 0 || v2 >= kCam.height) continue;
    pairs.pairs.push_back({Eigen::Vector2d(u, v), Eigen::Vector2d(u2, v2)});
  }
  REQUIRE(pairs.size() >= 8);

  bool flagged = false;
  try {
    const EssentialEstimate estimate =
        estimate_essential_ransac(pairs, kCam, RansacConfig{});
    decompose_essential(estimate.essential, pairs, estimate.inlier_mask, kCam);
  } catch (const CheiralityAmbiguous&) {
    flagged = true;
  } catch (const DegenerateConfiguration&) {
    flagged = true;
  }
  CHECK(flagged);
}

TEST_CASE("velocity_from_pose") {
  RelativePose pose;
  pose.translation_direction = Eigen::Vector3d(0, 0, 1);
  pose.inlier_count = 20;

  SUBCASE("direction times speed") {
    const VelocityEstimate v = velocity_from_pose(pose, 8.0, 0.1);
    CHECK(v.v == Eigen::Vector3d(0, 0, 8));
    CHECK(v.scale_source == VelocityEstimate::ScaleSource::SuppliedSpeed);
    CHECK(v.frame_dt == 0.1);
  }

  SUBCASE("zero speed gives the zero vector") {
    CHECK(velocity_from_pose(pose, 0.0, 0.1).v.norm() == 0.0);
  }

  SUBCASE("norm equals the speed") {
    SplitMix64 rng(77);
    for (int i = 0; i < 50; ++i) {
      Eigen::Vector3d dir(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
      while (dir.norm() < 1e-3)
        dir = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
      pose.translation_direction = dir.normalized();
      const double speed = rng.uniform(0.0, 30.0);
      CHECK(velocity_from_pose(pose, speed, 0.1).v.norm() ==
            doctest::Approx(speed).epsilon(1e-12));
    }
  }

  SUBCASE("invalid inputs") {
    CHECK_THROWS_AS(velocity_from_pose(pose, -1.0, 0.1), Error);
    CHECK_THROWS_AS(velocity_from_pose(pose, 1.0, 0.0), Error);
  }
}

TEST_CASE("velocity csv") {
  TempDir dir("velcsv");

  SUBCASE("single row") {
    const auto p = dir.write("v.csv", "0,0,0,8.3\n");
    const auto rows = load_velocity_csv(p);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].frame_id == 0);
    CHECK(rows[0].v == Eigen::Vector3d(0, 0, 8.3));
    CHECK(rows[0].scale_source == VelocityEstimate::ScaleSource::SuppliedVector);
  }

  SUBCASE("malformed row carries the line") {
    const auto p = dir.write("bad.csv", "0,0,0,8.3\n1,a,0,0\n");
    try {
      load_velocity_csv(p);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line == 2);
    }
  }

  SUBCASE("write-read round trip of 50 rows") {
    SplitMix64 rng(78);
    // Multiples of 1/32: lossless under the writer's 9 significant digits.
    const auto dyadic = [&] {
      return (static_cast<double>(rng.below(641)) - 320.0) / 32.0;
    };
    std::vector<VelocityEstimate> rows;
    for (int i = 0; i < 50; ++i) {
      VelocityEstimate v;
      v.frame_id = i;
      v.v = Eigen::Vector3d(dyadic(), dyadic(), dyadic());
      rows.push_back(v);
    }
    save_velocity_csv(rows, dir.file("rt.csv"));
    const auto loaded = load_velocity_csv(dir.file("rt.csv"));
    REQUIRE(loaded.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      CHECK(loaded[i].frame_id == rows[i].frame_id);
      CHECK(loaded[i].v == rows[i].v);
    }
  }
}

TEST_CASE("end-to-end velocity direction matches the scene motion") {
  // A camera moving as in the delay-compensation model: the scene shifts by
  // v * dt per frame interval.
  const Eigen::Vector3d velocity(0.4, -0.1, 7.9);
  const double dt = 0.1;
  TwoViewConfig config;
  config.n_points = 120;
  config.outlier_fraction = 0.1;
  config.seed = 79;
  const RigidTransform pose{Eigen::Matrix3d::Identity(), velocity * dt};
  const TwoViewData data = make_two_view_correspondences(config, pose);
  const EssentialEstimate estimate =
      estimate_essential_ransac(data.pairs, kCam, RansacConfig{});
  const RelativePose recovered = decompose_essential(
      estimate.essential, data.pairs, estimate.inlier_mask, kCam);
  const VelocityEstimate v = velocity_from_pose(recovered, velocity.norm(), dt);
  CHECK(direction_angle_deg(v.v, velocity) < 0.5);
  CHECK(v.v.norm() == doctest::Approx(velocity.norm()).epsilon(1e-12));
}
