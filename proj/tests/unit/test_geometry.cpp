#include <doctest.h>

#include <Eigen/Geometry>
#include <cmath>

#include "semcal/error.hpp"
#include "semcal/geometry.hpp"
#include "semcal/rng.hpp"
#include "test_util.hpp"

using namespace semcal;

namespace {

Eigen::Vector3d random_axis_angle(SplitMix64& rng, double max_angle) {
  Eigen::Vector3d axis(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                       rng.uniform(-1.0, 1.0));
  while (axis.norm() < 1e-3)
    axis = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
  return axis.normalized() * rng.uniform(1e-4, max_angle);
}

RigidTransform random_transform(SplitMix64& rng) {
  return {axis_angle_to_matrix(random_axis_angle(rng, 3.0)),
          Eigen::Vector3d(rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0),
                          rng.uniform(-2.0, 2.0))};
}

}  // namespace

TEST_CASE("axis_angle_to_matrix handles the trivial cases") {
  CHECK(axis_angle_to_matrix(Eigen::Vector3d::Zero())
            .isApprox(Eigen::Matrix3d::Identity(), 1e-15));

  Eigen::Matrix3d quarter_z;
  quarter_z << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  CHECK(axis_angle_to_matrix({0.0, 0.0, M_PI / 2.0}).isApprox(quarter_z, 1e-12));
}

TEST_CASE("axis_angle_to_matrix matches Eigen::AngleAxis") {
  SplitMix64 rng(11);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector3d aa = random_axis_angle(rng, M_PI - 1e-3);
    const Eigen::Matrix3d mine = axis_angle_to_matrix(aa);
    const Eigen::Matrix3d oracle =
        Eigen::AngleAxisd(aa.norm(), aa.normalized()).toRotationMatrix();
    CHECK((mine - oracle).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((mine.transpose() * mine - Eigen::Matrix3d::Identity())
              .cwiseAbs()
              .maxCoeff() < 1e-12);
    CHECK(mine.determinant() == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("rodrigues round-trip within 1e-9 over (0, pi)") {
  SplitMix64 rng(12);
  for (int i = 0; i < 500; ++i) {
    const Eigen::Vector3d aa = random_axis_angle(rng, M_PI - 1e-3);
    const Eigen::Vector3d back = matrix_to_axis_angle(axis_angle_to_matrix(aa));
    CHECK((back - aa).norm() < 1e-9);
  }
  const Eigen::Vector3d small(1e-8, -2e-8, 1.5e-8);
  CHECK((matrix_to_axis_angle(axis_angle_to_matrix(small)) - small).norm() < 1e-12);
}

TEST_CASE("matrix_to_quaternion conventions") {
  const Eigen::Vector4d identity = matrix_to_quaternion(Eigen::Matrix3d::Identity());
  CHECK(identity[0] == doctest::Approx(1.0));
  CHECK(identity.tail<3>().norm() == doctest::Approx(0.0));

  // 180 degrees about x.
  const Eigen::Vector4d half_turn =
      matrix_to_quaternion(axis_angle_to_matrix({M_PI, 0.0, 0.0}));
  CHECK(half_turn[0] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(half_turn[1] == doctest::Approx(1.0));

  SplitMix64 rng(13);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Matrix3d r = axis_angle_to_matrix(random_axis_angle(rng, 3.1));
    const Eigen::Vector4d q = matrix_to_quaternion(r);
    CHECK(q.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(q[0] >= 0.0);
    CHECK((quaternion_to_matrix(q) - r).cwiseAbs().maxCoeff() < 1e-9);
  }

  Eigen::Matrix3d not_rotation = Eigen::Matrix3d::Identity();
  not_rotation(0, 0) = 1.5;
  CHECK_THROWS_AS(matrix_to_quaternion(not_rotation), NotARotation);
}

TEST_CASE("project_point evaluates K[Rp + t] with late division") {
  const RigidTransform identity;

  SUBCASE("optical axis") {
    const CameraIntrinsics k{1.0, 1.0, 0.0, 0.0, 10, 10};
    const auto px = project_point({0.0, 0.0, 5.0}, identity, k);
    REQUIRE(px.has_value());
    CHECK(px->u == doctest::Approx(0.0));
    CHECK(px->v == doctest::Approx(0.0));
  }

  SUBCASE("hand evaluation") {
    const CameraIntrinsics k{700.0, 700.0, 600.0, 180.0, 1242, 375};
    const auto px = project_point({1.0, 0.0, 2.0}, identity, k);
    REQUIRE(px.has_value());
    CHECK(px->u == doctest::Approx(950.0).epsilon(1e-12));
    CHECK(px->v == doctest::Approx(180.0).epsilon(1e-12));
  }

  SUBCASE("behind the camera is absent") {
    const CameraIntrinsics k{1.0, 1.0, 0.0, 0.0, 10, 10};
    CHECK_FALSE(project_point({0.0, 0.0, -1.0}, identity, k).has_value());
    CHECK_FALSE(project_point({0.0, 0.0, 0.0}, identity, k).has_value());
    CHECK_FALSE(project_point({0.0, 0.0, 5e-4}, identity, k).has_value());
  }
}

TEST_CASE("projection scale invariance") {
  const RigidTransform identity;
  const CameraIntrinsics k{500.0, 510.0, 320.0, 240.0, 640, 480};
  SplitMix64 rng(14);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector3d p(rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0),
                            rng.uniform(0.5, 20.0));
    const double lambda = rng.uniform(0.1, 10.0);
    const auto a = project_point(p, identity, k);
    const auto b = project_point(lambda * p, identity, k);
    REQUIRE(a.has_value());
    REQUIRE(b.has_value());
    CHECK(a->u == doctest::Approx(b->u).epsilon(1e-10));
    CHECK(a->v == doctest::Approx(b->v).epsilon(1e-10));
  }
}

TEST_CASE("project_point_delayed") {
  const RigidTransform identity;
  const CameraIntrinsics unit{1.0, 1.0, 0.0, 0.0, 10, 10};

  SUBCASE("hand evaluation of the velocity shift") {
    const auto px = project_point_delayed({0.0, 0.0, 5.0}, identity,
                                          {1.0, 0.0, 0.0}, 0.1, unit);
    REQUIRE(px.has_value());
    CHECK(px->u == doctest::Approx(0.02).epsilon(1e-14));
    CHECK(px->v == doctest::Approx(0.0));
  }

  SUBCASE("compensation can move a point behind the camera") {
    CHECK_FALSE(project_point_delayed({0.0, 0.0, 5.0}, identity,
                                      {0.0, 0.0, -60.0}, 0.1, unit)
                    .has_value());
  }

  SUBCASE("zero delay is bitwise identical to project_point") {
    SplitMix64 rng(15);
    const CameraIntrinsics k{525.0, 525.0, 320.0, 240.0, 640, 480};
    for (int i = 0; i < 100; ++i) {
      const RigidTransform t = random_transform(rng);
      const Eigen::Vector3d p(rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0),
                              rng.uniform(-10.0, 30.0));
      const Eigen::Vector3d v(rng.uniform(-9.0, 9.0), rng.uniform(-9.0, 9.0),
                              rng.uniform(-9.0, 9.0));
      const auto plain = project_point(p, t, k);
      const auto delayed = project_point_delayed(p, t, v, 0.0, k);
      CHECK(plain.has_value() == delayed.has_value());
      if (plain) {
        CHECK(plain->u == delayed->u);  // bit-for-bit
        CHECK(plain->v == delayed->v);
      }
    }
  }

  SUBCASE("delay equals the explicitly shifted transform, bitwise") {
    SplitMix64 rng(16);
    const CameraIntrinsics k{525.0, 525.0, 320.0, 240.0, 640, 480};
    for (int i = 0; i < 100; ++i) {
      const RigidTransform t = random_transform(rng);
      const Eigen::Vector3d p(rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0),
                              rng.uniform(1.0, 30.0));
      const Eigen::Vector3d v(rng.uniform(-9.0, 9.0), rng.uniform(-9.0, 9.0),
                              rng.uniform(-9.0, 9.0));
      const double delay = rng.uniform(-0.3, 0.3);
      const RigidTransform shifted{t.rotation, t.translation + v * delay};
      const auto a = project_point_delayed(p, t, v, delay, k);
      const auto b = project_point(p, shifted, k);
      CHECK(a.has_value() == b.has_value());
      if (a) {
        CHECK(a->u == b->u);
        CHECK(a->v == b->v);
      }
    }
  }
}

TEST_CASE("compose and inverse") {
  CHECK(inverse(RigidTransform{}).rotation.isApprox(Eigen::Matrix3d::Identity()));

  const RigidTransform t{Eigen::Matrix3d::Identity(), {1.0, 2.0, 3.0}};
  CHECK(inverse(t).translation.isApprox(Eigen::Vector3d(-1.0, -2.0, -3.0)));

  SplitMix64 rng(17);
  for (int i = 0; i < 100; ++i) {
    const RigidTransform a = random_transform(rng);
    const RigidTransform round = compose(a, inverse(a));
    CHECK((round.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(round.translation.norm() < 1e-9);

    // compose applies the right-hand transform first.
    const RigidTransform b = random_transform(rng);
    const Eigen::Vector3d p(rng.uniform(-4.0, 4.0), rng.uniform(-4.0, 4.0),
                            rng.uniform(-4.0, 4.0));
    CHECK(compose(a, b).apply(p).isApprox(a.apply(b.apply(p)), 1e-9));
  }
}

TEST_CASE("canonicalize_axis_angle wraps beyond pi") {
  const Eigen::Vector3d big = Eigen::Vector3d(0.0, 0.0, 1.0) * (2.0 * M_PI - 0.3);
  const Eigen::Vector3d canonical = canonicalize_axis_angle(big);
  CHECK(canonical.norm() <= M_PI);
  CHECK(axis_angle_to_matrix(big).isApprox(axis_angle_to_matrix(canonical), 1e-9));
  const Eigen::Vector3d small(0.1, 0.2, 0.3);
  CHECK(canonicalize_axis_angle(small) == small);
}

TEST_CASE("CalibrationParams canonicalizes on construction") {
  const CalibrationParams p(Eigen::Vector3d(0.0, 0.0, 5.0), {1.0, 2.0, 3.0}, 0.25);
  CHECK(p.axis_angle.norm() <= M_PI);
  CHECK(p.delay == 0.25);
  CHECK(axis_angle_to_matrix(p.axis_angle)
            .isApprox(axis_angle_to_matrix({0.0, 0.0, 5.0}), 1e-9));
}

TEST_CASE("intrinsics file round-trip and validation") {
  TempDir dir("intrinsics");
  const CameraIntrinsics k{718.856, 718.856, 607.1928, 185.2157, 1241, 376};
  save_intrinsics(k, dir.file("k.txt"));
  const CameraIntrinsics loaded = load_intrinsics(dir.file("k.txt"));
  CHECK(loaded.fx == k.fx);
  CHECK(loaded.cy == k.cy);
  CHECK(loaded.width == k.width);

  dir.write("comments.txt",
            "# camera\nfx=100\nfy = 100\ncx=5 # principal\ncy=5\nwidth=10\nheight=10\n");
  CHECK(load_intrinsics(dir.file("comments.txt")).cx == 5.0);

  dir.write("missing.txt", "fx=100\nfy=100\ncx=5\ncy=5\nwidth=10\n");
  CHECK_THROWS_AS(load_intrinsics(dir.file("missing.txt")), ParseError);

  dir.write("bad.txt", "fx=abc\nfy=100\ncx=5\ncy=5\nwidth=10\nheight=10\n");
  CHECK_THROWS_AS(load_intrinsics(dir.file("bad.txt")), ParseError);

  dir.write("invalid.txt", "fx=-1\nfy=100\ncx=5\ncy=5\nwidth=10\nheight=10\n");
  CHECK_THROWS_AS(load_intrinsics(dir.file("invalid.txt")), Error);

  CHECK_THROWS_AS(load_intrinsics(dir.file("absent.txt")), IoError);
}
