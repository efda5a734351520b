#include <array>
#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "splatba/errors.hpp"
#include "splatba/geometry.hpp"
#include "test_util.hpp"

using namespace splatba;
using testutil::random_pose;
using testutil::random_unit;

TEST_CASE("fov to focal") {
  CHECK(fov_to_focal(std::numbers::pi / 2, 224) == doctest::Approx(112.0).epsilon(1e-12));
  CHECK(fov_to_focal(2.0 * std::atan(0.5), 224) == doctest::Approx(224.0).epsilon(1e-12));
  CHECK_THROWS_AS(fov_to_focal(0.0, 224), DomainError);
  CHECK_THROWS_AS(fov_to_focal(std::numbers::pi, 224), DomainError);
  CHECK_THROWS_AS(CameraIntrinsics::make(1.0, 0, 10), ArgumentError);
  for (double fov : {0.3, 1.0, 2.0}) {
    CHECK(focal_to_fov(fov_to_focal(fov, 64), 64) == doctest::Approx(fov).epsilon(1e-12));
    const double fd = testutil::central_diff([](double x) { return fov_to_focal(x, 64); }, fov);
    CHECK(testutil::close(focal_fov_derivative(fov, 64), fd, 1e-6));
  }
}

TEST_CASE("principal point is the exact image center") {
  const auto K = CameraIntrinsics::make(1.0, 32, 24);
  CHECK(K.cx() == 15.5);
  CHECK(K.cy() == 11.5);
}

TEST_CASE("6D rotation") {
  const std::array<double, 6> a{1, 0, 0, 0, 1, 0};
  CHECK(rot6d_to_matrix(a).isApprox(Mat3::Identity(), 1e-15));
  const std::array<double, 6> b{2, 0, 0, 0, 3, 0};
  CHECK(rot6d_to_matrix(b).isApprox(Mat3::Identity(), 1e-15));
  const std::array<double, 6> c{1, 0, 0, 1e-12, 0, 0};
  CHECK_THROWS_AS(rot6d_to_matrix(c), DegeneracyError);

  Rng rng(7);
  for (int t = 0; t < 200; ++t) {
    std::array<double, 6> r;
    for (double& x : r) x = rng.normal();
    const Mat3 R = rot6d_to_matrix(r);
    CHECK((R.transpose() * R).isApprox(Mat3::Identity(), 1e-12));
    CHECK(R.determinant() == doctest::Approx(1.0).epsilon(1e-12));
    // First column is the normalized first input.
    const Vec3 a0 = Vec3(r[0], r[1], r[2]).normalized();
    CHECK((R.col(0) - a0).norm() < 1e-12);
  }
}

TEST_CASE("6D rotation and homogeneous translation backward match finite differences") {
  Rng rng(11);
  for (int t = 0; t < 20; ++t) {
    PoseParams6D p;
    for (double& x : p.rot6) x = rng.normal();
    for (int k = 0; k < 3; ++k) p.trans_h[k] = rng.normal();
    p.trans_h[3] = rng.uniform(0.5, 2.0);
    Mat3 dR;
    for (int i = 0; i < 9; ++i) dR(i / 3, i % 3) = rng.normal();
    const Vec3 dT(rng.normal(), rng.normal(), rng.normal());
    auto objective = [&](const PoseParams6D& q) {
      const CameraPose P = q.decode();
      return (dR.array() * P.rotation.array()).sum() + dT.dot(P.translation);
    };
    const PoseParamsGrad g = pose_params_backward(p, dR, dT);
    for (int i = 0; i < 6; ++i) {
      const double fd = testutil::central_diff(
          [&](double x) {
            PoseParams6D q = p;
            q.rot6[i] = x;
            return objective(q);
          },
          p.rot6[i]);
      CHECK(testutil::close(g.rot6[i], fd, 1e-5, 1e-7));
    }
    for (int i = 0; i < 4; ++i) {
      const double fd = testutil::central_diff(
          [&](double x) {
            PoseParams6D q = p;
            q.trans_h[i] = x;
            return objective(q);
          },
          p.trans_h[i]);
      CHECK(testutil::close(g.trans_h[i], fd, 1e-5, 1e-7));
    }
  }
}

TEST_CASE("homogeneous translation") {
  const std::array<double, 4> h{2, 4, 6, 2};
  CHECK(homogeneous_to_translation(h).isApprox(Vec3(1, 2, 3)));
  const std::array<double, 4> bad{1, 1, 1, 0};
  CHECK_THROWS_AS(homogeneous_to_translation(bad), DegeneracyError);
}

TEST_CASE("pose params round trip") {
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    const CameraPose P = random_pose(rng);
    const CameraPose Q = PoseParams6D::from_pose(P).decode();
    CHECK(Q.rotation.isApprox(P.rotation, 1e-12));
    CHECK((Q.translation - P.translation).norm() < 1e-12);
  }
}

TEST_CASE("quaternion to matrix") {
  CHECK(quat_to_matrix(Vec4(1, 0, 0, 0)).isApprox(Mat3::Identity()));
  CHECK(quat_to_matrix(Vec4(0, 0, 0, 1)).isApprox(Vec3(-1, -1, 1).asDiagonal().toDenseMatrix()));
  CHECK(quat_to_matrix(Vec4(2, 0, 0, 0)).isApprox(Mat3::Identity()));
  CHECK_THROWS(quat_to_matrix(Vec4::Zero()));

  // Backward against finite differences, unnormalized input.
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    const Vec4 q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    Mat3 dR;
    for (int i = 0; i < 9; ++i) dR(i / 3, i % 3) = rng.normal();
    const Vec4 g = quat_backward(q, dR);
    for (int i = 0; i < 4; ++i) {
      const double fd = testutil::central_diff(
          [&](double x) {
            Vec4 p = q;
            p[i] = x;
            return (dR.array() * quat_to_matrix(p).array()).sum();
          },
          q[i]);
      CHECK(testutil::close(g[i], fd, 1e-5, 1e-7));
    }
  }
}

TEST_CASE("normalize poses") {
  Rng rng(9);
  const CameraPose Q = random_pose(rng);
  const std::vector<CameraPose> same{Q, Q, Q};
  for (const auto& p : normalize_poses(same)) {
    CHECK(p.rotation.isApprox(Mat3::Identity(), 1e-12));
    CHECK(p.translation.norm() < 1e-12);
  }
  const std::vector<CameraPose> iq{CameraPose::identity(), Q};
  const auto out = normalize_poses(iq);
  CHECK(out[1].rotation.isApprox(Q.rotation, 1e-12));
  CHECK((out[1].translation - Q.translation).norm() < 1e-12);
  for (int t = 0; t < 50; ++t) {
    const CameraPose A = random_pose(rng), B = random_pose(rng);
    const std::vector<CameraPose> ab{A, B};
    const auto n = normalize_poses(ab);
    CHECK(n[0].rotation == Mat3::Identity());
    CHECK(n[0].translation == Vec3::Zero());
    const CameraPose back = A * n[1];
    CHECK(back.rotation.isApprox(B.rotation, 1e-12));
    CHECK((back.translation - B.translation).norm() < 1e-12);
  }
}

TEST_CASE("unproject and project") {
  const auto K = CameraIntrinsics::make(std::numbers::pi / 2, 224, 224);
  const Vec3 a = unproject(Vec2(K.cx(), K.cy()), 5.0, K, CameraPose::identity());
  CHECK((a - Vec3(0, 0, 5)).norm() < 1e-12);
  const Vec3 b = unproject(Vec2(K.cx() + K.focal(), K.cy()), 5.0, K, CameraPose::identity());
  CHECK((b - Vec3(5, 0, 5)).norm() < 1e-12);

  const auto p0 = project(Vec3(0, 0, 5), K, CameraPose::identity());
  REQUIRE(p0);
  CHECK((p0->pixel - Vec2(K.cx(), K.cy())).norm() < 1e-12);
  CHECK(p0->depth == 5.0);
  const auto p1 = project(Vec3(5, 0, 5), K, CameraPose::identity());
  REQUIRE(p1);
  CHECK(K.focal() == doctest::Approx(112.0));
  CHECK((p1->pixel - Vec2(K.cx() + 112.0, K.cy())).norm() < 1e-9);
  CHECK_FALSE(project(Vec3(1, 0, 0), K, CameraPose::identity()));
  CHECK_FALSE(project(Vec3(0, 0, -1), K, CameraPose::identity()));

  Rng rng(13);
  for (int t = 0; t < 200; ++t) {
    const CameraPose P = random_pose(rng);
    const auto K2 = CameraIntrinsics::make(rng.uniform(0.5, 2.0), 64, 48);
    const Vec2 px(rng.uniform(0, 63), rng.uniform(0, 47));
    const double d = rng.uniform(0.2, 50);
    const auto back = project(unproject(px, d, K2, P), K2, P);
    REQUIRE(back);
    CHECK((back->pixel - px).norm() < 1e-6);
    CHECK(std::abs(back->depth - d) < 1e-6);
  }
}

TEST_CASE("pose angular errors") {
  const auto e0 = pose_angular_errors(CameraPose::identity(), CameraPose::identity());
  CHECK(e0.rot_deg == 0.0);
  CHECK(e0.trans_deg == 0.0);

  CameraPose a;
  a.rotation = axis_angle_to_matrix(Vec3(0, 0, 1), std::numbers::pi);
  a.translation = Vec3(1, 0, 0);
  CameraPose b;
  b.translation = Vec3(0, 1, 0);
  const auto e1 = pose_angular_errors(a, b);
  CHECK(e1.rot_deg == doctest::Approx(180.0).epsilon(1e-9));
  CHECK(e1.trans_deg == doctest::Approx(90.0).epsilon(1e-12));

  CameraPose z;
  const auto e2 = pose_angular_errors(z, b);
  CHECK(e2.trans_deg == 90.0);

  // Quaternion-geodesic oracle: angle = 2 acos |<q1, q2>|.
  Rng rng(17);
  for (int t = 0; t < 200; ++t) {
    const CameraPose p = random_pose(rng, std::numbers::pi), g = random_pose(rng, std::numbers::pi);
    const Eigen::Quaterniond q1(p.rotation), q2(g.rotation);
    const double dotq = std::min(1.0, std::abs(q1.coeffs().dot(q2.coeffs())));
    const double oracle = 2.0 * std::acos(dotq) * 180.0 / std::numbers::pi;
    const auto e = pose_angular_errors(p, g);
    CHECK(std::abs(e.rot_deg - oracle) < 1e-6);
    const double td = std::acos(std::clamp(p.translation.normalized().dot(g.translation.normalized()), -1.0, 1.0));
    CHECK(std::abs(e.trans_deg - td * 180.0 / std::numbers::pi) < 1e-6);
  }
}

TEST_CASE("rotation angle is stable near 0 and pi") {
  const Mat3 I = Mat3::Identity();
  CHECK(rotation_angle_between(I, axis_angle_to_matrix(Vec3(1, 0, 0), 1e-9)) ==
        doctest::Approx(1e-9).epsilon(1e-4));
  CHECK(rotation_angle_between(I, axis_angle_to_matrix(Vec3(0, 1, 0), std::numbers::pi - 1e-9)) ==
        doctest::Approx(std::numbers::pi - 1e-9).epsilon(1e-12));
}

TEST_CASE("look_at points +z at the target") {
  const Vec3 eye(2, -1, -3), target(0, 0, 0);
  const Mat3 R = look_at_rotation(eye, target);
  CHECK((R * Vec3(0, 0, 1) - (target - eye).normalized()).norm() < 1e-12);
  CHECK((R.transpose() * R).isApprox(Mat3::Identity(), 1e-12));
  CHECK(R.determinant() == doctest::Approx(1.0));
}

TEST_CASE("pose algebra") {
  Rng rng(19);
  const CameraPose A = random_pose(rng), B = random_pose(rng);
  const Vec3 x(0.3, -0.2, 1.7);
  CHECK(((A * B).apply(x) - A.apply(B.apply(x))).norm() < 1e-12);
  CHECK((A.inverse().apply(A.apply(x)) - x).norm() < 1e-12);
  CHECK((A.to_view(x) - A.inverse().apply(x)).norm() < 1e-12);
  CHECK(A.is_valid());
}
