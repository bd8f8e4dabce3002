#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "oracles.hpp"

using namespace ibuvs;
using Catch::Approx;

TEST_CASE("rotation_to_axis_angle handles the identity convention") {
    const AxisAngle aa = rotation_to_axis_angle(Rotation::identity());
    CHECK(aa.angle == 0.0);
    CHECK(aa.axis == Eigen::Vector3d(0, 0, 1));
}

TEST_CASE("rotation_to_axis_angle recovers a canonical generator") {
    const Rotation r = axis_angle_to_rotation(AxisAngle(Eigen::Vector3d(0, 0, 1), kPi / 2));
    const AxisAngle aa = rotation_to_axis_angle(r);
    CHECK(aa.angle == Approx(kPi / 2).margin(1e-12));
    CHECK((aa.axis - Eigen::Vector3d(0, 0, 1)).norm() < 1e-12);
}

TEST_CASE("composite rotation angle matches the log-map oracle") {
    // Rotation vector (10, -10, 60) degrees; its angle is the vector norm.
    const Eigen::Vector3d w_deg(10, -10, 60);
    const Rotation r = rotation_from_vector(w_deg * kPi / 180.0);
    const AxisAngle aa = rotation_to_axis_angle(r);

    const Eigen::AngleAxisd ref = oracles::log_map(r.matrix());
    CHECK(aa.angle == Approx(ref.angle()).margin(1e-12));
    CHECK((aa.axis - ref.axis()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(rad_to_deg(aa.angle) == Approx(61.6441400297).margin(1e-6));
    CHECK(rad_to_deg(aa.angle) == Approx(62.0).margin(0.5));  // reported rounding
}

TEST_CASE("axis-angle round trip preserves axis sign and angle") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(1e-6, kPi - 1e-6);
    for (int i = 0; i < 1000; ++i) {
        const AxisAngle in(oracles::random_unit(rng), u(rng));
        const AxisAngle out = rotation_to_axis_angle(axis_angle_to_rotation(in));
        REQUIRE(out.angle == Approx(in.angle).margin(1e-9));
        REQUIRE((out.axis - in.axis).norm() < 1e-9);
    }
}

TEST_CASE("axis_angle_to_rotation edge cases") {
    CHECK((axis_angle_to_rotation(AxisAngle(Eigen::Vector3d(1, 0, 0), 0.0)).matrix() -
           Eigen::Matrix3d::Identity())
              .norm() < 1e-15);
    Eigen::Matrix3d half_turn;
    half_turn << -1, 0, 0, 0, -1, 0, 0, 0, 1;
    CHECK((axis_angle_to_rotation(AxisAngle(Eigen::Vector3d(0, 0, 1), kPi)).matrix() - half_turn)
              .norm() < 1e-12);
}

TEST_CASE("half-turn axis extraction is deterministic") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 50; ++i) {
        const Eigen::Vector3d axis = oracles::random_unit(rng);
        const AxisAngle aa = rotation_to_axis_angle(axis_angle_to_rotation(AxisAngle(axis, kPi)));
        CHECK(aa.angle == Approx(kPi).margin(1e-9));
        // Same rotation regardless of recovered sign.
        CHECK(std::abs(std::abs(aa.axis.dot(axis)) - 1.0) < 1e-9);
    }
}

TEST_CASE("interpolate_rotation endpoints and halving") {
    const Rotation r = axis_angle_to_rotation(AxisAngle(Eigen::Vector3d(0, 0, 1), kPi / 2));
    CHECK((interpolate_rotation(r, 0.0).matrix() - Eigen::Matrix3d::Identity()).norm() < 1e-15);
    const Rotation half = interpolate_rotation(r, 0.5);
    const Rotation rz45 = axis_angle_to_rotation(AxisAngle(Eigen::Vector3d(0, 0, 1), kPi / 4));
    CHECK((half.matrix() - rz45.matrix()).norm() < 1e-12);
}

TEST_CASE("interpolate_rotation matches the complex eigendecomposition route") {
    std::mt19937_64 rng(13);
    for (int i = 0; i < 100; ++i) {
        const Rotation r = oracles::random_rotation(rng, kPi - 1e-2);
        const Eigen::Matrix3d ours = interpolate_rotation(r, 0.3).matrix();
        const Eigen::Matrix3d ref = oracles::interpolate_rotation_eigen(r.matrix(), 0.3);
        REQUIRE((ours - ref).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("interpolate_rotation is a one-parameter subgroup") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        const Rotation r = oracles::random_rotation(rng, kPi - 1e-2);
        const double t1 = u(rng), t2 = u(rng) * (1.0 - t1);
        const Eigen::Matrix3d lhs =
            (interpolate_rotation(r, t1) * interpolate_rotation(r, t2)).matrix();
        const Eigen::Matrix3d rhs = interpolate_rotation(r, t1 + t2).matrix();
        REQUIRE((lhs - rhs).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("interpolate_translation is exact linear interpolation") {
    const Eigen::Vector3d v(-0.25, -0.10, 0.10);
    CHECK(interpolate_translation(v, 1.0) == v);
    CHECK(interpolate_translation(v, 0.0) == Eigen::Vector3d::Zero());
    CHECK(interpolate_translation(v, 0.5) == Eigen::Vector3d(-0.125, -0.05, 0.05));
}

TEST_CASE("project evaluates the pinhole model") {
    const CameraIntrinsics k(500, 500, 320, 240);
    const PixelPoint principal = project(k, ScenePoint{0, 0, 1});
    CHECK(principal.u == Approx(320.0));
    CHECK(principal.v == Approx(240.0));
    CHECK(principal.w == 1.0);

    const PixelPoint off = project(k, ScenePoint{0.1, 0, 1});
    CHECK(off.u == Approx(370.0));
    CHECK(off.v == Approx(240.0));

    const PixelPoint general = project(k, ScenePoint{0.2, -0.1, 2});
    CHECK(general.u == Approx(370.0));
    CHECK(general.v == Approx(215.0));
}

TEST_CASE("project rejects points behind the camera") {
    const CameraIntrinsics k(500, 500, 320, 240);
    CHECK_THROWS_AS(project(k, ScenePoint{0, 0, 0.0}), NonPositiveDepth);
    CHECK_THROWS_AS(project(k, ScenePoint{0.1, 0.1, -2.0}), NonPositiveDepth);
}

TEST_CASE("projection is invariant to the point's depth scale") {
    const CameraIntrinsics k(520, 540, 310, 250, 0.3);
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> u(0.2, 3.0);
    for (int i = 0; i < 100; ++i) {
        const Eigen::Vector3d p(u(rng) - 1.5, u(rng) - 1.5, u(rng));
        const double lambda = u(rng);
        const PixelPoint a = project(k, ScenePoint::from_vec(p));
        const PixelPoint b = project(k, ScenePoint::from_vec(lambda * p));
        REQUIRE(a.u == Approx(b.u).margin(1e-9));
        REQUIRE(a.v == Approx(b.v).margin(1e-9));
    }
}

TEST_CASE("compose_hand_eye trivial cases") {
    const Pose hand_eye = make_default_hand_eye();
    const Pose still = compose_hand_eye(Pose::identity(), hand_eye);
    CHECK((still.rot.matrix() - Eigen::Matrix3d::Identity()).norm() < 1e-14);
    CHECK(still.trans.norm() < 1e-14);

    // Pure effector translation maps through the hand-eye rotation only.
    const Eigen::Vector3d d(0.2, -0.1, 0.05);
    const Pose moved = compose_hand_eye(Pose(Rotation::identity(), d), hand_eye);
    CHECK((moved.rot.matrix() - Eigen::Matrix3d::Identity()).norm() < 1e-14);
    CHECK((moved.trans - hand_eye.rot.matrix().transpose() * d).norm() < 1e-14);
}

TEST_CASE("compose_hand_eye agrees with the homogeneous chain") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (int i = 0; i < 1000; ++i) {
        const Pose motion(oracles::random_rotation(rng),
                          Eigen::Vector3d(u(rng), u(rng), u(rng)));
        const Pose hand_eye(oracles::random_rotation(rng),
                            Eigen::Vector3d(u(rng), u(rng), u(rng)) * 0.4);
        const Pose ours = compose_hand_eye(motion, hand_eye);
        const Eigen::Matrix4d ref = oracles::chain_hand_eye(motion, hand_eye);
        REQUIRE((ours.matrix() - ref).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("Rotation constructor validates orthonormality") {
    Eigen::Matrix3d bad = Eigen::Matrix3d::Identity();
    bad(0, 1) = 1e-3;
    CHECK_THROWS_AS(Rotation(bad), std::invalid_argument);
    Eigen::Matrix3d reflect = Eigen::Matrix3d::Identity();
    reflect(2, 2) = -1.0;
    CHECK_THROWS_AS(Rotation(reflect), std::invalid_argument);
}

TEST_CASE("nearest_rotation repairs drift") {
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const Rotation r = oracles::random_rotation(rng);
    Eigen::Matrix3d drifted = r.matrix();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) drifted(i, j) += 1e-6 * u(rng);
    const Rotation repaired = nearest_rotation(drifted);
    CHECK((repaired.matrix() - r.matrix()).norm() < 1e-5);
    CHECK((repaired.matrix().transpose() * repaired.matrix() - Eigen::Matrix3d::Identity())
              .norm() < 1e-14);
}

TEST_CASE("AxisAngle validates inputs") {
    CHECK_THROWS_AS(AxisAngle(Eigen::Vector3d(1, 1, 0), 0.5), std::invalid_argument);
    CHECK_THROWS_AS(AxisAngle(Eigen::Vector3d(0, 0, 1), -0.1), std::invalid_argument);
    CHECK_THROWS_AS(AxisAngle(Eigen::Vector3d(0, 0, 1), kPi + 0.1), std::invalid_argument);
}
