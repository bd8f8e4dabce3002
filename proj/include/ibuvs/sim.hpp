#pragma once

// Ground-truth world for the servoing benchmark: planar target with labeled
// feature points and parallel-line bundle directions, a 6-DOF kinematic
// stage with a hidden hand-eye transform, a pinhole camera with optional
// pixel noise, and oracle computations for every estimated quantity.
//
// The world frame coincides with the desired camera frame, so the plane
// parameters are exactly the (n, d) of the desired view.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ibuvs/errors.hpp"
#include "ibuvs/geometry.hpp"
#include "ibuvs/homography.hpp"
#include "ibuvs/planner.hpp"
#include "ibuvs/servo.hpp"

namespace ibuvs {

/// Planar target plus vanishing-point infrastructure. Every target point
/// satisfies n . X + d = 0; bundle directions are the 3D directions of the
/// parallel-line families whose images intersect at the vanishing points.
struct Scene {
    Eigen::Vector3d plane_normal;
    double plane_distance;
    std::vector<std::string> target_labels;
    std::vector<ScenePoint> target_points;  // world (= desired camera) frame
    std::vector<std::string> bundle_labels;
    std::vector<Eigen::Vector3d> bundle_directions;

    void validate() const {
        if (std::abs(plane_normal.norm() - 1.0) > 1e-9)
            throw std::invalid_argument("Scene: plane normal is not unit length");
        if (target_points.size() < 4 || target_labels.size() != target_points.size())
            throw std::invalid_argument("Scene: need >= 4 labeled target points");
        for (const auto& p : target_points) {
            if (std::abs(plane_normal.dot(p.vec()) + plane_distance) > 1e-12)
                throw std::invalid_argument("Scene: target point off the plane");
        }
        if (bundle_directions.size() < 4 ||
            bundle_labels.size() != bundle_directions.size())
            throw std::invalid_argument("Scene: need >= 4 labeled bundle directions");
        for (std::size_t i = 0; i < bundle_directions.size(); ++i) {
            for (std::size_t k = i + 1; k < bundle_directions.size(); ++k) {
                const double c = std::abs(bundle_directions[i].normalized().dot(
                    bundle_directions[k].normalized()));
                if (c > 1.0 - 1e-9)
                    throw std::invalid_argument("Scene: bundle directions parallel");
            }
        }
    }
};

/// Kinematic robot: effector pose in the world plus the hand-eye transform
/// (pose of the camera frame expressed in the effector frame). The hand-eye
/// is hidden from the planner and controller.
struct RobotState {
    Pose effector_pose;  // world_from_effector
    Pose hand_eye;       // effector_from_camera

    Pose camera_pose() const { return effector_pose * hand_eye; }
};

struct ObservationConfig {
    double pixel_noise_sigma = 0.3;
    std::uint64_t seed = 0;
    double image_width = 640.0;
    double image_height = 480.0;
};

/// Deterministic Gaussian pixel-noise stream; one instance per run.
class NoiseStream {
public:
    explicit NoiseStream(std::uint64_t seed) : rng_(seed) {}

    double gaussian(double sigma) {
        if (sigma <= 0.0) return 0.0;
        return sigma * normal_(rng_);
    }

private:
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

/// One rendered view: visible target features, vanishing points, and the
/// labels of anything lost (behind the camera / at infinity) or outside the
/// image bounds.
struct Observation {
    FeatureSet features;
    FeatureSet vanishing_points;
    std::vector<std::string> lost;
    std::vector<std::string> out_of_bounds;
};

/// Projects the scene through the robot's camera. Vanishing points are the
/// images of the bundle directions and are exempt from the bounds check
/// (line intersections may fall anywhere). Throws only when fewer than four
/// target features remain visible.
inline Observation observe(const Scene& scene, const RobotState& robot,
                           const CameraIntrinsics& intrinsics, const ObservationConfig& cfg,
                           NoiseStream& noise) {
    const Pose camera_from_world = robot.camera_pose().inverse();
    Observation obs;

    for (std::size_t i = 0; i < scene.target_points.size(); ++i) {
        const Eigen::Vector3d pc = camera_from_world * scene.target_points[i].vec();
        if (pc.z() <= 0.0) {
            obs.lost.push_back(scene.target_labels[i]);
            continue;
        }
        PixelPoint px = project(intrinsics, ScenePoint::from_vec(pc));
        px.u += noise.gaussian(cfg.pixel_noise_sigma);
        px.v += noise.gaussian(cfg.pixel_noise_sigma);
        if (px.u < 0.0 || px.u > cfg.image_width || px.v < 0.0 || px.v > cfg.image_height)
            obs.out_of_bounds.push_back(scene.target_labels[i]);
        obs.features.labels.push_back(scene.target_labels[i]);
        obs.features.points.push_back(px);
    }
    if (obs.features.size() < 4)
        throw NonPositiveDepth("observe: fewer than 4 target features visible");

    const Eigen::Matrix3d k = intrinsics.matrix();
    const Eigen::Matrix3d r_cam_world = camera_from_world.rot.matrix();
    for (std::size_t i = 0; i < scene.bundle_directions.size(); ++i) {
        const Eigen::Vector3d h = k * (r_cam_world * scene.bundle_directions[i].normalized());
        if (std::abs(h.z()) < 1e-9) {
            obs.lost.push_back(scene.bundle_labels[i]);
            continue;
        }
        PixelPoint vp{h.x() / h.z(), h.y() / h.z(), 1.0};
        vp.u += noise.gaussian(cfg.pixel_noise_sigma);
        vp.v += noise.gaussian(cfg.pixel_noise_sigma);
        obs.vanishing_points.labels.push_back(scene.bundle_labels[i]);
        obs.vanishing_points.points.push_back(vp);
    }
    return obs;
}

/// Exact plane-induced homography K (R - t n^T / d) K^-1 at metric scale.
/// `current_from_desired` maps desired-camera coordinates into the current
/// camera frame; the result maps desired-image points onto current-image
/// points with third component equal to the depth ratio.
inline Homography oracle_homography(const Scene& scene, const Pose& current_from_desired,
                                    const CameraIntrinsics& intrinsics) {
    if (std::abs(scene.plane_distance) < 1e-12)
        throw std::invalid_argument("oracle_homography: plane through the camera center");
    const Eigen::Matrix3d k = intrinsics.matrix();
    const Eigen::Matrix3d ki = intrinsics.inverse_matrix();
    const Eigen::Matrix3d core =
        current_from_desired.rot.matrix() -
        current_from_desired.trans * scene.plane_normal.transpose() / scene.plane_distance;
    return Homography{k * core * ki, ScaleStatus::Metric};
}

/// Exact infinite homography K R K^-1; det = 1 analytically.
inline InfiniteHomography oracle_infinite_homography(const Rotation& rotation,
                                                     const CameraIntrinsics& intrinsics) {
    return InfiniteHomography{
        intrinsics.matrix() * rotation.matrix() * intrinsics.inverse_matrix(), true};
}

/// Exact composite hand-eye term K * (camera->effector rotation)^T applied
/// to the camera offset, divided by the reference desired-frame depth.
inline HandEyeTerm oracle_hand_eye_term(const Pose& hand_eye,
                                        const CameraIntrinsics& intrinsics,
                                        double reference_depth) {
    if (reference_depth <= 0.0)
        throw std::invalid_argument("oracle_hand_eye_term: reference depth must be positive");
    const Eigen::Matrix3d q = hand_eye.rot.matrix().transpose();
    return HandEyeTerm(intrinsics.matrix() * q * hand_eye.trans / reference_depth);
}

/// Depth of a world point in a camera placed at `world_from_camera`.
inline double point_depth(const ScenePoint& world_point, const Pose& world_from_camera) {
    return (world_from_camera.inverse() * world_point.vec()).z();
}

/// Integrates one commanded twist over dt: translation advances by R v dt in
/// the world, orientation right-multiplies by exp(skew(w) dt) in the
/// effector's own frame. First-order (explicit Euler) in the coupling.
inline RobotState apply_command(const RobotState& robot, const ControlCommand& cmd,
                                double dt) {
    if (!cmd.qdot.allFinite())
        throw std::invalid_argument("apply_command: non-finite command");
    const Eigen::Vector3d v = cmd.linear();
    const Eigen::Vector3d w = cmd.angular();
    RobotState next = robot;
    next.effector_pose.trans += robot.effector_pose.rot * (v * dt);
    const double wn = w.norm();
    if (wn * dt > 1e-15) {
        next.effector_pose.rot =
            robot.effector_pose.rot * axis_angle_to_rotation(AxisAngle(w / wn, wn * dt));
    }
    return next;
}

/// Translation and rotation error of the effector against a desired pose:
/// Euclidean distance between positions and geodesic angle between
/// orientations.
inline std::pair<double, double> pose_errors(const RobotState& robot,
                                             const Pose& desired_effector_pose) {
    const double err_t = (robot.effector_pose.trans - desired_effector_pose.trans).norm();
    const Rotation rel = robot.effector_pose.rot.inverse() * desired_effector_pose.rot;
    return {err_t, rotation_to_axis_angle(rel).angle};
}

/// Per-tick record of one servo run.
struct ServoTick {
    int tick = 0;
    double time = 0.0;
    double cursor_t = 0.0;
    double feature_rms_px = 0.0;
    Twist qdot = Twist::Zero();
    double err_t = 0.0;  // meters
    double err_r = 0.0;  // radians
    Pose effector_pose = Pose::identity();
    Pose camera_pose = Pose::identity();
    std::vector<std::string> flags;
};

struct ServoLog {
    std::vector<ServoTick> ticks;
};

struct PathLength {
    double effector_translation = 0.0;  // meters
    double effector_rotation = 0.0;     // radians
    double camera_translation = 0.0;
    double camera_rotation = 0.0;
};

/// Accumulated translation distance and geodesic rotation angle over the
/// logged poses, for the effector and the camera separately.
inline PathLength path_length_accumulators(const ServoLog& log) {
    PathLength acc;
    for (std::size_t i = 1; i < log.ticks.size(); ++i) {
        const ServoTick& a = log.ticks[i - 1];
        const ServoTick& b = log.ticks[i];
        acc.effector_translation += (b.effector_pose.trans - a.effector_pose.trans).norm();
        acc.effector_rotation +=
            rotation_to_axis_angle(a.effector_pose.rot.inverse() * b.effector_pose.rot).angle;
        acc.camera_translation += (b.camera_pose.trans - a.camera_pose.trans).norm();
        acc.camera_rotation +=
            rotation_to_axis_angle(a.camera_pose.rot.inverse() * b.camera_pose.rot).angle;
    }
    return acc;
}

/// Default benchmark scene: fronto-parallel 3x3 target grid at 1.6 m depth,
/// 0.7 m wide, six out-of-plane bundle directions spread across the view.
/// The size/distance pair is chosen so the benchmark poses keep every
/// feature inside a 640x480 frame along the whole optimal path while the
/// image spread stays wide enough to separate the translation/rotation
/// near-ambiguity of the image Jacobian. The fronto-parallel desired view
/// gives every target point the same desired-frame depth, which is what
/// makes the single composite hand-eye term exact.
inline Scene make_default_scene(double plane_distance = 1.6, double grid_width = 0.7) {
    Scene scene;
    scene.plane_normal = Eigen::Vector3d(0.0, 0.0, -1.0);
    scene.plane_distance = plane_distance;
    const double half = grid_width / 2.0;
    int idx = 0;
    for (int r = -1; r <= 1; ++r) {
        for (int c = -1; c <= 1; ++c) {
            scene.target_labels.push_back("p" + std::to_string(idx++));
            scene.target_points.push_back(ScenePoint{c * half, r * half, plane_distance});
        }
    }
    const std::vector<Eigen::Vector3d> dirs = {
        {0.35, 0.0, 1.0},  {0.0, 0.3, 1.0},   {-0.3, -0.25, 1.0},
        {0.25, -0.3, 1.0}, {-0.35, 0.2, 1.0}, {0.1, 0.35, 1.0},
    };
    for (std::size_t i = 0; i < dirs.size(); ++i) {
        scene.bundle_labels.push_back("vp" + std::to_string(i));
        scene.bundle_directions.push_back(dirs[i].normalized());
    }
    scene.validate();
    return scene;
}

inline CameraIntrinsics make_default_intrinsics() {
    return CameraIntrinsics(600.0, 600.0, 320.0, 240.0, 0.0);
}

/// Default hidden hand-eye: 15 deg about (1,1,0)/sqrt(2), offset
/// (0.05, -0.03, 0.08) m. Nonzero in every component so the camera-frame
/// and effector-frame planners genuinely differ.
inline Pose make_default_hand_eye() {
    return Pose(axis_angle_to_rotation(
                    AxisAngle(Eigen::Vector3d(1.0, 1.0, 0.0).normalized(), deg_to_rad(15.0))),
                Eigen::Vector3d(0.05, -0.03, 0.08));
}

}  // namespace ibuvs
