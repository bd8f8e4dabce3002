#pragma once

// Rigid-body math, pinhole projection and geodesic rotation interpolation.
//
// Frame convention used throughout: a Pose named `a_from_b` maps
// b-coordinates into a-coordinates, X_a = R * X_b + t.

#include <cmath>
#include <stdexcept>

#include <Eigen/Core>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "ibuvs/errors.hpp"

namespace ibuvs {

inline constexpr double kPi = 3.14159265358979323846;

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

inline Eigen::Matrix3d skew(const Eigen::Vector3d& w) {
    Eigen::Matrix3d s;
    s << 0.0, -w.z(), w.y(), w.z(), 0.0, -w.x(), -w.y(), w.x(), 0.0;
    return s;
}

/// Proper rotation matrix. The constructor validates orthonormality and
/// det = +1 to 1e-9; use nearest_rotation() to repair a drifted matrix.
class Rotation {
public:
    static constexpr double kValidityTol = 1e-9;

    explicit Rotation(const Eigen::Matrix3d& m) : m_(m) {
        const double ortho = (m.transpose() * m - Eigen::Matrix3d::Identity())
                                 .cwiseAbs()
                                 .maxCoeff();
        if (ortho > kValidityTol)
            throw std::invalid_argument("Rotation: matrix not orthonormal");
        if (std::abs(m.determinant() - 1.0) > kValidityTol)
            throw std::invalid_argument("Rotation: determinant is not +1");
    }

    static Rotation identity() { return Rotation(Eigen::Matrix3d::Identity()); }

    const Eigen::Matrix3d& matrix() const { return m_; }

    Rotation inverse() const {
        Rotation r(*this);
        r.m_ = m_.transpose();
        return r;
    }

    Rotation operator*(const Rotation& rhs) const {
        Rotation r(*this);
        r.m_ = m_ * rhs.m_;
        return r;
    }

    Eigen::Vector3d operator*(const Eigen::Vector3d& v) const { return m_ * v; }

private:
    Eigen::Matrix3d m_;
};

/// Projection of an arbitrary 3x3 matrix onto the nearest proper rotation
/// (polar factor via SVD). Explicit repair operation; nothing in the
/// library re-orthonormalizes silently.
inline Rotation nearest_rotation(const Eigen::Matrix3d& m) {
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d u = svd.matrixU();
    Eigen::Matrix3d v = svd.matrixV();
    Eigen::Vector3d d(1.0, 1.0, (u * v.transpose()).determinant() < 0.0 ? -1.0 : 1.0);
    return Rotation(u * d.asDiagonal() * v.transpose());
}

/// Axis-angle form: unit axis, angle in [0, pi].
struct AxisAngle {
    Eigen::Vector3d axis;
    double angle;

    AxisAngle(const Eigen::Vector3d& axis_, double angle_) : axis(axis_), angle(angle_) {
        if (std::abs(axis.norm() - 1.0) > 1e-12)
            throw std::invalid_argument("AxisAngle: axis is not unit length");
        if (angle < 0.0 || angle > kPi)
            throw std::invalid_argument("AxisAngle: angle outside [0, pi]");
    }
};

/// Log map of SO(3). Total on valid rotations; deterministic conventions at
/// the boundary angles:
///   angle 0  -> axis (0,0,1)
///   angle pi -> axis from the dominant diagonal of (R+I)/2, sign fixed so
///               the first nonzero component is positive.
inline AxisAngle rotation_to_axis_angle(const Rotation& r) {
    const Eigen::Matrix3d& m = r.matrix();
    const double cos_theta =
        std::max(-1.0, std::min(1.0, (m.trace() - 1.0) / 2.0));
    // vee(R - R^T)/2 has norm sin(theta) and direction of the axis.
    const Eigen::Vector3d v(0.5 * (m(2, 1) - m(1, 2)), 0.5 * (m(0, 2) - m(2, 0)),
                            0.5 * (m(1, 0) - m(0, 1)));
    const double sin_theta = v.norm();
    const double angle = std::atan2(sin_theta, cos_theta);

    if (cos_theta > 0.0) {
        if (sin_theta < 1e-15) return AxisAngle(Eigen::Vector3d(0, 0, 1), 0.0);
        return AxisAngle(v / sin_theta, angle);
    }
    // The vee route stays accurate while sin(theta) dominates rounding noise.
    if (sin_theta > 1e-8) return AxisAngle(v / sin_theta, angle);

    // Near a half turn: R + I ~ 2*k*k^T, read the axis off the dominant column.
    const Eigen::Matrix3d b = 0.5 * (m + Eigen::Matrix3d::Identity());
    int i = 0;
    b.diagonal().maxCoeff(&i);
    Eigen::Vector3d axis;
    axis[i] = std::sqrt(std::max(0.0, b(i, i)));
    for (int j = 0; j < 3; ++j) {
        if (j != i) axis[j] = 0.5 * (b(i, j) + b(j, i)) / axis[i];
    }
    axis.normalize();
    if (sin_theta > 1e-15) {
        if (v.dot(axis) < 0.0) axis = -axis;
        return AxisAngle(axis, angle);
    }
    // Exact half turn: first nonzero component positive.
    for (int j = 0; j < 3; ++j) {
        if (std::abs(axis[j]) > 1e-12) {
            if (axis[j] < 0.0) axis = -axis;
            break;
        }
    }
    return AxisAngle(axis, kPi);
}

/// Rodrigues formula.
inline Rotation axis_angle_to_rotation(const AxisAngle& aa) {
    const Eigen::Matrix3d k = skew(aa.axis);
    const Eigen::Matrix3d m = Eigen::Matrix3d::Identity() + std::sin(aa.angle) * k +
                              (1.0 - std::cos(aa.angle)) * (k * k);
    return Rotation(m);
}

/// Rotation vector (axis * angle, radians) to rotation.
inline Rotation rotation_from_vector(const Eigen::Vector3d& w) {
    const double angle = w.norm();
    if (angle < 1e-15) return Rotation::identity();
    return axis_angle_to_rotation(AxisAngle(w / angle, angle));
}

/// Minimal geodesic from identity to r, evaluated at normalized time t:
/// same axis, angle scaled to t*theta.
inline Rotation interpolate_rotation(const Rotation& r, double t) {
    if (t < 0.0 || t > 1.0)
        throw std::invalid_argument("interpolate_rotation: t outside [0, 1]");
    const AxisAngle aa = rotation_to_axis_angle(r);
    return axis_angle_to_rotation(AxisAngle(aa.axis, t * aa.angle));
}

/// Straight-line translation path evaluated at normalized time t.
inline Eigen::Vector3d interpolate_translation(const Eigen::Vector3d& t_vec, double t) {
    if (t < 0.0 || t > 1.0)
        throw std::invalid_argument("interpolate_translation: t outside [0, 1]");
    return t * t_vec;
}

/// Rigid transform; `rot` and `trans` map source-frame coordinates into the
/// destination frame: X_dst = rot * X_src + trans.
struct Pose {
    Rotation rot;
    Eigen::Vector3d trans;

    Pose(const Rotation& rot_, const Eigen::Vector3d& trans_) : rot(rot_), trans(trans_) {}

    static Pose identity() { return Pose(Rotation::identity(), Eigen::Vector3d::Zero()); }

    Eigen::Vector3d operator*(const Eigen::Vector3d& p) const { return rot * p + trans; }

    Pose operator*(const Pose& rhs) const {
        return Pose(rot * rhs.rot, rot * rhs.trans + trans);
    }

    Pose inverse() const {
        Rotation rinv = rot.inverse();
        return Pose(rinv, -(rinv * trans));
    }

    Eigen::Matrix4d matrix() const {
        Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
        m.topLeftCorner<3, 3>() = rot.matrix();
        m.topRightCorner<3, 1>() = trans;
        return m;
    }
};

/// Pinhole intrinsics. Lives only in the simulator oracle; the planner and
/// controller never see it.
struct CameraIntrinsics {
    double fx, fy, cx, cy;
    double skew = 0.0;

    CameraIntrinsics(double fx_, double fy_, double cx_, double cy_, double skew_ = 0.0)
        : fx(fx_), fy(fy_), cx(cx_), cy(cy_), skew(skew_) {
        if (fx <= 0.0 || fy <= 0.0)
            throw std::invalid_argument("CameraIntrinsics: focal lengths must be positive");
    }

    Eigen::Matrix3d matrix() const {
        Eigen::Matrix3d k;
        k << fx, skew, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
        return k;
    }

    Eigen::Matrix3d inverse_matrix() const {
        Eigen::Matrix3d ki;
        ki << 1.0 / fx, -skew / (fx * fy), (skew * cy - cx * fy) / (fx * fy),
              0.0, 1.0 / fy, -cy / fy,
              0.0, 0.0, 1.0;
        return ki;
    }
};

/// Homogeneous pixel coordinate.
struct PixelPoint {
    double u, v;
    double w = 1.0;

    Eigen::Vector3d vec() const { return Eigen::Vector3d(u, v, w); }

    /// Scales so w = 1 exactly. Throws NumericalBlowup when the point is at
    /// (or numerically indistinguishable from) infinity.
    PixelPoint normalized() const {
        if (std::abs(w) < 1e-9)
            throw NumericalBlowup("PixelPoint: homogeneous scale vanished");
        return PixelPoint{u / w, v / w, 1.0};
    }

    static PixelPoint from_homogeneous(const Eigen::Vector3d& h) {
        return PixelPoint{h.x(), h.y(), h.z()}.normalized();
    }
};

/// Euclidean 3D point, meters, in a stated frame.
struct ScenePoint {
    double x, y, z;

    Eigen::Vector3d vec() const { return Eigen::Vector3d(x, y, z); }
    static ScenePoint from_vec(const Eigen::Vector3d& v) { return ScenePoint{v.x(), v.y(), v.z()}; }
};

/// Pinhole projection of a camera-frame point, normalized to w = 1.
inline PixelPoint project(const CameraIntrinsics& intrinsics, const ScenePoint& p) {
    if (p.z <= 0.0)
        throw NonPositiveDepth("project: point is on or behind the camera plane");
    return PixelPoint{(intrinsics.fx * p.x + intrinsics.skew * p.y) / p.z + intrinsics.cx,
                      intrinsics.fy * p.y / p.z + intrinsics.cy, 1.0};
}

/// Camera motion induced by an end-effector motion through a fixed hand-eye
/// transform.
///
/// `effector_motion` is the pose of the moved effector frame expressed in the
/// starting effector frame; `hand_eye` is the pose of the camera frame
/// expressed in the effector frame. Returns the pose of the moved camera
/// frame expressed in the starting camera frame.
inline Pose compose_hand_eye(const Pose& effector_motion, const Pose& hand_eye) {
    const Eigen::Matrix3d q = hand_eye.rot.matrix().transpose();  // effector -> camera
    const Eigen::Matrix3d rf = effector_motion.rot.matrix();
    const Eigen::Matrix3d rot = q * rf * q.transpose();
    const Eigen::Vector3d trans =
        q * (rf - Eigen::Matrix3d::Identity()) * hand_eye.trans + q * effector_motion.trans;
    return Pose(Rotation(rot), trans);
}

}  // namespace ibuvs
