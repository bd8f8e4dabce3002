#pragma once

// Image feature-point trajectory synthesis for geodesic-rotation /
// straight-line-translation motion of the camera frame or of the robot
// end-effector frame, computed from image quantities only.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "ibuvs/errors.hpp"
#include "ibuvs/geometry.hpp"
#include "ibuvs/homography.hpp"

namespace ibuvs {

/// Ordered, labeled tracked points of one image. Labels pair features
/// across images; all consumers require label-aligned sets.
struct FeatureSet {
    std::vector<std::string> labels;
    std::vector<PixelPoint> points;

    std::size_t size() const { return points.size(); }

    bool aligned_with(const FeatureSet& other) const {
        return labels == other.labels && points.size() == other.points.size();
    }
};

inline void require_aligned(const FeatureSet& a, const FeatureSet& b, const char* where) {
    if (!a.aligned_with(b))
        throw std::invalid_argument(std::string(where) + ": feature sets not label-aligned");
}

/// Stacked per-feature pixel difference (du0, dv0, du1, dv1, ...).
inline Eigen::VectorXd stacked_difference(const FeatureSet& to, const FeatureSet& from) {
    require_aligned(to, from, "stacked_difference");
    Eigen::VectorXd d(2 * to.size());
    for (std::size_t i = 0; i < to.size(); ++i) {
        const PixelPoint a = to.points[i].normalized();
        const PixelPoint b = from.points[i].normalized();
        d(2 * i) = a.u - b.u;
        d(2 * i + 1) = a.v - b.v;
    }
    return d;
}

inline double max_pixel_distance(const FeatureSet& a, const FeatureSet& b) {
    require_aligned(a, b, "max_pixel_distance");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const PixelPoint p = a.points[i].normalized();
        const PixelPoint q = b.points[i].normalized();
        m = std::max(m, std::hypot(p.u - q.u, p.v - q.v));
    }
    return m;
}

/// Label-matched correspondences, src drawn from `src_image`, dst from
/// `dst_image`.
inline std::vector<Correspondence> make_correspondences(const FeatureSet& src_image,
                                                        const FeatureSet& dst_image) {
    require_aligned(src_image, dst_image, "make_correspondences");
    std::vector<Correspondence> out;
    out.reserve(src_image.size());
    for (std::size_t i = 0; i < src_image.size(); ++i)
        out.push_back({src_image.points[i].normalized(), dst_image.points[i].normalized()});
    return out;
}

/// The composite hand-eye unknown recovered from a pure-rotation probe:
/// the intrinsics-scaled, depth-normalized camera offset in the effector
/// frame. It only ever appears as this single pixel-valued vector.
struct HandEyeTerm {
    Eigen::Vector3d tau;

    static constexpr double kSanityCapPx = 1e5;

    explicit HandEyeTerm(const Eigen::Vector3d& tau_) : tau(tau_) {
        if (!tau.allFinite() || tau.norm() > kSanityCapPx)
            throw NumericalBlowup("HandEyeTerm: magnitude exceeds sanity cap (scale mismatch?)");
    }

    static HandEyeTerm zero() { return HandEyeTerm(Eigen::Vector3d::Zero()); }
};

struct PlannedImageTrajectory {
    enum class Mode { CameraFrame, EffectorFrame };

    struct Sample {
        double t;
        FeatureSet features;
    };

    std::vector<Sample> samples;
    Mode mode;
};

/// Inputs to both planners. `h` must carry metric scale and `h_inf` must be
/// det-normalized; `h` maps desired-image points onto current-image points.
struct CameraPlanInput {
    Homography h;
    InfiniteHomography h_inf;
    FeatureSet desired;
    FeatureSet current;
};

struct PlanOptions {
    // Consistency tolerance for normalize(h * desired_i) vs current_i. Loose
    // enough for homographies estimated from sub-pixel-noise images.
    double consistency_tol_px = 3.0;
};

namespace detail {

inline void validate_plan_input(const CameraPlanInput& input, const PlanOptions& opts) {
    if (input.h.scale_status != ScaleStatus::Metric)
        throw std::invalid_argument("planner: homography must carry metric scale");
    if (!input.h_inf.normalized)
        throw std::invalid_argument("planner: infinite homography must be normalized");
    require_aligned(input.desired, input.current, "planner");
    if (input.desired.size() < 4)
        throw std::invalid_argument("planner: need at least 4 features");
    for (std::size_t i = 0; i < input.desired.size(); ++i) {
        const PixelPoint mapped =
            PixelPoint::from_homogeneous(input.h.m * input.desired.points[i].normalized().vec());
        const PixelPoint cur = input.current.points[i].normalized();
        if (std::hypot(mapped.u - cur.u, mapped.v - cur.v) > opts.consistency_tol_px)
            throw std::invalid_argument(
                "planner: homography does not map desired features onto current features");
    }
}

// Shared sampling loop. The effector planner extends the camera bracket
// H - t(H - Hinf) with the hand-eye correction t(Hinf - I) - (Hinf_t - I)
// applied to tau; tau = 0 reduces it to the camera case exactly.
inline PlannedImageTrajectory sample_trajectory(const CameraPlanInput& input,
                                                const Eigen::Vector3d& tau, int samples,
                                                PlannedImageTrajectory::Mode mode,
                                                double near_pi_guard) {
    if (samples < 2)
        throw std::invalid_argument("planner: need at least 2 samples");

    const Eigen::Matrix3d& h = input.h.m;
    const Eigen::Matrix3d& hinf = input.h_inf.m;
    const Eigen::Matrix3d identity = Eigen::Matrix3d::Identity();

    PlannedImageTrajectory traj;
    traj.mode = mode;
    traj.samples.reserve(samples);
    for (int i = 0; i < samples; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(samples - 1);
        const Eigen::Matrix3d hinf_t = fractional_power(input.h_inf, t, near_pi_guard).m;
        const Eigen::Matrix3d a = h - t * (h - hinf);
        const Eigen::Matrix3d b = t * (hinf - identity) - (hinf_t - identity);
        const Eigen::Matrix3d hinf_t_inv = hinf_t.inverse();

        FeatureSet fs;
        fs.labels = input.desired.labels;
        fs.points.reserve(input.desired.size());
        for (std::size_t j = 0; j < input.desired.size(); ++j) {
            const Eigen::Vector3d q =
                hinf_t_inv * (a * input.desired.points[j].normalized().vec() + b * tau);
            if (std::abs(q.z()) < 1e-9)
                throw NumericalBlowup("planner: feature '" + input.desired.labels[j] +
                                      "' crosses the camera plane at t=" + std::to_string(t));
            fs.points.push_back(PixelPoint{q.x() / q.z(), q.y() / q.z(), 1.0});
        }
        traj.samples.push_back({t, std::move(fs)});
    }
    return traj;
}

}  // namespace detail

/// Image trajectory of geodesic-rotation / straight-line motion of the
/// camera frame: feature j at time t is
///   normalize( (Hinf^t)^-1 (H - t(H - Hinf)) P_j ).
/// Runs from the current features at t=0 to the desired features at t=1.
inline PlannedImageTrajectory plan_camera_trajectory(const CameraPlanInput& input, int samples,
                                                     const PlanOptions& opts = {}) {
    detail::validate_plan_input(input, opts);
    return detail::sample_trajectory(input, Eigen::Vector3d::Zero(), samples,
                                     PlannedImageTrajectory::Mode::CameraFrame, kHalfTurnGuard);
}

/// Recovers the composite hand-eye term from a pure end-effector rotation
/// probe: stacks (Hr_inf - I) tau = (Hr - Hr_inf) H P_j over all features
/// into one least-squares system and returns the minimum-norm solution.
/// The component along the probe axis image is structurally unobservable
/// from a single probe and is left at zero.
///
/// `probe_h` maps current-image points onto probe-image points and must be
/// metric; `probe_h_inf` likewise, normalized. `h_desired_to_current` is the
/// main metric homography.
inline HandEyeTerm estimate_hand_eye_term(const Homography& probe_h,
                                          const InfiniteHomography& probe_h_inf,
                                          const FeatureSet& desired,
                                          const Homography& h_desired_to_current,
                                          double min_probe_angle_rad = deg_to_rad(5.0)) {
    if (probe_h.scale_status != ScaleStatus::Metric)
        throw std::invalid_argument("estimate_hand_eye_term: probe homography must be metric");
    if (!probe_h_inf.normalized)
        throw std::invalid_argument("estimate_hand_eye_term: probe infinite homography must be normalized");
    if (h_desired_to_current.scale_status != ScaleStatus::Metric)
        throw std::invalid_argument("estimate_hand_eye_term: main homography must be metric");
    if (desired.size() < 1)
        throw std::invalid_argument("estimate_hand_eye_term: empty feature set");

    const double probe_angle = infinite_homography_angle(probe_h_inf);
    if (probe_angle < min_probe_angle_rad)
        throw RankDeficient("estimate_hand_eye_term: probe rotation of " +
                            std::to_string(rad_to_deg(probe_angle)) +
                            " deg is below the observability floor");

    const Eigen::Matrix3d a = probe_h_inf.m - Eigen::Matrix3d::Identity();
    const Eigen::Matrix3d rhs_map = probe_h.m - probe_h_inf.m;

    const std::size_t n = desired.size();
    Eigen::MatrixXd stacked(3 * n, 3);
    Eigen::VectorXd rhs(3 * n);
    for (std::size_t j = 0; j < n; ++j) {
        stacked.middleRows<3>(3 * j) = a;
        rhs.segment<3>(3 * j) =
            rhs_map * (h_desired_to_current.m * desired.points[j].normalized().vec());
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(stacked, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    // One vanishing direction (the probe axis image) is expected; more means
    // the probe cannot constrain tau at all.
    if (sv(1) < 1e-10 * std::max(1.0, sv(0))) {
        Eigen::JacobiSVD<Eigen::Matrix3d> block(a, Eigen::ComputeFullV);
        const Eigen::Vector3d dir = block.matrixV().col(2);
        throw RankDeficient(
            "estimate_hand_eye_term: probe system rank < 2; unobservable direction (" +
            std::to_string(dir.x()) + ", " + std::to_string(dir.y()) + ", " +
            std::to_string(dir.z()) + ")");
    }
    // A single probe constrains tau in exactly two directions; the smallest
    // singular direction is structural noise and is always truncated.
    Eigen::Vector3d tau = Eigen::Vector3d::Zero();
    for (int i = 0; i < 2; ++i)
        tau += (svd.matrixU().col(i).dot(rhs) / sv(i)) * svd.matrixV().col(i);
    return HandEyeTerm(tau);
}

/// Image trajectory of geodesic-rotation / straight-line motion of the
/// end-effector frame: feature j at time t is
///   normalize( (Hinf^t)^-1 (A(t) P_j + B(t) tau) )
/// with A(t) = H - t(H - Hinf) and B(t) = t(Hinf - I) - (Hinf^t - I).
inline PlannedImageTrajectory plan_effector_trajectory(const CameraPlanInput& input,
                                                       const HandEyeTerm& tau, int samples,
                                                       const PlanOptions& opts = {}) {
    detail::validate_plan_input(input, opts);
    return detail::sample_trajectory(input, tau.tau, samples,
                                     PlannedImageTrajectory::Mode::EffectorFrame, kHalfTurnGuard);
}

/// Pixel-scaled end-effector translation command at time t, averaged over
/// features; linear in t by construction. Diagnostic output.
inline Eigen::Vector3d implied_effector_translation_trajectory(const CameraPlanInput& input,
                                                               const HandEyeTerm& tau,
                                                               double t) {
    if (t < 0.0 || t > 1.0)
        throw std::invalid_argument("implied_effector_translation_trajectory: t outside [0, 1]");
    const Eigen::Matrix3d diff = input.h.m - input.h_inf.m;
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto& p : input.desired.points) mean += diff * p.normalized().vec();
    mean /= static_cast<double>(input.desired.size());
    const Eigen::Vector3d constant =
        mean - (input.h_inf.m - Eigen::Matrix3d::Identity()) * tau.tau;
    return t * constant;
}

/// Two-stage recovery for rotations within the half-turn guard band: one
/// relaxed-guard evaluation of Hinf^(1/2) builds a virtual midpoint image,
/// then each stage interpolates only half the angle. Camera-frame plan; the
/// stages are concatenated on a common [0, 1] time axis.
inline PlannedImageTrajectory plan_camera_trajectory_split(const CameraPlanInput& input,
                                                           int samples,
                                                           const PlanOptions& opts = {}) {
    detail::validate_plan_input(input, opts);
    if (samples < 3)
        throw std::invalid_argument("planner: split plan needs at least 3 samples");

    // Conditioning of the half power degrades as 1/sin(theta); acceptable to
    // within ~1e-10 of pi, and the plan is physically ambiguous at pi itself.
    const InfiniteHomography hinf_half = fractional_power(input.h_inf, 0.5, 1e-10);
    const Eigen::Matrix3d a_half = input.h.m - 0.5 * (input.h.m - input.h_inf.m);

    FeatureSet mid;
    mid.labels = input.desired.labels;
    const Eigen::Matrix3d to_mid = hinf_half.m.inverse() * a_half;
    for (const auto& p : input.desired.points)
        mid.points.push_back(PixelPoint::from_homogeneous(to_mid * p.normalized().vec()));

    // Stage A: current -> midpoint.  H_{0m} = H A(1/2)^-1 Hinf^(1/2) at metric
    // scale; the rotation from midpoint to current is the first half turn.
    CameraPlanInput stage_a{
        Homography{input.h.m * a_half.inverse() * hinf_half.m, ScaleStatus::Metric},
        hinf_half, mid, input.current};
    // Stage B: midpoint -> desired.  H_{m1} = Hinf^(1/2)^-1 A(1/2).
    CameraPlanInput stage_b{Homography{to_mid, ScaleStatus::Metric}, hinf_half, input.desired,
                            mid};

    const int n_a = samples / 2 + 1;
    const int n_b = samples - samples / 2;
    PlannedImageTrajectory first = plan_camera_trajectory(stage_a, n_a, opts);
    PlannedImageTrajectory second = plan_camera_trajectory(stage_b, n_b, opts);

    PlannedImageTrajectory out;
    out.mode = PlannedImageTrajectory::Mode::CameraFrame;
    for (const auto& s : first.samples) out.samples.push_back({0.5 * s.t, s.features});
    for (std::size_t i = 1; i < second.samples.size(); ++i)
        out.samples.push_back({0.5 + 0.5 * second.samples[i].t, second.samples[i].features});
    return out;
}

}  // namespace ibuvs
