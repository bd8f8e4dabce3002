#pragma once

// Uncalibrated image-based controller: online image-Jacobian estimation
// (Broyden rank-one by default, recursive least squares as an alternative)
// and damped-pseudo-inverse proportional control, tracking either a planned
// image trajectory or the raw goal features.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SVD>

#include "ibuvs/errors.hpp"
#include "ibuvs/planner.hpp"

namespace ibuvs {

using Twist = Eigen::Matrix<double, 6, 1>;  // (vx, vy, vz, wx, wy, wz)

/// Image Jacobian estimate, rows ordered (u0, v0, u1, v1, ...), columns the
/// six twist coordinates. `confidence` counts accepted updates since the
/// last full fit.
struct JacobianEstimate {
    Eigen::MatrixXd j;
    double confidence = 0.0;
    double fit_residual = 0.0;  // RMS residual of the initializing fit, px
};

/// Commanded effector twist, translational part m/s, angular part rad/s.
struct ControlCommand {
    Twist qdot = Twist::Zero();

    Eigen::Vector3d linear() const { return qdot.head<3>(); }
    Eigen::Vector3d angular() const { return qdot.tail<3>(); }
};

/// Full-rank least-squares fit from >= 6 excitation twists and their
/// observed stacked feature deltas.
inline JacobianEstimate init_jacobian(
    const std::vector<std::pair<Twist, Eigen::VectorXd>>& probe_responses) {
    if (probe_responses.size() < 6)
        throw InsufficientExcitation("init_jacobian: need at least 6 excitation twists");
    const std::size_t n = probe_responses.size();
    const Eigen::Index m = probe_responses.front().second.size();
    for (const auto& [dq, dy] : probe_responses) {
        (void)dq;
        if (dy.size() != m)
            throw std::invalid_argument("init_jacobian: inconsistent feature-delta sizes");
    }

    Eigen::MatrixXd dq_mat(6, n), dy_mat(m, n);
    for (std::size_t i = 0; i < n; ++i) {
        dq_mat.col(i) = probe_responses[i].first;
        dy_mat.col(i) = probe_responses[i].second;
    }

    // J DQ = DY  =>  DQ^T J^T = DY^T, least squares over the probes.
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(dq_mat.transpose(),
                                          Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.singularValues()(5) < 1e-10 * std::max(1.0, svd.singularValues()(0)))
        throw InsufficientExcitation("init_jacobian: excitation twists span fewer than 6 directions");

    JacobianEstimate est;
    est.j = svd.solve(dy_mat.transpose()).transpose();
    est.fit_residual =
        std::sqrt((est.j * dq_mat - dy_mat).squaredNorm() / static_cast<double>(m * n));
    return est;
}

/// Broyden rank-one update with forgetting factor: the updated estimate
/// satisfies J' dq = lambda dy + (1 - lambda) J dq exactly (secant equation
/// at lambda = 1).
inline JacobianEstimate broyden_update(const JacobianEstimate& j, const Twist& dq,
                                       const Eigen::VectorXd& dy, double lambda = 0.9,
                                       double deadband = 1e-6) {
    if (lambda <= 0.0 || lambda > 1.0)
        throw std::invalid_argument("broyden_update: forgetting factor outside (0, 1]");
    if (dy.size() != j.j.rows())
        throw std::invalid_argument("broyden_update: feature-delta size mismatch");
    const double dq2 = dq.squaredNorm();
    if (std::sqrt(dq2) <= deadband)
        throw Deadband("broyden_update: command step below deadband, update skipped");
    JacobianEstimate out = j;
    out.j += lambda * (dy - j.j * dq) * dq.transpose() / dq2;
    out.confidence += 1.0;
    return out;
}

/// Recursive-least-squares alternative to the Broyden step; carries a twist
/// covariance with exponential forgetting.
struct RlsState {
    Eigen::Matrix<double, 6, 6> p = Eigen::Matrix<double, 6, 6>::Identity() * 1e3;
    double forgetting = 0.98;
};

inline JacobianEstimate rls_update(const JacobianEstimate& j, RlsState& state, const Twist& dq,
                                   const Eigen::VectorXd& dy, double deadband = 1e-6) {
    if (dy.size() != j.j.rows())
        throw std::invalid_argument("rls_update: feature-delta size mismatch");
    if (dq.norm() <= deadband)
        throw Deadband("rls_update: command step below deadband, update skipped");
    const Eigen::Matrix<double, 6, 1> k =
        state.p * dq / (state.forgetting + dq.dot(state.p * dq));
    JacobianEstimate out = j;
    out.j += (dy - j.j * dq) * k.transpose();
    out.confidence += 1.0;
    state.p = (state.p - k * dq.transpose() * state.p) / state.forgetting;
    return out;
}

struct ControlOptions {
    double damping_ratio = 1e-3;        // damping as a fraction of the largest singular value
    double singular_threshold = 1e-3;   // flag when sigma_min / sigma_max drops below this
    double max_linear = 0.1;            // m/s
    double max_angular = 0.3;           // rad/s
};

struct ControlResult {
    ControlCommand command;
    bool singular_flagged = false;
    double sigma_min_ratio = 0.0;
};

/// Proportional law through the damped pseudo-inverse of the estimated
/// Jacobian. Near-singular estimates are flagged, never fatal; the damping
/// keeps the command finite.
inline ControlResult control_step(const JacobianEstimate& j, const FeatureSet& current,
                                  const FeatureSet& target, double gain,
                                  const ControlOptions& opts = {}) {
    require_aligned(current, target, "control_step");
    if (gain <= 0.0) throw std::invalid_argument("control_step: gain must be positive");
    if (j.j.rows() != static_cast<Eigen::Index>(2 * current.size()))
        throw std::invalid_argument("control_step: Jacobian rows do not match feature count");

    const Eigen::VectorXd error = stacked_difference(target, current);

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(j.j, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    const double sigma_max = sv(0);

    ControlResult result;
    if (sigma_max <= 0.0) {
        result.singular_flagged = true;
        return result;
    }
    result.sigma_min_ratio = sv(sv.size() - 1) / sigma_max;
    result.singular_flagged = result.sigma_min_ratio < opts.singular_threshold;

    const double damping = opts.damping_ratio * sigma_max;
    Twist qdot = Twist::Zero();
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        const double s = sv(i);
        qdot += (s / (s * s + damping * damping)) * svd.matrixU().col(i).dot(error) *
                svd.matrixV().col(i);
    }
    qdot *= gain;

    const double lin = qdot.head<3>().norm();
    if (lin > opts.max_linear) qdot.head<3>() *= opts.max_linear / lin;
    const double ang = qdot.tail<3>().norm();
    if (ang > opts.max_angular) qdot.tail<3>() *= opts.max_angular / ang;

    result.command.qdot = qdot;
    return result;
}

/// Cursor over a planned trajectory, or a fixed goal in classical mode.
struct TrackerState {
    enum class Mode { TrackPlanned, ClassicalGoal };

    Mode mode;
    PlannedImageTrajectory trajectory;  // TrackPlanned only
    FeatureSet goal;                    // ClassicalGoal only
    std::size_t cursor = 0;

    static TrackerState planned(PlannedImageTrajectory traj) {
        if (traj.samples.empty())
            throw std::invalid_argument("TrackerState: empty trajectory");
        TrackerState s;
        s.mode = Mode::TrackPlanned;
        s.trajectory = std::move(traj);
        s.goal = s.trajectory.samples.back().features;
        return s;
    }

    static TrackerState classical(FeatureSet goal_features) {
        TrackerState s;
        s.mode = Mode::ClassicalGoal;
        s.goal = std::move(goal_features);
        return s;
    }

    double cursor_time() const {
        if (mode == Mode::ClassicalGoal) return 1.0;
        return trajectory.samples[cursor].t;
    }

    bool at_end() const {
        return mode == Mode::ClassicalGoal || cursor + 1 >= trajectory.samples.size();
    }

private:
    TrackerState() : mode(Mode::ClassicalGoal) {}
};

/// Returns the feature target for this tick. In planned mode the cursor
/// advances by one sample once the current features are within
/// `advance_tol` pixels of it; it never retreats and holds at the end.
inline const FeatureSet& track_trajectory(TrackerState& state, const FeatureSet& current,
                                          double advance_tol) {
    if (state.mode == TrackerState::Mode::ClassicalGoal) return state.goal;
    if (!state.at_end() &&
        max_pixel_distance(current, state.trajectory.samples[state.cursor].features) <
            advance_tol) {
        ++state.cursor;
    }
    return state.trajectory.samples[state.cursor].features;
}

}  // namespace ibuvs
