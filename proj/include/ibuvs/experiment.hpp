#pragma once

// Benchmark runner: builds a world, estimates homographies from images,
// optionally probes for the hand-eye term, plans an image trajectory, and
// drives the uncalibrated controller to the goal while logging everything
// needed for the path-length and convergence metrics.

#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SVD>

#include "ibuvs/errors.hpp"
#include "ibuvs/geometry.hpp"
#include "ibuvs/homography.hpp"
#include "ibuvs/planner.hpp"
#include "ibuvs/servo.hpp"
#include "ibuvs/sim.hpp"

namespace ibuvs {

enum class Method { Ibuvs, IbuvsC, IbuvsR };

inline std::string method_name(Method m) {
    switch (m) {
        case Method::Ibuvs: return "ibuvs";
        case Method::IbuvsC: return "ibuvs-c";
        case Method::IbuvsR: return "ibuvs-r";
    }
    return "?";
}

inline Method method_from_string(const std::string& s) {
    if (s == "ibuvs") return Method::Ibuvs;
    if (s == "ibuvs-c") return Method::IbuvsC;
    if (s == "ibuvs-r") return Method::IbuvsR;
    throw std::invalid_argument("unknown method '" + s + "' (expected ibuvs, ibuvs-c or ibuvs-r)");
}

struct SceneConfig {
    CameraIntrinsics intrinsics = make_default_intrinsics();
    Scene scene = make_default_scene();
    Pose hand_eye = make_default_hand_eye();
    double image_width = 640.0;
    double image_height = 480.0;
};

struct ExperimentSpec {
    std::string name = "experiment";
    Method method = Method::IbuvsR;

    // Pose of the desired effector frame expressed in the initial effector
    // frame; rotation as an axis-angle vector in degrees.
    Eigen::Vector3d offset_translation = Eigen::Vector3d::Zero();  // meters
    Eigen::Vector3d offset_rotation_deg = Eigen::Vector3d::Zero();

    int sample_count = 50;
    double noise_sigma = 0.3;  // px
    std::uint64_t seed = 1;
    int step_budget = 4000;
    double dt = 0.02;  // s

    // Two-phase control: a fast, heavily damped cruise (the damping keeps
    // pixel noise out of the weakly observed twist directions) and a gentle
    // lightly damped terminal phase that lets those directions settle below
    // the convergence thresholds. The switch latches once the feature error
    // to the goal drops under terminal_rms_px.
    double gain = 8.0;
    double terminal_gain = 1.0;
    double terminal_damping_ratio = 1e-3;
    double terminal_rms_px = 6.0;
    ControlOptions control{.damping_ratio = 2e-3};
    double advance_tol_px = 2.0;
    double broyden_forgetting = 0.9;
    // Jacobian updates use windowed displacements: commands accumulate until
    // the twist norm reaches this value, then one rank-one update fires.
    // Pixel noise enters once per window instead of once per tick, which is
    // what keeps the weakly observed Jacobian directions intact.
    double update_window_dq = 0.02;
    enum class Estimator { Broyden, Rls } estimator = Estimator::Broyden;

    double vp_modulus_tol = 1e-2;  // unit-circle gate for estimated infinite homographies
    // Exponential smoothing of the measured features before control; 1 = no
    // filtering. The terminal value trades lag (irrelevant near the goal)
    // for the temporal averaging that pulls the weakly observed pose
    // directions below the convergence thresholds.
    double feature_filter_alpha = 1.0;
    double terminal_feature_filter_alpha = 0.15;

    double probe_angle_deg = 10.0;
    Eigen::Vector3d probe_axis = Eigen::Vector3d(0.0, 0.0, 1.0);  // effector frame
    double excitation_translation = 0.01;  // m, Jacobian init probes
    double excitation_rotation = 0.02;     // rad

    double convergence_err_t = 1e-3;              // m
    double convergence_err_r = deg_to_rad(0.5);   // rad
    double divergence_rms_factor = 4.0;
    int divergence_ticks = 50;
    // Stall recovery: when neither the cursor nor the goal error makes
    // progress for this many ticks, the Jacobian is refitted from a fresh
    // excitation cycle at the current pose. 0 disables.
    int stall_timeout_ticks = 250;
    int max_refits = 10;
    bool treat_out_of_bounds_as_lost = true;
    bool allow_half_turn_split = true;

    SceneConfig world;
};

/// Estimated planning quantities next to their simulator oracles.
struct PlanningArtifacts {
    bool planned = false;
    Eigen::Matrix3d h_estimated = Eigen::Matrix3d::Zero();
    Eigen::Matrix3d h_oracle = Eigen::Matrix3d::Zero();
    double h_rel_error = 0.0;
    Eigen::Matrix3d h_inf_estimated = Eigen::Matrix3d::Zero();
    Eigen::Matrix3d h_inf_oracle = Eigen::Matrix3d::Zero();
    double h_inf_rel_error = 0.0;
    bool has_tau = false;
    Eigen::Vector3d tau_estimated = Eigen::Vector3d::Zero();
    Eigen::Vector3d tau_oracle = Eigen::Vector3d::Zero();
    double tau_observable_rel_error = 0.0;
    bool used_half_turn_split = false;
};

struct RunReport {
    enum class Status { Converged, BudgetExhausted, Diverged, PlanningFailed };

    std::string name;
    Method method = Method::Ibuvs;
    std::uint64_t seed = 0;
    Status status = Status::BudgetExhausted;
    bool converged = false;
    double initial_err_t = 0.0, initial_err_r = 0.0;  // m, rad
    double final_err_t = 0.0, final_err_r = 0.0;
    PathLength path;
    int ticks_used = 0;
    std::string failure_reason;
    ServoLog log;
    PlanningArtifacts artifacts;
    bool has_trajectory = false;
    PlannedImageTrajectory trajectory;
};

inline const char* status_name(RunReport::Status s) {
    switch (s) {
        case RunReport::Status::Converged: return "converged";
        case RunReport::Status::BudgetExhausted: return "budget-exhausted";
        case RunReport::Status::Diverged: return "diverged";
        case RunReport::Status::PlanningFailed: return "planning-failed";
    }
    return "?";
}

namespace detail {

inline double rms(const Eigen::VectorXd& v) {
    return v.size() == 0 ? 0.0 : std::sqrt(v.squaredNorm() / static_cast<double>(v.size()));
}

inline double relative_frobenius(const Eigen::Matrix3d& estimated, const Eigen::Matrix3d& truth) {
    return (estimated - truth).norm() / truth.norm();
}

// Every stage of the pipeline needs the full feature complement; a lost or
// clipped feature invalidates the correspondence bookkeeping.
inline void require_clean(const Observation& obs, bool oob_is_lost, const char* stage) {
    if (!obs.lost.empty())
        throw NonPositiveDepth(std::string(stage) + ": feature(s) lost");
    if (oob_is_lost && !obs.out_of_bounds.empty())
        throw NonPositiveDepth(std::string(stage) + ": feature(s) left the image bounds");
    if (obs.vanishing_points.size() < 4)
        throw DegenerateConfiguration(std::string(stage) + ": fewer than 4 vanishing points");
}

}  // namespace detail

inline RunReport run_experiment(const ExperimentSpec& spec) {
    spec.world.scene.validate();
    if (spec.step_budget <= 0) throw std::invalid_argument("run_experiment: budget must be positive");

    RunReport report;
    report.name = spec.name;
    report.method = spec.method;
    report.seed = spec.seed;

    const CameraIntrinsics& k = spec.world.intrinsics;
    const Scene& scene = spec.world.scene;
    const Pose& hand_eye = spec.world.hand_eye;

    ObservationConfig ocfg;
    ocfg.pixel_noise_sigma = spec.noise_sigma;
    ocfg.seed = spec.seed;
    ocfg.image_width = spec.world.image_width;
    ocfg.image_height = spec.world.image_height;
    NoiseStream noise(spec.seed);

    // World frame = desired camera frame.
    const Pose desired_effector = hand_eye.inverse();
    const Pose offset(rotation_from_vector(spec.offset_rotation_deg * kPi / 180.0),
                      spec.offset_translation);
    const Pose initial_effector = desired_effector * offset.inverse();

    RobotState robot{initial_effector, hand_eye};
    const RobotState robot_desired{desired_effector, hand_eye};

    std::tie(report.initial_err_t, report.initial_err_r) = pose_errors(robot, desired_effector);

    const Observation obs_desired = observe(scene, robot_desired, k, ocfg, noise);
    if (!obs_desired.lost.empty() ||
        (spec.treat_out_of_bounds_as_lost && !obs_desired.out_of_bounds.empty()))
        throw std::invalid_argument("run_experiment: desired view does not see the full target");

    TrackerState tracker = TrackerState::classical(obs_desired.features);

    auto depth_ratio = [&](const Pose& dst_cam, const Pose& src_cam, std::size_t idx) {
        return point_depth(scene.target_points[idx], dst_cam) /
               point_depth(scene.target_points[idx], src_cam);
    };

    if (spec.method != Method::Ibuvs) {
        try {
            const Observation obs0 = observe(scene, robot, k, ocfg, noise);
            detail::require_clean(obs0, spec.treat_out_of_bounds_as_lost, "initial view");

            // Main homography pair, desired image -> current image.
            const auto corr = make_correspondences(obs_desired.features, obs0.features);
            const Homography h_proj = estimate_homography_dlt(corr);
            const Homography h = align_metric_scale(
                h_proj, DepthRatioReference{
                            corr.front(),
                            depth_ratio(robot.camera_pose(), robot_desired.camera_pose(), 0)});
            const InfiniteHomography h_inf = estimate_infinite_homography(
                make_correspondences(obs_desired.vanishing_points, obs0.vanishing_points),
                spec.vp_modulus_tol);

            const Pose current_from_desired =
                robot.camera_pose().inverse() * robot_desired.camera_pose();
            report.artifacts.planned = true;
            report.artifacts.h_estimated = h.m;
            report.artifacts.h_oracle = oracle_homography(scene, current_from_desired, k).m;
            report.artifacts.h_rel_error =
                detail::relative_frobenius(h.m, report.artifacts.h_oracle);
            report.artifacts.h_inf_estimated = h_inf.m;
            report.artifacts.h_inf_oracle =
                oracle_infinite_homography(current_from_desired.rot, k).m;
            report.artifacts.h_inf_rel_error =
                detail::relative_frobenius(h_inf.m, report.artifacts.h_inf_oracle);

            HandEyeTerm tau = HandEyeTerm::zero();
            if (spec.method == Method::IbuvsR) {
                // Pure-rotation probe of the effector, observed from the probe pose.
                const Pose probe_offset(
                    axis_angle_to_rotation(AxisAngle(spec.probe_axis.normalized(),
                                                     deg_to_rad(spec.probe_angle_deg))),
                    Eigen::Vector3d::Zero());
                const RobotState robot_probe{robot.effector_pose * probe_offset, hand_eye};
                const Observation obs_probe = observe(scene, robot_probe, k, ocfg, noise);
                detail::require_clean(obs_probe, spec.treat_out_of_bounds_as_lost, "probe view");

                // Probe homographies map current-image points onto probe-image points.
                const auto corr_r = make_correspondences(obs0.features, obs_probe.features);
                const Homography hr_proj = estimate_homography_dlt(corr_r);
                const Homography hr = align_metric_scale(
                    hr_proj,
                    DepthRatioReference{corr_r.front(), depth_ratio(robot_probe.camera_pose(),
                                                                    robot.camera_pose(), 0)});
                const InfiniteHomography hr_inf = estimate_infinite_homography(
                    make_correspondences(obs0.vanishing_points, obs_probe.vanishing_points),
                    spec.vp_modulus_tol);

                tau = estimate_hand_eye_term(hr, hr_inf, obs_desired.features, h);

                report.artifacts.has_tau = true;
                report.artifacts.tau_estimated = tau.tau;
                const double z_ref =
                    point_depth(scene.target_points[0], robot_desired.camera_pose());
                report.artifacts.tau_oracle = oracle_hand_eye_term(hand_eye, k, z_ref).tau;
                // Compare within the observable subspace: the probe axis image is
                // the null direction of (Hr_inf - I).
                Eigen::JacobiSVD<Eigen::Matrix3d> svd(
                    hr_inf.m - Eigen::Matrix3d::Identity(), Eigen::ComputeFullV);
                const Eigen::Vector3d null_dir = svd.matrixV().col(2);
                const Eigen::Matrix3d proj =
                    Eigen::Matrix3d::Identity() - null_dir * null_dir.transpose();
                report.artifacts.tau_observable_rel_error =
                    (proj * (tau.tau - report.artifacts.tau_oracle)).norm() /
                    (proj * report.artifacts.tau_oracle).norm();
            }

            const CameraPlanInput plan_input{h, h_inf, obs_desired.features, obs0.features};
            try {
                report.trajectory =
                    spec.method == Method::IbuvsC
                        ? plan_camera_trajectory(plan_input, spec.sample_count)
                        : plan_effector_trajectory(plan_input, tau, spec.sample_count);
            } catch (const NearHalfTurn&) {
                if (!spec.allow_half_turn_split) throw;
                // Near-half-turn recovery: two chained half-angle camera-frame
                // plans. Valid image path from current to desired features;
                // effector-frame optimality is not preserved in this regime.
                report.trajectory = plan_camera_trajectory_split(plan_input, spec.sample_count);
                report.artifacts.used_half_turn_split = true;
            }
            report.has_trajectory = true;
            tracker = TrackerState::planned(report.trajectory);
        } catch (const Error& e) {
            report.status = RunReport::Status::PlanningFailed;
            report.failure_reason = e.what();
            std::tie(report.final_err_t, report.final_err_r) =
                pose_errors(robot, desired_effector);
            return report;
        }
    }

    // Jacobian fit from one small excitation per twist axis, pose restored
    // after each probe. Used at startup and whenever tracking stalls.
    auto fit_jacobian = [&]() {
        std::vector<std::pair<Twist, Eigen::VectorXd>> responses;
        for (int axis = 0; axis < 6; ++axis) {
            const double delta =
                axis < 3 ? spec.excitation_translation : spec.excitation_rotation;
            Twist dq = Twist::Zero();
            dq(axis) = delta;

            const RobotState saved = robot;
            const Observation before = observe(scene, robot, k, ocfg, noise);
            ControlCommand cmd;
            cmd.qdot = dq / spec.dt;
            robot = apply_command(robot, cmd, spec.dt);
            const Observation after = observe(scene, robot, k, ocfg, noise);
            robot = saved;
            if (!before.lost.empty() || !after.lost.empty())
                throw NonPositiveDepth("jacobian excitation: feature lost");
            responses.emplace_back(dq, stacked_difference(after.features, before.features));
        }
        return init_jacobian(responses);
    };

    JacobianEstimate jac;
    try {
        jac = fit_jacobian();
    } catch (const Error& e) {
        report.status = RunReport::Status::Diverged;
        report.failure_reason = std::string("jacobian initialization failed: ") + e.what();
        std::tie(report.final_err_t, report.final_err_r) = pose_errors(robot, desired_effector);
        return report;
    }

    RlsState rls;
    FeatureSet window_start_features;
    Twist window_dq = Twist::Zero();
    bool window_open = false;
    bool terminal_phase = false;
    FeatureSet filtered;
    bool have_filtered = false;
    double initial_rms = -1.0;
    int diverging_streak = 0;
    int last_progress_tick = 0;
    double best_rms = std::numeric_limits<double>::max();
    std::size_t last_cursor = 0;
    int refits = 0;
    report.status = RunReport::Status::BudgetExhausted;

    for (int tick = 0; tick < spec.step_budget; ++tick) {
        Observation obs;
        try {
            obs = observe(scene, robot, k, ocfg, noise);
        } catch (const NonPositiveDepth& e) {
            report.status = RunReport::Status::Diverged;
            report.failure_reason = e.what();
            break;
        }
        if (!obs.lost.empty() ||
            (spec.treat_out_of_bounds_as_lost && !obs.out_of_bounds.empty())) {
            report.status = RunReport::Status::Diverged;
            report.failure_reason = "tracked feature lost at tick " + std::to_string(tick);
            break;
        }

        if (!window_open) {
            window_start_features = obs.features;
            window_dq.setZero();
            window_open = true;
        } else if (window_dq.norm() >= spec.update_window_dq) {
            const Eigen::VectorXd dy =
                stacked_difference(obs.features, window_start_features);
            jac = spec.estimator == ExperimentSpec::Estimator::Broyden
                      ? broyden_update(jac, window_dq, dy, spec.broyden_forgetting)
                      : rls_update(jac, rls, window_dq, dy);
            window_start_features = obs.features;
            window_dq.setZero();
        }

        const double rms_to_goal =
            detail::rms(stacked_difference(obs_desired.features, obs.features));
        if (!terminal_phase && rms_to_goal < spec.terminal_rms_px) terminal_phase = true;

        const double alpha =
            terminal_phase ? spec.terminal_feature_filter_alpha : spec.feature_filter_alpha;
        if (!have_filtered) {
            filtered = obs.features;
            have_filtered = true;
        } else {
            for (std::size_t i = 0; i < filtered.size(); ++i) {
                filtered.points[i].u += alpha * (obs.features.points[i].u - filtered.points[i].u);
                filtered.points[i].v += alpha * (obs.features.points[i].v - filtered.points[i].v);
            }
        }

        const FeatureSet& target = track_trajectory(tracker, filtered, spec.advance_tol_px);

        // Stall recovery: a cursor that stopped advancing with no improvement
        // in the goal error means the estimate misleads the controller in
        // exactly the direction the residual needs; refit from fresh probes.
        bool refitted = false;
        if (tracker.cursor > last_cursor || rms_to_goal < best_rms - 0.25) {
            last_cursor = std::max(last_cursor, tracker.cursor);
            best_rms = std::min(best_rms, rms_to_goal);
            last_progress_tick = tick;
        } else if (spec.stall_timeout_ticks > 0 && refits < spec.max_refits &&
                   tick - last_progress_tick > spec.stall_timeout_ticks) {
            try {
                jac = fit_jacobian();
            } catch (const Error& e) {
                report.status = RunReport::Status::Diverged;
                report.failure_reason = std::string("stall recovery failed: ") + e.what();
                break;
            }
            ++refits;
            refitted = true;
            window_open = false;
            last_progress_tick = tick;
        }

        ControlOptions copts = spec.control;
        double gain = spec.gain;
        if (terminal_phase) {
            gain = spec.terminal_gain;
            copts.damping_ratio = spec.terminal_damping_ratio;
        }
        const ControlResult res = control_step(jac, filtered, target, gain, copts);

        ServoTick tk;
        tk.tick = tick;
        tk.time = tick * spec.dt;
        tk.cursor_t = tracker.cursor_time();
        tk.feature_rms_px = rms_to_goal;
        tk.qdot = res.command.qdot;
        std::tie(tk.err_t, tk.err_r) = pose_errors(robot, desired_effector);
        tk.effector_pose = robot.effector_pose;
        tk.camera_pose = robot.camera_pose();
        if (res.singular_flagged) tk.flags.push_back("singular");
        if (refitted) tk.flags.push_back("refit");
        report.log.ticks.push_back(tk);

        if (tk.err_t < spec.convergence_err_t && tk.err_r < spec.convergence_err_r) {
            report.status = RunReport::Status::Converged;
            break;
        }

        if (initial_rms < 0.0) initial_rms = tk.feature_rms_px;
        if (tk.feature_rms_px > spec.divergence_rms_factor * std::max(initial_rms, 1.0)) {
            if (++diverging_streak >= spec.divergence_ticks) {
                report.status = RunReport::Status::Diverged;
                report.failure_reason =
                    "feature error exceeded blow-up bound at tick " + std::to_string(tick);
                break;
            }
        } else {
            diverging_streak = 0;
        }

        robot = apply_command(robot, res.command, spec.dt);
        window_dq += res.command.qdot * spec.dt;
    }

    std::tie(report.final_err_t, report.final_err_r) = pose_errors(robot, desired_effector);
    report.converged = report.final_err_t < spec.convergence_err_t &&
                       report.final_err_r < spec.convergence_err_r;
    report.ticks_used = static_cast<int>(report.log.ticks.size());
    report.path = path_length_accumulators(report.log);
    return report;
}

/// Built-in benchmark scenarios.
inline ExperimentSpec case1_spec(Method method) {
    ExperimentSpec spec;
    spec.name = "case1";
    spec.method = method;
    spec.offset_translation = Eigen::Vector3d(-0.25, -0.10, 0.10);
    spec.offset_rotation_deg = Eigen::Vector3d(10.0, -10.0, 60.0);
    spec.noise_sigma = 0.0;
    return spec;
}

inline ExperimentSpec case2_spec(Method method) {
    ExperimentSpec spec;
    spec.name = "case2";
    spec.method = method;
    spec.offset_translation = Eigen::Vector3d(-0.35, -0.20, 0.10);
    spec.offset_rotation_deg = Eigen::Vector3d(20.0, -20.0, 100.0);
    spec.noise_sigma = 0.0;
    spec.step_budget = 6000;
    return spec;
}

struct SuiteResult {
    std::vector<RunReport> reports;
    std::string table;
};

/// Formats the comparison table (scenario x method x metrics).
inline std::string format_suite_table(const std::vector<RunReport>& reports) {
    std::ostringstream os;
    os << "scenario      method    status            err_t[mm]  err_r[deg]  "
          "eff_path[m]  eff_rot[deg]  cam_path[m]  cam_rot[deg]  ticks\n";
    auto line = [&os](const RunReport& r) {
        char buf[256];
        std::snprintf(buf, sizeof(buf),
                      "%-13s %-9s %-17s %9.3f  %10.4f  %11.4f  %12.2f  %11.4f  %12.2f  %5d\n",
                      r.name.c_str(), method_name(r.method).c_str(), status_name(r.status),
                      r.final_err_t * 1e3, rad_to_deg(r.final_err_r), r.path.effector_translation,
                      rad_to_deg(r.path.effector_rotation), r.path.camera_translation,
                      rad_to_deg(r.path.camera_rotation), r.ticks_used);
        os << buf;
    };
    for (const auto& r : reports) line(r);
    return os.str();
}

/// Runs every spec (independent worlds, deterministic order) and builds the
/// comparison table. Per-run failures are aggregated, not fatal.
inline SuiteResult run_suite(const std::vector<ExperimentSpec>& specs) {
    if (specs.empty()) throw std::invalid_argument("run_suite: no experiment specs given");
    SuiteResult result;
    result.reports.reserve(specs.size());
    for (const auto& spec : specs) result.reports.push_back(run_experiment(spec));
    result.table = format_suite_table(result.reports);
    return result;
}

}  // namespace ibuvs
