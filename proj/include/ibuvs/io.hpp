#pragma once

// Serialization: CSV exports for correspondences, planned trajectories and
// servo logs; JSON for run reports and experiment/scene configuration files.

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ibuvs/experiment.hpp"

namespace ibuvs {

using nlohmann::json;

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out.precision(15);
    return out;
}

inline void write_correspondences_csv(const std::string& path,
                                      const std::vector<Correspondence>& corrs) {
    auto out = open_output(path);
    out << "u_src,v_src,u_dst,v_dst\n";
    for (const auto& c : corrs) {
        const PixelPoint s = c.src.normalized();
        const PixelPoint d = c.dst.normalized();
        out << s.u << ',' << s.v << ',' << d.u << ',' << d.v << '\n';
    }
}

inline void write_trajectory_csv(const std::string& path, const PlannedImageTrajectory& traj) {
    auto out = open_output(path);
    out << "t,label,u,v\n";
    for (const auto& sample : traj.samples) {
        for (std::size_t i = 0; i < sample.features.size(); ++i) {
            const PixelPoint p = sample.features.points[i].normalized();
            out << sample.t << ',' << sample.features.labels[i] << ',' << p.u << ',' << p.v
                << '\n';
        }
    }
}

inline void write_servo_log_csv(const std::string& path, const ServoLog& log) {
    auto out = open_output(path);
    out << "tick,time,t_cursor,feature_rms_px,vx,vy,vz,wx,wy,wz,err_t_m,err_r_rad,flags\n";
    for (const auto& tk : log.ticks) {
        out << tk.tick << ',' << tk.time << ',' << tk.cursor_t << ',' << tk.feature_rms_px;
        for (int i = 0; i < 6; ++i) out << ',' << tk.qdot(i);
        out << ',' << tk.err_t << ',' << tk.err_r << ',';
        for (std::size_t i = 0; i < tk.flags.size(); ++i)
            out << (i ? ";" : "") << tk.flags[i];
        out << '\n';
    }
}

/// 3x3 matrix as a row-major array of 9 numbers.
inline json matrix_to_json(const Eigen::Matrix3d& m) {
    json a = json::array();
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) a.push_back(m(r, c));
    return a;
}

inline Eigen::Matrix3d matrix_from_json(const json& a) {
    if (!a.is_array() || a.size() != 9)
        throw std::invalid_argument("matrix json must be an array of 9 numbers");
    Eigen::Matrix3d m;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m(r, c) = a.at(3 * r + c).get<double>();
    return m;
}

inline json vec3_to_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

inline Eigen::Vector3d vec3_from_json(const json& a) {
    if (!a.is_array() || a.size() != 3)
        throw std::invalid_argument("vector json must be an array of 3 numbers");
    return Eigen::Vector3d(a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>());
}

inline json report_to_json(const RunReport& r) {
    json j;
    j["name"] = r.name;
    j["method"] = method_name(r.method);
    j["seed"] = r.seed;
    j["status"] = status_name(r.status);
    j["converged"] = r.converged;
    j["initial_err_t_m"] = r.initial_err_t;
    j["initial_err_r_deg"] = rad_to_deg(r.initial_err_r);
    j["final_err_t_m"] = r.final_err_t;
    j["final_err_r_deg"] = rad_to_deg(r.final_err_r);
    j["ticks"] = r.ticks_used;
    j["path"] = {{"effector_translation_m", r.path.effector_translation},
                 {"effector_rotation_deg", rad_to_deg(r.path.effector_rotation)},
                 {"camera_translation_m", r.path.camera_translation},
                 {"camera_rotation_deg", rad_to_deg(r.path.camera_rotation)}};
    if (!r.failure_reason.empty()) j["failure_reason"] = r.failure_reason;
    if (r.artifacts.planned) {
        json a;
        a["h_estimated"] = matrix_to_json(r.artifacts.h_estimated);
        a["h_oracle"] = matrix_to_json(r.artifacts.h_oracle);
        a["h_rel_error"] = r.artifacts.h_rel_error;
        a["h_inf_estimated"] = matrix_to_json(r.artifacts.h_inf_estimated);
        a["h_inf_oracle"] = matrix_to_json(r.artifacts.h_inf_oracle);
        a["h_inf_rel_error"] = r.artifacts.h_inf_rel_error;
        a["used_half_turn_split"] = r.artifacts.used_half_turn_split;
        if (r.artifacts.has_tau) {
            a["tau_estimated"] = vec3_to_json(r.artifacts.tau_estimated);
            a["tau_oracle"] = vec3_to_json(r.artifacts.tau_oracle);
            a["tau_observable_rel_error"] = r.artifacts.tau_observable_rel_error;
        }
        j["planning"] = a;
    }
    return j;
}

/// Scene/robot configuration schema:
/// {
///   "intrinsics": {"fx","fy","cx","cy","skew"},
///   "plane": {"normal":[..], "distance": d},
///   "grid": {"rows", "cols", "width_m"},
///   "bundles": [[dx,dy,dz], ...],
///   "hand_eye": {"axis":[..], "angle_deg", "translation":[..]},
///   "image": {"width","height"}
/// }
/// All keys optional; defaults fill the gaps.
inline SceneConfig scene_config_from_json(const json& j) {
    SceneConfig cfg;
    if (j.contains("intrinsics")) {
        const auto& k = j.at("intrinsics");
        cfg.intrinsics = CameraIntrinsics(
            k.value("fx", 600.0), k.value("fy", 600.0), k.value("cx", 320.0),
            k.value("cy", 240.0), k.value("skew", 0.0));
    }
    double plane_distance = 1.6;
    double grid_width = 0.7;
    if (j.contains("plane")) plane_distance = j.at("plane").value("distance", 1.6);
    if (j.contains("grid")) grid_width = j.at("grid").value("width_m", 0.7);
    cfg.scene = make_default_scene(plane_distance, grid_width);
    if (j.contains("grid")) {
        const int rows = j.at("grid").value("rows", 3);
        const int cols = j.at("grid").value("cols", 3);
        if (rows != 3 || cols != 3) {
            cfg.scene.target_labels.clear();
            cfg.scene.target_points.clear();
            int idx = 0;
            for (int r = 0; r < rows; ++r) {
                for (int c = 0; c < cols; ++c) {
                    const double x = (cols > 1 ? c / double(cols - 1) - 0.5 : 0.0) * grid_width;
                    const double y = (rows > 1 ? r / double(rows - 1) - 0.5 : 0.0) * grid_width;
                    cfg.scene.target_labels.push_back("p" + std::to_string(idx++));
                    cfg.scene.target_points.push_back(ScenePoint{x, y, plane_distance});
                }
            }
        }
    }
    if (j.contains("bundles")) {
        cfg.scene.bundle_labels.clear();
        cfg.scene.bundle_directions.clear();
        int idx = 0;
        for (const auto& b : j.at("bundles")) {
            cfg.scene.bundle_labels.push_back("vp" + std::to_string(idx++));
            cfg.scene.bundle_directions.push_back(vec3_from_json(b).normalized());
        }
    }
    cfg.scene.validate();
    if (j.contains("hand_eye")) {
        const auto& h = j.at("hand_eye");
        const Eigen::Vector3d axis =
            h.contains("axis") ? vec3_from_json(h.at("axis")).normalized()
                               : Eigen::Vector3d(1, 1, 0).normalized();
        cfg.hand_eye =
            Pose(axis_angle_to_rotation(AxisAngle(axis, deg_to_rad(h.value("angle_deg", 15.0)))),
                 h.contains("translation") ? vec3_from_json(h.at("translation"))
                                           : Eigen::Vector3d(0.05, -0.03, 0.08));
    }
    if (j.contains("image")) {
        cfg.image_width = j.at("image").value("width", 640.0);
        cfg.image_height = j.at("image").value("height", 480.0);
    }
    return cfg;
}

/// Experiment spec schema: method, offset, controller and noise settings;
/// optional embedded "scene" object. All keys except "method" optional.
inline ExperimentSpec spec_from_json(const json& j) {
    ExperimentSpec spec;
    spec.name = j.value("name", "experiment");
    spec.method = method_from_string(j.at("method").get<std::string>());
    if (j.contains("offset_translation_m"))
        spec.offset_translation = vec3_from_json(j.at("offset_translation_m"));
    if (j.contains("offset_rotation_deg"))
        spec.offset_rotation_deg = vec3_from_json(j.at("offset_rotation_deg"));
    spec.sample_count = j.value("sample_count", spec.sample_count);
    spec.noise_sigma = j.value("noise_sigma_px", spec.noise_sigma);
    spec.seed = j.value("seed", spec.seed);
    spec.step_budget = j.value("step_budget", spec.step_budget);
    spec.dt = j.value("dt_s", spec.dt);
    spec.gain = j.value("gain", spec.gain);
    spec.terminal_gain = j.value("terminal_gain", spec.terminal_gain);
    spec.advance_tol_px = j.value("advance_tol_px", spec.advance_tol_px);
    spec.broyden_forgetting = j.value("broyden_forgetting", spec.broyden_forgetting);
    spec.update_window_dq = j.value("update_window_dq", spec.update_window_dq);
    if (j.value("estimator", "broyden") == std::string("rls"))
        spec.estimator = ExperimentSpec::Estimator::Rls;
    spec.probe_angle_deg = j.value("probe_angle_deg", spec.probe_angle_deg);
    if (j.contains("probe_axis")) spec.probe_axis = vec3_from_json(j.at("probe_axis"));
    spec.control.max_linear = j.value("max_linear_mps", spec.control.max_linear);
    spec.control.max_angular = j.value("max_angular_radps", spec.control.max_angular);
    spec.control.damping_ratio = j.value("damping_ratio", spec.control.damping_ratio);
    if (j.contains("scene")) spec.world = scene_config_from_json(j.at("scene"));
    return spec;
}

inline ExperimentSpec load_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open spec file '" + path + "'");
    json j;
    in >> j;
    return spec_from_json(j);
}

}  // namespace ibuvs
