// The tool registry the solver agent works with.  Every tool is a thin
// JSON-in/JSON-out adapter over a library operation; files land under the
// run's output directory and observations carry only relative names so that
// transcripts stay byte-stable across machines.

#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "../ets.hpp"
#include "../ik.hpp"
#include "../kinematics.hpp"
#include "../motion.hpp"

namespace armkit::agents {

using json = nlohmann::json;

class ToolError : public std::runtime_error {
 public:
  explicit ToolError(const std::string& what) : std::runtime_error(what) {}
};

struct ToolContext {
  ets::RobotRegistry& registry;
  std::string outdir = ".";
  std::map<std::string, motion::Trajectory> trajectories;
  int counter = 0;  // shared stream for trajectory ids and file names
};

namespace toolarg {

inline const json& require(const json& args, const char* key, const char* tool) {
  if (!args.is_object() || !args.contains(key))
    throw ToolError(std::string("missing argument '") + key + "' for " + tool);
  return args.at(key);
}

inline std::vector<double> number_list(const json& value, const char* key) {
  if (!value.is_array())
    throw ToolError(std::string("argument '") + key + "' must be an array of numbers");
  std::vector<double> out;
  for (const json& v : value) {
    if (!v.is_number()) throw ToolError(std::string("argument '") + key + "' must be numeric");
    out.push_back(v.get<double>());
  }
  return out;
}

// Joint values arrive either as a numeric array or as the name of one of the
// robot's stored configurations.
inline std::vector<double> joint_values(const json& value, const ets::RobotModel& model,
                                        const char* key) {
  std::vector<double> q;
  if (value.is_string()) {
    auto it = model.configurations.find(value.get<std::string>());
    if (it == model.configurations.end())
      throw ToolError("unknown configuration '" + value.get<std::string>() + "' for robot " +
                      model.name);
    q = it->second;
  } else {
    q = number_list(value, key);
  }
  if (static_cast<int>(q.size()) != model.njoints())
    throw ToolError(std::string("argument '") + key + "' expects " +
                    std::to_string(model.njoints()) + " joint values, got " +
                    std::to_string(q.size()));
  return q;
}

inline kin::Pose matrix4(const json& value, const char* key) {
  if (!value.is_array() || value.size() != 4)
    throw ToolError(std::string("argument '") + key + "' must be a 4x4 matrix");
  kin::Pose pose;
  for (int r = 0; r < 4; ++r) {
    const json& row = value[static_cast<std::size_t>(r)];
    if (!row.is_array() || row.size() != 4)
      throw ToolError(std::string("argument '") + key + "' must be a 4x4 matrix");
    for (int c = 0; c < 4; ++c) {
      const json& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number())
        throw ToolError(std::string("argument '") + key + "' must be numeric");
      pose(r, c) = v.get<double>();
    }
  }
  return pose;
}

inline std::map<std::string, double> constants(const json& args) {
  std::map<std::string, double> out;
  if (!args.contains("constants")) return out;
  const json& c = args.at("constants");
  if (!c.is_object()) throw ToolError("argument 'constants' must be an object");
  for (auto it = c.begin(); it != c.end(); ++it) {
    if (!it.value().is_number()) throw ToolError("argument 'constants' must map to numbers");
    out[it.key()] = it.value().get<double>();
  }
  return out;
}

inline ets::ETS parse_ets_arg(const json& args, const char* tool) {
  const json& v = require(args, "ets", tool);
  if (!v.is_string()) throw ToolError("argument 'ets' must be a string");
  try {
    return ets::parse_ets(v.get<std::string>());
  } catch (const std::exception& e) {
    throw ToolError(std::string("could not parse the transform sequence: ") + e.what());
  }
}

inline kin::Frame frame_arg(const json& args, const char* fallback) {
  std::string f = args.value("frame", fallback);
  if (f == "world") return kin::Frame::World;
  if (f == "ee" || f == "end-effector") return kin::Frame::EndEffector;
  throw ToolError("argument 'frame' must be 'world' or 'ee', got '" + f + "'");
}

inline json pose_json(const kin::Pose& pose) {
  json rows = json::array();
  for (int r = 0; r < 4; ++r) {
    json row = json::array();
    for (int c = 0; c < 4; ++c) row.push_back(pose(r, c));
    rows.push_back(row);
  }
  return rows;
}

inline json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

inline json sym_pose_json(const kin::SymPose& pose) {
  json rows = json::array();
  for (int r = 0; r < 4; ++r) {
    json row = json::array();
    for (int c = 0; c < 4; ++c) row.push_back(pose.at(r, c).str());
    rows.push_back(row);
  }
  return rows;
}

// Default start for motion tools: the robot's ready pose when it has one.
inline json default_start(const ets::RobotModel& model) {
  return model.configurations.count("qr") ? json("qr") : json("qz");
}

inline std::string write_trajectory(const motion::Trajectory& traj, const std::string& format,
                                    ToolContext& ctx) {
  std::filesystem::create_directories(ctx.outdir);
  std::string relname = "traj-" + std::to_string(++ctx.counter) + "." + format;
  motion::export_trajectory(traj, format, ctx.outdir + "/" + relname);
  return relname;
}

}  // namespace toolarg

namespace tools {

inline json symbolic_fk(const json& args, ToolContext&) {
  ets::ETS e = toolarg::parse_ets_arg(args, "Symbolic_Forward_Kinematic_ET");
  return {{"ets", ets::format_ets(e)},
          {"symbolic_fk", toolarg::sym_pose_json(kin::fk_symbolic(e))}};
}

inline json symbolic_velocity(const json& args, ToolContext&) {
  ets::ETS e = toolarg::parse_ets_arg(args, "Symbolic_EndEffector_Velocity");
  kin::SymVec3 v = kin::ee_velocity_symbolic(e);
  return {{"velocity", {v.x.str(), v.y.str(), v.z.str()}}};
}

inline json symbolic_acceleration(const json& args, ToolContext&) {
  ets::ETS e = toolarg::parse_ets_arg(args, "Symbolic_EndEffector_Acceleration");
  kin::SymVec3 a = kin::ee_acceleration_symbolic(e);
  return {{"acceleration", {a.x.str(), a.y.str(), a.z.str()}}};
}

inline json symbolic_jacobian(const json& args, ToolContext&) {
  ets::ETS e = toolarg::parse_ets_arg(args, "Symbolic_Jacobian");
  kin::SymJacobian jac = kin::jacobian_symbolic(e);
  json rows = json::array();
  for (int r = 0; r < 6; ++r) {
    json row = json::array();
    for (int c = 0; c < jac.cols; ++c) row.push_back(jac.at(r, c).str());
    rows.push_back(row);
  }
  return {{"jacobian", rows}};
}

inline json create_custom_robot(const json& args, ToolContext& ctx) {
  ets::ETS e = toolarg::parse_ets_arg(args, "create_custom_userdefined_robot");
  std::string name = args.value("name", "custom");
  std::string id = ets::register_robot(ctx.registry, name, e, toolarg::constants(args));
  return {{"robot_id", id}, {"name", name}, {"njoints", e.joint_count}};
}

inline json create_builtin_robot(const json& args, ToolContext& ctx) {
  const json& v = toolarg::require(args, "name", "create_robotictoolbox_robot");
  if (!v.is_string()) throw ToolError("argument 'name' must be a string");
  ets::RobotModel model;
  try {
    model = ets::builtin_model(v.get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw ToolError(e.what());
  }
  int njoints = model.njoints();
  std::string id = ctx.registry.add(std::move(model));
  return {{"robot_id", id}, {"name", v.get<std::string>()}, {"njoints", njoints}};
}

inline json custom_fk(const json& args, ToolContext& ctx) {
  const char* tool = "forward_kinematics_custom_userdefined_robot";
  ets::RobotModel model =
      ctx.registry.find(toolarg::require(args, "robot_id", tool).get<std::string>());
  std::vector<double> q =
      toolarg::joint_values(toolarg::require(args, "joint_values", tool), model, "joint_values");
  return {{"fk", toolarg::pose_json(kin::fk_numeric(model.ets, q, model.constants))}};
}

inline json solve_ik(const json& args, ToolContext& ctx) {
  const char* tool = "inverse_kinematics";
  ets::RobotModel model =
      ctx.registry.find(toolarg::require(args, "robot_id", tool).get<std::string>());
  kin::Pose target = toolarg::matrix4(toolarg::require(args, "target", tool), "target");
  ik::IKOptions opts;
  if (args.contains("method")) opts.method = ik::parse_method(args.at("method").get<std::string>());
  opts.max_iterations = args.value("max_iterations", opts.max_iterations);
  opts.tolerance = args.value("tolerance", opts.tolerance);
  opts.restarts = args.value("restarts", opts.restarts);
  opts.seed = args.value("seed", opts.seed);
  std::optional<std::vector<double>> q0;
  if (args.contains("q0")) q0 = toolarg::joint_values(args.at("q0"), model, "q0");
  ik::IKResult result = ik::ik_solve(model, target, q0, opts);
  kin::Pose achieved = kin::fk_numeric(model.ets, result.q, model.constants);
  return {{"ik_solution",
           {{"success", result.success},
            {"q", result.q},
            {"residual", result.residual},
            {"iterations", result.iterations},
            {"restarts", result.restarts},
            {"method", ik::method_name(opts.method)}}},
          {"achieved_pose", toolarg::pose_json(achieved)}};
}

inline json numeric_jacobian(const json& args, ToolContext& ctx) {
  const char* tool = "compute_Jacobian";
  ets::RobotModel model =
      ctx.registry.find(toolarg::require(args, "robot_id", tool).get<std::string>());
  std::vector<double> q =
      toolarg::joint_values(toolarg::require(args, "joint_values", tool), model, "joint_values");
  kin::Frame frame = toolarg::frame_arg(args, "world");
  kin::Jacobian jac = kin::jacobian(model.ets, q, model.constants, frame);
  return {{"jacobian", toolarg::matrix_json(jac.matrix)},
          {"frame", frame == kin::Frame::World ? "world" : "ee"}};
}

inline json plot_motion(const json& args, ToolContext& ctx, const char* tool) {
  ets::RobotModel model =
      ctx.registry.find(toolarg::require(args, "robot_id", tool).get<std::string>());
  json start = args.contains("initial_joint_values") ? args.at("initial_joint_values")
                                                     : json("qz");
  std::vector<double> q0 = toolarg::joint_values(start, model, "initial_joint_values");
  std::vector<double> q1 = toolarg::joint_values(
      toolarg::require(args, "final_joint_values", tool), model, "final_joint_values");
  double duration = args.value("duration", 2.45);
  double dt = args.value("dt", 0.05);
  motion::Trajectory traj = motion::quintic_joint_traj(model, q0, q1, duration, dt);
  std::string format = args.value("format", "svg");
  std::string relname = toolarg::write_trajectory(traj, format, ctx);
  return {{"trajectory", relname},
          {"records", traj.records.size()},
          {"final_joint_values", q1}};
}

inline json plot_custom_motion(const json& args, ToolContext& ctx) {
  return plot_motion(args, ctx, "plot_custom_robot_motion");
}

inline json plot_builtin_motion(const json& args, ToolContext& ctx) {
  return plot_motion(args, ctx, "plot_robot_motion");
}

inline json position_servo(const json& args, ToolContext& ctx) {
  const char* tool = "simulate_robot_motion_Position_based_Servoing";
  ets::RobotModel model =
      ctx.registry.find(toolarg::require(args, "robot_id_local", tool).get<std::string>());
  kin::Pose target = toolarg::matrix4(
      toolarg::require(args, "end_effector_desired_transformation_matrix", tool),
      "end_effector_desired_transformation_matrix");
  json start = args.contains("initial_joint_value") ? args.at("initial_joint_value")
                                                    : toolarg::default_start(model);
  std::vector<double> q0 = toolarg::joint_values(start, model, "initial_joint_value");
  std::string frame = args.value("desired_position_frame", "world");
  if (frame != "world")
    throw ToolError("only the world frame is supported for position-based servoing");
  motion::ServoOptions opts;
  if (args.contains("proportional_gain")) {
    const json& g = args.at("proportional_gain");
    opts.gain = g.is_number() ? std::vector<double>{g.get<double>()}
                              : toolarg::number_list(g, "proportional_gain");
  }
  opts.velocity_profile = args.value("velocity_profile", false);
  opts.dt = args.value("dt", 0.05);
  opts.max_time = args.value("max_time", 10.0);
  if (args.value("dynamic_target", false)) {
    std::vector<double> tw = toolarg::number_list(
        toolarg::require(args, "dynamic_target_velocity", tool), "dynamic_target_velocity");
    if (tw.size() != 6)
      throw ToolError("argument 'dynamic_target_velocity' must have 6 entries");
    Vec6 twist;
    for (int i = 0; i < 6; ++i) twist[i] = tw[static_cast<std::size_t>(i)];
    opts.target_twist = twist;
  }
  motion::Trajectory traj = motion::simulate_servo(model, q0, target, opts);
  std::string relname = toolarg::write_trajectory(traj, args.value("format", "csv"), ctx);
  return {{"trajectory", relname},
          {"arrived", traj.arrived},
          {"records", traj.records.size()},
          {"final_error", traj.records.back().error_norm},
          {"final_joint_values", traj.records.back().q}};
}

inline json joint_velocity_sim(const json& args, ToolContext& ctx) {
  const char* tool = "simulate_joint_velocity";
  ets::RobotModel model =
      ctx.registry.find(toolarg::require(args, "robot_id", tool).get<std::string>());
  json start = args.contains("initial_joint_values") ? args.at("initial_joint_values")
                                                     : json("qz");
  std::vector<double> q0 = toolarg::joint_values(start, model, "initial_joint_values");
  std::vector<double> qdot = toolarg::number_list(
      toolarg::require(args, "joint_velocity", tool), "joint_velocity");
  double duration = toolarg::require(args, "duration", tool).get<double>();
  double dt = args.value("dt", 0.05);
  motion::Trajectory traj = motion::simulate_joint_velocity(model, q0, qdot, duration, dt);
  std::string relname = toolarg::write_trajectory(traj, args.value("format", "csv"), ctx);
  const motion::TrajectoryRecord& last = traj.records.back();
  return {{"trajectory", relname},
          {"records", traj.records.size()},
          {"final_joint_values", last.q},
          {"final_position", {last.pose(0, 3), last.pose(1, 3), last.pose(2, 3)}}};
}

inline json ee_velocity_sim(const json& args, ToolContext& ctx) {
  const char* tool = "simulate_ee_velocity";
  ets::RobotModel model =
      ctx.registry.find(toolarg::require(args, "robot_id", tool).get<std::string>());
  json start = args.contains("initial_joint_values") ? args.at("initial_joint_values")
                                                     : toolarg::default_start(model);
  std::vector<double> q0 = toolarg::joint_values(start, model, "initial_joint_values");
  std::vector<double> tw = toolarg::number_list(
      toolarg::require(args, "ee_velocity", tool), "ee_velocity");
  if (tw.size() != 6) throw ToolError("argument 'ee_velocity' must have 6 entries");
  Vec6 twist;
  for (int i = 0; i < 6; ++i) twist[i] = tw[static_cast<std::size_t>(i)];
  kin::Frame frame = toolarg::frame_arg(args, "world");
  double duration = toolarg::require(args, "duration", tool).get<double>();
  double dt = args.value("dt", 0.05);
  motion::Trajectory traj =
      motion::simulate_joint_velocity(model, q0, twist, frame, duration, dt);
  std::string relname = toolarg::write_trajectory(traj, args.value("format", "csv"), ctx);
  const motion::TrajectoryRecord& last = traj.records.back();
  return {{"trajectory", relname},
          {"records", traj.records.size()},
          {"final_joint_values", last.q},
          {"final_position", {last.pose(0, 3), last.pose(1, 3), last.pose(2, 3)}}};
}

inline json quintic_trajectory(const json& args, ToolContext& ctx) {
  const char* tool = "quintic_joint_trajectory";
  ets::RobotModel model =
      ctx.registry.find(toolarg::require(args, "robot_id", tool).get<std::string>());
  std::vector<double> q0 = toolarg::joint_values(
      toolarg::require(args, "initial_joint_values", tool), model, "initial_joint_values");
  std::vector<double> q1 = toolarg::joint_values(
      toolarg::require(args, "final_joint_values", tool), model, "final_joint_values");
  double duration = args.value("duration", 2.45);
  double dt = args.value("dt", 0.05);
  motion::Trajectory traj = motion::quintic_joint_traj(model, q0, q1, duration, dt);
  std::string id = "traj-" + std::to_string(++ctx.counter);
  std::size_t records = traj.records.size();
  ctx.trajectories[id] = std::move(traj);
  return {{"trajectory_id", id}, {"records", records}, {"duration", duration}};
}

inline json export_stored_trajectory(const json& args, ToolContext& ctx) {
  const char* tool = "export_trajectory";
  std::string id = toolarg::require(args, "trajectory_id", tool).get<std::string>();
  auto it = ctx.trajectories.find(id);
  if (it == ctx.trajectories.end()) throw ToolError("unknown trajectory id '" + id + "'");
  std::string format = args.value("format", "csv");
  std::filesystem::create_directories(ctx.outdir);
  std::string relname = id + "." + format;
  motion::export_trajectory(it->second, format, ctx.outdir + "/" + relname);
  return {{"trajectory", relname}, {"format", format}};
}

}  // namespace tools

inline const std::vector<std::string>& tool_names() {
  static const std::vector<std::string> names = {
      "Symbolic_Forward_Kinematic_ET",
      "Symbolic_EndEffector_Velocity",
      "Symbolic_EndEffector_Acceleration",
      "Symbolic_Jacobian",
      "create_custom_userdefined_robot",
      "create_robotictoolbox_robot",
      "forward_kinematics_custom_userdefined_robot",
      "inverse_kinematics",
      "compute_Jacobian",
      "plot_custom_robot_motion",
      "plot_robot_motion",
      "simulate_robot_motion_Position_based_Servoing",
      "simulate_joint_velocity",
      "simulate_ee_velocity",
      "quintic_joint_trajectory",
      "export_trajectory",
  };
  return names;
}

inline json call_tool(const std::string& name, const json& args, ToolContext& ctx) {
  using Fn = json (*)(const json&, ToolContext&);
  static const std::map<std::string, Fn> dispatch = {
      {"Symbolic_Forward_Kinematic_ET", tools::symbolic_fk},
      {"Symbolic_EndEffector_Velocity", tools::symbolic_velocity},
      {"Symbolic_EndEffector_Acceleration", tools::symbolic_acceleration},
      {"Symbolic_Jacobian", tools::symbolic_jacobian},
      {"create_custom_userdefined_robot", tools::create_custom_robot},
      {"create_robotictoolbox_robot", tools::create_builtin_robot},
      {"forward_kinematics_custom_userdefined_robot", tools::custom_fk},
      {"inverse_kinematics", tools::solve_ik},
      {"compute_Jacobian", tools::numeric_jacobian},
      {"plot_custom_robot_motion", tools::plot_custom_motion},
      {"plot_robot_motion", tools::plot_builtin_motion},
      {"simulate_robot_motion_Position_based_Servoing", tools::position_servo},
      {"simulate_joint_velocity", tools::joint_velocity_sim},
      {"simulate_ee_velocity", tools::ee_velocity_sim},
      {"quintic_joint_trajectory", tools::quintic_trajectory},
      {"export_trajectory", tools::export_stored_trajectory},
  };
  auto it = dispatch.find(name);
  if (it == dispatch.end()) throw ToolError("unknown tool '" + name + "'");
  return it->second(args, ctx);
}

}  // namespace armkit::agents
