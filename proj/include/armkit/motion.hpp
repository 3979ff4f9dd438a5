// Resolved-rate motion control and trajectory generation: position-based
// servoing with proportional gain (optionally tracking a moving target),
// constant-velocity simulation in joint or task space, quintic joint-space
// trajectories, and CSV/SVG export with a JSON metadata sidecar.

#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "armkit/ik.hpp"
#include "armkit/kinematics.hpp"

namespace armkit::motion {

struct ServoOptions {
  std::vector<double> gain{1.0};  // broadcast to 6 entries, last value repeated
  double arrive_threshold = 1e-3;
  double dt = 0.05;
  double max_time = 10.0;
  bool velocity_profile = false;  // ramp commanded twist over the first 0.5 s
  std::optional<Vec6> target_twist;
};

struct TrajectoryRecord {
  double t = 0;
  std::vector<double> q;
  std::vector<double> qdot;
  kin::Pose pose = kin::Pose::Identity();
  double error_norm = 0;
  int jac_rank = 0;
  std::vector<Vec3> origins;  // base, each joint origin, end effector
};

struct Trajectory {
  std::vector<TrajectoryRecord> records;
  bool arrived = false;
  nlohmann::json meta;
};

inline Vec6 broadcast_gain(const std::vector<double>& gain) {
  if (gain.empty()) throw std::invalid_argument("gain vector is empty");
  Vec6 out;
  for (int i = 0; i < 6; ++i) {
    double g = i < static_cast<int>(gain.size()) ? gain[static_cast<std::size_t>(i)]
                                                 : gain.back();
    if (g <= 0) throw std::invalid_argument("gains must be positive");
    out[i] = g;
  }
  return out;
}

// Base, joint-frame origins, and end-effector position at configuration q.
inline std::vector<Vec3> frame_origins(const ets::ETS& e, const std::vector<double>& q,
                                       const std::map<std::string, double>& constants) {
  std::vector<Vec3> out;
  out.emplace_back(Vec3::Zero());
  kin::Pose T = kin::Pose::Identity();
  for (const ets::ET& t : e.transforms) {
    if (t.is_joint()) out.emplace_back(T.block<3, 1>(0, 3));
    double jv = t.is_joint() ? q[static_cast<std::size_t>(t.joint().index)] : 0.0;
    T = T * kin::et_matrix(t, jv, constants);
  }
  out.emplace_back(T.block<3, 1>(0, 3));
  return out;
}

inline std::pair<ik::Twist, bool> p_servo(const kin::Pose& current, const kin::Pose& desired,
                                          const Vec6& gain, double arrive_threshold = 1e-3) {
  ik::Twist e = ik::pose_error(current, desired);
  ik::Twist nu = ik::Twist::from_vec6(gain.cwiseProduct(e.vec6()));
  return {nu, e.norm() <= arrive_threshold};
}

inline std::vector<double> rrmc_step(const ets::RobotModel& model, const std::vector<double>& q,
                                     const Vec6& nu, kin::Frame frame = kin::Frame::World) {
  Eigen::MatrixXd J = kin::jacobian(model.ets, q, model.constants, frame).matrix;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(J);
  double sigma_min =
      svd.singularValues().size() ? svd.singularValues().tail<1>()(0) : 0.0;
  Eigen::VectorXd qd;
  if (sigma_min < 1e-4) {
    int n = static_cast<int>(J.cols());
    qd = (J.transpose() * J + 1e-6 * Eigen::MatrixXd::Identity(n, n))
             .ldlt()
             .solve(J.transpose() * nu);
  } else {
    qd = J.completeOrthogonalDecomposition().pseudoInverse() * nu;
  }
  return {qd.data(), qd.data() + qd.size()};
}

namespace detail {

inline int matrix_rank(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  double smax = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
  if (smax <= 0) return 0;
  int rank = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > 1e-8 * smax) ++rank;
  return rank;
}

inline TrajectoryRecord make_record(const ets::RobotModel& model, double t,
                                    const std::vector<double>& q,
                                    const std::vector<double>& qd, const kin::Pose& pose,
                                    double err) {
  TrajectoryRecord r;
  r.t = t;
  r.q = q;
  r.qdot = qd;
  r.pose = pose;
  r.error_norm = err;
  r.jac_rank = matrix_rank(kin::jacobian(model.ets, q, model.constants).matrix);
  r.origins = frame_origins(model.ets, q, model.constants);
  return r;
}

}  // namespace detail

inline Trajectory simulate_servo(const ets::RobotModel& model, const std::vector<double>& q0,
                                 const kin::Pose& target, const ServoOptions& opts) {
  if (opts.dt <= 0) throw std::invalid_argument("dt must be positive");
  Vec6 gain = broadcast_gain(opts.gain);
  kin::Pose desired = orthonormalize_pose(target);
  std::vector<double> q = q0;
  const std::vector<double> zero_rates(q.size(), 0.0);

  Trajectory traj;
  traj.meta = {{"kind", "servo"},
               {"gain", std::vector<double>(gain.data(), gain.data() + 6)},
               {"arrive_threshold", opts.arrive_threshold},
               {"dt", opts.dt},
               {"max_time", opts.max_time},
               {"velocity_profile", opts.velocity_profile}};
  if (opts.target_twist)
    traj.meta["target_twist"] =
        std::vector<double>(opts.target_twist->data(), opts.target_twist->data() + 6);

  double t = 0;
  for (;;) {
    kin::Pose pose = kin::fk_numeric(model.ets, q, model.constants);
    auto [nu, arrived] = p_servo(pose, desired, gain, opts.arrive_threshold);
    double err = ik::pose_error(pose, desired).norm();
    Vec6 command = nu.vec6();
    if (opts.velocity_profile) command *= std::min(1.0, t / 0.5);
    std::vector<double> qd = arrived ? zero_rates : rrmc_step(model, q, command);
    traj.records.push_back(detail::make_record(model, t, q, qd, pose, err));
    if (arrived) {
      traj.arrived = true;
      break;
    }
    if (t >= opts.max_time - 1e-9) break;
    for (std::size_t j = 0; j < q.size(); ++j) q[j] += qd[j] * opts.dt;
    t += opts.dt;
    if (opts.target_twist) {
      desired.block<3, 1>(0, 3) += opts.target_twist->head<3>() * opts.dt;
      desired.topLeftCorner<3, 3>() =
          rot_exp(opts.target_twist->tail<3>() * opts.dt) * desired.topLeftCorner<3, 3>();
    }
  }
  return traj;
}

inline Trajectory simulate_joint_velocity(const ets::RobotModel& model,
                                          const std::vector<double>& q0,
                                          const std::vector<double>& qdot, double duration,
                                          double dt) {
  if (dt <= 0 || duration <= 0) throw std::invalid_argument("duration and dt must be positive");
  if (qdot.size() != q0.size())
    throw std::invalid_argument("joint rate length does not match configuration");
  std::vector<double> q = q0;
  Trajectory traj;
  traj.meta = {{"kind", "joint-velocity"}, {"qdot", qdot}, {"duration", duration}, {"dt", dt}};
  long long steps = std::llround(duration / dt);
  for (long long k = 0; k <= steps; ++k) {
    double t = static_cast<double>(k) * dt;
    kin::Pose pose = kin::fk_numeric(model.ets, q, model.constants);
    traj.records.push_back(detail::make_record(model, t, q, qdot, pose, 0.0));
    if (k < steps)
      for (std::size_t j = 0; j < q.size(); ++j) q[j] += qdot[j] * dt;
  }
  return traj;
}

inline Trajectory simulate_joint_velocity(const ets::RobotModel& model,
                                          const std::vector<double>& q0, const Vec6& ee_twist,
                                          kin::Frame frame, double duration, double dt) {
  if (dt <= 0 || duration <= 0) throw std::invalid_argument("duration and dt must be positive");
  std::vector<double> q = q0;
  Trajectory traj;
  traj.meta = {{"kind", "ee-velocity"},
               {"twist", std::vector<double>(ee_twist.data(), ee_twist.data() + 6)},
               {"frame", frame == kin::Frame::World ? "world" : "end-effector"},
               {"duration", duration},
               {"dt", dt}};
  long long steps = std::llround(duration / dt);
  for (long long k = 0; k <= steps; ++k) {
    double t = static_cast<double>(k) * dt;
    kin::Pose pose = kin::fk_numeric(model.ets, q, model.constants);
    std::vector<double> qd = rrmc_step(model, q, ee_twist, frame);
    traj.records.push_back(detail::make_record(model, t, q, qd, pose, 0.0));
    if (k < steps)
      for (std::size_t j = 0; j < q.size(); ++j) q[j] += qd[j] * dt;
  }
  return traj;
}

inline Trajectory quintic_joint_traj(const ets::RobotModel& model, const std::vector<double>& q0,
                                     const std::vector<double>& q1, double duration, double dt) {
  if (q0.size() != q1.size()) throw std::invalid_argument("configuration lengths differ");
  if (duration <= 0 || dt <= 0) throw std::invalid_argument("duration and dt must be positive");
  Trajectory traj;
  traj.meta = {{"kind", "quintic"}, {"q0", q0}, {"q1", q1}, {"duration", duration}, {"dt", dt}};
  kin::Pose end_pose = kin::fk_numeric(model.ets, q1, model.constants);
  long long steps = std::llround(duration / dt);
  for (long long k = 0; k <= steps; ++k) {
    double t = static_cast<double>(k) * dt;
    double tau = std::min(t / duration, 1.0);
    double s = ((6 * tau - 15) * tau + 10) * tau * tau * tau;
    double sdot = ((30 * tau - 60) * tau + 30) * tau * tau / duration;
    std::vector<double> q(q0.size()), qd(q0.size());
    for (std::size_t j = 0; j < q0.size(); ++j) {
      q[j] = q0[j] + s * (q1[j] - q0[j]);
      qd[j] = sdot * (q1[j] - q0[j]);
    }
    kin::Pose pose = kin::fk_numeric(model.ets, q, model.constants);
    double err = ik::pose_error(pose, end_pose).norm();
    traj.records.push_back(detail::make_record(model, t, q, qd, pose, err));
  }
  traj.arrived = true;
  return traj;
}

namespace detail {

inline std::string num17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string num6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline void export_csv(const Trajectory& traj, std::ostream& out) {
  std::size_t n = traj.records.empty() ? 0 : traj.records.front().q.size();
  out << "t";
  for (std::size_t j = 0; j < n; ++j) out << ",q" << j;
  out << ",x,y,z,err\n";
  for (const TrajectoryRecord& r : traj.records) {
    out << num17(r.t);
    for (double v : r.q) out << ',' << num17(v);
    out << ',' << num17(r.pose(0, 3)) << ',' << num17(r.pose(1, 3)) << ','
        << num17(r.pose(2, 3)) << ',' << num17(r.error_norm) << '\n';
  }
}

// Project each sampled frame's link polyline onto the coordinate plane with
// the most motion: the axis with the smallest positional range is dropped.
inline void export_svg(const Trajectory& traj, std::ostream& out) {
  std::size_t count = traj.records.size();
  std::vector<std::size_t> sampled;
  if (count > 0) {
    std::size_t k = count > 1 ? std::max<std::size_t>(1, (count - 1) / 10) : 1;
    for (std::size_t i = 0; i < count; i += k) sampled.push_back(i);
    if (sampled.back() != count - 1) sampled.push_back(count - 1);
  }

  Vec3 lo = Vec3::Constant(1e300), hi = Vec3::Constant(-1e300);
  for (std::size_t i : sampled)
    for (const Vec3& p : traj.records[i].origins) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
  if (sampled.empty()) {
    lo = Vec3::Zero();
    hi = Vec3::Ones();
  }
  Vec3 range = hi - lo;
  int drop = 1;  // prefer the x-z plane
  if (range.z() < range.y() && range.z() <= range.x()) drop = 2;
  if (range.x() < range.y() && range.x() < range.z()) drop = 0;
  int hx = drop == 0 ? 1 : 0;
  int vy = drop == 2 ? 1 : 2;

  double span = std::max({range[hx], range[vy], 1e-3});
  double margin = 0.1 * span;
  double x0 = lo[hx] - margin, y0 = lo[vy] - margin, side = span + 2 * margin;
  auto sx = [&](double v) { return (v - x0) / side * 400.0; };
  auto sy = [&](double v) { return 400.0 - (v - y0) / side * 400.0; };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"400\" height=\"400\" "
         "viewBox=\"0 0 400 400\">\n";
  for (std::size_t idx = 0; idx < sampled.size(); ++idx) {
    const TrajectoryRecord& r = traj.records[sampled[idx]];
    double opacity = sampled.size() > 1
                         ? 0.25 + 0.75 * static_cast<double>(idx) / (sampled.size() - 1)
                         : 1.0;
    out << "  <g stroke=\"#1f4e79\" stroke-opacity=\"" << num6(opacity)
        << "\" fill=\"none\">\n    <polyline points=\"";
    for (std::size_t p = 0; p < r.origins.size(); ++p) {
      if (p) out << ' ';
      out << num6(sx(r.origins[p][hx])) << ',' << num6(sy(r.origins[p][vy]));
    }
    out << "\" stroke-width=\"2\"/>\n";
    for (const Vec3& p : r.origins)
      out << "    <circle cx=\"" << num6(sx(p[hx])) << "\" cy=\"" << num6(sy(p[vy]))
          << "\" r=\"3\"/>\n";
    out << "  </g>\n";
  }
  out << "</svg>\n";
}

}  // namespace detail

inline void export_trajectory(const Trajectory& traj, const std::string& format,
                              const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out.good()) throw std::runtime_error("cannot open '" + path + "' for writing");
  if (format == "csv")
    detail::export_csv(traj, out);
  else if (format == "svg")
    detail::export_svg(traj, out);
  else
    throw std::invalid_argument("unknown export format '" + format + "'; known: csv, svg");
  out.flush();
  if (!out.good()) throw std::runtime_error("write to '" + path + "' failed");

  std::ofstream meta(path + ".meta.json", std::ios::binary);
  if (!meta.good()) throw std::runtime_error("cannot open '" + path + ".meta.json'");
  nlohmann::json sidecar = traj.meta.is_null() ? nlohmann::json::object() : traj.meta;
  sidecar["records"] = traj.records.size();
  sidecar["arrived"] = traj.arrived;
  sidecar["format"] = format;
  meta << sidecar.dump(2) << '\n';
}

}  // namespace armkit::motion
