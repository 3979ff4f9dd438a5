// Iterative inverse kinematics on the twist error between current and
// desired end-effector poses: Newton-Raphson, Gauss-Newton, and three
// Levenberg-Marquardt damping variants, all with seeded random restarts.

#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "armkit/kinematics.hpp"
#include "armkit/prng.hpp"

namespace armkit::ik {

struct Twist {
  Vec3 v = Vec3::Zero();
  Vec3 w = Vec3::Zero();

  Vec6 vec6() const {
    Vec6 out;
    out << v, w;
    return out;
  }
  double norm() const { return vec6().norm(); }

  static Twist from_vec6(const Vec6& u) { return {u.head<3>(), u.tail<3>()}; }
};

inline Twist pose_error(const kin::Pose& current, const kin::Pose& desired) {
  Twist e;
  e.v = desired.block<3, 1>(0, 3) - current.block<3, 1>(0, 3);
  Mat3 Rc = current.topLeftCorner<3, 3>(), Rd = desired.topLeftCorner<3, 3>();
  e.w = rot_log(Rd * Rc.transpose());
  return e;
}

enum class IKMethod { NewtonRaphson, GaussNewton, LMChan, LMSugihara, LMWampler };

inline IKMethod parse_method(const std::string& name) {
  if (name == "newton-raphson") return IKMethod::NewtonRaphson;
  if (name == "gauss-newton") return IKMethod::GaussNewton;
  if (name == "lm-chan") return IKMethod::LMChan;
  if (name == "lm-sugihara") return IKMethod::LMSugihara;
  if (name == "lm-wampler") return IKMethod::LMWampler;
  throw std::invalid_argument("unknown ik method '" + name +
                              "'; known: newton-raphson, gauss-newton, lm-chan, "
                              "lm-sugihara, lm-wampler");
}

inline std::string method_name(IKMethod m) {
  switch (m) {
    case IKMethod::NewtonRaphson: return "newton-raphson";
    case IKMethod::GaussNewton: return "gauss-newton";
    case IKMethod::LMChan: return "lm-chan";
    case IKMethod::LMSugihara: return "lm-sugihara";
    default: return "lm-wampler";
  }
}

struct IKOptions {
  IKMethod method = IKMethod::LMChan;
  int max_iterations = 100;
  double tolerance = 1e-10;  // on the squared weighted error E
  int restarts = 30;
  std::uint64_t seed = 0;
  double lm_lambda = -1;  // method default when negative: chan 1.0, wampler 1e-4
  Vec6 weight = Vec6::Ones();
};

struct IKResult {
  std::vector<double> q;
  bool success = false;
  int iterations = 0;
  int restarts = 0;
  double residual = 0;
};

namespace detail {

inline Eigen::MatrixXd pinv(const Eigen::MatrixXd& m) {
  return m.completeOrthogonalDecomposition().pseudoInverse();
}

}  // namespace detail

inline IKResult ik_solve(const ets::RobotModel& model, const kin::Pose& target_in,
                         std::optional<std::vector<double>> q0 = std::nullopt,
                         IKOptions opts = {}) {
  const int n = model.njoints();
  kin::Pose target = orthonormalize_pose(target_in);

  std::vector<double> q;
  if (q0) {
    if (static_cast<int>(q0->size()) != n)
      throw std::invalid_argument("expected " + std::to_string(n) + " joint values, got " +
                                  std::to_string(q0->size()));
    q = *q0;
  } else if (auto it = model.configurations.find("qr"); it != model.configurations.end()) {
    q = it->second;
  } else {
    q.assign(static_cast<std::size_t>(n), 0.0);
  }

  const Eigen::Matrix<double, 6, 6> We = opts.weight.asDiagonal();
  double lambda = opts.lm_lambda;
  if (lambda < 0) lambda = opts.method == IKMethod::LMWampler ? 1e-4 : 1.0;

  auto error_at = [&](const std::vector<double>& qq) {
    Vec6 e = pose_error(kin::fk_numeric(model.ets, qq, model.constants), target).vec6();
    return std::make_pair(e, 0.5 * e.dot(We * e));
  };

  SplitMix64 rng(opts.seed);
  IKResult result;
  result.q = q;
  auto [e0, E0] = error_at(q);
  result.residual = E0;

  for (int attempt = 0; attempt <= opts.restarts; ++attempt) {
    if (attempt > 0) {
      for (double& v : q) v = rng.uniform(-M_PI, M_PI);
      ++result.restarts;
    }

    auto [e, E] = error_at(q);
    double best_E = E;
    int since_improvement = 0;
    bool stalled = false;

    for (int iter = 0; iter < opts.max_iterations && !stalled; ++iter) {
      if (E <= opts.tolerance) {
        result.q = q;
        result.residual = E;
        result.success = true;
        return result;
      }
      ++result.iterations;

      Eigen::MatrixXd J = kin::jacobian(model.ets, q, model.constants).matrix;
      Eigen::VectorXd g = J.transpose() * (We * e);
      Eigen::VectorXd dq;
      switch (opts.method) {
        case IKMethod::NewtonRaphson:
          dq = detail::pinv(J) * (We * e);
          break;
        case IKMethod::GaussNewton:
          dq = detail::pinv(J.transpose() * We * J) * g;
          break;
        default: {
          Eigen::MatrixXd Wn;
          if (opts.method == IKMethod::LMChan)
            Wn = lambda * E * Eigen::MatrixXd::Identity(n, n);
          else if (opts.method == IKMethod::LMSugihara)
            Wn = (E + 1e-3) * Eigen::MatrixXd::Identity(n, n);
          else
            Wn = lambda * Eigen::MatrixXd::Identity(n, n);
          dq = (J.transpose() * We * J + Wn).ldlt().solve(g);
          break;
        }
      }

      bool lm = opts.method != IKMethod::NewtonRaphson && opts.method != IKMethod::GaussNewton;
      std::vector<double> q_next = q;
      for (int j = 0; j < n; ++j) q_next[static_cast<std::size_t>(j)] += dq[j];
      auto [e_next, E_next] = error_at(q_next);
      if (lm && E_next > E) {
        stalled = true;  // rejected uphill step: restart rather than re-damp
        break;
      }
      q = std::move(q_next);
      e = e_next;
      E = E_next;

      if (E < result.residual) {
        result.residual = E;
        result.q = q;
      }
      if (dq.lpNorm<Eigen::Infinity>() < 1e-12) {
        stalled = true;
        break;
      }
      if (E < best_E - 1e-14) {
        best_E = E;
        since_improvement = 0;
      } else if (++since_improvement >= 30) {
        stalled = true;
        break;
      }
    }

    if (E <= opts.tolerance) {
      result.q = q;
      result.residual = E;
      result.success = true;
      return result;
    }
  }
  return result;
}

}  // namespace armkit::ik
