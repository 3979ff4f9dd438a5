// Forward kinematics by ordered transform multiplication, in both symbolic
// and numeric form, plus symbolic end-effector velocity/acceleration and the
// geometric Jacobian in the world or end-effector frame.

#pragma once

#include <array>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "armkit/ets.hpp"
#include "armkit/expr.hpp"
#include "armkit/se3.hpp"

namespace armkit::kin {

using Pose = Mat4;

enum class Frame { World, EndEffector };

struct SymPose {
  std::array<std::array<sym::Expr, 4>, 4> m;

  SymPose() {
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) m[r][c] = sym::Expr::integer(r == c ? 1 : 0);
  }

  sym::Expr& at(int r, int c) { return m[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]; }
  const sym::Expr& at(int r, int c) const {
    return m[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  }
};

struct SymVec3 {
  sym::Expr x, y, z;
};

struct Jacobian {
  Eigen::Matrix<double, 6, Eigen::Dynamic> matrix;
  Frame frame = Frame::World;
};

// 6×n matrix of expressions: rows 0-2 linear, 3-5 angular.
struct SymJacobian {
  int cols = 0;
  std::array<std::vector<sym::Expr>, 6> rows;

  const sym::Expr& at(int r, int c) const {
    return rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  }
};

// Joint symbols follow the per-kind convention: revolute joints are theta1,
// theta2, ... and prismatic joints d1, d2, ... in order of appearance.
inline std::vector<std::string> joint_symbol_names(const ets::ETS& e) {
  std::vector<std::string> names(static_cast<std::size_t>(e.joint_count));
  int revolute = 0, prismatic = 0;
  for (const ets::ET& t : e.transforms) {
    if (!t.is_joint()) continue;
    std::string n = t.rotation ? "theta" + std::to_string(++revolute)
                               : "d" + std::to_string(++prismatic);
    names[static_cast<std::size_t>(t.joint().index)] = n;
  }
  return names;
}

namespace detail {

inline SymPose sym_factor(const ets::ET& t, const sym::Expr& arg) {
  using sym::Expr;
  SymPose f;
  if (!t.rotation) {
    int r = t.axis == ets::Axis::X ? 0 : t.axis == ets::Axis::Y ? 1 : 2;
    f.at(r, 3) = arg;
    return f;
  }
  Expr c = Expr::cos(arg), s = Expr::sin(arg);
  switch (t.axis) {
    case ets::Axis::X:
      f.at(1, 1) = c; f.at(1, 2) = -s;
      f.at(2, 1) = s; f.at(2, 2) = c;
      break;
    case ets::Axis::Y:
      f.at(0, 0) = c; f.at(0, 2) = s;
      f.at(2, 0) = -s; f.at(2, 2) = c;
      break;
    default:
      f.at(0, 0) = c; f.at(0, 1) = -s;
      f.at(1, 0) = s; f.at(1, 1) = c;
      break;
  }
  return f;
}

inline SymPose sym_mul(const SymPose& a, const SymPose& b) {
  SymPose out;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) {
      sym::Expr acc = sym::Expr::integer(0);
      for (int k = 0; k < 4; ++k) acc = acc + a.at(r, k) * b.at(k, c);
      out.at(r, c) = acc;
    }
  return out;
}

inline Vec3 axis_unit(ets::Axis a) {
  switch (a) {
    case ets::Axis::X: return Vec3::UnitX();
    case ets::Axis::Y: return Vec3::UnitY();
    default: return Vec3::UnitZ();
  }
}

inline void check_config(const ets::ETS& e, const std::vector<double>& q) {
  if (static_cast<int>(q.size()) != e.joint_count)
    throw std::invalid_argument("expected " + std::to_string(e.joint_count) +
                                " joint values, got " + std::to_string(q.size()));
}

}  // namespace detail

inline Pose et_matrix(const ets::ET& t, double joint_value,
                      const std::map<std::string, double>& constants = {}) {
  double v;
  if (t.is_joint())
    v = t.joint().flipped ? -joint_value : joint_value;
  else
    v = t.constant().eval(constants);
  Pose out = Pose::Identity();
  if (t.rotation) {
    switch (t.axis) {
      case ets::Axis::X: out.topLeftCorner<3, 3>() = rot_x(v); break;
      case ets::Axis::Y: out.topLeftCorner<3, 3>() = rot_y(v); break;
      default: out.topLeftCorner<3, 3>() = rot_z(v); break;
    }
  } else {
    out.block<3, 1>(0, 3) = detail::axis_unit(t.axis) * v;
  }
  return out;
}

inline SymPose et_matrix_symbolic(const ets::ET& t, const sym::Expr& joint_value) {
  sym::Expr arg = t.is_joint() ? (t.joint().flipped ? -joint_value : joint_value)
                               : t.constant();
  return detail::sym_factor(t, arg);
}

inline SymPose fk_symbolic(const ets::ETS& e) {
  auto names = joint_symbol_names(e);
  SymPose prod;
  for (const ets::ET& t : e.transforms) {
    sym::Expr arg;
    if (t.is_joint())
      arg = sym::Expr::symbol(names[static_cast<std::size_t>(t.joint().index)]);
    prod = detail::sym_mul(prod, et_matrix_symbolic(t, arg));
  }
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) prod.at(r, c) = sym::simplify(prod.at(r, c));
  return prod;
}

inline Pose fk_numeric(const ets::ETS& e, const std::vector<double>& q,
                       const std::map<std::string, double>& constants = {}) {
  detail::check_config(e, q);
  Pose prod = Pose::Identity();
  for (const ets::ET& t : e.transforms) {
    double jv = t.is_joint() ? q[static_cast<std::size_t>(t.joint().index)] : 0.0;
    prod = prod * et_matrix(t, jv, constants);
  }
  return prod;
}

inline SymVec3 ee_velocity_symbolic(const ets::ETS& e) {
  SymPose fk = fk_symbolic(e);
  return {sym::simplify(fk.at(0, 3).diff_time()), sym::simplify(fk.at(1, 3).diff_time()),
          sym::simplify(fk.at(2, 3).diff_time())};
}

inline SymVec3 ee_acceleration_symbolic(const ets::ETS& e) {
  SymPose fk = fk_symbolic(e);
  return {sym::simplify(fk.at(0, 3).diff_time().diff_time()),
          sym::simplify(fk.at(1, 3).diff_time().diff_time()),
          sym::simplify(fk.at(2, 3).diff_time().diff_time())};
}

inline Jacobian jacobian(const ets::ETS& e, const std::vector<double>& q,
                         const std::map<std::string, double>& constants = {},
                         Frame frame = Frame::World) {
  detail::check_config(e, q);
  int n = e.joint_count;
  std::vector<Vec3> axes(static_cast<std::size_t>(n)), origins(static_cast<std::size_t>(n));
  std::vector<bool> pris = e.prismatic();

  Pose T = Pose::Identity();
  for (const ets::ET& t : e.transforms) {
    if (t.is_joint()) {
      const ets::JointRef& j = t.joint();
      Vec3 a = T.topLeftCorner<3, 3>() * detail::axis_unit(t.axis);
      if (j.flipped) a = -a;
      axes[static_cast<std::size_t>(j.index)] = a;
      origins[static_cast<std::size_t>(j.index)] = T.block<3, 1>(0, 3);
    }
    double jv = t.is_joint() ? q[static_cast<std::size_t>(t.joint().index)] : 0.0;
    T = T * et_matrix(t, jv, constants);
  }

  Vec3 pe = T.block<3, 1>(0, 3);
  Jacobian out;
  out.frame = frame;
  out.matrix.resize(6, n);
  for (int j = 0; j < n; ++j) {
    const Vec3& a = axes[static_cast<std::size_t>(j)];
    if (pris[static_cast<std::size_t>(j)]) {
      out.matrix.block<3, 1>(0, j) = a;
      out.matrix.block<3, 1>(3, j).setZero();
    } else {
      out.matrix.block<3, 1>(0, j) = a.cross(pe - origins[static_cast<std::size_t>(j)]);
      out.matrix.block<3, 1>(3, j) = a;
    }
  }
  if (frame == Frame::EndEffector) {
    Mat3 Rt = T.topLeftCorner<3, 3>().transpose();
    out.matrix.topRows<3>() = Rt * out.matrix.topRows<3>();
    out.matrix.bottomRows<3>() = Rt * out.matrix.bottomRows<3>();
  }
  return out;
}

// Symbolic counterpart of the world-frame geometric Jacobian.
inline SymJacobian jacobian_symbolic(const ets::ETS& e) {
  using sym::Expr;
  auto names = joint_symbol_names(e);
  int n = e.joint_count;
  std::vector<bool> pris = e.prismatic();

  struct Col3 {
    Expr v[3];
  };
  std::vector<Col3> axes(static_cast<std::size_t>(n)), origins(static_cast<std::size_t>(n));

  SymPose T;
  for (const ets::ET& t : e.transforms) {
    if (t.is_joint()) {
      const ets::JointRef& j = t.joint();
      int axis_col = t.axis == ets::Axis::X ? 0 : t.axis == ets::Axis::Y ? 1 : 2;
      Col3 a, p;
      for (int r = 0; r < 3; ++r) {
        a.v[r] = j.flipped ? -T.at(r, axis_col) : T.at(r, axis_col);
        p.v[r] = T.at(r, 3);
      }
      axes[static_cast<std::size_t>(j.index)] = a;
      origins[static_cast<std::size_t>(j.index)] = p;
    }
    sym::Expr arg;
    if (t.is_joint())
      arg = Expr::symbol(names[static_cast<std::size_t>(t.joint().index)]);
    T = detail::sym_mul(T, et_matrix_symbolic(t, arg));
  }

  SymJacobian out;
  out.cols = n;
  for (auto& row : out.rows) row.resize(static_cast<std::size_t>(n), Expr::integer(0));
  for (int j = 0; j < n; ++j) {
    const Col3& a = axes[static_cast<std::size_t>(j)];
    if (pris[static_cast<std::size_t>(j)]) {
      for (int r = 0; r < 3; ++r) out.rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)] = a.v[r];
    } else {
      Expr d[3];
      for (int r = 0; r < 3; ++r) d[r] = T.at(r, 3) - origins[static_cast<std::size_t>(j)].v[r];
      out.rows[0][static_cast<std::size_t>(j)] = a.v[1] * d[2] - a.v[2] * d[1];
      out.rows[1][static_cast<std::size_t>(j)] = a.v[2] * d[0] - a.v[0] * d[2];
      out.rows[2][static_cast<std::size_t>(j)] = a.v[0] * d[1] - a.v[1] * d[0];
      for (int r = 0; r < 3; ++r) out.rows[static_cast<std::size_t>(r + 3)][static_cast<std::size_t>(j)] = a.v[r];
    }
  }
  for (auto& row : out.rows)
    for (auto& entry : row) entry = sym::simplify(entry);
  return out;
}

}  // namespace armkit::kin
