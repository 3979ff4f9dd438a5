#pragma once

// Small SE(3) helpers shared by the kinematics, IK, and motion layers:
// elementary rotations, the SO(3) log/exp pair (robust at the pi branch),
// and polar orthonormalization for matrices printed at low precision.

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace armkit {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;

inline Mat3 rot_x(double a) {
  Mat3 m;
  double c = std::cos(a), s = std::sin(a);
  m << 1, 0, 0, 0, c, -s, 0, s, c;
  return m;
}

inline Mat3 rot_y(double a) {
  Mat3 m;
  double c = std::cos(a), s = std::sin(a);
  m << c, 0, s, 0, 1, 0, -s, 0, c;
  return m;
}

inline Mat3 rot_z(double a) {
  Mat3 m;
  double c = std::cos(a), s = std::sin(a);
  m << c, -s, 0, s, c, 0, 0, 0, 1;
  return m;
}

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

inline Vec3 vee(const Mat3& m) { return Vec3(m(2, 1), m(0, 2), m(1, 0)); }

// Axis-angle vector of a rotation matrix.  Handles the theta -> 0 and
// theta -> pi branches explicitly; the generic formula divides by sin(theta).
inline Vec3 rot_log(const Mat3& R) {
  double c = (R.trace() - 1.0) / 2.0;
  c = std::min(1.0, std::max(-1.0, c));
  double theta = std::acos(c);
  if (theta < 1e-12) return vee(R - R.transpose()) / 2.0;
  if (M_PI - theta < 1e-6) {
    // near pi the off-diagonal difference vanishes; recover the axis from
    // the dominant diagonal entry of (R + I)
    int k = 0;
    for (int i = 1; i < 3; ++i)
      if (R(i, i) > R(k, k)) k = i;
    Vec3 w;
    w(k) = std::sqrt(std::max(0.0, (R(k, k) + 1.0) / 2.0));
    for (int i = 0; i < 3; ++i)
      if (i != k) w(i) = (R(i, k) + R(k, i)) / (4.0 * w(k));
    w.normalize();
    // pick the sign consistent with the skew part when it is not exactly zero
    Vec3 v = vee(R - R.transpose());
    if (v.norm() > 1e-12 && v.dot(w) < 0) w = -w;
    return theta * w;
  }
  return theta / (2.0 * std::sin(theta)) * vee(R - R.transpose());
}

// Rodrigues' formula.
inline Mat3 rot_exp(const Vec3& w) {
  double theta = w.norm();
  if (theta < 1e-12) return Mat3::Identity() + skew(w);
  Vec3 a = w / theta;
  Mat3 K = skew(a);
  return Mat3::Identity() + std::sin(theta) * K + (1.0 - std::cos(theta)) * K * K;
}

// Nearest rotation in the Frobenius sense: U V^T from the SVD, with the
// determinant sign corrected.  Used for targets printed at 2 decimals.
inline Mat3 polar_orthonormalize(const Mat3& M) {
  Eigen::JacobiSVD<Mat3> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 R = svd.matrixU() * svd.matrixV().transpose();
  if (R.determinant() < 0) {
    Mat3 D = Mat3::Identity();
    D(2, 2) = -1;
    R = svd.matrixU() * D * svd.matrixV().transpose();
  }
  return R;
}

inline bool pose_valid(const Mat4& T, double tol = 1e-9) {
  if (T(3, 0) != 0 || T(3, 1) != 0 || T(3, 2) != 0 || T(3, 3) != 1) return false;
  Mat3 R = T.block<3, 3>(0, 0);
  if (((R.transpose() * R) - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  double d = R.determinant();
  return d >= 1.0 - tol && d <= 1.0 + tol;
}

inline Mat4 orthonormalize_pose(const Mat4& T) {
  Mat4 out = Mat4::Identity();
  out.block<3, 3>(0, 0) = polar_orthonormalize(T.block<3, 3>(0, 0));
  out.block<3, 1>(0, 3) = T.block<3, 1>(0, 3);
  return out;
}

}  // namespace armkit
