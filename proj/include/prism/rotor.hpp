#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "prism/errors.hpp"

namespace prism {

template <typename Scalar> using vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar> using mat3 = Eigen::Matrix<Scalar, 3, 3>;

using vec3d = vec3<double>;
using mat3d = mat3<double>;

// skew(n) is the cross-product matrix: skew(n) * v == n.cross(v).
template <typename S>
mat3<S> skew(const vec3<S>& n) {
  mat3<S> k;
  k << S(0), -n.z(), n.y(),
       n.z(), S(0), -n.x(),
      -n.y(), n.x(), S(0);
  return k;
}

template <typename S>
bool is_rotation(const mat3<S>& r, S tol = S(1e-9)) {
  const mat3<S> residue = r.transpose() * r - mat3<S>::Identity();
  return residue.cwiseAbs().maxCoeff() <= tol && r.determinant() > S(0);
}

template <typename S>
void require_unit(const vec3<S>& v, const char* what, S tol = S(1e-9)) {
  if (!(std::abs(v.norm() - S(1)) <= tol))
    throw contract_error(std::string(what) + ": vector must have unit length");
}

// Right-handed rotation by `angle` about the unit vector `axis`:
//   R = I + sin(angle)·K + (1 − cos(angle))·K²,  K = skew(axis).
template <typename S>
mat3<S> rodrigues(const vec3<S>& axis, S angle) {
  if (!std::isfinite(angle)) throw contract_error("rodrigues: non-finite angle");
  require_unit(axis, "rodrigues");
  const mat3<S> k = skew(axis);
  return mat3<S>::Identity() + std::sin(angle) * k + (S(1) - std::cos(angle)) * (k * k);
}

// Rotation-vector form: angle = |w|, axis = w/|w|. The sin(θ)/θ and
// (1−cos θ)/θ² coefficients switch to series near zero so w → 0 gives the
// identity without dividing by a vanishing norm.
template <typename S>
mat3<S> rodrigues(const vec3<S>& w) {
  const S th = w.norm();
  if (!std::isfinite(th)) throw contract_error("rodrigues: non-finite rotation vector");
  const mat3<S> k = skew(w);
  S a, b;
  if (th < S(1e-4)) {
    const S th2 = th * th;
    a = S(1) - th2 / S(6);
    b = S(0.5) - th2 / S(24);
  } else {
    a = std::sin(th) / th;
    b = (S(1) - std::cos(th)) / (th * th);
  }
  return mat3<S>::Identity() + a * k + b * (k * k);
}

// compose(a, b): the rotation "b first, then a" — the plain product a·b.
template <typename S>
mat3<S> compose(const mat3<S>& a, const mat3<S>& b) {
  return a * b;
}

// Rotation angle in [0, π], recovered from the trace.
template <typename S>
S rotation_angle(const mat3<S>& r) {
  const S c = std::clamp((r.trace() - S(1)) / S(2), S(-1), S(1));
  return std::acos(c);
}

// Arc distance between unit vectors, in [0, π].
template <typename S>
S geodesic_distance(const vec3<S>& a, const vec3<S>& b) {
  require_unit(a, "geodesic_distance");
  require_unit(b, "geodesic_distance");
  // atan2 form: accurate near 0 and pi, where acos of the dot loses digits
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

// Nearest rotation matrix in the Frobenius sense (polar factor via SVD, with
// the determinant forced positive). Used to project accumulated rounding
// drift back onto SO(3).
template <typename S>
mat3<S> nearest_rotation(const mat3<S>& m) {
  Eigen::JacobiSVD<mat3<S>> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  mat3<S> u = svd.matrixU();
  if ((u * svd.matrixV().transpose()).determinant() < S(0)) u.col(2) *= S(-1);
  return u * svd.matrixV().transpose();
}

// Unit +1-eigenvector (rotation axis) of r.
//
// For angles up to π/2 the axis comes from the skew part of R, which equals
// 2 sin(θ)·[n]ₓ. Closer to π that part loses precision (sin θ → 0), so switch
// to the symmetric part: (R + Rᵀ)/2 − cos(θ)·I equals (1 − cos θ)·n nᵀ
// exactly, and its best-conditioned column — the one under the largest
// diagonal entry — is a clean multiple of n at any angle away from zero.
//
// Sign convention: the rotation measured right-handed about the returned axis
// lies in (0, π]. At θ = π both signs qualify; ties break toward a positive
// largest-magnitude component so the result stays deterministic.
template <typename S>
vec3<S> invariant_axis(const mat3<S>& r, S identity_tol = S(1e-9)) {
  const S angle = rotation_angle(r);
  if (angle <= identity_tol)
    throw contract_error("invariant_axis: axis undefined for the identity rotation");

  const vec3<S> twice_sin_axis(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  if (angle <= S(M_PI / 2)) return twice_sin_axis.normalized();

  const S c = std::cos(angle);
  const mat3<S> outer = (r + r.transpose()) / S(2) - c * mat3<S>::Identity();
  int col = 0;
  outer.diagonal().maxCoeff(&col);
  vec3<S> n = outer.col(col);
  const S nn = n.norm();
  if (!(nn > S(0))) throw engine_error("invariant_axis: defective rotation matrix");
  n /= nn;

  const S sense = n.dot(twice_sin_axis);
  if (sense < S(0)) {
    n = -n;
  } else if (sense == S(0)) {
    int imax = 0;
    n.cwiseAbs().maxCoeff(&imax);
    if (n[imax] < S(0)) n = -n;
  }
  return n;
}

// Accumulates a long left-multiplied product of rotations, re-projecting onto
// SO(3) every `period` factors so orthogonality drift stays bounded.
template <typename S>
class rotation_accumulator {
 public:
  explicit rotation_accumulator(std::size_t period = 10000)
      : acc_(mat3<S>::Identity()), period_(period) {}

  // acc ← step · acc  (the new step acts after everything accumulated so far)
  void push(const mat3<S>& step) {
    acc_ = step * acc_;
    if (++count_ % period_ == 0) acc_ = nearest_rotation(acc_);
  }

  const mat3<S>& matrix() const { return acc_; }
  std::size_t count() const { return count_; }

  void reset(const mat3<S>& to = mat3<S>::Identity()) {
    acc_ = to;
    count_ = 0;
  }

 private:
  mat3<S> acc_;
  std::size_t count_ = 0;
  std::size_t period_;
};

}  // namespace prism
