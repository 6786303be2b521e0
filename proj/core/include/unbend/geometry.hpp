#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace unbend {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Orthonormal cross-section frame. `n` runs along the specimen axis, `u` and
/// `v` span the cross-section plane (right and up).
struct Frame {
  Vec3 u = Vec3::UnitX();
  Vec3 v = Vec3::UnitY();
  Vec3 n = Vec3::UnitZ();

  /// Rows are u, v, n.
  [[nodiscard]] Mat3 as_rows() const;
  [[nodiscard]] static Frame from_rows(const Mat3& rows);

  /// max |RᵀR − I| entry.
  [[nodiscard]] double orthonormality_error() const;
  [[nodiscard]] double determinant() const;

  [[nodiscard]] bool is_rotation(double tol = 1e-6) const {
    return orthonormality_error() <= tol && determinant() > 0.0;
  }
};

/// Gram-Schmidt in the order n, u, v; v is rebuilt as n × u so the result is
/// right-handed.
[[nodiscard]] Frame orthonormalize(const Frame& f);

/// Rotation by `angle` (radians, right-handed) about the unit vector `axis`.
[[nodiscard]] Vec3 rotate_about(const Vec3& p, const Vec3& axis, double angle);

/// Angle in [0, π] between two unit vectors, robust near 0 and π.
[[nodiscard]] double angle_between(const Vec3& a, const Vec3& b);

/// Signed angle of `b` relative to `a` about `axis` (all unit, a,b ⟂ axis).
[[nodiscard]] double signed_angle(const Vec3& a, const Vec3& b, const Vec3& axis);

}  // namespace unbend
