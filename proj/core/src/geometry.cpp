#include "unbend/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace unbend {

Mat3 Frame::as_rows() const {
  Mat3 m;
  m.row(0) = u.transpose();
  m.row(1) = v.transpose();
  m.row(2) = n.transpose();
  return m;
}

Frame Frame::from_rows(const Mat3& rows) {
  return Frame{rows.row(0).transpose(), rows.row(1).transpose(), rows.row(2).transpose()};
}

double Frame::orthonormality_error() const {
  const Mat3 r = as_rows();
  return (r * r.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff();
}

double Frame::determinant() const { return as_rows().determinant(); }

Frame orthonormalize(const Frame& f) {
  Frame out;
  out.n = f.n.normalized();
  out.u = (f.u - f.u.dot(out.n) * out.n).normalized();
  out.v = out.n.cross(out.u);
  return out;
}

Vec3 rotate_about(const Vec3& p, const Vec3& axis, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return p * c + axis.cross(p) * s + axis * (axis.dot(p) * (1.0 - c));
}

double angle_between(const Vec3& a, const Vec3& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

double signed_angle(const Vec3& a, const Vec3& b, const Vec3& axis) {
  return std::atan2(axis.dot(a.cross(b)), a.dot(b));
}

}  // namespace unbend
