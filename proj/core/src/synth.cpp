#include "unbend/synth.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/toms748_solve.hpp>
#include <cmath>
#include <numbers>

#include "unbend/deform.hpp"
#include "unbend/error.hpp"

namespace unbend {

namespace {

double effective_length(const CylinderSpec& spec) {
  if (spec.length > 0.0) return spec.length;
  return spec.dims[2] * spec.spacing.z() - 2.0 * (spec.radius + spec.margin * spec.spacing.z());
}

float falloff(double radius, double rho, double voxel) {
  return static_cast<float>(std::clamp((radius - rho) / voxel + 0.5, 0.0, 1.0));
}

}  // namespace

SineAxis::SineAxis(const CylinderSpec& spec)
    : center_(0.5 * (spec.dims[0] - 1) * spec.spacing.x(), 0.5 * (spec.dims[1] - 1) * spec.spacing.y(),
              0.5 * (spec.dims[2] - 1) * spec.spacing.z()),
      length_(effective_length(spec)),
      amplitude_(spec.amplitude) {
  z0_ = center_.z() - 0.5 * length_;
  omega_ = length_ > 0.0 ? 2.0 * std::numbers::pi * spec.periods / length_ : 0.0;
}

Vec3 SineAxis::point(double s) const {
  return Vec3(center_.x() + amplitude_ * std::sin(omega_ * s), center_.y(), z0_ + s);
}

double SineAxis::slope(double s) const { return amplitude_ * omega_ * std::cos(omega_ * s); }

Vec3 SineAxis::tangent(double s) const { return Vec3(slope(s), 0.0, 1.0).normalized(); }

double SineAxis::arclength(double s) const {
  auto speed = [this](double x) { return std::hypot(1.0, slope(x)); };
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(speed, 0.0, s, 10, 1e-13);
}

double SineAxis::parameter_at_arclength(double a) const {
  if (a <= 0.0) return 0.0;
  const double total = arclength(length_);
  if (a >= total) return length_;
  boost::uintmax_t iterations = 100;
  const auto root = boost::math::tools::toms748_solve([&](double s) { return arclength(s) - a; }, 0.0, length_,
                                                      boost::math::tools::eps_tolerance<double>(50), iterations);
  return 0.5 * (root.first + root.second);
}

double SineAxis::closest_parameter(const Vec3& p) const {
  auto dist2 = [&](double s) { return (p - point(s)).squaredNorm(); };
  const double guess = std::clamp(p.z() - z0_, 0.0, length_);
  const double reach = std::sqrt(dist2(guess));
  const double lo = std::max(0.0, guess - reach);
  const double hi = std::min(length_, guess + reach);
  constexpr double kStep = 0.25;
  const int steps = std::max(1, static_cast<int>(std::ceil((hi - lo) / kStep)));
  double best_s = lo;
  double best = dist2(lo);
  for (int i = 1; i <= steps; ++i) {
    const double s = lo + (hi - lo) * i / steps;
    const double d = dist2(s);
    if (d < best) {
      best = d;
      best_s = s;
    }
  }
  const double h = (hi - lo) / steps;
  const auto refined = boost::math::tools::brent_find_minima(dist2, std::max(0.0, best_s - h),
                                                             std::min(length_, best_s + h), 40);
  return refined.second <= best ? refined.first : best_s;
}

void validate(const CylinderSpec& spec) {
  if (!(spec.radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "radius must be positive");
  if (!(spec.amplitude >= 0.0)) throw Error(ErrorCode::InvalidArgument, "amplitude must be nonnegative");
  if (!(spec.periods > 0.0)) throw Error(ErrorCode::InvalidArgument, "periods must be positive");
  if (spec.dims[0] < 1 || spec.dims[1] < 1 || spec.dims[2] < 1) throw Error(ErrorCode::InvalidArgument, "dims must be positive");
  if (!(spec.spacing.minCoeff() > 0.0)) throw Error(ErrorCode::InvalidArgument, "spacing must be positive");
  const SineAxis axis(spec);
  if (!(axis.length() > 0.0)) throw Error(ErrorCode::DoesNotFit, "no room for a cylinder of this radius");

  const Vec3 lo = spec.margin * spec.spacing;
  const Vec3 hi = Vec3((spec.dims[0] - 1) * spec.spacing.x(), (spec.dims[1] - 1) * spec.spacing.y(),
                       (spec.dims[2] - 1) * spec.spacing.z()) -
                  spec.margin * spec.spacing;
  const Vec3 mid = axis.point(0.0);
  const double zmin = mid.z();
  const double zmax = axis.point(axis.length()).z();
  // End caps are discs tilted by the axis slope.
  const double cap0 = spec.radius * std::abs(axis.tangent(0.0).x());
  const double cap1 = spec.radius * std::abs(axis.tangent(axis.length()).x());
  const bool fits = mid.x() - spec.amplitude - spec.radius >= lo.x() && mid.x() + spec.amplitude + spec.radius <= hi.x() &&
                    mid.y() - spec.radius >= lo.y() && mid.y() + spec.radius <= hi.y() && zmin - cap0 >= lo.z() &&
                    zmax + cap1 <= hi.z();
  if (!fits) throw Error(ErrorCode::DoesNotFit, "bent cylinder does not fit inside the grid margin");
}

DeformationRig sine_rig(const CylinderSpec& spec, int keyframes) {
  if (keyframes < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 keyframes");
  const SineAxis axis(spec);
  const double total = axis.arclength(axis.length());
  const double extent = spec.radius + kCageClearance * spec.spacing.x();
  std::vector<Keyframe> keys;
  keys.reserve(static_cast<std::size_t>(keyframes));
  for (int i = 0; i < keyframes; ++i) {
    const double s = i == keyframes - 1 ? axis.length() : axis.parameter_at_arclength(total * i / (keyframes - 1));
    const double m = axis.slope(s);
    const double norm = std::hypot(1.0, m);
    Frame f{Vec3(1.0, 0.0, -m) / norm, Vec3::UnitY(), Vec3(m, 0.0, 1.0) / norm};
    keys.push_back(Keyframe{axis.point(s), f, extent, extent});
  }
  return DeformationRig(std::move(keys));
}

ScalarVolume straight_cylinder(const CylinderSpec& spec, const DeformationRig& rig) {
  const GridGeometry g = straight_geometry(rig, default_spec(rig, spec.spacing));
  ScalarVolume out(g);
  for (int k = 0; k < g.dims[2]; ++k)
    for (int j = 0; j < g.dims[1]; ++j)
      for (int i = 0; i < g.dims[0]; ++i) {
        const Vec3 p = g.voxel_center(i, j, k);
        out.at(i, j, k) = falloff(spec.radius, std::hypot(p.x(), p.y()), spec.spacing.x());
      }
  return out;
}

SynthResult make_bent_cylinder(const CylinderSpec& spec) {
  validate(spec);
  DeformationRig rig = sine_rig(spec);
  ScalarVolume straight = straight_cylinder(spec, rig);
  GridGeometry target;
  target.dims = spec.dims;
  target.spacing = spec.spacing;
  ScalarVolume bent = bend(rig, straight, target);
  return SynthResult{std::move(bent), std::move(straight), std::move(rig)};
}

ScalarVolume analytic_bent_cylinder(const CylinderSpec& spec) {
  validate(spec);
  const SineAxis axis(spec);
  GridGeometry g;
  g.dims = spec.dims;
  g.spacing = spec.spacing;
  ScalarVolume out(g);
  const Vec3 head = axis.point(0.0), tail = axis.point(axis.length());
  const Vec3 head_n = axis.tangent(0.0), tail_n = axis.tangent(axis.length());
  const double reach = spec.radius + spec.spacing.x();
  const double cx = axis.point(0.0).x();
#pragma omp parallel for schedule(dynamic)
  for (int k = 0; k < g.dims[2]; ++k)
    for (int j = 0; j < g.dims[1]; ++j)
      for (int i = 0; i < g.dims[0]; ++i) {
        const Vec3 p = g.voxel_center(i, j, k);
        if (std::abs(p.y() - head.y()) > reach || std::abs(p.x() - cx) > spec.amplitude + reach) continue;
        if ((p - head).dot(head_n) < 0.0 || (p - tail).dot(tail_n) > 0.0) continue;
        const double s = axis.closest_parameter(p);
        out.at(i, j, k) = falloff(spec.radius, (p - axis.point(s)).norm(), spec.spacing.x());
      }
  return out;
}

double normalized_l2(const ScalarVolume& a, const ScalarVolume& b) {
  if (a.dims() != b.dims()) throw Error(ErrorCode::DimsMismatch, "normalized_l2 needs equal dims");
  double sum = 0.0;
  const auto da = a.data(), db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double d = static_cast<double>(da[i]) - static_cast<double>(db[i]);
    sum += d * d;
  }
  return std::sqrt(sum) / (b.dims()[2] * b.spacing().z());
}

double occupied_correlation(const ScalarVolume& a, const ScalarVolume& b) {
  if (a.dims() != b.dims()) throw Error(ErrorCode::DimsMismatch, "correlation needs equal dims");
  const auto da = a.data(), db = b.data();
  double n = 0, sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (std::size_t i = 0; i < da.size(); ++i) {
    if (da[i] == 0.0f && db[i] == 0.0f) continue;
    const double x = da[i], y = db[i];
    n += 1;
    sa += x;
    sb += y;
    saa += x * x;
    sbb += y * y;
    sab += x * y;
  }
  if (n < 2) throw Error(ErrorCode::EmptyInput, "no occupied voxels to correlate");
  const double cov = sab - sa * sb / n;
  const double va = saa - sa * sa / n;
  const double vb = sbb - sb * sb / n;
  if (!(va > 0.0) || !(vb > 0.0)) return va == vb ? 1.0 : 0.0;
  return cov / std::sqrt(va * vb);
}

}  // namespace unbend
