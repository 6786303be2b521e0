#pragma once

#include "unbend/rig.hpp"
#include "unbend/volume.hpp"

namespace unbend {

/// A cylinder whose axis follows x = A·sin(2π·periods·s/length) in the xz
/// plane, centred in a `dims` grid with origin 0. Lengths are world units.
struct CylinderSpec {
  double radius = 8.0;
  /// Axial extent along z. 0 picks dims_z·spacing_z − 2·(radius + margin).
  double length = 0.0;
  double amplitude = 20.0;
  double periods = 1.5;
  Dims dims{128, 128, 128};
  Vec3 spacing = Vec3::Ones();
  /// Minimum clearance, in voxels, between the bent shape and the grid border.
  double margin = 2.0;
};

/// Cage half width of the ground-truth rig beyond the cylinder radius.
inline constexpr double kCageClearance = 4.0;
/// Keyframes in the ground-truth rig.
inline constexpr int kTrueRigKeyframes = 64;

/// The sinusoidal axis and its unit-speed geometry.
class SineAxis {
 public:
  explicit SineAxis(const CylinderSpec& spec);

  [[nodiscard]] double length() const { return length_; }
  /// Axis point at axial parameter s ∈ [0, length].
  [[nodiscard]] Vec3 point(double s) const;
  /// dx/ds.
  [[nodiscard]] double slope(double s) const;
  [[nodiscard]] Vec3 tangent(double s) const;
  /// Arclength from s = 0.
  [[nodiscard]] double arclength(double s) const;
  /// Axial parameter at which the arclength reaches `a`.
  [[nodiscard]] double parameter_at_arclength(double a) const;
  /// Closest axis parameter to p, searched over [0, length].
  [[nodiscard]] double closest_parameter(const Vec3& p) const;

 private:
  Vec3 center_;
  double z0_ = 0.0;
  double length_ = 0.0;
  double amplitude_ = 0.0;
  double omega_ = 0.0;
};

struct SynthResult {
  ScalarVolume bent;
  ScalarVolume straight;
  DeformationRig true_rig;
};

/// Throws DoesNotFit when the bent shape leaves the margin and
/// InvalidArgument for nonpositive sizes.
void validate(const CylinderSpec& spec);

/// Ground-truth rig: keyframes at equal arclength on the axis, frames from
/// the analytic tangent with v = +y, extents radius + kCageClearance.
[[nodiscard]] DeformationRig sine_rig(const CylinderSpec& spec, int keyframes = kTrueRigKeyframes);

/// Axis-aligned cylinder in the straight grid of `rig`, value
/// clamp((radius − ρ)/spacing + ½, 0, 1).
[[nodiscard]] ScalarVolume straight_cylinder(const CylinderSpec& spec, const DeformationRig& rig);

/// bent = bend(true_rig, straight) on the spec grid.
[[nodiscard]] SynthResult make_bent_cylinder(const CylinderSpec& spec);

/// Closed-form voxelization of the bent tube: the same falloff applied to the
/// distance from each voxel to the axis, cut flat at the end planes.
[[nodiscard]] ScalarVolume analytic_bent_cylinder(const CylinderSpec& spec);

/// ‖a − b‖₂ / (b's axial length in world units). `b` is the ground truth.
[[nodiscard]] double normalized_l2(const ScalarVolume& a, const ScalarVolume& b);

/// Pearson correlation of a and b over voxels where either is nonzero.
[[nodiscard]] double occupied_correlation(const ScalarVolume& a, const ScalarVolume& b);

}  // namespace unbend
