#pragma once

#include <vector>

#include "unbend/rig.hpp"
#include "unbend/volume.hpp"

namespace unbend {

/// Output grid of a straightened volume. Depth voxels span the rig's full
/// arclength, so the effective z spacing is length / out_dims[2].
struct StraightVolumeSpec {
  Dims out_dims{1, 1, 1};
  Vec3 out_spacing = Vec3::Ones();
};

/// Spacing = `spacing`; width and height cover ±max extent; depth is
/// round(length / spacing_z).
[[nodiscard]] StraightVolumeSpec default_spec(const DeformationRig& rig, const Vec3& spacing);

/// Same spec with every axis coarsened by a common factor so that the voxel
/// count fits `voxel_budget`.
[[nodiscard]] StraightVolumeSpec budgeted_spec(const StraightVolumeSpec& spec, std::size_t voxel_budget);

/// Rig-local placement of the straight grid: voxel centres sit at
/// x = (i − (nx−1)/2)·sx, y = (j − (ny−1)/2)·sy, z = (k + ½)·length/nz.
[[nodiscard]] GridGeometry straight_geometry(const DeformationRig& rig, const StraightVolumeSpec& spec);

/// f(x, y, z) = c(z) + x·u(z) + y·v(z).
[[nodiscard]] Vec3 eval_deformation(const DeformationRig& rig, double x, double y, double z);

/// Samples `vol` through the warp. Samples outside the interpolated cage or
/// outside the volume are 0. The result carries straight_geometry.
[[nodiscard]] ScalarVolume straighten(const DeformationRig& rig, const ScalarVolume& vol, const StraightVolumeSpec& spec);

/// Row-major 2D float image, pixel (i, j) at pixels[j·width + i].
struct Image2D {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;

  [[nodiscard]] float at(int i, int j) const { return pixels[static_cast<std::size_t>(j) * width + i]; }
  [[nodiscard]] float& at(int i, int j) { return pixels[static_cast<std::size_t>(j) * width + i]; }
};

/// The plane ⟂ n(t) over the extent rectangle. Pixel (i, j) samples
/// c(t) + x(i)·u(t) + y(j)·v(t) with x(i) = (i − (w−1)/2)·2rx/w.
[[nodiscard]] Image2D cross_section(const DeformationRig& rig, const ScalarVolume& vol, double t, int width, int height);

/// Inverse of straighten. `straight` is read in rig-local coordinates (its
/// own origin is ignored). Each world voxel is located on the cross-section
/// whose plane contains it and whose cage holds it; if several do, the one
/// nearest the curve wins. Samples with cubic_sample_clamped. Unmapped
/// voxels are 0.
[[nodiscard]] ScalarVolume bend(const DeformationRig& rig, const ScalarVolume& straight, const GridGeometry& target);

/// Axis-aligned grid covering the rig's cage with a one-voxel margin.
[[nodiscard]] GridGeometry default_bend_geometry(const DeformationRig& rig, const Vec3& spacing);

/// Rig-local coordinates of `p`, if any cross-section's cage holds it.
[[nodiscard]] std::optional<LocalCoordinates> locate(const DeformationRig& rig, const Vec3& p, double cage_tolerance = 0.0);

/// Maximum intensity projection along `axis` (0, 1, 2). The image axes are
/// the remaining volume axes in increasing order.
[[nodiscard]] Image2D max_intensity_projection(const ScalarVolume& vol, int axis);

}  // namespace unbend
