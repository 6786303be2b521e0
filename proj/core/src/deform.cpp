#include "unbend/deform.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "unbend/error.hpp"

namespace unbend {

namespace {

constexpr double kCageSlack = 1e-9;

struct SliceFrame {
  Vec3 center;
  Frame frame;
  double rx;
  double ry;
};

SliceFrame slice_at(const DeformationRig& rig, double t) {
  const auto [k, lambda] = segment_lookup(rig, t);
  const auto& s = rig.segment(k);
  return {eval_curve(rig, t), s.frame(lambda), s.rx(lambda), s.ry(lambda)};
}

}  // namespace

StraightVolumeSpec default_spec(const DeformationRig& rig, const Vec3& spacing) {
  if (!(spacing.minCoeff() > 0.0)) throw Error(ErrorCode::InvalidArgument, "output spacing must be positive");
  StraightVolumeSpec spec;
  spec.out_spacing = spacing;
  spec.out_dims = {std::max(1, static_cast<int>(std::lround(2.0 * rig.max_rx() / spacing.x()))),
                   std::max(1, static_cast<int>(std::lround(2.0 * rig.max_ry() / spacing.y()))),
                   std::max(1, static_cast<int>(std::lround(rig.length() / spacing.z())))};
  return spec;
}

StraightVolumeSpec budgeted_spec(const StraightVolumeSpec& spec, std::size_t voxel_budget) {
  const std::size_t count = voxel_count(spec.out_dims);
  if (count <= voxel_budget) return spec;
  const double f = std::cbrt(static_cast<double>(count) / static_cast<double>(voxel_budget));
  StraightVolumeSpec out = spec;
  for (int a = 0; a < 3; ++a) {
    out.out_dims[a] = std::max(1, static_cast<int>(std::floor(spec.out_dims[a] / f)));
    out.out_spacing[a] = spec.out_spacing[a] * spec.out_dims[a] / out.out_dims[a];
  }
  return out;
}

GridGeometry straight_geometry(const DeformationRig& rig, const StraightVolumeSpec& spec) {
  const auto& d = spec.out_dims;
  if (d[0] < 1 || d[1] < 1 || d[2] < 1) throw Error(ErrorCode::InvalidArgument, "output dims must be positive");
  if (!(spec.out_spacing.minCoeff() > 0.0)) throw Error(ErrorCode::InvalidArgument, "output spacing must be positive");
  GridGeometry g;
  g.dims = d;
  const double sz = rig.length() / d[2];
  g.spacing = Vec3(spec.out_spacing.x(), spec.out_spacing.y(), sz);
  g.origin = Vec3(-0.5 * (d[0] - 1) * g.spacing.x(), -0.5 * (d[1] - 1) * g.spacing.y(), 0.5 * sz);
  return g;
}

Vec3 eval_deformation(const DeformationRig& rig, double x, double y, double z) {
  const auto [k, lambda] = segment_lookup(rig, z);
  const Frame f = rig.segment(k).frame(lambda);
  return eval_curve(rig, z) + x * f.u + y * f.v;
}

ScalarVolume straighten(const DeformationRig& rig, const ScalarVolume& vol, const StraightVolumeSpec& spec) {
  const GridGeometry g = straight_geometry(rig, spec);
  ScalarVolume out(g);
  const int nz = g.dims[2];
#pragma omp parallel for schedule(dynamic)
  for (int k = 0; k < nz; ++k) {
    const SliceFrame s = slice_at(rig, g.origin.z() + k * g.spacing.z());
    for (int j = 0; j < g.dims[1]; ++j) {
      const double y = g.origin.y() + j * g.spacing.y();
      if (std::abs(y) > s.ry + kCageSlack) continue;
      for (int i = 0; i < g.dims[0]; ++i) {
        const double x = g.origin.x() + i * g.spacing.x();
        if (std::abs(x) > s.rx + kCageSlack) continue;
        out.at(i, j, k) = static_cast<float>(trilinear_sample(vol, s.center + x * s.frame.u + y * s.frame.v));
      }
    }
  }
  return out;
}

Image2D cross_section(const DeformationRig& rig, const ScalarVolume& vol, double t, int width, int height) {
  if (width < 1 || height < 1) throw Error(ErrorCode::InvalidArgument, "image size must be positive");
  const SliceFrame s = slice_at(rig, t);
  Image2D img{width, height, std::vector<float>(static_cast<std::size_t>(width) * height, 0.0f)};
  const double px = 2.0 * s.rx / width;
  const double py = 2.0 * s.ry / height;
  for (int j = 0; j < height; ++j) {
    const double y = (j - 0.5 * (height - 1)) * py;
    for (int i = 0; i < width; ++i) {
      const double x = (i - 0.5 * (width - 1)) * px;
      img.at(i, j) = static_cast<float>(trilinear_sample(vol, s.center + x * s.frame.u + y * s.frame.v));
    }
  }
  return img;
}

std::optional<LocalCoordinates> locate(const DeformationRig& rig, const Vec3& p, double cage_tolerance) {
  std::optional<LocalCoordinates> best;
  double best_dist = std::numeric_limits<double>::infinity();
  for (const auto& seg : rig.segments()) {
    if ((p - seg.bound_center()).norm() > seg.bound_radius() + cage_tolerance) continue;
    const auto hit = seg.locate(p, cage_tolerance);
    if (!hit) continue;
    const double dist = std::hypot(hit->x, hit->y);
    if (dist < best_dist) {
      best_dist = dist;
      best = hit;
    }
  }
  return best;
}

ScalarVolume bend(const DeformationRig& rig, const ScalarVolume& straight, const GridGeometry& target) {
  GridGeometry local = straight.geometry();
  const auto& d = local.dims;
  local.spacing.z() = rig.length() / d[2];
  local.origin = Vec3(-0.5 * (d[0] - 1) * local.spacing.x(), -0.5 * (d[1] - 1) * local.spacing.y(), 0.5 * local.spacing.z());
  const ScalarVolume source(local, std::vector<float>(straight.data().begin(), straight.data().end()));

  ScalarVolume out(target);
  const int nz = target.dims[2];
#pragma omp parallel for schedule(dynamic)
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < target.dims[1]; ++j)
      for (int i = 0; i < target.dims[0]; ++i) {
        const auto hit = locate(rig, target.voxel_center(i, j, k));
        if (hit) out.at(i, j, k) = static_cast<float>(cubic_sample_clamped(source, Vec3(hit->x, hit->y, hit->t)));
      }
  return out;
}

GridGeometry default_bend_geometry(const DeformationRig& rig, const Vec3& spacing) {
  if (!(spacing.minCoeff() > 0.0)) throw Error(ErrorCode::InvalidArgument, "spacing must be positive");
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  constexpr int kSamplesPerSegment = 8;
  for (const auto& seg : rig.segments()) {
    for (int s = 0; s <= kSamplesPerSegment; ++s) {
      const double lambda = static_cast<double>(s) / kSamplesPerSegment;
      const Frame f = seg.frame(lambda);
      for (int cx = -1; cx <= 1; cx += 2)
        for (int cy = -1; cy <= 1; cy += 2) {
          const Vec3 p = seg.point(lambda) + cx * seg.rx(lambda) * f.u + cy * seg.ry(lambda) * f.v;
          lo = lo.cwiseMin(p);
          hi = hi.cwiseMax(p);
        }
    }
  }
  GridGeometry g;
  g.spacing = spacing;
  g.origin = lo - spacing;
  for (int a = 0; a < 3; ++a) g.dims[a] = static_cast<int>(std::ceil((hi[a] - lo[a]) / spacing[a])) + 3;
  return g;
}

Image2D max_intensity_projection(const ScalarVolume& vol, int axis) {
  if (axis < 0 || axis > 2) throw Error(ErrorCode::InvalidArgument, "projection axis must be 0, 1 or 2");
  const auto& d = vol.dims();
  const int a0 = axis == 0 ? 1 : 0;
  const int a1 = axis == 2 ? 1 : 2;
  Image2D img{d[a0], d[a1], std::vector<float>(static_cast<std::size_t>(d[a0]) * d[a1], 0.0f)};
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i) {
        const int idx[3] = {i, j, k};
        float& px = img.at(idx[a0], idx[a1]);
        px = std::max(px, vol.at(i, j, k));
      }
  return img;
}

}  // namespace unbend
