#pragma once

#include <nlohmann/json.hpp>
#include <optional>
#include <vector>

#include "unbend/deform.hpp"
#include "unbend/rig.hpp"
#include "unbend/skeleton.hpp"
#include "unbend/volume.hpp"

namespace unbend {

/// Clicked extrema in world coordinates, head then tail for each connected
/// component, components in specimen order.
struct EndpointSelection {
  std::vector<Vec3> points;
};

[[nodiscard]] nlohmann::json endpoints_to_json(const EndpointSelection& e);
/// {"points": [[x,y,z], ...]} with an even number ≥ 2 of points.
[[nodiscard]] EndpointSelection endpoints_from_json(const nlohmann::json& j);

struct PipelineOptions {
  double tau = 0.5;
  SkeletonOptions skeleton;
  /// Prism half width for keyframe reduction, in voxel widths.
  double prism_radius = 10.0;
  /// Replaces every keyframe extent after reduction (world units).
  std::optional<double> extent;
};

/// Threshold → per-component (or dilated) harmonic skeletons → merged curve.
/// With two points the mask is dilated until connected; with more, each
/// head/tail pair is extracted on the component that holds it.
[[nodiscard]] FramedPolyline extract_skeleton(const ScalarVolume& vol, const EndpointSelection& endpoints,
                                              const PipelineOptions& options = {});

/// reduce_keyframes with r = prism_radius · (smallest voxel side).
[[nodiscard]] DeformationRig fit_rig(const FramedPolyline& skeleton, const Vec3& spacing,
                                     const PipelineOptions& options = {});

struct PipelineResult {
  FramedPolyline skeleton;
  DeformationRig rig;
  ScalarVolume straight;
};

/// The full automatic path. `spec` defaults to default_spec(rig, vol spacing).
[[nodiscard]] PipelineResult run_pipeline(const ScalarVolume& vol, const EndpointSelection& endpoints,
                                          const PipelineOptions& options = {},
                                          const std::optional<StraightVolumeSpec>& spec = std::nullopt);

/// Caps OpenMP worker threads from UNBEND_THREADS, if set. Returns the cap
/// in effect (0 when unset).
int apply_thread_limit_from_env();

}  // namespace unbend
