#pragma once

#include <nlohmann/json.hpp>
#include <vector>

#include "unbend/geometry.hpp"
#include "unbend/tet_mesh.hpp"
#include "unbend/volume.hpp"

namespace unbend {

/// Ordered world-space vertices, head first.
struct Polyline {
  std::vector<Vec3> vertices;

  [[nodiscard]] double length() const;
  [[nodiscard]] double min_segment() const;
};

/// Skeleton vertices with one orthonormal frame each.
struct FramedPolyline {
  std::vector<Vec3> vertices;
  std::vector<Frame> frames;

  [[nodiscard]] double length() const;
  [[nodiscard]] Polyline polyline() const { return Polyline{vertices}; }
};

/// Centroid of the edge-crossing points of k isovalues spread evenly over
/// (-1, 1), ordered from the head (+1) to the tail (-1). Isovalues are the
/// cell midpoints 1 - (2j + 1)/k.
[[nodiscard]] Polyline level_set_centroids(const TetMesh& mesh, const HarmonicField& field, int k);

/// The isovalues level_set_centroids samples, in order.
[[nodiscard]] std::vector<double> level_set_isovalues(int k);

/// `iterations` Jacobi sweeps of c_i ← (c_{i-1} + c_{i+1}) / 2. Ends stay put.
[[nodiscard]] Polyline smooth(const Polyline& line, int iterations);

/// Equal-arclength resampling with spacing at most
/// max(min_segment / 2, 1e-3 · length); ends preserved exactly.
[[nodiscard]] Polyline resample_uniform(const Polyline& line);

/// Central-difference tangents and axis-projection cross-section frames.
[[nodiscard]] FramedPolyline compute_frames(const Polyline& line);

struct SkeletonOptions {
  int level_sets = 100;
  int smoothing_iterations = 50;
  std::size_t vertex_budget = 400'000;
};

/// Mesh → harmonic field → centroids → smooth → resample → frames for one
/// connected mask. `head` and `tail` are world points snapped to the nearest
/// mesh vertices. The mask is or-pooled first if it would exceed the vertex
/// budget.
[[nodiscard]] FramedPolyline extract_component_skeleton(const GridGeometry& grid, const OccupancyMask& mask,
                                                        const Vec3& head, const Vec3& tail,
                                                        const SkeletonOptions& options = {});

/// Concatenates ordered part skeletons; consecutive parts are joined by the
/// straight segment from one tail to the next head.
[[nodiscard]] FramedPolyline merge_component_skeletons(const std::vector<FramedPolyline>& parts);

[[nodiscard]] nlohmann::json skeleton_to_json(const FramedPolyline& skel);
[[nodiscard]] FramedPolyline skeleton_from_json(const nlohmann::json& j);

}  // namespace unbend
