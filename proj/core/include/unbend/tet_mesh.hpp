#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "unbend/geometry.hpp"
#include "unbend/volume.hpp"

namespace unbend {

using Tet = std::array<int, 4>;

/// Tetrahedral mesh with a compressed vertex adjacency (the mesh edge graph).
class TetMesh {
 public:
  TetMesh() = default;
  TetMesh(std::vector<Vec3> vertices, std::vector<Tet> tets);

  [[nodiscard]] const std::vector<Vec3>& vertices() const { return vertices_; }
  [[nodiscard]] const std::vector<Tet>& tets() const { return tets_; }
  [[nodiscard]] std::size_t vertex_count() const { return vertices_.size(); }

  [[nodiscard]] std::span<const int> neighbors(int v) const {
    return {adjacency_.data() + offsets_[v], adjacency_.data() + offsets_[v + 1]};
  }
  /// Unique undirected edges (a < b).
  [[nodiscard]] const std::vector<std::array<int, 2>>& edges() const { return edges_; }

  [[nodiscard]] int nearest_vertex(const Vec3& p) const;
  [[nodiscard]] bool is_connected() const;

 private:
  std::vector<Vec3> vertices_;
  std::vector<Tet> tets_;
  std::vector<std::array<int, 2>> edges_;
  std::vector<std::size_t> offsets_;
  std::vector<int> adjacency_;
};

[[nodiscard]] double signed_volume(const TetMesh& mesh, const Tet& t);

/// Splits every occupied voxel into 6 tetrahedra around a body diagonal.
/// The split is mirrored across odd voxel coordinates so that all diagonals
/// run from the all-even lattice corner, which keeps neighbouring faces
/// conformal and the edge graph free of a preferred diagonal direction.
[[nodiscard]] TetMesh tetrahedralize(const OccupancyMask& mask, const Vec3& spacing, const Vec3& origin);

/// Number of distinct cube corners the mask would produce as mesh vertices.
[[nodiscard]] std::size_t corner_count(const OccupancyMask& mask);

/// Per-vertex field with u(head) = +1 and u(tail) = -1.
struct HarmonicField {
  std::vector<double> values;
  int head_vertex = -1;
  int tail_vertex = -1;
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Solves the uniform-weight graph Laplacian with Dirichlet values ±1 at
/// head/tail: every other vertex equals the mean of its neighbours. Jacobi-
/// preconditioned conjugate gradient, relative residual ≤ 1e-8.
[[nodiscard]] HarmonicField solve_harmonic(const TetMesh& mesh, int head, int tail);

/// ‖L u − b‖ / ‖b‖ on the Dirichlet-reduced system.
[[nodiscard]] double harmonic_residual(const TetMesh& mesh, const HarmonicField& field);

/// Debug dump: "v x y z u" and "t i j k l" lines. Not a stable format.
void write_mesh_debug(const TetMesh& mesh, const HarmonicField* field, const std::filesystem::path& path);

}  // namespace unbend
