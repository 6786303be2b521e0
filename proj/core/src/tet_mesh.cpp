#include "unbend/tet_mesh.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "unbend/error.hpp"

namespace unbend {

namespace {

// Cube corners are numbered a + 2b + 4c for offsets (a, b, c) ∈ {0,1}³. The
// six tets share the 0–7 diagonal, one per ordering of the three axes.
constexpr std::array<Tet, 6> kKuhnSplit = {{
    {0, 1, 3, 7},
    {0, 1, 5, 7},
    {0, 2, 3, 7},
    {0, 2, 6, 7},
    {0, 4, 5, 7},
    {0, 4, 6, 7},
}};

}  // namespace

TetMesh::TetMesh(std::vector<Vec3> vertices, std::vector<Tet> tets)
    : vertices_(std::move(vertices)), tets_(std::move(tets)) {
  const int nv = static_cast<int>(vertices_.size());
  edges_.reserve(tets_.size() * 6);
  for (const auto& t : tets_) {
    for (int a = 0; a < 4; ++a) {
      if (t[a] < 0 || t[a] >= nv) throw Error(ErrorCode::InvalidArgument, "tet references a missing vertex");
      for (int b = a + 1; b < 4; ++b) {
        edges_.push_back({std::min(t[a], t[b]), std::max(t[a], t[b])});
      }
    }
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());

  offsets_.assign(static_cast<std::size_t>(nv) + 1, 0);
  for (const auto& e : edges_) {
    ++offsets_[static_cast<std::size_t>(e[0]) + 1];
    ++offsets_[static_cast<std::size_t>(e[1]) + 1];
  }
  for (std::size_t i = 1; i < offsets_.size(); ++i) offsets_[i] += offsets_[i - 1];
  adjacency_.resize(offsets_.back());
  std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
  for (const auto& e : edges_) {
    adjacency_[cursor[e[0]]++] = e[1];
    adjacency_[cursor[e[1]]++] = e[0];
  }
}

int TetMesh::nearest_vertex(const Vec3& p) const {
  if (vertices_.empty()) throw Error(ErrorCode::EmptyInput, "mesh has no vertices");
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    const double d = (vertices_[i] - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

bool TetMesh::is_connected() const {
  if (vertices_.empty()) return false;
  std::vector<char> seen(vertices_.size(), 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  std::size_t reached = 1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int w : neighbors(v)) {
      if (!seen[w]) {
        seen[w] = 1;
        ++reached;
        stack.push_back(w);
      }
    }
  }
  return reached == vertices_.size();
}

double signed_volume(const TetMesh& mesh, const Tet& t) {
  const auto& v = mesh.vertices();
  const Vec3 a = v[t[1]] - v[t[0]];
  const Vec3 b = v[t[2]] - v[t[0]];
  const Vec3 c = v[t[3]] - v[t[0]];
  return a.dot(b.cross(c)) / 6.0;
}

std::size_t corner_count(const OccupancyMask& mask) {
  const auto& d = mask.dims();
  const std::size_t cx = static_cast<std::size_t>(d[0]) + 1;
  const std::size_t cy = static_cast<std::size_t>(d[1]) + 1;
  std::vector<std::uint8_t> used(cx * cy * (static_cast<std::size_t>(d[2]) + 1), 0);
  std::size_t count = 0;
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i) {
        if (!mask.occupied(i, j, k)) continue;
        for (int c = 0; c < 8; ++c) {
          const std::size_t id = static_cast<std::size_t>(i + (c & 1)) +
                                 cx * (static_cast<std::size_t>(j + ((c >> 1) & 1)) + cy * static_cast<std::size_t>(k + ((c >> 2) & 1)));
          if (!used[id]) {
            used[id] = 1;
            ++count;
          }
        }
      }
  return count;
}

TetMesh tetrahedralize(const OccupancyMask& mask, const Vec3& spacing, const Vec3& origin) {
  const auto& d = mask.dims();
  const std::size_t cx = static_cast<std::size_t>(d[0]) + 1;
  const std::size_t cy = static_cast<std::size_t>(d[1]) + 1;
  std::vector<int> corner_vertex(cx * cy * (static_cast<std::size_t>(d[2]) + 1), -1);
  std::vector<Vec3> vertices;
  std::vector<Tet> tets;

  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i) {
        if (!mask.occupied(i, j, k)) continue;
        std::array<int, 8> local{};
        for (int c = 0; c < 8; ++c) {
          const int ci = i + (c & 1), cj = j + ((c >> 1) & 1), ck = k + ((c >> 2) & 1);
          const std::size_t id = static_cast<std::size_t>(ci) + cx * (static_cast<std::size_t>(cj) + cy * static_cast<std::size_t>(ck));
          if (corner_vertex[id] < 0) {
            corner_vertex[id] = static_cast<int>(vertices.size());
            vertices.push_back(origin + spacing.cwiseProduct(Vec3(ci - 0.5, cj - 0.5, ck - 0.5)));
          }
          local[c] = corner_vertex[id];
        }
        const int mirror = (i & 1) | ((j & 1) << 1) | ((k & 1) << 2);
        for (const auto& t : kKuhnSplit) {
          tets.push_back({local[t[0] ^ mirror], local[t[1] ^ mirror], local[t[2] ^ mirror], local[t[3] ^ mirror]});
        }
      }
  if (tets.empty()) throw Error(ErrorCode::EmptyMask, "cannot mesh an empty mask");

  // Fix orientation so every tet has positive signed volume.
  for (auto& t : tets) {
    const Vec3 a = vertices[t[1]] - vertices[t[0]];
    const Vec3 b = vertices[t[2]] - vertices[t[0]];
    const Vec3 c = vertices[t[3]] - vertices[t[0]];
    if (a.dot(b.cross(c)) < 0.0) std::swap(t[2], t[3]);
  }
  return TetMesh(std::move(vertices), std::move(tets));
}

HarmonicField solve_harmonic(const TetMesh& mesh, int head, int tail) {
  const int nv = static_cast<int>(mesh.vertex_count());
  if (head < 0 || head >= nv || tail < 0 || tail >= nv)
    throw Error(ErrorCode::InvalidArgument, "head/tail vertex out of range");
  if (head == tail) throw Error(ErrorCode::InvalidArgument, "head and tail must differ");
  if (!mesh.is_connected()) throw Error(ErrorCode::Disconnected, "mesh edge graph is disconnected");

  HarmonicField field;
  field.head_vertex = head;
  field.tail_vertex = tail;
  field.values.assign(static_cast<std::size_t>(nv), 0.0);
  field.values[head] = 1.0;
  field.values[tail] = -1.0;

  std::vector<int> free_index(static_cast<std::size_t>(nv), -1);
  int nfree = 0;
  for (int v = 0; v < nv; ++v)
    if (v != head && v != tail) free_index[v] = nfree++;
  if (nfree == 0) return field;

  using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(mesh.edges().size() * 2 + static_cast<std::size_t>(nfree));
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nfree);
  for (int v = 0; v < nv; ++v) {
    const int row = free_index[v];
    if (row < 0) continue;
    const auto nbrs = mesh.neighbors(v);
    entries.emplace_back(row, row, static_cast<double>(nbrs.size()));
    for (int w : nbrs) {
      if (free_index[w] >= 0) entries.emplace_back(row, free_index[w], -1.0);
      else rhs[row] += field.values[w];
    }
  }
  SpMat system(nfree, nfree);
  system.setFromTriplets(entries.begin(), entries.end());

  Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg;
  cg.setTolerance(1e-9);
  cg.setMaxIterations(std::max(1, static_cast<int>(std::ceil(10.0 * std::sqrt(static_cast<double>(nfree))))));
  cg.compute(system);
  const Eigen::VectorXd solution = cg.solve(rhs);

  const double rhs_norm = rhs.norm();
  field.iterations = static_cast<int>(cg.iterations());
  field.relative_residual = rhs_norm > 0.0 ? (system * solution - rhs).norm() / rhs_norm : 0.0;
  if (!solution.allFinite() || field.relative_residual > 1e-8)
    throw Error(ErrorCode::SolverDiverged, "conjugate gradient stopped at relative residual " +
                                               std::to_string(field.relative_residual) + " after " +
                                               std::to_string(field.iterations) + " iterations");
  for (int v = 0; v < nv; ++v)
    if (free_index[v] >= 0) field.values[v] = std::clamp(solution[free_index[v]], -1.0, 1.0);
  return field;
}

double harmonic_residual(const TetMesh& mesh, const HarmonicField& field) {
  double res2 = 0.0, rhs2 = 0.0;
  const int nv = static_cast<int>(mesh.vertex_count());
  for (int v = 0; v < nv; ++v) {
    if (v == field.head_vertex || v == field.tail_vertex) continue;
    double r = 0.0, b = 0.0;
    const auto nbrs = mesh.neighbors(v);
    r += static_cast<double>(nbrs.size()) * field.values[v];
    for (int w : nbrs) {
      if (w == field.head_vertex || w == field.tail_vertex) b += field.values[w];
      else r -= field.values[w];
    }
    res2 += (r - b) * (r - b);
    rhs2 += b * b;
  }
  return rhs2 > 0.0 ? std::sqrt(res2 / rhs2) : std::sqrt(res2);
}

void write_mesh_debug(const TetMesh& mesh, const HarmonicField* field, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  out.precision(17);
  for (std::size_t i = 0; i < mesh.vertex_count(); ++i) {
    const auto& p = mesh.vertices()[i];
    out << "v " << p.x() << ' ' << p.y() << ' ' << p.z() << ' ' << (field ? field->values[i] : 0.0) << '\n';
  }
  for (const auto& t : mesh.tets()) out << "t " << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << t[3] << '\n';
}

}  // namespace unbend
