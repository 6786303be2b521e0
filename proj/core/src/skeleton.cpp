#include "unbend/skeleton.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "unbend/error.hpp"

namespace unbend {

namespace {

double polyline_length(const std::vector<Vec3>& v) {
  double total = 0.0;
  for (std::size_t i = 1; i < v.size(); ++i) total += (v[i] - v[i - 1]).norm();
  return total;
}

// Projects the axis pair onto the plane ⟂ n and orthonormalizes. Returns
// false when either projection, or the Gram-Schmidt remainder, is degenerate.
bool project_axes(const Vec3& n, const Vec3& a, const Vec3& b, Frame& out) {
  constexpr double kDegenerate = 1e-6;
  Vec3 u = a - a.dot(n) * n;
  Vec3 v = b - b.dot(n) * n;
  if (u.norm() < kDegenerate || v.norm() < kDegenerate) return false;
  u.normalize();
  v -= v.dot(u) * u;
  if (v.norm() < kDegenerate) return false;
  v.normalize();
  if (u.cross(v).dot(n) < 0.0) v = -v;
  out = Frame{u, v, n};
  return true;
}

}  // namespace

double Polyline::length() const { return polyline_length(vertices); }

double Polyline::min_segment() const {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < vertices.size(); ++i) m = std::min(m, (vertices[i] - vertices[i - 1]).norm());
  return m;
}

double FramedPolyline::length() const { return polyline_length(vertices); }

std::vector<double> level_set_isovalues(int k) {
  std::vector<double> iso(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) iso[j] = 1.0 - (2.0 * j + 1.0) / k;
  return iso;
}

Polyline level_set_centroids(const TetMesh& mesh, const HarmonicField& field, int k) {
  if (k < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 level sets");
  if (field.values.size() != mesh.vertex_count()) throw Error(ErrorCode::InvalidArgument, "field does not match mesh");
  const auto iso = level_set_isovalues(k);
  std::vector<Vec3> sums(iso.size(), Vec3::Zero());
  std::vector<std::size_t> counts(iso.size(), 0);
  const auto& verts = mesh.vertices();

  for (const auto& e : mesh.edges()) {
    const double ua = field.values[e[0]];
    const double ub = field.values[e[1]];
    if (ua == ub) continue;
    const double lo = std::min(ua, ub), hi = std::max(ua, ub);
    // iso_j ∈ (lo, hi]  ⇔  k(1 - hi) ≤ 2j + 1 < k(1 - lo)
    const int j0 = std::max(0, static_cast<int>(std::floor((k * (1.0 - hi) - 1.0) / 2.0)) - 1);
    const int j1 = std::min(k - 1, static_cast<int>(std::ceil((k * (1.0 - lo) - 1.0) / 2.0)) + 1);
    for (int j = j0; j <= j1; ++j) {
      if (!(iso[j] > lo && iso[j] <= hi)) continue;
      const double w = (iso[j] - ua) / (ub - ua);
      sums[j] += verts[e[0]] + w * (verts[e[1]] - verts[e[0]]);
      ++counts[j];
    }
  }

  Polyline out;
  for (std::size_t j = 0; j < iso.size(); ++j) {
    if (counts[j] == 0) continue;
    const Vec3 c = sums[j] / static_cast<double>(counts[j]);
    if (!out.vertices.empty() && (c - out.vertices.back()).norm() <= 1e-9) continue;
    out.vertices.push_back(c);
  }
  if (out.vertices.size() < 2) throw Error(ErrorCode::DegenerateField, "fewer than 2 level sets cross the mesh");
  return out;
}

Polyline smooth(const Polyline& line, int iterations) {
  if (iterations < 0) throw Error(ErrorCode::InvalidArgument, "smoothing iterations must be nonnegative");
  Polyline cur = line;
  if (cur.vertices.size() < 3) return cur;
  std::vector<Vec3> next = cur.vertices;
  for (int it = 0; it < iterations; ++it) {
    for (std::size_t i = 1; i + 1 < cur.vertices.size(); ++i)
      next[i] = 0.5 * (cur.vertices[i - 1] + cur.vertices[i + 1]);
    std::swap(cur.vertices, next);
  }
  return cur;
}

Polyline resample_uniform(const Polyline& line) {
  const auto& v = line.vertices;
  if (v.size() < 2) throw Error(ErrorCode::InvalidArgument, "resampling needs at least 2 vertices");
  const double total = line.length();
  if (!(total > 0.0)) throw Error(ErrorCode::DegenerateTangent, "polyline has zero length");
  const double h = std::max(0.5 * line.min_segment(), 1e-3 * total);
  const auto intervals = static_cast<std::size_t>(std::max(1.0, std::ceil(total / h - 1e-9)));
  const double step = total / static_cast<double>(intervals);

  Polyline out;
  out.vertices.reserve(intervals + 1);
  out.vertices.push_back(v.front());
  std::size_t seg = 0;
  double seg_start = 0.0;
  double seg_len = (v[1] - v[0]).norm();
  for (std::size_t s = 1; s < intervals; ++s) {
    const double target = step * static_cast<double>(s);
    while (seg + 2 < v.size() && seg_start + seg_len < target) {
      seg_start += seg_len;
      ++seg;
      seg_len = (v[seg + 1] - v[seg]).norm();
    }
    const double w = seg_len > 0.0 ? std::clamp((target - seg_start) / seg_len, 0.0, 1.0) : 0.0;
    out.vertices.push_back(v[seg] + w * (v[seg + 1] - v[seg]));
  }
  out.vertices.push_back(v.back());
  return out;
}

FramedPolyline compute_frames(const Polyline& line) {
  const auto& c = line.vertices;
  if (c.size() < 3) throw Error(ErrorCode::InvalidArgument, "frames need at least 3 vertices");
  for (std::size_t i = 1; i < c.size(); ++i)
    if ((c[i] - c[i - 1]).norm() <= 1e-12) throw Error(ErrorCode::DegenerateTangent, "consecutive vertices coincide");

  FramedPolyline out;
  out.vertices = c;
  out.frames.resize(c.size());
  const std::size_t last = c.size() - 1;
  for (std::size_t i = 0; i <= last; ++i) {
    Vec3 d;
    if (i == 0) d = c[1] - c[0];
    else if (i == last) d = c[last] - c[last - 1];
    else d = c[i + 1] - c[i - 1];
    if (d.norm() <= 1e-12) throw Error(ErrorCode::DegenerateTangent, "central difference vanishes");
    const Vec3 n = d.normalized();
    Frame f;
    if (!project_axes(n, Vec3::UnitX(), Vec3::UnitY(), f) && !project_axes(n, Vec3::UnitX(), Vec3::UnitZ(), f) &&
        !project_axes(n, Vec3::UnitY(), Vec3::UnitZ(), f))
      throw Error(ErrorCode::DegenerateTangent, "no axis pair projects onto the cross-section plane");
    out.frames[i] = f;
  }
  return out;
}

FramedPolyline extract_component_skeleton(const GridGeometry& grid, const OccupancyMask& mask, const Vec3& head,
                                          const Vec3& tail, const SkeletonOptions& options) {
  if (mask.dims() != grid.dims) throw Error(ErrorCode::DimsMismatch, "mask and volume dims differ");
  int factor = 1;
  while (corner_count(downsample_mask(mask, factor)) > options.vertex_budget) ++factor;
  const OccupancyMask coarse = downsample_mask(mask, factor);
  const Vec3 spacing = grid.spacing * factor;
  const Vec3 origin = grid.origin + grid.spacing * (0.5 * (factor - 1));

  const TetMesh mesh = tetrahedralize(coarse, spacing, origin);
  const int head_vertex = mesh.nearest_vertex(head);
  const int tail_vertex = mesh.nearest_vertex(tail);
  if (head_vertex == tail_vertex) throw Error(ErrorCode::InvalidArgument, "head and tail snap to the same mesh vertex");
  const HarmonicField field = solve_harmonic(mesh, head_vertex, tail_vertex);
  const Polyline centroids = level_set_centroids(mesh, field, options.level_sets);
  const Polyline smoothed = smooth(centroids, options.smoothing_iterations);
  return compute_frames(resample_uniform(smoothed));
}

FramedPolyline merge_component_skeletons(const std::vector<FramedPolyline>& parts) {
  if (parts.empty()) throw Error(ErrorCode::EmptyInput, "no skeleton parts to merge");
  FramedPolyline out;
  for (const auto& part : parts) {
    if (part.vertices.size() != part.frames.size()) throw Error(ErrorCode::InvalidArgument, "part frames do not match vertices");
    for (std::size_t i = 0; i < part.vertices.size(); ++i) {
      if (i == 0 && !out.vertices.empty() && (part.vertices[0] - out.vertices.back()).norm() <= 1e-9) continue;
      out.vertices.push_back(part.vertices[i]);
      out.frames.push_back(part.frames[i]);
    }
  }
  return out;
}

nlohmann::json skeleton_to_json(const FramedPolyline& skel) {
  nlohmann::json vertices = nlohmann::json::array();
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& p : skel.vertices) vertices.push_back({p.x(), p.y(), p.z()});
  for (const auto& f : skel.frames) {
    frames.push_back({{f.u.x(), f.u.y(), f.u.z()}, {f.v.x(), f.v.y(), f.v.z()}, {f.n.x(), f.n.y(), f.n.z()}});
  }
  return {{"vertices", vertices}, {"frames", frames}};
}

FramedPolyline skeleton_from_json(const nlohmann::json& j) {
  FramedPolyline out;
  auto vec = [](const nlohmann::json& a) { return Vec3(a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>()); };
  for (const auto& p : j.at("vertices")) out.vertices.push_back(vec(p));
  for (const auto& f : j.at("frames")) out.frames.push_back(Frame{vec(f.at(0)), vec(f.at(1)), vec(f.at(2))});
  if (out.frames.size() != out.vertices.size()) throw Error(ErrorCode::SchemaInvalid, "skeleton frames do not match vertices");
  return out;
}

}  // namespace unbend
