#include "unbend/rig.hpp"

#include <algorithm>
#include <boost/math/tools/toms748_solve.hpp>
#include <cmath>
#include <limits>

#include "unbend/error.hpp"

namespace unbend {

namespace {

constexpr double kAntipodal = 1e-6;
// Largest rotation of n inside one root-bracketing sub-interval.
constexpr double kBracketAngle = 0.1;

Vec3 any_perpendicular(const Vec3& n) {
  const Vec3 a = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  return n.cross(a).normalized();
}

double corner_radius(const Keyframe& k) { return std::hypot(k.rx, k.ry); }

}  // namespace

RigSegment::RigSegment(const Keyframe& a, const Keyframe& b, double start_t)
    : a_(a), b_(b), start_t_(start_t), length_((b.position - a.position).norm()) {
  const Vec3& n0 = a.frame.n;
  const Vec3& n1 = b.frame.n;
  bend_angle_ = angle_between(n0, n1);
  const Vec3 cross = n0.cross(n1);
  axis_ = cross.norm() > 1e-15 ? Vec3(cross.normalized()) : any_perpendicular(n0);
  const Vec3 carried = rotate_about(a.frame.u, axis_, bend_angle_);
  twist_angle_ = signed_angle(carried, b.frame.u, n1);
  bound_center_ = 0.5 * (a.position + b.position);
  bound_radius_ = 0.5 * length_ + std::max(corner_radius(a), corner_radius(b));
}

Vec3 RigSegment::normal(double lambda) const {
  if (lambda <= 0.0) return a_.frame.n;
  if (lambda >= 1.0) return b_.frame.n;
  return rotate_about(a_.frame.n, axis_, lambda * bend_angle_);
}

Frame RigSegment::frame(double lambda) const {
  if (lambda <= 0.0) return a_.frame;
  if (lambda >= 1.0) return b_.frame;
  const double bend = lambda * bend_angle_;
  Frame f;
  f.n = rotate_about(a_.frame.n, axis_, bend);
  f.u = rotate_about(rotate_about(a_.frame.u, axis_, bend), f.n, lambda * twist_angle_);
  f.v = f.n.cross(f.u);
  return f;
}

std::optional<LocalCoordinates> RigSegment::locate(const Vec3& p, double cage_tolerance) const {
  auto g = [&](double lambda) { return (p - point(lambda)).dot(normal(lambda)); };

  std::optional<LocalCoordinates> best;
  double best_dist = std::numeric_limits<double>::infinity();
  auto consider = [&](double lambda) {
    lambda = std::clamp(lambda, 0.0, 1.0);
    const Frame f = frame(lambda);
    const Vec3 q = p - point(lambda);
    const double x = q.dot(f.u);
    const double y = q.dot(f.v);
    if (std::abs(x) > rx(lambda) + cage_tolerance || std::abs(y) > ry(lambda) + cage_tolerance) return;
    const double dist = std::hypot(x, y);
    if (dist < best_dist) {
      best_dist = dist;
      best = LocalCoordinates{x, y, start_t_ + lambda * length_};
    }
  };

  const int pieces = std::max(1, static_cast<int>(std::ceil(bend_angle_ / kBracketAngle)));
  double lo = 0.0;
  double g_lo = g(lo);
  if (g_lo == 0.0) consider(lo);
  for (int s = 1; s <= pieces; ++s) {
    const double hi = static_cast<double>(s) / pieces;
    const double g_hi = g(hi);
    if (g_hi == 0.0) {
      consider(hi);
    } else if (g_lo != 0.0 && (g_lo < 0.0) != (g_hi < 0.0)) {
      boost::uintmax_t iterations = 60;
      const auto root = boost::math::tools::toms748_solve(
          g, lo, hi, g_lo, g_hi, boost::math::tools::eps_tolerance<double>(48), iterations);
      consider(0.5 * (root.first + root.second));
    }
    lo = hi;
    g_lo = g_hi;
  }
  return best;
}

DeformationRig::DeformationRig(std::vector<Keyframe> keyframes) : keyframes_(std::move(keyframes)) {
  if (keyframes_.size() < 2) throw Error(ErrorCode::InvalidRig, "a rig needs at least 2 keyframes");
  for (std::size_t i = 0; i < keyframes_.size(); ++i) {
    const auto& k = keyframes_[i];
    if (!k.position.allFinite()) throw Error(ErrorCode::InvalidRig, "keyframe " + std::to_string(i) + " position is not finite");
    if (!k.frame.is_rotation(1e-6))
      throw Error(ErrorCode::InvalidRig, "keyframe " + std::to_string(i) + " frame is not a rotation");
    if (!(k.rx > 0.0) || !(k.ry > 0.0) || !std::isfinite(k.rx) || !std::isfinite(k.ry))
      throw Error(ErrorCode::InvalidRig, "keyframe " + std::to_string(i) + " extent must be positive");
  }
  cumulative_.assign(keyframes_.size(), 0.0);
  segments_.reserve(keyframes_.size() - 1);
  for (std::size_t i = 0; i + 1 < keyframes_.size(); ++i) {
    const double len = (keyframes_[i + 1].position - keyframes_[i].position).norm();
    if (!(len > 1e-12)) throw Error(ErrorCode::InvalidRig, "keyframes " + std::to_string(i) + " and " + std::to_string(i + 1) + " coincide");
    if (keyframes_[i].frame.n.dot(keyframes_[i + 1].frame.n) <= -1.0 + kAntipodal)
      throw Error(ErrorCode::AntipodalNormals, "keyframes " + std::to_string(i) + " and " + std::to_string(i + 1) + " have opposite normals");
    cumulative_[i + 1] = cumulative_[i] + len;
    segments_.emplace_back(keyframes_[i], keyframes_[i + 1], cumulative_[i]);
  }
}

double DeformationRig::max_rx() const {
  double m = 0.0;
  for (const auto& k : keyframes_) m = std::max(m, k.rx);
  return m;
}

double DeformationRig::max_ry() const {
  double m = 0.0;
  for (const auto& k : keyframes_) m = std::max(m, k.ry);
  return m;
}

SegmentPosition segment_lookup(const DeformationRig& rig, double t) {
  const auto d = rig.cumulative_arclength();
  const double total = d.back();
  const double tol = 1e-9 * std::max(1.0, total);
  if (!(t >= -tol && t <= total + tol))
    throw Error(ErrorCode::OutOfRange, "t = " + std::to_string(t) + " outside [0, " + std::to_string(total) + "]");
  const std::size_t last = d.size() - 2;
  if (t >= total) return {last, 1.0};
  t = std::max(t, 0.0);
  const auto it = std::upper_bound(d.begin(), d.end(), t);
  const std::size_t k = std::min(static_cast<std::size_t>(it - d.begin()) - 1, last);
  const double lambda = std::clamp((t - d[k]) / (d[k + 1] - d[k]), 0.0, 1.0);
  return {k, lambda};
}

Vec3 eval_curve(const DeformationRig& rig, double t) {
  const auto [k, lambda] = segment_lookup(rig, t);
  if (lambda >= 1.0) return rig.keyframes()[k + 1].position;
  return rig.segment(k).point(lambda);
}

Frame eval_frame(const DeformationRig& rig, double t) {
  const auto [k, lambda] = segment_lookup(rig, t);
  return rig.segment(k).frame(lambda);
}

std::pair<double, double> eval_extent(const DeformationRig& rig, double t) {
  const auto [k, lambda] = segment_lookup(rig, t);
  const auto& s = rig.segment(k);
  return {s.rx(lambda), s.ry(lambda)};
}

namespace {

DeformationRig rig_from_indices(const FramedPolyline& skel, const std::vector<std::size_t>& idx, double r) {
  std::vector<Keyframe> keys;
  keys.reserve(idx.size());
  for (std::size_t i : idx) keys.push_back(Keyframe{skel.vertices[i], skel.frames[i], r, r});
  return DeformationRig(std::move(keys));
}

}  // namespace

DeformationRig reduce_keyframes(const FramedPolyline& skel, double r) {
  if (!(r > 0.0)) throw Error(ErrorCode::InvalidArgument, "prism radius must be positive");
  const std::size_t n = skel.vertices.size();
  if (n < 2 || skel.frames.size() != n) throw Error(ErrorCode::InvalidArgument, "skeleton needs at least 2 framed vertices");
  const double tol = 1e-6 * r;

  // Keyframes are skeleton indices; prism p spans idx[p]..idx[p+1].
  std::vector<std::size_t> idx{0, n - 1};
  std::size_t splits = 0;
  while (true) {
    std::vector<char> violating(idx.size() - 1, 0);
    for (std::size_t p = 0; p + 1 < idx.size(); ++p)
      if (skel.frames[idx[p]].n.dot(skel.frames[idx[p + 1]].n) <= -1.0 + kAntipodal) violating[p] = 1;

    if (std::none_of(violating.begin(), violating.end(), [](char c) { return c != 0; })) {
      const DeformationRig rig = rig_from_indices(skel, idx, r);
      const auto& segs = rig.segments();
      for (std::size_t p = 0; p < segs.size(); ++p) {
        for (std::size_t i = idx[p] + 1; i < idx[p + 1]; ++i) {
          const Vec3& v = skel.vertices[i];
          bool inside = segs[p].locate(v, tol).has_value();
          for (std::size_t q = 0; q < segs.size() && !inside; ++q) {
            if (q == p || (v - segs[q].bound_center()).norm() > segs[q].bound_radius() + tol) continue;
            inside = segs[q].locate(v, tol).has_value();
          }
          if (!inside) {
            violating[p] = 1;
            break;
          }
        }
      }
    }

    std::vector<std::size_t> next;
    next.reserve(idx.size() * 2);
    bool changed = false;
    for (std::size_t p = 0; p + 1 < idx.size(); ++p) {
      next.push_back(idx[p]);
      if (!violating[p]) continue;
      if (idx[p + 1] - idx[p] < 2) {
        throw Error(ErrorCode::AntipodalNormals, "adjacent skeleton vertices have opposite normals");
      }
      next.push_back((idx[p] + idx[p + 1]) / 2);
      changed = true;
      if (++splits > n) throw Error(ErrorCode::NonConvergence, "prism subdivision did not converge");
    }
    next.push_back(idx.back());
    if (!changed) return rig_from_indices(skel, idx, r);
    idx = std::move(next);
  }
}

std::optional<std::size_t> keyframe_at(const DeformationRig& rig, double t) {
  const auto d = rig.cumulative_arclength();
  for (std::size_t i = 0; i < d.size(); ++i)
    if (std::abs(d[i] - t) <= 1e-9) return i;
  return std::nullopt;
}

namespace {

void check_index(const DeformationRig& rig, std::size_t i) {
  if (i >= rig.size())
    throw Error(ErrorCode::OutOfRange, "keyframe index " + std::to_string(i) + " out of range (" + std::to_string(rig.size()) + " keyframes)");
}

struct EditVisitor {
  const DeformationRig& rig;

  DeformationRig operator()(const InsertKeyframe& e) const {
    const auto [k, lambda] = segment_lookup(rig, e.t);
    if (keyframe_at(rig, e.t)) return rig;
    const auto& seg = rig.segment(k);
    auto keys = rig.keyframes();
    keys.insert(keys.begin() + static_cast<std::ptrdiff_t>(k) + 1,
                Keyframe{seg.point(lambda), seg.frame(lambda), seg.rx(lambda), seg.ry(lambda)});
    return DeformationRig(std::move(keys));
  }

  DeformationRig operator()(const RemoveKeyframe& e) const {
    check_index(rig, e.index);
    if (rig.size() <= 2) throw Error(ErrorCode::LastTwoKeyframes, "cannot remove one of the last two keyframes");
    auto keys = rig.keyframes();
    keys.erase(keys.begin() + static_cast<std::ptrdiff_t>(e.index));
    return DeformationRig(std::move(keys));
  }

  DeformationRig operator()(const RotateKeyframe& e) const {
    check_index(rig, e.index);
    auto keys = rig.keyframes();
    Frame& f = keys[e.index].frame;
    const double c = std::cos(e.angle), s = std::sin(e.angle);
    f = orthonormalize(Frame{c * f.u + s * f.v, f.v, f.n});
    return DeformationRig(std::move(keys));
  }

  DeformationRig operator()(const MoveKeyframe& e) const {
    check_index(rig, e.index);
    auto keys = rig.keyframes();
    auto& k = keys[e.index];
    k.position += e.dx * k.frame.u + e.dy * k.frame.v;
    return DeformationRig(std::move(keys));
  }

  DeformationRig operator()(const ResizeKeyframe& e) const {
    check_index(rig, e.index);
    if (!(e.rx > 0.0) || !(e.ry > 0.0)) throw Error(ErrorCode::InvalidArgument, "extent must be positive");
    auto keys = rig.keyframes();
    keys[e.index].rx = e.rx;
    keys[e.index].ry = e.ry;
    return DeformationRig(std::move(keys));
  }
};

nlohmann::json vec_json(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

Vec3 json_vec(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::SchemaInvalid, "expected a 3-vector");
  Vec3 out;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw Error(ErrorCode::SchemaInvalid, "vector component is not a number");
    out[i] = j[i].get<double>();
  }
  return out;
}

double json_number(const nlohmann::json& j, const char* key) {
  if (!j.is_object() || !j.contains(key) || !j.at(key).is_number())
    throw Error(ErrorCode::SchemaInvalid, std::string("missing numeric field '") + key + "'");
  return j.at(key).get<double>();
}

std::size_t json_index(const nlohmann::json& j, const char* key) {
  if (!j.is_object() || !j.contains(key) || !j.at(key).is_number_integer() || j.at(key).get<long long>() < 0)
    throw Error(ErrorCode::SchemaInvalid, std::string("missing index field '") + key + "'");
  return j.at(key).get<std::size_t>();
}

}  // namespace

DeformationRig apply_edit(const DeformationRig& rig, const RigEdit& edit) {
  return std::visit(EditVisitor{rig}, edit);
}

nlohmann::json rig_to_json(const DeformationRig& rig) {
  nlohmann::json keys = nlohmann::json::array();
  for (const auto& k : rig.keyframes()) {
    keys.push_back({{"e", vec_json(k.position)},
                    {"R", nlohmann::json::array({vec_json(k.frame.u), vec_json(k.frame.v), vec_json(k.frame.n)})},
                    {"extent", nlohmann::json::array({k.rx, k.ry})}});
  }
  return {{"keyframes", keys}};
}

DeformationRig rig_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("keyframes") || !j.at("keyframes").is_array())
    throw Error(ErrorCode::SchemaInvalid, "rig must be an object with a 'keyframes' array");
  std::vector<Keyframe> keys;
  for (const auto& kj : j.at("keyframes")) {
    if (!kj.is_object() || !kj.contains("e") || !kj.contains("R") || !kj.contains("extent"))
      throw Error(ErrorCode::SchemaInvalid, "keyframe needs 'e', 'R' and 'extent'");
    const auto& rows = kj.at("R");
    const auto& ext = kj.at("extent");
    if (!rows.is_array() || rows.size() != 3) throw Error(ErrorCode::SchemaInvalid, "'R' must have 3 rows");
    if (!ext.is_array() || ext.size() != 2 || !ext[0].is_number() || !ext[1].is_number())
      throw Error(ErrorCode::SchemaInvalid, "'extent' must be [rx, ry]");
    keys.push_back(Keyframe{json_vec(kj.at("e")), Frame{json_vec(rows[0]), json_vec(rows[1]), json_vec(rows[2])},
                            ext[0].get<double>(), ext[1].get<double>()});
  }
  return DeformationRig(std::move(keys));
}

nlohmann::json edit_to_json(const RigEdit& edit) {
  return std::visit(
      [](const auto& e) -> nlohmann::json {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, InsertKeyframe>) return {{"op", "insert"}, {"t", e.t}};
        else if constexpr (std::is_same_v<T, RemoveKeyframe>) return {{"op", "remove"}, {"i", e.index}};
        else if constexpr (std::is_same_v<T, RotateKeyframe>) return {{"op", "rotate"}, {"i", e.index}, {"angle", e.angle}};
        else if constexpr (std::is_same_v<T, MoveKeyframe>) return {{"op", "center"}, {"i", e.index}, {"dx", e.dx}, {"dy", e.dy}};
        else return {{"op", "extent"}, {"i", e.index}, {"rx", e.rx}, {"ry", e.ry}};
      },
      edit);
}

RigEdit edit_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("op") || !j.at("op").is_string())
    throw Error(ErrorCode::SchemaInvalid, "edit needs a string 'op'");
  const auto op = j.at("op").get<std::string>();
  if (op == "insert") return InsertKeyframe{json_number(j, "t")};
  if (op == "remove") return RemoveKeyframe{json_index(j, "i")};
  if (op == "rotate") return RotateKeyframe{json_index(j, "i"), json_number(j, "angle")};
  if (op == "center") return MoveKeyframe{json_index(j, "i"), json_number(j, "dx"), json_number(j, "dy")};
  if (op == "extent") return ResizeKeyframe{json_index(j, "i"), json_number(j, "rx"), json_number(j, "ry")};
  throw Error(ErrorCode::SchemaInvalid, "unknown edit op '" + op + "'");
}

}  // namespace unbend
