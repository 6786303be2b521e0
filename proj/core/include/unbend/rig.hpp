#pragma once

#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "unbend/geometry.hpp"
#include "unbend/skeleton.hpp"

namespace unbend {

/// One rig control point: curve vertex, cross-section frame and the half
/// widths of the cage box at that point.
struct Keyframe {
  Vec3 position = Vec3::Zero();
  Frame frame;
  double rx = 1.0;
  double ry = 1.0;
};

/// (segment index, interpolation weight toward the next keyframe).
struct SegmentPosition {
  std::size_t segment = 0;
  double lambda = 0.0;
};

/// Rig-local coordinates of a world point: in-plane offsets along u and v,
/// and the arclength parameter of the cross-section it lies in.
struct LocalCoordinates {
  double x = 0.0;
  double y = 0.0;
  double t = 0.0;
};

/// The piece of the warp between two consecutive keyframes. The curve runs
/// straight from `start` to `end`; the frame follows the minimal rotation
/// that carries n_start onto n_end plus a twist about n that grows linearly
/// so that the frame lands exactly on the end keyframe.
class RigSegment {
 public:
  RigSegment(const Keyframe& a, const Keyframe& b, double start_t);

  [[nodiscard]] double length() const { return length_; }
  [[nodiscard]] double start_t() const { return start_t_; }

  [[nodiscard]] Vec3 point(double lambda) const { return (1.0 - lambda) * a_.position + lambda * b_.position; }
  [[nodiscard]] Vec3 normal(double lambda) const;
  [[nodiscard]] Frame frame(double lambda) const;
  [[nodiscard]] double rx(double lambda) const { return (1.0 - lambda) * a_.rx + lambda * b_.rx; }
  [[nodiscard]] double ry(double lambda) const { return (1.0 - lambda) * a_.ry + lambda * b_.ry; }

  /// Among the cross-sections of this segment whose plane contains `p` and
  /// whose cage box holds it, the one closest to `p`. Ties go to smaller t.
  [[nodiscard]] std::optional<LocalCoordinates> locate(const Vec3& p, double cage_tolerance = 0.0) const;

  /// Bounding sphere of the segment's cage, for pruning.
  [[nodiscard]] const Vec3& bound_center() const { return bound_center_; }
  [[nodiscard]] double bound_radius() const { return bound_radius_; }

 private:
  Keyframe a_;
  Keyframe b_;
  double start_t_ = 0.0;
  double length_ = 0.0;
  Vec3 axis_ = Vec3::UnitX();
  double bend_angle_ = 0.0;
  double twist_angle_ = 0.0;
  Vec3 bound_center_ = Vec3::Zero();
  double bound_radius_ = 0.0;
};

/// Keyframed cylindrical deformation. A value type: edits return new rigs.
class DeformationRig {
 public:
  /// Validates frames (orthonormal within 1e-6, det +1), extents (> 0),
  /// distinct consecutive positions and non-antipodal consecutive normals.
  explicit DeformationRig(std::vector<Keyframe> keyframes);

  [[nodiscard]] const std::vector<Keyframe>& keyframes() const { return keyframes_; }
  [[nodiscard]] std::size_t size() const { return keyframes_.size(); }
  /// d(e_i): arclength from the first keyframe.
  [[nodiscard]] std::span<const double> cumulative_arclength() const { return cumulative_; }
  [[nodiscard]] double length() const { return cumulative_.back(); }
  [[nodiscard]] const RigSegment& segment(std::size_t k) const { return segments_[k]; }
  [[nodiscard]] const std::vector<RigSegment>& segments() const { return segments_; }
  [[nodiscard]] double max_rx() const;
  [[nodiscard]] double max_ry() const;

 private:
  std::vector<Keyframe> keyframes_;
  std::vector<double> cumulative_;
  std::vector<RigSegment> segments_;
};

/// Greatest k with d(e_k) ≤ t (t = length maps to the last segment, λ = 1).
/// Throws OutOfRange outside [0, length].
[[nodiscard]] SegmentPosition segment_lookup(const DeformationRig& rig, double t);
[[nodiscard]] Vec3 eval_curve(const DeformationRig& rig, double t);
[[nodiscard]] Frame eval_frame(const DeformationRig& rig, double t);
/// Linearly interpolated cage half widths (rx, ry).
[[nodiscard]] std::pair<double, double> eval_extent(const DeformationRig& rig, double t);

/// Splits prisms at the middle skeleton vertex until every skeleton vertex
/// lies inside some prism of half width r. Extents start at (r, r).
[[nodiscard]] DeformationRig reduce_keyframes(const FramedPolyline& skeleton, double r);

struct InsertKeyframe {
  double t = 0.0;
};
struct RemoveKeyframe {
  std::size_t index = 0;
};
/// Rotates u and v about n by `angle` radians.
struct RotateKeyframe {
  std::size_t index = 0;
  double angle = 0.0;
};
/// Moves e_i by dx·u_i + dy·v_i.
struct MoveKeyframe {
  std::size_t index = 0;
  double dx = 0.0;
  double dy = 0.0;
};
struct ResizeKeyframe {
  std::size_t index = 0;
  double rx = 1.0;
  double ry = 1.0;
};

using RigEdit = std::variant<InsertKeyframe, RemoveKeyframe, RotateKeyframe, MoveKeyframe, ResizeKeyframe>;

[[nodiscard]] DeformationRig apply_edit(const DeformationRig& rig, const RigEdit& edit);

/// Index of the keyframe sitting at parameter t (within 1e-9), if any.
[[nodiscard]] std::optional<std::size_t> keyframe_at(const DeformationRig& rig, double t);

[[nodiscard]] nlohmann::json rig_to_json(const DeformationRig& rig);
/// Throws SchemaInvalid for malformed documents and InvalidRig/AntipodalNormals
/// for rigs that break invariants.
[[nodiscard]] DeformationRig rig_from_json(const nlohmann::json& j);

/// {"op": "insert", "t": …} and friends; same field names as the HTTP bodies.
[[nodiscard]] nlohmann::json edit_to_json(const RigEdit& edit);
[[nodiscard]] RigEdit edit_from_json(const nlohmann::json& j);

}  // namespace unbend
