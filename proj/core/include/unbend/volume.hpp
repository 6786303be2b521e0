#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "unbend/geometry.hpp"

namespace unbend {

/// Voxel counts per axis.
using Dims = std::array<int, 3>;

[[nodiscard]] inline std::size_t voxel_count(const Dims& d) {
  return static_cast<std::size_t>(d[0]) * static_cast<std::size_t>(d[1]) *
         static_cast<std::size_t>(d[2]);
}

/// Placement of a voxel grid in world space. Voxel (0,0,0) is centred at
/// `origin`; voxel (i,j,k) at origin + spacing ⊙ (i,j,k).
struct GridGeometry {
  Dims dims{1, 1, 1};
  Vec3 spacing = Vec3::Ones();
  Vec3 origin = Vec3::Zero();

  [[nodiscard]] Vec3 voxel_center(int i, int j, int k) const {
    return origin + spacing.cwiseProduct(Vec3(i, j, k));
  }
  /// Continuous voxel index of a world point.
  [[nodiscard]] Vec3 continuous_index(const Vec3& p) const {
    return (p - origin).cwiseQuotient(spacing);
  }
};

/// Dense scalar grid, x-fastest, values in [0, 1].
class ScalarVolume {
 public:
  ScalarVolume() = default;
  /// Zero-filled volume.
  explicit ScalarVolume(const GridGeometry& geometry);
  ScalarVolume(const GridGeometry& geometry, std::vector<float> data);

  [[nodiscard]] const GridGeometry& geometry() const { return geometry_; }
  [[nodiscard]] const Dims& dims() const { return geometry_.dims; }
  [[nodiscard]] const Vec3& spacing() const { return geometry_.spacing; }
  [[nodiscard]] const Vec3& origin() const { return geometry_.origin; }

  [[nodiscard]] std::span<const float> data() const { return data_; }
  [[nodiscard]] std::span<float> data() { return data_; }

  [[nodiscard]] std::size_t index(int i, int j, int k) const {
    const auto& d = geometry_.dims;
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(d[0]) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(d[1]) * static_cast<std::size_t>(k));
  }
  [[nodiscard]] float at(int i, int j, int k) const { return data_[index(i, j, k)]; }
  [[nodiscard]] float& at(int i, int j, int k) { return data_[index(i, j, k)]; }

  [[nodiscard]] Vec3 voxel_center(int i, int j, int k) const {
    return geometry_.voxel_center(i, j, k);
  }

 private:
  GridGeometry geometry_;
  std::vector<float> data_;
};

/// Binary occupancy with a cached count of 6-connected components.
class OccupancyMask {
 public:
  OccupancyMask() = default;
  OccupancyMask(const Dims& dims, std::vector<std::uint8_t> bits);

  [[nodiscard]] const Dims& dims() const { return dims_; }
  [[nodiscard]] std::span<const std::uint8_t> bits() const { return bits_; }
  [[nodiscard]] int component_count() const { return component_count_; }
  [[nodiscard]] std::size_t occupied_count() const;

  [[nodiscard]] std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims_[0]) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims_[1]) * static_cast<std::size_t>(k));
  }
  [[nodiscard]] bool occupied(int i, int j, int k) const { return bits_[index(i, j, k)] != 0; }

 private:
  Dims dims_{0, 0, 0};
  std::vector<std::uint8_t> bits_;
  int component_count_ = 0;
};

/// Per-voxel 6-connected component labels: -1 for empty voxels, else 0..count-1.
struct ComponentLabels {
  std::vector<std::int32_t> labels;
  int count = 0;
};

[[nodiscard]] ComponentLabels label_components(const Dims& dims, std::span<const std::uint8_t> bits);

enum class ScalarType { U8, U16, F32 };

/// Reads a raw little-endian voxel file described by a JSON sidecar
/// {"dims","spacing","origin"?,"dtype"} and normalizes by the type's range.
[[nodiscard]] ScalarVolume load_volume(const std::filesystem::path& data_path,
                                       const std::filesystem::path& meta_path);

/// Writes `vol` as f32 little-endian raw plus sidecar. Reloads bit-exactly.
void export_volume(const ScalarVolume& vol, const std::filesystem::path& data_path,
                   const std::filesystem::path& meta_path);

/// Writes raw data in the given type (values quantized by the type's range).
void write_volume(const ScalarVolume& vol, ScalarType type, const std::filesystem::path& data_path,
                  const std::filesystem::path& meta_path);

/// Trilinear interpolation between voxel centres; 0 outside the centre lattice.
[[nodiscard]] double trilinear_sample(const ScalarVolume& vol, const Vec3& p);

/// Like trilinear_sample, but every point inside the box covered by the voxel
/// cells (centres ± half a voxel) is clamped onto the centre lattice. Points
/// outside the cell box return 0.
[[nodiscard]] double trilinear_sample_clamped(const ScalarVolume& vol, const Vec3& p);

/// Catmull-Rom tricubic over the 4x4x4 neighbourhood (indices clamped at the
/// border), limited to the range of those 64 samples. Same cell-box rule as
/// trilinear_sample_clamped. Reproduces voxel values at voxel centres.
[[nodiscard]] double cubic_sample_clamped(const ScalarVolume& vol, const Vec3& p);

/// Smallest uniform integer factor f with ceil(n/f) voxel product ≤ budget.
[[nodiscard]] int downsample_factor(const Dims& dims, std::size_t voxel_budget);

/// Mean pooling by the smallest uniform factor that meets the budget.
[[nodiscard]] ScalarVolume downsample(const ScalarVolume& vol, std::size_t voxel_budget);
[[nodiscard]] ScalarVolume downsample_by(const ScalarVolume& vol, int factor);

/// Occupied iff value > tau.
[[nodiscard]] OccupancyMask threshold_occupancy(const ScalarVolume& vol, double tau);

/// One 6-neighbourhood binary dilation step.
[[nodiscard]] OccupancyMask dilate(const OccupancyMask& mask);

/// Dilates until a single component remains. Returns the mask and the number
/// of dilation steps taken.
[[nodiscard]] std::pair<OccupancyMask, int> dilate_until_connected(const OccupancyMask& mask);

/// Mask of one labelled component.
[[nodiscard]] OccupancyMask component_mask(const Dims& dims, const ComponentLabels& labels, int component);

/// Logical-or pooling by an integer factor. Keeps thin structures connected.
[[nodiscard]] OccupancyMask downsample_mask(const OccupancyMask& mask, int factor);

}  // namespace unbend
