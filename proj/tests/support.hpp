#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>

#include "unbend/volume.hpp"

namespace unbend::test {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("unbend-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  [[nodiscard]] const std::filesystem::path& path() const { return path_; }
  [[nodiscard]] std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

inline ScalarVolume volume_from(const Dims& dims, std::vector<float> data, const Vec3& spacing = Vec3::Ones(),
                                const Vec3& origin = Vec3::Zero()) {
  GridGeometry g;
  g.dims = dims;
  g.spacing = spacing;
  g.origin = origin;
  return ScalarVolume(g, std::move(data));
}

inline OccupancyMask mask_from(const Dims& dims, const std::vector<std::array<int, 3>>& voxels) {
  std::vector<std::uint8_t> bits(voxel_count(dims), 0);
  for (const auto& v : voxels)
    bits[static_cast<std::size_t>(v[0]) + static_cast<std::size_t>(dims[0]) * (v[1] + static_cast<std::size_t>(dims[1]) * v[2])] = 1;
  return OccupancyMask(dims, std::move(bits));
}

/// Random 6-connected blob grown from the centre of `dims`.
inline OccupancyMask random_connected_mask(const Dims& dims, int voxels, std::mt19937& rng) {
  std::vector<std::array<int, 3>> cells{{dims[0] / 2, dims[1] / 2, dims[2] / 2}};
  std::vector<std::uint8_t> bits(voxel_count(dims), 0);
  auto idx = [&](const std::array<int, 3>& c) {
    return static_cast<std::size_t>(c[0]) + static_cast<std::size_t>(dims[0]) * (c[1] + static_cast<std::size_t>(dims[1]) * c[2]);
  };
  bits[idx(cells[0])] = 1;
  const int steps[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  while (static_cast<int>(cells.size()) < voxels) {
    const auto from = cells[std::uniform_int_distribution<std::size_t>(0, cells.size() - 1)(rng)];
    const auto* s = steps[std::uniform_int_distribution<int>(0, 5)(rng)];
    const std::array<int, 3> c{from[0] + s[0], from[1] + s[1], from[2] + s[2]};
    bool inside = true;
    for (int a = 0; a < 3; ++a) inside = inside && c[a] >= 0 && c[a] < dims[a];
    if (!inside || bits[idx(c)]) continue;
    bits[idx(c)] = 1;
    cells.push_back(c);
  }
  return OccupancyMask(dims, std::move(bits));
}

}  // namespace unbend::test
