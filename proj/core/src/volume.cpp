#include "unbend/volume.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <queue>
#include <sstream>

#include "unbend/error.hpp"

namespace unbend {

namespace {

using nlohmann::json;

bool valid_dims(const Dims& d) { return d[0] > 0 && d[1] > 0 && d[2] > 0; }

void check_geometry(const GridGeometry& g) {
  if (!valid_dims(g.dims)) throw Error(ErrorCode::InvalidArgument, "volume dims must be positive");
  if (!(g.spacing.array() > 0.0).all() || !g.spacing.allFinite())
    throw Error(ErrorCode::InvalidArgument, "volume spacing must be positive");
  if (!g.origin.allFinite()) throw Error(ErrorCode::InvalidArgument, "volume origin must be finite");
}

std::size_t scalar_size(ScalarType t) {
  switch (t) {
    case ScalarType::U8: return 1;
    case ScalarType::U16: return 2;
    case ScalarType::F32: return 4;
  }
  return 0;
}

const char* scalar_name(ScalarType t) {
  switch (t) {
    case ScalarType::U8: return "u8";
    case ScalarType::U16: return "u16";
    case ScalarType::F32: return "f32";
  }
  return "";
}

template <typename T>
T load_le(const unsigned char* p) {
  T value;
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(&value, p, sizeof(T));
  } else {
    unsigned char swapped[sizeof(T)];
    for (std::size_t b = 0; b < sizeof(T); ++b) swapped[b] = p[sizeof(T) - 1 - b];
    std::memcpy(&value, swapped, sizeof(T));
  }
  return value;
}

template <typename T>
void store_le(T value, unsigned char* p) {
  std::memcpy(p, &value, sizeof(T));
  if constexpr (std::endian::native != std::endian::little) std::reverse(p, p + sizeof(T));
}

Vec3 read_vec3(const json& meta, const char* key) {
  const auto& a = meta.at(key);
  if (!a.is_array() || a.size() != 3) throw Error(ErrorCode::MetadataMissing, std::string("sidecar key '") + key + "' must be a 3-array");
  return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}

json sidecar(const GridGeometry& g, ScalarType t) {
  json meta;
  meta["dims"] = {g.dims[0], g.dims[1], g.dims[2]};
  meta["spacing"] = {g.spacing.x(), g.spacing.y(), g.spacing.z()};
  meta["origin"] = {g.origin.x(), g.origin.y(), g.origin.z()};
  meta["dtype"] = scalar_name(t);
  return meta;
}

}  // namespace

ScalarVolume::ScalarVolume(const GridGeometry& geometry)
    : ScalarVolume(geometry, std::vector<float>(voxel_count(geometry.dims), 0.0f)) {}

ScalarVolume::ScalarVolume(const GridGeometry& geometry, std::vector<float> data)
    : geometry_(geometry), data_(std::move(data)) {
  check_geometry(geometry_);
  if (data_.size() != voxel_count(geometry_.dims))
    throw Error(ErrorCode::SizeMismatch, "volume data length does not match dims");
}

OccupancyMask::OccupancyMask(const Dims& dims, std::vector<std::uint8_t> bits)
    : dims_(dims), bits_(std::move(bits)) {
  if (!valid_dims(dims_)) throw Error(ErrorCode::InvalidArgument, "mask dims must be positive");
  if (bits_.size() != voxel_count(dims_)) throw Error(ErrorCode::SizeMismatch, "mask length does not match dims");
  component_count_ = label_components(dims_, bits_).count;
}

std::size_t OccupancyMask::occupied_count() const {
  return static_cast<std::size_t>(std::count_if(bits_.begin(), bits_.end(), [](auto b) { return b != 0; }));
}

ComponentLabels label_components(const Dims& dims, std::span<const std::uint8_t> bits) {
  ComponentLabels out;
  out.labels.assign(bits.size(), -1);
  const std::size_t sx = 1;
  const std::size_t sy = static_cast<std::size_t>(dims[0]);
  const std::size_t sz = sy * static_cast<std::size_t>(dims[1]);
  std::vector<std::size_t> stack;
  for (std::size_t seed = 0; seed < bits.size(); ++seed) {
    if (!bits[seed] || out.labels[seed] >= 0) continue;
    const int label = out.count++;
    out.labels[seed] = label;
    stack.push_back(seed);
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      const int i = static_cast<int>(v % sy);
      const int j = static_cast<int>((v / sy) % static_cast<std::size_t>(dims[1]));
      const int k = static_cast<int>(v / sz);
      auto visit = [&](bool inside, std::size_t w) {
        if (inside && bits[w] && out.labels[w] < 0) {
          out.labels[w] = label;
          stack.push_back(w);
        }
      };
      visit(i > 0, v - sx);
      visit(i + 1 < dims[0], v + sx);
      visit(j > 0, v - sy);
      visit(j + 1 < dims[1], v + sy);
      visit(k > 0, v - sz);
      visit(k + 1 < dims[2], v + sz);
    }
  }
  return out;
}

ScalarVolume load_volume(const std::filesystem::path& data_path, const std::filesystem::path& meta_path) {
  std::ifstream meta_in(meta_path);
  if (!meta_in) throw Error(ErrorCode::MetadataMissing, "cannot open sidecar " + meta_path.string());
  json meta;
  try {
    meta = json::parse(meta_in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MetadataMissing, "sidecar is not valid JSON: " + std::string(e.what()));
  }

  GridGeometry g;
  ScalarType type{};
  try {
    for (const char* key : {"dims", "spacing", "dtype"})
      if (!meta.contains(key)) throw Error(ErrorCode::MetadataMissing, std::string("sidecar lacks '") + key + "'");
    const auto& d = meta.at("dims");
    if (!d.is_array() || d.size() != 3) throw Error(ErrorCode::MetadataMissing, "sidecar 'dims' must be a 3-array");
    g.dims = {d[0].get<int>(), d[1].get<int>(), d[2].get<int>()};
    g.spacing = read_vec3(meta, "spacing");
    if (meta.contains("origin")) g.origin = read_vec3(meta, "origin");
    if (meta.contains("endianness") && meta.at("endianness").get<std::string>() != "little")
      throw Error(ErrorCode::UnsupportedScalarType, "only little-endian data is supported");
    const auto dtype = meta.at("dtype").get<std::string>();
    if (dtype == "u8") type = ScalarType::U8;
    else if (dtype == "u16") type = ScalarType::U16;
    else if (dtype == "f32") type = ScalarType::F32;
    else throw Error(ErrorCode::UnsupportedScalarType, "unsupported dtype '" + dtype + "'");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MetadataMissing, "malformed sidecar: " + std::string(e.what()));
  }
  if (!valid_dims(g.dims)) throw Error(ErrorCode::MetadataMissing, "sidecar dims must be positive");
  if (!(g.spacing.array() > 0.0).all()) throw Error(ErrorCode::MetadataMissing, "sidecar spacing must be positive");

  std::ifstream in(data_path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + data_path.string());
  std::vector<unsigned char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t n = voxel_count(g.dims);
  const std::size_t width = scalar_size(type);
  if (raw.size() != n * width) {
    std::ostringstream msg;
    msg << data_path.string() << ": expected " << n * width << " bytes, found " << raw.size();
    throw Error(ErrorCode::SizeMismatch, msg.str());
  }

  std::vector<float> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned char* p = raw.data() + i * width;
    switch (type) {
      case ScalarType::U8: data[i] = static_cast<float>(p[0] / 255.0); break;
      case ScalarType::U16: data[i] = static_cast<float>(load_le<std::uint16_t>(p) / 65535.0); break;
      case ScalarType::F32: {
        const float f = load_le<float>(p);
        data[i] = std::isfinite(f) ? std::clamp(f, 0.0f, 1.0f) : 0.0f;
        break;
      }
    }
  }
  return ScalarVolume(g, std::move(data));
}

void write_volume(const ScalarVolume& vol, ScalarType type, const std::filesystem::path& data_path,
                  const std::filesystem::path& meta_path) {
  const auto values = vol.data();
  const std::size_t width = scalar_size(type);
  std::vector<unsigned char> raw(values.size() * width);
  for (std::size_t i = 0; i < values.size(); ++i) {
    unsigned char* p = raw.data() + i * width;
    const double v = std::clamp(static_cast<double>(values[i]), 0.0, 1.0);
    switch (type) {
      case ScalarType::U8: p[0] = static_cast<unsigned char>(std::lround(v * 255.0)); break;
      case ScalarType::U16: store_le(static_cast<std::uint16_t>(std::lround(v * 65535.0)), p); break;
      case ScalarType::F32: store_le(values[i], p); break;
    }
  }
  std::ofstream out(data_path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + data_path.string());
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "short write to " + data_path.string());

  std::ofstream meta_out(meta_path, std::ios::trunc);
  if (!meta_out) throw Error(ErrorCode::IoFailure, "cannot write " + meta_path.string());
  meta_out << sidecar(vol.geometry(), type).dump(2) << '\n';
  if (!meta_out) throw Error(ErrorCode::IoFailure, "short write to " + meta_path.string());
}

void export_volume(const ScalarVolume& vol, const std::filesystem::path& data_path,
                   const std::filesystem::path& meta_path) {
  write_volume(vol, ScalarType::F32, data_path, meta_path);
}

namespace {

double interpolate(const ScalarVolume& vol, const Vec3& q) {
  const auto& d = vol.dims();
  int base[3];
  double frac[3];
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 1) {
      base[a] = 0;
      frac[a] = 0.0;
      continue;
    }
    const int b = std::min(static_cast<int>(std::floor(q[a])), d[a] - 2);
    base[a] = b;
    frac[a] = q[a] - b;
  }
  const int i1 = d[0] > 1 ? base[0] + 1 : base[0];
  const int j1 = d[1] > 1 ? base[1] + 1 : base[1];
  const int k1 = d[2] > 1 ? base[2] + 1 : base[2];
  const double fx = frac[0], fy = frac[1], fz = frac[2];
  const double c00 = vol.at(base[0], base[1], base[2]) * (1 - fx) + vol.at(i1, base[1], base[2]) * fx;
  const double c10 = vol.at(base[0], j1, base[2]) * (1 - fx) + vol.at(i1, j1, base[2]) * fx;
  const double c01 = vol.at(base[0], base[1], k1) * (1 - fx) + vol.at(i1, base[1], k1) * fx;
  const double c11 = vol.at(base[0], j1, k1) * (1 - fx) + vol.at(i1, j1, k1) * fx;
  const double c0 = c00 * (1 - fy) + c10 * fy;
  const double c1 = c01 * (1 - fy) + c11 * fy;
  return c0 * (1 - fz) + c1 * fz;
}

}  // namespace

double trilinear_sample(const ScalarVolume& vol, const Vec3& p) {
  const Vec3 q = vol.geometry().continuous_index(p);
  const auto& d = vol.dims();
  for (int a = 0; a < 3; ++a) {
    if (!(q[a] >= 0.0 && q[a] <= d[a] - 1)) return 0.0;
  }
  return interpolate(vol, q);
}

double trilinear_sample_clamped(const ScalarVolume& vol, const Vec3& p) {
  Vec3 q = vol.geometry().continuous_index(p);
  const auto& d = vol.dims();
  for (int a = 0; a < 3; ++a) {
    if (!(q[a] >= -0.5 && q[a] <= d[a] - 0.5)) return 0.0;
    q[a] = std::clamp(q[a], 0.0, static_cast<double>(d[a] - 1));
  }
  return interpolate(vol, q);
}

double cubic_sample_clamped(const ScalarVolume& vol, const Vec3& p) {
  const Vec3 q = vol.geometry().continuous_index(p);
  const auto& d = vol.dims();
  std::array<std::array<int, 4>, 3> idx{};
  std::array<std::array<double, 4>, 3> w{};
  for (int a = 0; a < 3; ++a) {
    if (!(q[a] >= -0.5 && q[a] <= d[a] - 0.5)) return 0.0;
    const double c = std::clamp(q[a], 0.0, static_cast<double>(d[a] - 1));
    const int b = static_cast<int>(std::floor(c));
    const double t = c - b;
    w[a] = {((-0.5 * t + 1.0) * t - 0.5) * t, (1.5 * t - 2.5) * t * t + 1.0, ((-1.5 * t + 2.0) * t + 0.5) * t,
            (0.5 * t - 0.5) * t * t};
    for (int o = 0; o < 4; ++o) idx[a][o] = std::clamp(b - 1 + o, 0, d[a] - 1);
  }
  double sum = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int z = 0; z < 4; ++z)
    for (int y = 0; y < 4; ++y) {
      const double wzy = w[2][z] * w[1][y];
      for (int x = 0; x < 4; ++x) {
        const double v = vol.at(idx[0][x], idx[1][y], idx[2][z]);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        sum += wzy * w[0][x] * v;
      }
    }
  return std::clamp(sum, lo, hi);
}

int downsample_factor(const Dims& dims, std::size_t voxel_budget) {
  if (voxel_budget < 8) throw Error(ErrorCode::InvalidArgument, "voxel budget must be at least 8");
  for (int f = 1;; ++f) {
    std::size_t total = 1;
    for (int a = 0; a < 3; ++a) total *= static_cast<std::size_t>((dims[a] + f - 1) / f);
    if (total <= voxel_budget) return f;
  }
}

ScalarVolume downsample_by(const ScalarVolume& vol, int f) {
  if (f < 1) throw Error(ErrorCode::InvalidArgument, "downsample factor must be positive");
  if (f == 1) return vol;
  const auto& d = vol.dims();
  GridGeometry g;
  for (int a = 0; a < 3; ++a) g.dims[a] = (d[a] + f - 1) / f;
  g.spacing = vol.spacing() * f;
  g.origin = vol.origin() + vol.spacing() * (0.5 * (f - 1));
  ScalarVolume out(g);
  for (int k = 0; k < g.dims[2]; ++k)
    for (int j = 0; j < g.dims[1]; ++j)
      for (int i = 0; i < g.dims[0]; ++i) {
        double sum = 0.0;
        int count = 0;
        for (int kk = k * f; kk < std::min(d[2], (k + 1) * f); ++kk)
          for (int jj = j * f; jj < std::min(d[1], (j + 1) * f); ++jj)
            for (int ii = i * f; ii < std::min(d[0], (i + 1) * f); ++ii) {
              sum += vol.at(ii, jj, kk);
              ++count;
            }
        out.at(i, j, k) = static_cast<float>(sum / count);
      }
  return out;
}

ScalarVolume downsample(const ScalarVolume& vol, std::size_t voxel_budget) {
  return downsample_by(vol, downsample_factor(vol.dims(), voxel_budget));
}

OccupancyMask threshold_occupancy(const ScalarVolume& vol, double tau) {
  const auto values = vol.data();
  std::vector<std::uint8_t> bits(values.size());
  bool any = false;
  for (std::size_t i = 0; i < values.size(); ++i) {
    bits[i] = values[i] > tau ? 1 : 0;
    any = any || bits[i];
  }
  if (!any) throw Error(ErrorCode::EmptyMask, "no voxel exceeds the threshold");
  return OccupancyMask(vol.dims(), std::move(bits));
}

OccupancyMask dilate(const OccupancyMask& mask) {
  const auto& d = mask.dims();
  const auto src = mask.bits();
  std::vector<std::uint8_t> out(src.begin(), src.end());
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i) {
        if (src[mask.index(i, j, k)]) continue;
        const bool hit = (i > 0 && mask.occupied(i - 1, j, k)) || (i + 1 < d[0] && mask.occupied(i + 1, j, k)) ||
                         (j > 0 && mask.occupied(i, j - 1, k)) || (j + 1 < d[1] && mask.occupied(i, j + 1, k)) ||
                         (k > 0 && mask.occupied(i, j, k - 1)) || (k + 1 < d[2] && mask.occupied(i, j, k + 1));
        if (hit) out[mask.index(i, j, k)] = 1;
      }
  return OccupancyMask(d, std::move(out));
}

std::pair<OccupancyMask, int> dilate_until_connected(const OccupancyMask& mask) {
  if (mask.component_count() == 0) throw Error(ErrorCode::EmptyMask, "cannot connect an empty mask");
  const auto& d = mask.dims();
  const int budget = std::max({d[0], d[1], d[2]});
  OccupancyMask current = mask;
  int steps = 0;
  while (current.component_count() > 1) {
    if (steps >= budget)
      throw Error(ErrorCode::DilationBudgetExceeded, "components still disjoint after " + std::to_string(steps) + " dilations");
    current = dilate(current);
    ++steps;
  }
  return {std::move(current), steps};
}

OccupancyMask component_mask(const Dims& dims, const ComponentLabels& labels, int component) {
  std::vector<std::uint8_t> bits(labels.labels.size());
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = labels.labels[i] == component ? 1 : 0;
  return OccupancyMask(dims, std::move(bits));
}

OccupancyMask downsample_mask(const OccupancyMask& mask, int f) {
  if (f < 1) throw Error(ErrorCode::InvalidArgument, "downsample factor must be positive");
  if (f == 1) return mask;
  const auto& d = mask.dims();
  Dims out_dims;
  for (int a = 0; a < 3; ++a) out_dims[a] = (d[a] + f - 1) / f;
  std::vector<std::uint8_t> bits(voxel_count(out_dims), 0);
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i)
        if (mask.occupied(i, j, k)) {
          const std::size_t o = static_cast<std::size_t>(i / f) +
                                static_cast<std::size_t>(out_dims[0]) *
                                    (static_cast<std::size_t>(j / f) + static_cast<std::size_t>(out_dims[1]) * static_cast<std::size_t>(k / f));
          bits[o] = 1;
        }
  return OccupancyMask(out_dims, std::move(bits));
}

}  // namespace unbend
