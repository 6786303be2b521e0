#include "unbend/pipeline.hpp"

#include <cstdlib>
#include <limits>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "unbend/error.hpp"

namespace unbend {

namespace {

// Label of the occupied voxel nearest to p.
int component_at(const GridGeometry& g, const ComponentLabels& labels, const Vec3& p) {
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  std::size_t idx = 0;
  for (int k = 0; k < g.dims[2]; ++k)
    for (int j = 0; j < g.dims[1]; ++j)
      for (int i = 0; i < g.dims[0]; ++i, ++idx) {
        if (labels.labels[idx] < 0) continue;
        const double d = (g.voxel_center(i, j, k) - p).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = labels.labels[idx];
        }
      }
  return best;
}

}  // namespace

nlohmann::json endpoints_to_json(const EndpointSelection& e) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : e.points) pts.push_back({p.x(), p.y(), p.z()});
  return {{"points", pts}};
}

EndpointSelection endpoints_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("points") || !j.at("points").is_array())
    throw Error(ErrorCode::SchemaInvalid, "endpoints need a 'points' array");
  EndpointSelection out;
  for (const auto& p : j.at("points")) {
    if (!p.is_array() || p.size() != 3 || !p[0].is_number() || !p[1].is_number() || !p[2].is_number())
      throw Error(ErrorCode::SchemaInvalid, "each endpoint must be [x, y, z]");
    out.points.emplace_back(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
  }
  if (out.points.size() < 2 || out.points.size() % 2 != 0)
    throw Error(ErrorCode::SchemaInvalid, "endpoints come in head/tail pairs");
  return out;
}

FramedPolyline extract_skeleton(const ScalarVolume& vol, const EndpointSelection& endpoints, const PipelineOptions& options) {
  const auto& pts = endpoints.points;
  if (pts.size() < 2 || pts.size() % 2 != 0)
    throw Error(ErrorCode::InvalidArgument, "endpoints come in head/tail pairs");
  const OccupancyMask mask = threshold_occupancy(vol, options.tau);
  const GridGeometry& g = vol.geometry();

  if (pts.size() == 2) {
    const auto [connected, steps] = dilate_until_connected(mask);
    (void)steps;
    return extract_component_skeleton(g, connected, pts[0], pts[1], options.skeleton);
  }

  const ComponentLabels labels = label_components(mask.dims(), mask.bits());
  std::vector<FramedPolyline> parts;
  for (std::size_t p = 0; p < pts.size(); p += 2) {
    const int head = component_at(g, labels, pts[p]);
    const int tail = component_at(g, labels, pts[p + 1]);
    if (head != tail)
      throw Error(ErrorCode::InvalidArgument, "endpoint pair " + std::to_string(p / 2) + " spans two components");
    parts.push_back(extract_component_skeleton(g, component_mask(mask.dims(), labels, head), pts[p], pts[p + 1], options.skeleton));
  }
  return merge_component_skeletons(parts);
}

DeformationRig fit_rig(const FramedPolyline& skeleton, const Vec3& spacing, const PipelineOptions& options) {
  DeformationRig rig = reduce_keyframes(skeleton, options.prism_radius * spacing.minCoeff());
  if (!options.extent) return rig;
  auto keys = rig.keyframes();
  for (auto& k : keys) k.rx = k.ry = *options.extent;
  return DeformationRig(std::move(keys));
}

PipelineResult run_pipeline(const ScalarVolume& vol, const EndpointSelection& endpoints, const PipelineOptions& options,
                            const std::optional<StraightVolumeSpec>& spec) {
  FramedPolyline skeleton = extract_skeleton(vol, endpoints, options);
  DeformationRig rig = fit_rig(skeleton, vol.spacing(), options);
  ScalarVolume straight = straighten(rig, vol, spec ? *spec : default_spec(rig, vol.spacing()));
  return PipelineResult{std::move(skeleton), std::move(rig), std::move(straight)};
}

int apply_thread_limit_from_env() {
  const char* env = std::getenv("UNBEND_THREADS");
  if (!env || !*env) return 0;
  int n = 0;
  try {
    n = std::stoi(env);
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidArgument, std::string("UNBEND_THREADS is not an integer: ") + env);
  }
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "UNBEND_THREADS must be at least 1");
#ifdef _OPENMP
  omp_set_num_threads(n);
#endif
  return n;
}

}  // namespace unbend
