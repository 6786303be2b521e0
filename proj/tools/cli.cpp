#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include "unbend/deform.hpp"
#include "unbend/error.hpp"
#include "unbend/service.hpp"
#include "unbend/session.hpp"

namespace unbend::cli {

namespace fs = std::filesystem;

namespace {

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::SchemaInvalid, path.string() + " is not valid JSON: " + e.what());
  }
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

fs::path meta_for(const fs::path& data) {
  fs::path meta = data;
  meta.replace_extension(".json");
  if (meta == data) throw Error(ErrorCode::InvalidArgument, "output data path must not end in .json");
  return meta;
}

Vec3 expand3(const std::vector<double>& v) {
  if (v.size() == 1) return Vec3::Constant(v[0]);
  return Vec3(v[0], v[1], v[2]);
}

void add_pipeline_flags(CLI::App* sub, CliState& s) {
  sub->add_option("--tau", s.pipeline.tau, "occupancy threshold on normalized values")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  sub->add_option("--k", s.pipeline.skeleton.level_sets, "number of harmonic level sets")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--s", s.pipeline.skeleton.smoothing_iterations, "skeleton smoothing iterations")->capture_default_str()->check(CLI::NonNegativeNumber);
  sub->add_option("--r", s.pipeline.prism_radius, "keyframe prism half width in voxel widths")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--budget", s.pipeline.skeleton.vertex_budget, "tetrahedral mesh vertex budget")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--extent", s.extent, "override every keyframe half width (world units)")->check(CLI::PositiveNumber);
}

void add_seed(CLI::App* sub, CliState& s) {
  sub->add_option("--seed", s.seed, "reserved; no operation is randomized")->capture_default_str();
}

PipelineOptions pipeline_of(const CliState& s) {
  PipelineOptions p = s.pipeline;
  p.extent = s.extent;
  return p;
}

int run_straighten(const CliState& s, std::ostream& out) {
  const ScalarVolume vol = load_volume(s.inputs[0], s.inputs[1]);
  const EndpointSelection endpoints = endpoints_from_json(read_json(s.inputs[2]));
  const PipelineOptions options = pipeline_of(s);
  const FramedPolyline skel = extract_skeleton(vol, endpoints, options);
  const DeformationRig rig = fit_rig(skel, vol.spacing(), options);
  const Vec3 spacing = s.out_spacing.empty() ? vol.spacing() : expand3(s.out_spacing);
  StraightVolumeSpec spec = default_spec(rig, spacing);
  if (!s.dims.empty()) spec.out_dims = s.dims.size() == 1 ? Dims{s.dims[0], s.dims[0], s.dims[0]} : Dims{s.dims[0], s.dims[1], s.dims[2]};
  const ScalarVolume straight = straighten(rig, vol, spec);

  const fs::path dir(s.out);
  fs::create_directories(dir);
  export_volume(straight, dir / "straight.raw", dir / "straight.json");
  save_session(new_session(make_volume_ref(s.inputs[0], s.inputs[1]), endpoints, rig), dir / "session.json");
  const auto& d = straight.dims();
  out << nlohmann::json{{"keyframes", rig.size()},
                        {"length", rig.length()},
                        {"dims", {d[0], d[1], d[2]}},
                        {"volume", (dir / "straight.raw").string()},
                        {"session", (dir / "session.json").string()}}
             .dump()
      << '\n';
  return kExitOk;
}

int run_skeleton(const CliState& s, std::ostream& out) {
  const ScalarVolume vol = load_volume(s.inputs[0], s.inputs[1]);
  const EndpointSelection endpoints = endpoints_from_json(read_json(s.inputs[2]));
  const FramedPolyline skel = extract_skeleton(vol, endpoints, pipeline_of(s));
  const nlohmann::json j = skeleton_to_json(skel);
  if (s.out.empty()) {
    out << j.dump() << '\n';
  } else {
    write_json(s.out, j);
    out << nlohmann::json{{"vertices", skel.vertices.size()}, {"length", skel.length()}, {"path", s.out}}.dump() << '\n';
  }
  return kExitOk;
}

int run_synth(const CliState& s, std::ostream& out) {
  CylinderSpec spec = s.cylinder;
  if (!s.dims.empty()) spec.dims = s.dims.size() == 1 ? Dims{s.dims[0], s.dims[0], s.dims[0]} : Dims{s.dims[0], s.dims[1], s.dims[2]};
  if (!s.out_spacing.empty()) spec.spacing = expand3(s.out_spacing);
  const SynthResult r = make_bent_cylinder(spec);

  const fs::path dir(s.out);
  fs::create_directories(dir);
  export_volume(r.bent, dir / "bent.raw", dir / "bent.json");
  export_volume(r.straight, dir / "straight.raw", dir / "straight.json");
  write_json(dir / "rig.json", rig_to_json(r.true_rig));
  const SineAxis axis(spec);
  const nlohmann::json spec_json{{"radius", spec.radius},
                                 {"length", axis.length()},
                                 {"amplitude", spec.amplitude},
                                 {"periods", spec.periods},
                                 {"dims", {spec.dims[0], spec.dims[1], spec.dims[2]}},
                                 {"spacing", {spec.spacing.x(), spec.spacing.y(), spec.spacing.z()}},
                                 {"margin", spec.margin}};
  write_json(dir / "spec.json", spec_json);
  const nlohmann::json endpoints = endpoints_to_json(EndpointSelection{{axis.point(0.0), axis.point(axis.length())}});
  write_json(dir / "endpoints.json", endpoints);
  out << nlohmann::json{{"bent", (dir / "bent.raw").string()},
                        {"straight", (dir / "straight.raw").string()},
                        {"rig", (dir / "rig.json").string()},
                        {"spec", spec_json}}
             .dump()
      << '\n';
  return kExitOk;
}

int run_eval(const CliState& s, std::ostream& out) {
  const ScalarVolume a = load_volume(s.inputs[0], s.inputs[1]);
  const ScalarVolume b = load_volume(s.inputs[2], s.inputs[3]);
  out << nlohmann::json{{"normalized_l2", normalized_l2(a, b)}}.dump() << '\n';
  return kExitOk;
}

int run_bend(const CliState& s, std::ostream& out) {
  const ScalarVolume straight = load_volume(s.inputs[0], s.inputs[1]);
  const DeformationRig rig = rig_from_json(read_json(s.inputs[2]));
  const Vec3 spacing = s.out_spacing.empty() ? Vec3(straight.spacing().x(), straight.spacing().y(), straight.spacing().x())
                                             : expand3(s.out_spacing);
  GridGeometry target = default_bend_geometry(rig, spacing);
  if (!s.dims.empty()) {
    target.dims = s.dims.size() == 1 ? Dims{s.dims[0], s.dims[0], s.dims[0]} : Dims{s.dims[0], s.dims[1], s.dims[2]};
    target.origin = Vec3::Zero();
  }
  const ScalarVolume bent = bend(rig, straight, target);
  const fs::path data(s.out);
  export_volume(bent, data, meta_for(data));
  const auto& d = bent.dims();
  out << nlohmann::json{{"volume", data.string()}, {"dims", {d[0], d[1], d[2]}}}.dump() << '\n';
  return kExitOk;
}

int run_serve(const CliState& s, std::ostream& out, std::ostream& err) {
  Session session = load_session(s.inputs[0]);
  for (const auto& w : session.warnings) err << "warning: " << w << '\n';
  ScalarVolume vol = load_volume(session.volume_ref.data_path, session.volume_ref.meta_path);
  const auto [host, port] = parse_bind_address(s.bind);
  ServiceOptions options;
  options.pipeline = pipeline_of(s);
  SessionService service(std::move(session), std::move(vol), options);
  const int bound = service.bind(host, port);
  out << "listening on http://" << host << ':' << bound << std::endl;
  service.run();
  return kExitOk;
}

}  // namespace

void configure(CLI::App& app, CliState& s) {
  app.description("Straighten curved tubular specimens in volumetric scans.");
  app.require_subcommand(1, 1);
  app.fallthrough(false);

  auto* straighten_cmd = app.add_subcommand("straighten", "volume + endpoints -> straight volume + session");
  straighten_cmd->add_option("inputs", s.inputs, "DATA META ENDPOINTS")->expected(3)->required();
  add_pipeline_flags(straighten_cmd, s);
  straighten_cmd->add_option("--out-spacing", s.out_spacing, "output spacing (1 or 3 values)")->expected(1, 3);
  straighten_cmd->add_option("--dims", s.dims, "output grid size; z is stretched to cover the rig (default: from spacing)")
      ->expected(1, 3)
      ->check(CLI::PositiveNumber);
  straighten_cmd->add_option("--out", s.out, "output directory")->required();
  add_seed(straighten_cmd, s);

  auto* skeleton_cmd = app.add_subcommand("skeleton", "volume + endpoints -> skeleton JSON");
  skeleton_cmd->add_option("inputs", s.inputs, "DATA META ENDPOINTS")->expected(3)->required();
  add_pipeline_flags(skeleton_cmd, s);
  skeleton_cmd->add_option("--out", s.out, "output JSON path (stdout if omitted)");
  add_seed(skeleton_cmd, s);

  auto* synth_cmd = app.add_subcommand("synth", "sine-bent cylinder with ground truth");
  synth_cmd->add_option("--dims", s.dims, "grid size (1 or 3 values)")->expected(1, 3)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--radius", s.cylinder.radius, "cylinder radius")->capture_default_str()->check(CLI::PositiveNumber);
  synth_cmd->add_option("--amplitude", s.cylinder.amplitude, "sine amplitude")->capture_default_str()->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--periods", s.cylinder.periods, "sine periods along the axis")->capture_default_str()->check(CLI::PositiveNumber);
  synth_cmd->add_option("--length", s.cylinder.length, "axial length (0 fills the grid)")->capture_default_str()->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--out-spacing", s.out_spacing, "voxel spacing (1 or 3 values)")->expected(1, 3);
  synth_cmd->add_option("--out", s.out, "output directory")->required();
  add_seed(synth_cmd, s);

  auto* eval_cmd = app.add_subcommand("eval", "normalized L2 of a volume against ground truth");
  eval_cmd->add_option("inputs", s.inputs, "DATA META TRUTH_DATA TRUTH_META")->expected(4)->required();
  add_seed(eval_cmd, s);

  auto* serve_cmd = app.add_subcommand("serve", "serve a session over HTTP");
  serve_cmd->add_option("inputs", s.inputs, "SESSION")->expected(1)->required();
  serve_cmd->add_option("--bind", s.bind, "host:port")->capture_default_str();
  add_pipeline_flags(serve_cmd, s);
  add_seed(serve_cmd, s);

  auto* bend_cmd = app.add_subcommand("bend", "straight volume + rig -> bent volume");
  bend_cmd->add_option("inputs", s.inputs, "DATA META RIG")->expected(3)->required();
  bend_cmd->add_option("--dims", s.dims, "output grid size with origin 0 (default: cage bounding box)")->expected(1, 3)->check(CLI::PositiveNumber);
  bend_cmd->add_option("--out-spacing", s.out_spacing, "output spacing (1 or 3 values)")->expected(1, 3);
  bend_cmd->add_option("--out", s.out, "output raw path; sidecar written next to it")->required();
  add_seed(bend_cmd, s);
}

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"unbend"};
  app.name("unbend");
  CliState state;
  configure(app, state);
  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    apply_thread_limit_from_env();
    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "straighten") return run_straighten(state, out);
    if (cmd == "skeleton") return run_skeleton(state, out);
    if (cmd == "synth") return run_synth(state, out);
    if (cmd == "eval") return run_eval(state, out);
    if (cmd == "bend") return run_bend(state, out);
    if (cmd == "serve") return run_serve(state, out, err);
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace unbend::cli
