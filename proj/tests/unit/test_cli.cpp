#include <doctest.h>

#include <sstream>

#include "cli.hpp"
#include "support.hpp"
#include "unbend/session.hpp"

using namespace unbend;
using unbend::test::TempDir;
using unbend::test::read_file;
using unbend::test::write_file;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "unbend");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

cli::CliState parse(std::vector<std::string> args) {
  CLI::App app;
  cli::CliState state;
  cli::configure(app, state);
  args.insert(args.begin(), "unbend");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  app.parse(static_cast<int>(argv.size()), argv.data());
  return state;
}

std::vector<std::string> synth_args(const TempDir& dir) {
  return {"synth", "--dims", "48", "--radius", "4", "--amplitude", "6", "--periods", "1", "--out", dir.path().string()};
}

}  // namespace

TEST_CASE("pipeline defaults") {
  const cli::CliState defaults = parse({"straighten", "a.raw", "a.json", "e.json", "--out", "o"});
  CHECK(defaults.pipeline.tau == 0.5);
  CHECK(defaults.pipeline.skeleton.level_sets == 100);
  CHECK(defaults.pipeline.skeleton.smoothing_iterations == 50);
  CHECK(defaults.pipeline.prism_radius == 10.0);
  CHECK_FALSE(defaults.extent.has_value());

  const cli::CliState explicit_flags =
      parse({"straighten", "a.raw", "a.json", "e.json", "--out", "o", "--tau", "0.5", "--k", "100", "--s", "50", "--r", "10"});
  CHECK(explicit_flags.pipeline.tau == defaults.pipeline.tau);
  CHECK(explicit_flags.pipeline.skeleton.level_sets == defaults.pipeline.skeleton.level_sets);
  CHECK(explicit_flags.pipeline.skeleton.smoothing_iterations == defaults.pipeline.skeleton.smoothing_iterations);
  CHECK(explicit_flags.pipeline.prism_radius == defaults.pipeline.prism_radius);

  const cli::CliState tuned = parse({"skeleton", "a.raw", "a.json", "e.json", "--k", "20", "--budget", "5000"});
  CHECK(tuned.pipeline.skeleton.level_sets == 20);
  CHECK(tuned.pipeline.skeleton.vertex_budget == 5000);
}

TEST_CASE("usage errors exit 2") {
  CHECK(run({}).code == cli::kExitUsage);
  const Run unknown = run({"eval", "a", "b", "c", "d", "--bogus"});
  CHECK(unknown.code == cli::kExitUsage);
  CHECK(unknown.err.find("--bogus") != std::string::npos);
  CHECK(run({"eval", "a", "b"}).code == cli::kExitUsage);
  CHECK(run({"frobnicate"}).code == cli::kExitUsage);
  CHECK(run({"straighten", "a", "b", "c", "--out", "o", "--tau", "2"}).code == cli::kExitUsage);
  CHECK(run({"synth", "--out", "o", "--radius", "-1"}).code == cli::kExitUsage);
  CHECK(run({"synth"}).code == cli::kExitUsage);
  CHECK(run({"--help"}).code == cli::kExitOk);
}

TEST_CASE("runtime errors exit 1") {
  TempDir dir;
  const Run missing = run({"eval", (dir / "a.raw").string(), (dir / "a.json").string(), (dir / "a.raw").string(),
                           (dir / "a.json").string()});
  CHECK(missing.code == cli::kExitRuntime);
  CHECK_FALSE(missing.err.empty());
  CHECK(run({"serve", (dir / "s.json").string()}).code == cli::kExitRuntime);

  const ScalarVolume a(GridGeometry{{2, 2, 2}, Vec3::Ones(), Vec3::Zero()}, std::vector<float>(8, 0.5f));
  const ScalarVolume b(GridGeometry{{2, 2, 3}, Vec3::Ones(), Vec3::Zero()}, std::vector<float>(12, 0.5f));
  export_volume(a, dir / "a.raw", dir / "a.json");
  export_volume(b, dir / "b.raw", dir / "b.json");
  CHECK(run({"eval", (dir / "a.raw").string(), (dir / "a.json").string(), (dir / "b.raw").string(), (dir / "b.json").string()})
            .code == cli::kExitRuntime);
  auto wide = synth_args(dir);
  wide[6] = "40";
  CHECK(run(wide).code == cli::kExitRuntime);
}

TEST_CASE("eval of a volume against itself") {
  TempDir dir;
  std::vector<float> data(60);
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<float>(i) / 60;
  export_volume(ScalarVolume(GridGeometry{{3, 4, 5}, Vec3::Ones(), Vec3::Zero()}, data), dir / "a.raw", dir / "a.json");
  const std::string raw = (dir / "a.raw").string(), meta = (dir / "a.json").string();
  const Run r = run({"eval", raw, meta, raw, meta});
  CHECK(r.code == cli::kExitOk);
  CHECK(r.out == "{\"normalized_l2\":0.0}\n");
}

TEST_CASE("synth writes artifacts whose spec round-trips") {
  TempDir dir;
  const Run r = run(synth_args(dir));
  REQUIRE(r.code == cli::kExitOk);
  CylinderSpec spec;
  spec.dims = {48, 48, 48};
  spec.radius = 4;
  spec.amplitude = 6;
  spec.periods = 1;
  const SynthResult want = make_bent_cylinder(spec);

  const auto spec_json = nlohmann::json::parse(read_file(dir / "spec.json"));
  CHECK(spec_json.at("radius") == 4.0);
  CHECK(spec_json.at("amplitude") == 6.0);
  CHECK(spec_json.at("periods") == 1.0);
  CHECK(spec_json.at("dims") == nlohmann::json::array({48, 48, 48}));
  CHECK(spec_json.at("length").get<double>() == doctest::Approx(SineAxis(spec).length()));

  const ScalarVolume bent = load_volume(dir / "bent.raw", dir / "bent.json");
  const ScalarVolume straight = load_volume(dir / "straight.raw", dir / "straight.json");
  CHECK(normalized_l2(bent, want.bent) == 0.0);
  CHECK(normalized_l2(straight, want.straight) == 0.0);
  CHECK(straight.geometry().spacing.z() == doctest::Approx(want.straight.spacing().z()));
  const DeformationRig rig = rig_from_json(nlohmann::json::parse(read_file(dir / "rig.json")));
  CHECK(rig_to_json(rig) == rig_to_json(want.true_rig));
  const EndpointSelection ends = endpoints_from_json(nlohmann::json::parse(read_file(dir / "endpoints.json")));
  CHECK(ends.points.size() == 2);

  // Rebuilding the spec from spec.json regenerates the same volume.
  CylinderSpec again;
  again.radius = spec_json.at("radius");
  again.length = spec_json.at("length");
  again.amplitude = spec_json.at("amplitude");
  again.periods = spec_json.at("periods");
  again.margin = spec_json.at("margin");
  again.dims = {spec_json["dims"][0], spec_json["dims"][1], spec_json["dims"][2]};
  CHECK(normalized_l2(make_bent_cylinder(again).bent, want.bent) == 0.0);
}

TEST_CASE("straighten, skeleton and bend end to end") {
  TempDir dir;
  REQUIRE(run(synth_args(dir)).code == cli::kExitOk);
  const std::string bent = (dir / "bent.raw").string(), bent_meta = (dir / "bent.json").string();
  const std::string ends = (dir / "endpoints.json").string();

  const Run s = run({"straighten", bent, bent_meta, ends, "--k", "40", "--s", "5", "--r", "1", "--extent", "6",
                     "--out", (dir / "out").string()});
  REQUIRE(s.code == cli::kExitOk);
  const auto summary = nlohmann::json::parse(s.out);
  const Session session = load_session(dir / "out" / "session.json");
  CHECK(session.warnings.empty());
  CHECK(session.rig.size() == summary.at("keyframes").get<std::size_t>());
  const ScalarVolume straight = load_volume(dir / "out" / "straight.raw", dir / "out" / "straight.json");
  CHECK(nlohmann::json::array({straight.dims()[0], straight.dims()[1], straight.dims()[2]}) == summary.at("dims"));

  // A fixed output grid makes the result comparable with the ground truth.
  const ScalarVolume truth = load_volume(dir / "straight.raw", dir / "straight.json");
  const auto& td = truth.dims();
  const Run fixed = run({"straighten", bent, bent_meta, ends, "--k", "40", "--s", "5", "--r", "1", "--extent", "6", "--dims",
                         std::to_string(td[0]), std::to_string(td[1]), std::to_string(td[2]), "--out", (dir / "fixed").string()});
  REQUIRE(fixed.code == cli::kExitOk);
  const Run ev = run({"eval", (dir / "fixed" / "straight.raw").string(), (dir / "fixed" / "straight.json").string(),
                      (dir / "straight.raw").string(), (dir / "straight.json").string()});
  REQUIRE(ev.code == cli::kExitOk);
  CHECK(nlohmann::json::parse(ev.out).at("normalized_l2").get<double>() >= 0.0);

  const Run k = run({"skeleton", bent, bent_meta, ends, "--k", "40", "--s", "5"});
  REQUIRE(k.code == cli::kExitOk);
  const FramedPolyline skel = skeleton_from_json(nlohmann::json::parse(k.out));
  CHECK(skel.vertices.size() >= 2);
  const Run kf = run({"skeleton", bent, bent_meta, ends, "--k", "40", "--out", (dir / "skel.json").string()});
  REQUIRE(kf.code == cli::kExitOk);
  CHECK(std::filesystem::exists(dir / "skel.json"));

  write_file(dir / "rig.json", rig_to_json(session.rig).dump());
  const Run b = run({"bend", (dir / "out" / "straight.raw").string(), (dir / "out" / "straight.json").string(),
                     (dir / "rig.json").string(), "--dims", "48", "--out", (dir / "rebent.raw").string()});
  REQUIRE(b.code == cli::kExitOk);
  const ScalarVolume rebent = load_volume(dir / "rebent.raw", dir / "rebent.json");
  CHECK(rebent.dims() == Dims{48, 48, 48});
  CHECK(occupied_correlation(rebent, load_volume(bent, bent_meta)) > 0.5);
}
