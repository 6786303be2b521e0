// Prints one PASS/FAIL line per acceptance criterion. Exit status is the
// number of failed criteria.

#include <Eigen/Geometry>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "cli.hpp"
#include "support.hpp"
#include "unbend/deform.hpp"
#include "unbend/pipeline.hpp"
#include "unbend/rig.hpp"
#include "unbend/session.hpp"
#include "unbend/synth.hpp"
#include "unbend/tet_mesh.hpp"

using namespace unbend;

namespace {

// Tolerances.
constexpr double kSineL2 = 0.05;
constexpr double kSineSeconds = 60.0;
constexpr int kSineThreads = 4;
constexpr double kMonotoneGain = 0.25;
constexpr double kRoundTripCorrelation = 0.99;
constexpr int kHarmonicMasks = 20;
constexpr int kHarmonicMaxVoxels = 10000;
constexpr double kHarmonicResidual = 1e-8;
constexpr double kRefinementTol = 1e-6;
constexpr double kOrthoTol = 1e-6;
constexpr int kRefinementSamples = 1000;
constexpr int kLookupSamples = 10000;
constexpr double kReplayTol = 1e-9;

int failures = 0;

void report(bool ok, const char* name, const std::string& detail) {
  std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const SynthResult& synth() {
  static const SynthResult r = make_bent_cylinder(CylinderSpec{});
  return r;
}

EndpointSelection synth_endpoints() {
  const SineAxis axis(CylinderSpec{});
  return {{axis.point(0), axis.point(axis.length())}};
}

// Default pipeline settings, with the cage framed like the ground-truth rig.
PipelineOptions sine_options() {
  PipelineOptions o;
  o.extent = CylinderSpec{}.radius + kCageClearance;
  return o;
}

void sine_straightening() {
  const SynthResult& s = synth();
  ::setenv("UNBEND_THREADS", std::to_string(kSineThreads).c_str(), 1);
  (void)apply_thread_limit_from_env();
  const StraightVolumeSpec out{s.straight.dims(), CylinderSpec{}.spacing};
  const auto t0 = std::chrono::steady_clock::now();
  const PipelineResult r = run_pipeline(s.bent, synth_endpoints(), sine_options(), out);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double l2 = normalized_l2(r.straight, s.straight);
  report(l2 <= kSineL2 && secs <= kSineSeconds, "sine straightening",
         fmt("normalized L2 %.4f (limit %.2f), %zu keyframes, %.1f s on %d threads (limit %.0f s)", l2, kSineL2,
             r.rig.size(), secs, kSineThreads, kSineSeconds));
}

void keyframe_monotonicity() {
  const SynthResult& s = synth();
  const StraightVolumeSpec out{s.straight.dims(), CylinderSpec{}.spacing};
  PipelineOptions o = sine_options();
  const FramedPolyline skel = extract_skeleton(s.bent, synth_endpoints(), o);
  std::vector<double> errors;
  std::string detail;
  for (double r : {64.0, 32.0, 16.0, 8.0}) {
    o.prism_radius = r;
    const DeformationRig rig = fit_rig(skel, CylinderSpec{}.spacing, o);
    errors.push_back(normalized_l2(straighten(rig, s.bent, out), s.straight));
    detail += fmt("r=%g: %zu kf L2 %.4f; ", r, rig.size(), errors.back());
  }
  bool ok = true;
  for (std::size_t i = 1; i < errors.size(); ++i) ok = ok && errors[i] <= errors[i - 1];
  const double ratio = errors.back() / errors.front();
  ok = ok && ratio <= 1.0 - kMonotoneGain;
  report(ok, "keyframe monotonicity", detail + fmt("finest/coarsest %.3f (limit %.2f)", ratio, 1.0 - kMonotoneGain));
}

void round_trip() {
  const SynthResult& s = synth();
  const ScalarVolume back = straighten(s.true_rig, s.bent, StraightVolumeSpec{s.straight.dims(), CylinderSpec{}.spacing});
  const double c = occupied_correlation(back, s.straight);
  report(c >= kRoundTripCorrelation, "round trip", fmt("occupied Pearson %.4f (limit %.2f)", c, kRoundTripCorrelation));
}

// Residual of the Dirichlet-reduced uniform Laplacian, from the edge graph alone.
double laplacian_residual(const TetMesh& mesh, const HarmonicField& f) {
  double rr = 0, bb = 0;
  for (int i = 0; i < static_cast<int>(mesh.vertex_count()); ++i) {
    if (i == f.head_vertex || i == f.tail_vertex) continue;
    double r = 0, b = 0;
    for (int j : mesh.neighbors(i)) {
      r += f.values[i] - f.values[j];
      if (j == f.head_vertex || j == f.tail_vertex) b += f.values[j];
    }
    rr += r * r;
    bb += b * b;
  }
  return std::sqrt(rr) / std::sqrt(bb);
}

void harmonic_invariants() {
  std::mt19937 rng(2024);
  std::uniform_int_distribution<int> size(200, kHarmonicMaxVoxels);
  int good = 0;
  double worst_residual = 0, worst_interior = 0;
  for (int m = 0; m < kHarmonicMasks; ++m) {
    const OccupancyMask mask = test::random_connected_mask({32, 32, 32}, size(rng), rng);
    const TetMesh mesh = tetrahedralize(mask, Vec3::Ones(), Vec3::Zero());
    std::uniform_int_distribution<int> pick(0, static_cast<int>(mesh.vertex_count()) - 1);
    const int head = pick(rng);
    int tail = pick(rng);
    while (tail == head) tail = pick(rng);
    const HarmonicField f = solve_harmonic(mesh, head, tail);
    double interior = 0;
    bool strict = true;
    for (int i = 0; i < static_cast<int>(f.values.size()); ++i) {
      if (i == head || i == tail) continue;
      interior = std::max(interior, std::abs(f.values[i]));
      strict = strict && f.values[i] > -1.0 && f.values[i] < 1.0;
    }
    const double res = laplacian_residual(mesh, f);
    worst_residual = std::max(worst_residual, res);
    worst_interior = std::max(worst_interior, interior);
    if (f.values[head] == 1.0 && f.values[tail] == -1.0 && strict && res <= kHarmonicResidual) ++good;
  }
  report(good == kHarmonicMasks, "harmonic invariants",
         fmt("%d/%d masks; max interior |u| %.12f; worst residual %.2e (limit %.0e)", good, kHarmonicMasks,
             worst_interior, worst_residual, kHarmonicResidual));
}

Frame frame_from_normal(const Vec3& n, double twist) {
  const Vec3 helper = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 u0 = (helper - helper.dot(n) * n).normalized();
  const Eigen::AngleAxisd spin(twist, n);
  const Vec3 u = spin * u0;
  return Frame{u, n.cross(u), n};
}

DeformationRig random_rig(std::mt19937& rng, int m) {
  std::uniform_real_distribution<double> jitter(-0.4, 0.4), ext(1.0, 3.0), twist(-std::numbers::pi, std::numbers::pi);
  std::vector<Keyframe> keys;
  Vec3 p = Vec3::Zero(), dir = Vec3::UnitZ();
  for (int i = 0; i < m; ++i) {
    keys.push_back(Keyframe{p, frame_from_normal(dir, twist(rng)), ext(rng), ext(rng)});
    dir = (dir + Vec3(jitter(rng), jitter(rng), jitter(rng))).normalized();
    p += (0.5 + std::abs(jitter(rng)) * 4) * dir;
  }
  return DeformationRig(std::move(keys));
}

double frame_gap(const Frame& a, const Frame& b) { return (a.as_rows() - b.as_rows()).cwiseAbs().maxCoeff(); }

void rig_algebra() {
  std::mt19937 rng(7);
  const DeformationRig rig = random_rig(rng, 16);
  std::uniform_real_distribution<double> along(0.0, rig.length());

  double refine = 0;
  for (int n = 0; n < 10; ++n) {
    const DeformationRig finer = apply_edit(rig, InsertKeyframe{along(rng)});
    for (int i = 0; i < kRefinementSamples / 10; ++i) {
      const double t = along(rng);
      refine = std::max(refine, (eval_curve(finer, t) - eval_curve(rig, t)).norm());
      refine = std::max(refine, frame_gap(eval_frame(finer, t), eval_frame(rig, t)));
    }
  }

  double ortho = 0, det_gap = 0;
  for (const DeformationRig* r : {&rig, &synth().true_rig}) {
    std::uniform_real_distribution<double> span(0.0, r->length());
    for (int i = 0; i < kRefinementSamples; ++i) {
      const Frame f = eval_frame(*r, span(rng));
      const Eigen::Matrix3d m = f.as_rows();
      ortho = std::max(ortho, (m * m.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff());
      det_gap = std::max(det_gap, std::abs(m.determinant() - 1.0));
    }
  }

  const auto d = rig.cumulative_arclength();
  int mismatches = 0;
  for (int i = 0; i < kLookupSamples; ++i) {
    const double t = along(rng);
    std::size_t k = 0;
    for (std::size_t j = 0; j + 1 < d.size(); ++j)
      if (d[j] <= t) k = j;
    const double lambda = (t - d[k]) / (d[k + 1] - d[k]);
    const SegmentPosition got = segment_lookup(rig, t);
    if (got.segment != k || std::abs(got.lambda - lambda) > 1e-12) ++mismatches;
  }

  report(refine <= kRefinementTol && ortho <= kOrthoTol && det_gap <= kOrthoTol && mismatches == 0, "rig algebra",
         fmt("refinement drift %.2e, orthonormality %.2e, |det-1| %.2e (limits %.0e); lookup mismatches %d/%d", refine,
             ortho, det_gap, kRefinementTol, mismatches, kLookupSamples));
}

void defaults_conformance() {
  const PipelineOptions lib;
  CLI::App app;
  cli::CliState state;
  cli::configure(app, state);
  const char* argv[] = {"unbend", "straighten", "v.raw", "v.json", "e.json", "--out", "o"};
  app.parse(7, argv);
  const PipelineOptions& cli = state.pipeline;
  const bool ok = lib.skeleton.level_sets == 100 && lib.skeleton.smoothing_iterations == 50 && lib.prism_radius == 10.0 &&
                  cli.skeleton.level_sets == 100 && cli.skeleton.smoothing_iterations == 50 && cli.prism_radius == 10.0;
  report(ok, "defaults conformance",
         fmt("library k=%d s=%d r=%g; cli k=%d s=%d r=%g", lib.skeleton.level_sets, lib.skeleton.smoothing_iterations,
             lib.prism_radius, cli.skeleton.level_sets, cli.skeleton.smoothing_iterations, cli.prism_radius));
}

void session_provenance() {
  test::TempDir dir;
  const SynthResult& s = synth();
  export_volume(s.bent, dir / "bent.raw", dir / "bent.json");
  Session session = new_session(make_volume_ref(dir / "bent.raw", dir / "bent.json"), synth_endpoints(), s.true_rig);
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int n = 0; n < 40; ++n) {
    const std::size_t m = session.rig.size();
    const std::size_t i = std::uniform_int_distribution<std::size_t>(0, m - 1)(rng);
    switch (n % 5) {
      case 0: record_edit(session, InsertKeyframe{unit(rng) * session.rig.length()}); break;
      case 1: record_edit(session, RemoveKeyframe{i}); break;
      case 2: record_edit(session, RotateKeyframe{i, 2 * unit(rng) - 1}); break;
      case 3: record_edit(session, MoveKeyframe{i, unit(rng) - 0.5, unit(rng) - 0.5}); break;
      default: record_edit(session, ResizeKeyframe{i, 10 + 4 * unit(rng), 10 + 4 * unit(rng)}); break;
    }
  }
  save_session(session, dir / "a.json");
  const Session loaded = load_session(dir / "a.json");
  save_session(loaded, dir / "b.json");
  const bool identical = test::read_file(dir / "a.json") == test::read_file(dir / "b.json");

  const DeformationRig replayed = replay_edit_log(loaded.edit_log);
  double gap = replayed.size() == loaded.rig.size() ? 0.0 : INFINITY;
  for (std::size_t i = 0; std::isfinite(gap) && i < replayed.size(); ++i) {
    const Keyframe& a = replayed.keyframes()[i];
    const Keyframe& b = loaded.rig.keyframes()[i];
    gap = std::max({gap, (a.position - b.position).cwiseAbs().maxCoeff(), frame_gap(a.frame, b.frame),
                    std::abs(a.rx - b.rx), std::abs(a.ry - b.ry)});
  }
  report(identical && gap <= kReplayTol && loaded.warnings.empty(), "session provenance",
         fmt("save/load/save %s; replay of %zu edits differs by %.2e (limit %.0e)", identical ? "identical" : "differs",
             loaded.edit_log.size(), gap, kReplayTol));
}

void guarded(const char* name, const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    report(false, name, std::string("threw: ") + e.what());
  }
}

}  // namespace

int main() {
  guarded("sine straightening", sine_straightening);
  guarded("keyframe monotonicity", keyframe_monotonicity);
  guarded("round trip", round_trip);
  guarded("harmonic invariants", harmonic_invariants);
  guarded("rig algebra", rig_algebra);
  guarded("defaults conformance", defaults_conformance);
  guarded("session provenance", session_provenance);
  std::printf("%d of 7 criteria failed\n", failures);
  return failures;
}
