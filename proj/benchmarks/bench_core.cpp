#include <benchmark/benchmark.h>

#include "unbend/deform.hpp"
#include "unbend/pipeline.hpp"
#include "unbend/synth.hpp"
#include "unbend/tet_mesh.hpp"

using namespace unbend;

namespace {

const SynthResult& synth() {
  static const SynthResult r = make_bent_cylinder(CylinderSpec{});
  return r;
}

void BM_HarmonicSolve(benchmark::State& state) {
  CylinderSpec spec;
  spec.dims = {static_cast<int>(state.range(0)), 64, 64};
  spec.amplitude = 8.0;
  spec.radius = 5.0;
  const SynthResult s = make_bent_cylinder(spec);
  const TetMesh mesh = tetrahedralize(threshold_occupancy(s.bent, 0.5), Vec3::Ones(), Vec3::Zero());
  const SineAxis axis(spec);
  const int head = mesh.nearest_vertex(axis.point(0)), tail = mesh.nearest_vertex(axis.point(axis.length()));
  for (auto _ : state) benchmark::DoNotOptimize(solve_harmonic(mesh, head, tail));
  state.counters["vertices"] = static_cast<double>(mesh.vertex_count());
}
BENCHMARK(BM_HarmonicSolve)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_Straighten(benchmark::State& state) {
  const SynthResult& s = synth();
  const StraightVolumeSpec out{s.straight.dims(), Vec3::Ones()};
  for (auto _ : state) benchmark::DoNotOptimize(straighten(s.true_rig, s.bent, out));
}
BENCHMARK(BM_Straighten)->Unit(benchmark::kMillisecond);

void BM_Bend(benchmark::State& state) {
  const SynthResult& s = synth();
  for (auto _ : state) benchmark::DoNotOptimize(bend(s.true_rig, s.straight, s.bent.geometry()));
}
BENCHMARK(BM_Bend)->Unit(benchmark::kMillisecond);

void BM_TrilinearSample(benchmark::State& state) {
  const ScalarVolume& v = synth().bent;
  Vec3 p(10.3, 20.7, 30.1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(trilinear_sample(v, p));
    p.x() = p.x() > 110 ? 10.3 : p.x() + 0.37;
  }
}
BENCHMARK(BM_TrilinearSample);

void BM_Pipeline(benchmark::State& state) {
  const SynthResult& s = synth();
  const SineAxis axis(CylinderSpec{});
  const EndpointSelection ends{{axis.point(0), axis.point(axis.length())}};
  for (auto _ : state) benchmark::DoNotOptimize(run_pipeline(s.bent, ends));
}
BENCHMARK(BM_Pipeline)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
