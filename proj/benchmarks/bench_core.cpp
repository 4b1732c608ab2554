#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "scarlab/analysis.hpp"
#include "scarlab/classical.hpp"
#include "scarlab/eigensolver.hpp"
#include "scarlab/potential.hpp"

using namespace scarlab;

namespace {

const double B13 = 1 / std::sqrt(2.0);

WaveField random_field(const Grid2D& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  WaveField f(g);
  for (auto& v : f.values) v = {n(rng), n(rng)};
  return normalize(f);
}

BumpSet desk_bumps(double L) { return sample_bumps(1, 2.0, L, 4.0, fwhm_to_sigma(0.235)); }

void BM_KineticPropagator(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Grid2D g = make_grid(n, n, 10.0);
  const MagneticKinetic t(g, B13);
  const KineticPropagator k(t, 0.01);
  WaveField psi = random_field(g, 1);
  for (auto _ : state) {
    k.apply(psi.values);
    benchmark::DoNotOptimize(psi.values.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(g.size()));
}
BENCHMARK(BM_KineticPropagator)->Arg(64)->Arg(128)->Arg(256);

void BM_HamiltonianApply(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Grid2D g = make_grid(n, n, 10.0);
  const Hamiltonian h(g, {1.0, B13}, desk_bumps(10.0));
  const WaveField psi = random_field(g, 2);
  WaveField out(g), scratch(g);
  for (auto _ : state) {
    h.apply(psi.values, out.values, scratch.values);
    benchmark::DoNotOptimize(out.values.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(g.size()));
}
BENCHMARK(BM_HamiltonianApply)->Arg(64)->Arg(128)->Arg(256);

void BM_BumpField(benchmark::State& state) {
  const Grid2D g = make_grid(256, 256, 10.0);
  const BumpSet b = desk_bumps(10.0);
  for (auto _ : state) benchmark::DoNotOptimize(bump_field(g, b));
  state.counters["bumps"] = static_cast<double>(b.positions.size());
}
BENCHMARK(BM_BumpField)->Unit(benchmark::kMillisecond);

void BM_ClassicalStep(benchmark::State& state) {
  const ClassicalSystem sys{1.0, B13, state.range(0) ? desk_bumps(8.0) : BumpSet{}};
  const ClassicalIntegrator integ(sys);
  ClassicalState s = random_initial_states(20.0, 1.0, B13, 1, 3).front();
  for (auto _ : state) {
    integ.step(s, 0.005, 4);
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(BM_ClassicalStep)->Arg(0)->Arg(1);

void BM_ScarScore(benchmark::State& state) {
  const Grid2D g = make_grid(256, 256, 10.0);
  const WaveField psi = fock_darwin_state(g, 3, 12, B13);
  const ScarScorer scorer(g, {});
  const auto rho = scorer.density(psi);
  const PeriodicOrbit orbit = periodic_orbit({1, 3}, 20.0, 1, 0.0, 768);
  for (auto _ : state) benchmark::DoNotOptimize(scorer.score(rho, orbit));
}
BENCHMARK(BM_ScarScore)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
