#include <benchmark/benchmark.h>

#include "fluxinv/covariance.hpp"
#include "fluxinv/cumulants.hpp"
#include "fluxinv/model.hpp"
#include "fluxinv/osse.hpp"
#include "fluxinv/rng.hpp"

using namespace fluxinv;

namespace {

Locations stations(int n) {
  Locations l;
  for (int i = 0; i < n; ++i) l.push_back({0.9 * i, 51.0 + 0.4 * (i % 3)});
  return l;
}

// 60 cells, 4 stations, T time steps, every slot observed.
HierarchicalModel bench_model(Eigen::Index T) {
  osse::RegularGridSpec gs;
  gs.split_lat = 52.2;
  gs.lon0 = -3.0;
  gs.lat0 = 51.0;
  const SpatialGrid grid = osse::regular_grid(gs);
  StationSet st;
  st.ids = {"s1", "s2", "s3", "s4"};
  st.coords = stations(4);
  Rng rng(1);
  osse::PlumeParams plume;
  plume.reference_flux = 10.0;
  auto stack = osse::synth_sensitivities(grid, st, T, rng, plume);
  const Eigen::VectorXd y1 = Eigen::VectorXd::Constant(grid.size(), 10.0);
  osse::Missingness none;
  none.fraction = 0.0;
  auto obs = osse::simulate_observations(y1, stack, st, {0.01, 0.9, 2.5}, 1.0, none, rng);
  return HierarchicalModel(grid, st, std::move(stack), std::move(obs), y1);
}

}  // namespace

static void BM_SolveShifted(benchmark::State& state) {
  const Eigen::Index T = state.range(0);
  const auto q = covariance::build_separable({0.01, 0.9, 2.5}, T, stations(4));
  const Eigen::VectorXd shift = Eigen::VectorXd::Ones(T * 4);
  Rng rng(2);
  Eigen::VectorXd rhs(T * 4);
  for (Eigen::Index i = 0; i < rhs.size(); ++i) rhs[i] = std_normal(rng);
  for (auto _ : state) benchmark::DoNotOptimize(covariance::solve_shifted(q, shift, rhs));
  state.SetComplexityN(T);
}
BENCHMARK(BM_SolveShifted)->RangeMultiplier(4)->Range(16, 1024)->Complexity(benchmark::oN);

static void BM_FluxValueAndGradient(benchmark::State& state) {
  const auto model = bench_model(state.range(0));
  const FluxConditional cond(model, {0.01, 0.9, 2.5}, {0.5, 1.5}, {0.0});
  const Eigen::VectorXd y1 = Eigen::VectorXd::Constant(model.n_cells(), 9.0);
  Eigen::VectorXd grad;
  for (auto _ : state) benchmark::DoNotOptimize(cond.value(y1, &grad));
}
BENCHMARK(BM_FluxValueAndGradient)->Arg(50)->Arg(200)->Arg(1080);

static void BM_FluxConditionalSetup(benchmark::State& state) {
  const auto model = bench_model(state.range(0));
  for (auto _ : state) {
    const FluxConditional cond(model, {0.01, 0.9, 2.5}, {0.5, 1.5}, {0.0});
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_FluxConditionalSetup)->Arg(50)->Arg(200);

static void BM_DiscrepancyConditional(benchmark::State& state) {
  const auto model = bench_model(state.range(0));
  const DiscrepancyConditional cond(model, Eigen::VectorXd::Constant(model.n_cells(), 9.0));
  for (auto _ : state) benchmark::DoNotOptimize(cond({0.02, 0.8, 2.0}));
}
BENCHMARK(BM_DiscrepancyConditional)->Arg(50)->Arg(200)->Arg(1080);

static void BM_DirectionalCumulants(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(cumulants::directional_example(state.range(0)));
}
BENCHMARK(BM_DirectionalCumulants)->Arg(21)->Arg(60)->Arg(100);

// libbenchmark_main.a ships LTO bytecode from another gcc release, so main is defined here.
BENCHMARK_MAIN();
