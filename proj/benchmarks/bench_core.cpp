#include <benchmark/benchmark.h>

#include "rfm/filter_precond.hpp"
#include "rfm/solvers.hpp"
#include "rfm/system.hpp"

using namespace rfm;

namespace {

// Baseline oscillator shape: S subdomains of K features each.
GlobalSystem oscillator_system(std::size_t s, std::size_t k) {
  static const ProblemSpec p = oscillator_problem(60.0);
  const Decomposition dec(p.domain, s, 2.9);
  const FeatureBasis basis = init_basis(dec, k, 1, Activation::tanh, RandomSource(0));
  return assemble(p, dec, basis);
}

}  // namespace

static void BM_PivotedQR(benchmark::State& state) {
  RandomSource rng(1);
  const auto rows = state.range(0);
  const DenseMatrix a = gaussian_matrix(rows, rows / 4, rng);
  for (auto _ : state) benchmark::DoNotOptimize(qr_column_pivot(a, 1e-8));
}
BENCHMARK(BM_PivotedQR)->Arg(64)->Arg(256)->Arg(1024);

static void BM_Assemble(benchmark::State& state) {
  const auto s = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(oscillator_system(s, 8));
}
BENCHMARK(BM_Assemble)->Arg(20)->Arg(80);

static void BM_BlockApply(benchmark::State& state) {
  const GlobalSystem sys = oscillator_system(static_cast<std::size_t>(state.range(0)), 8);
  Vector x = Vector::Ones(static_cast<Eigen::Index>(sys.cols()));
  Vector y = Vector::Ones(static_cast<Eigen::Index>(sys.rows()));
  for (auto _ : state) {
    benchmark::DoNotOptimize(sys.matrix.apply(x));
    benchmark::DoNotOptimize(sys.matrix.apply_transpose(y));
  }
  state.SetItemsProcessed(state.iterations() * 2);
}
BENCHMARK(BM_BlockApply)->Arg(20)->Arg(80);

static void BM_FilterPrecondition(benchmark::State& state) {
  const GlobalSystem sys = oscillator_system(20, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(precondition(filter(sys, 1e-8)));
}
BENCHMARK(BM_FilterPrecondition)->Arg(8)->Arg(32);

static void BM_LsqrIterations(benchmark::State& state) {
  const GlobalSystem sys = oscillator_system(20, 8);
  const PreconditionedOperator q = precondition(filter(sys, 1e-8));
  const SolveConfig cfg{static_cast<std::size_t>(state.range(0)), 1000000, 0.0};
  for (auto _ : state) benchmark::DoNotOptimize(lsqr(make_operator(q.matrix()), sys.rhs, cfg));
}
BENCHMARK(BM_LsqrIterations)->Arg(100)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
