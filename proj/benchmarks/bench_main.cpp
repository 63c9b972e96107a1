#include <benchmark/benchmark.h>

#include <random>

#include "cldeepc/controllers.hpp"
#include "cldeepc/data_matrices.hpp"
#include "cldeepc/dense_qp.hpp"
#include "cldeepc/predictors.hpp"
#include "cldeepc/qp_control.hpp"

namespace {

using namespace cldeepc;

SignalLog benchmark_log(Index length) {
  std::vector<Vector> u;
  NoiseProcess input(77, 1.0, 1);
  for (Index k = 0; k < length; ++k) u.push_back(input.draw());
  return simulate_open_loop(benchmark_system(), u, NoiseProcess(7, 1.0, 1), Vector::Zero(5));
}

void BM_FitClDeePC(benchmark::State& state) {
  const Index nbar = state.range(0);
  const SignalLog log = benchmark_log(nbar + 50);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        fit_predictor(ControllerKind::kClDeePC, log, nbar + 50, nbar, 20, 20, FitOptions{}));
}
BENCHMARK(BM_FitClDeePC)->Arg(200)->Arg(500)->Arg(1600)->Unit(benchmark::kMillisecond);

void BM_FitDeePC(benchmark::State& state) {
  const Index nbar = state.range(0);
  const SignalLog log = benchmark_log(nbar + 50);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        fit_predictor(ControllerKind::kDeePC, log, nbar + 50, nbar, 20, 20, FitOptions{}));
}
BENCHMARK(BM_FitDeePC)->Arg(200)->Arg(500)->Arg(1600)->Unit(benchmark::kMillisecond);

void BM_SolveFinal(benchmark::State& state) {
  const int f = static_cast<int>(state.range(0));
  const SignalLog log = benchmark_log(600);
  const OneStepCoeffs c = fit_one_step(build_dataset(log, 600, 500, 20, 1));
  const PredictorTilde t = assemble_tilde(c, f);
  for (auto _ : state) benchmark::DoNotOptimize(solve_final(t));
}
BENCHMARK(BM_SolveFinal)->Arg(5)->Arg(20)->Arg(50);

void BM_SolveFinalDense(benchmark::State& state) {
  const int f = static_cast<int>(state.range(0));
  const SignalLog log = benchmark_log(600);
  const OneStepCoeffs c = fit_one_step(build_dataset(log, 600, 500, 20, 1));
  const PredictorTilde t = assemble_tilde(c, f);
  for (auto _ : state) benchmark::DoNotOptimize(solve_final_dense(t));
}
BENCHMARK(BM_SolveFinalDense)->Arg(5)->Arg(20)->Arg(50);

void BM_TrackingQp(benchmark::State& state) {
  const int f = static_cast<int>(state.range(0));
  const StateSpaceModel m = benchmark_system();
  const auto w = ControllerWeights::uniform(f, 1, 1, 100, 0, 10);
  const auto c = BoxConstraints::uniform(1, 1, 3.75, 15, 1000);
  const Vector x = Vector::Constant(5, 0.5);
  const Vector ref = Vector::Constant(f, 100.0);
  for (auto _ : state) benchmark::DoNotOptimize(oracle_mpc_step(m, x, ref, w, c, Vector::Zero(1)));
}
BENCHMARK(BM_TrackingQp)->Arg(10)->Arg(20)->Arg(40);

void BM_DenseQpBox(benchmark::State& state) {
  const Index n = state.range(0);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  Matrix m(n, n);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
  const Matrix h = m * m.transpose() + Matrix::Identity(n, n);
  Vector g(n);
  for (Index i = 0; i < n; ++i) g(i) = 5.0 * nd(rng);
  Matrix a(2 * n, n);
  a << Matrix::Identity(n, n), -Matrix::Identity(n, n);
  const Vector b = Vector::Ones(2 * n);
  for (auto _ : state) benchmark::DoNotOptimize(solve_dense_qp(h, g, a, b));
}
BENCHMARK(BM_DenseQpBox)->Arg(10)->Arg(20)->Arg(40);

}  // namespace

BENCHMARK_MAIN();
