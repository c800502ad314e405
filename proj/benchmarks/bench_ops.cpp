#include "mmdufs/datagen.hpp"
#include "mmdufs/gates.hpp"
#include "mmdufs/graph.hpp"
#include "mmdufs/operators.hpp"
#include "mmdufs/trainer.hpp"

#include <benchmark/benchmark.h>

using namespace mmdufs;

namespace {

const ModalPair& gaussian() {
  static const ModalPair pair = [] {
    ModalPair p = gen_gaussian_mixture(0);
    p.x = standardize_columns(p.x);
    p.y = standardize_columns(p.y);
    return p;
  }();
  return pair;
}

void BM_PairwiseSqDist(benchmark::State& state) {
  const Matrix& x = gaussian().x;
  for (auto _ : state) {
    Tape tape;
    benchmark::DoNotOptimize(tape.pairwise_sq_dist(tape.constant(x)).value().data());
  }
}
BENCHMARK(BM_PairwiseSqDist);

void BM_Laplacian(benchmark::State& state) {
  const Matrix& x = gaussian().x;
  const KernelConfig cfg{.bandwidth = 16.0, .normalize = true};
  for (auto _ : state) benchmark::DoNotOptimize(laplacian_from_data(x, cfg).data());
}
BENCHMARK(BM_Laplacian);

void BM_MedianBandwidth(benchmark::State& state) {
  const Matrix& x = gaussian().x;
  for (auto _ : state) benchmark::DoNotOptimize(median_bandwidth(x));
}
BENCHMARK(BM_MedianBandwidth);

void BM_SharedOperator(benchmark::State& state) {
  const KernelConfig cfg{.bandwidth = 16.0, .normalize = true};
  const Matrix lx = laplacian_from_data(gaussian().x, cfg);
  const Matrix ly = laplacian_from_data(gaussian().y, cfg);
  for (auto _ : state) benchmark::DoNotOptimize(shared_operator(lx, ly).data());
}
BENCHMARK(BM_SharedOperator);

void BM_DifferentialOperator(benchmark::State& state) {
  const KernelConfig cfg{.bandwidth = 16.0, .normalize = true};
  const Matrix lx = laplacian_from_data(gaussian().x, cfg);
  const Matrix ly = laplacian_from_data(gaussian().y, cfg);
  for (auto _ : state) benchmark::DoNotOptimize(differential_operator(lx, ly, 0.1).data());
}
BENCHMARK(BM_DifferentialOperator);

void BM_SharedEpoch(benchmark::State& state) {
  const ModalPair& pair = gaussian();
  const Vector nx = Vector::Constant(pair.x.cols(), 0.1);
  const Vector ny = Vector::Constant(pair.y.cols(), 0.1);
  const KernelConfig cfg{.bandwidth = 16.0, .normalize = true};
  for (auto _ : state) {
    Tape tape;
    const Var mx = tape.leaf(Vector::Zero(pair.x.cols()), true);
    const Var my = tape.leaf(Vector::Zero(pair.y.cols()), true);
    const Var gx = apply_gates(tape, tape.constant(pair.x), gates_on_tape(tape, mx, nx));
    const Var gy = apply_gates(tape, tape.constant(pair.y), gates_on_tape(tape, my, ny));
    const GraphPair g = build_graph_pair(tape, gx, gy, cfg, cfg);
    const Var p = shared_operator(tape, g.laplacian_x, g.laplacian_y);
    const LossTerms t = shared_loss(tape, gx, gy, p, mx, my, 0.5, 1e-4, 1e-4);
    benchmark::DoNotOptimize(tape.backward(t.loss));
  }
}
BENCHMARK(BM_SharedEpoch)->Unit(benchmark::kMillisecond);

void BM_DifferentialEpoch(benchmark::State& state) {
  const ModalPair& pair = gaussian();
  const Vector nx = Vector::Constant(pair.x.cols(), 0.1);
  const KernelConfig cfg{.bandwidth = 16.0, .normalize = true};
  const Matrix ly = laplacian_from_data(pair.y, cfg);
  for (auto _ : state) {
    Tape tape;
    const Var mx = tape.leaf(Vector::Zero(pair.x.cols()), true);
    const Var gx = apply_gates(tape, tape.constant(pair.x), gates_on_tape(tape, mx, nx));
    const Var lx = laplacian_from_data(tape, gx, cfg);
    const Var q = differential_operator(tape, lx, tape.constant(ly), 0.1);
    const LossTerms t = differential_loss(tape, gx, q, mx, 0.5, 0.4);
    benchmark::DoNotOptimize(tape.backward(t.loss));
  }
}
BENCHMARK(BM_DifferentialEpoch)->Unit(benchmark::kMillisecond);

void BM_TopK(benchmark::State& state) {
  const Vector mu = Vector::Random(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(top_k_indices(mu, state.range(0) / 4));
}
BENCHMARK(BM_TopK)->Arg(130)->Arg(4096);

}  // namespace
BENCHMARK_MAIN();
