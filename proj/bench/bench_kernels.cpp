// Serial reference paths against the OpenMP kernels.
#include <benchmark/benchmark.h>

#include <random>

#include "mgn/model.hpp"
#include "mgn/training.hpp"
#include "mgn/verify.hpp"

using namespace mgn;
using linalg::DenseMatrix;

namespace {

model::Architecture arch_of(const benchmark::State& state) {
  return state.range(0) == 0 ? model::Architecture::Cmgn : model::Architecture::Mmgn;
}

DenseMatrix points(std::size_t rows, std::size_t n) {
  DenseMatrix x(rows, n);
  std::mt19937_64 gen(3);
  std::normal_distribution<double> nd;
  for (double& v : x.span()) v = nd(gen);
  return x;
}

void forward_reference(benchmark::State& state) {
  const std::size_t n = state.range(1);
  const auto m = verify::random_model(arch_of(state), n, 42, 0);
  const DenseMatrix x = points(4096, n);
  for (auto _ : state) {
    for (std::size_t i = 0; i < x.rows(); ++i) benchmark::DoNotOptimize(model::reference::forward(m, x.row(i)));
  }
  state.SetItemsProcessed(state.iterations() * x.rows());
}

void forward_kernel(benchmark::State& state) {
  const std::size_t n = state.range(1);
  const auto m = verify::random_model(arch_of(state), n, 42, 0);
  const DenseMatrix x = points(4096, n);
  for (auto _ : state) benchmark::DoNotOptimize(model::forward_batch(m, x));
  state.SetItemsProcessed(state.iterations() * x.rows());
}

void grad_reference(benchmark::State& state) {
  const std::size_t n = state.range(1);
  const auto m = verify::random_model(arch_of(state), n, 42, 0);
  const DenseMatrix x = points(256, n);
  const auto batch = train::Batch::all(x);
  for (auto _ : state) benchmark::DoNotOptimize(train::param_grad_reference(m, train::FlowNllLoss{}, batch));
  state.SetItemsProcessed(state.iterations() * x.rows());
}

void grad_kernel(benchmark::State& state) {
  const std::size_t n = state.range(1);
  const auto m = verify::random_model(arch_of(state), n, 42, 0);
  const DenseMatrix x = points(256, n);
  const auto batch = train::Batch::all(x);
  for (auto _ : state) benchmark::DoNotOptimize(train::param_grad(m, train::FlowNllLoss{}, batch));
  state.SetItemsProcessed(state.iterations() * x.rows());
}

// range(0): 0 = C-MGN, 1 = M-MGN; range(1): input dimension
void shapes(benchmark::internal::Benchmark* b) {
  b->ArgNames({"mmgn", "n"});
  for (int a : {0, 1})
    for (int n : {2, 16}) b->Args({a, n});
  b->Unit(benchmark::kMillisecond);
}

}  // namespace

BENCHMARK(forward_reference)->Apply(shapes);
BENCHMARK(forward_kernel)->Apply(shapes);
BENCHMARK(grad_reference)->Apply(shapes);
BENCHMARK(grad_kernel)->Apply(shapes);

BENCHMARK_MAIN();
