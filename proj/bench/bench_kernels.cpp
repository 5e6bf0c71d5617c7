// Serial vs OpenMP scoring kernels over a synthetic factor matrix.
#include <benchmark/benchmark.h>

#include <vector>

#include "recharness/common.hpp"
#include "recharness/kernels.hpp"

namespace {

using namespace recharness;

struct Data {
  std::vector<double> rows;
  std::vector<double> query;
  std::vector<double> out;
};

Data make(std::size_t n, std::size_t dim) {
  Rng rng(7);
  Data d;
  d.rows.resize(n * dim);
  for (auto& v : d.rows) v = rng.normal();
  d.query.resize(dim);
  for (auto& v : d.query) v = rng.normal();
  d.out.resize(n);
  return d;
}

template <auto Kernel>
void run(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto dim = static_cast<std::size_t>(state.range(1));
  auto d = make(n, dim);
  for (auto _ : state) {
    Kernel(d.rows, dim, d.query, d.out);
    benchmark::DoNotOptimize(d.out.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}

void Args(benchmark::internal::Benchmark* b) {
  for (int n : {1 << 10, 1 << 14, 1 << 17}) b->Args({n, 64});
}

}  // namespace

BENCHMARK(run<kernels::dot_scores_serial>)->Name("dot/serial")->Apply(Args);
BENCHMARK(run<kernels::dot_scores_omp>)->Name("dot/omp")->Apply(Args);
BENCHMARK(run<kernels::cosine_scores_serial>)->Name("cosine/serial")->Apply(Args);
BENCHMARK(run<kernels::cosine_scores_omp>)->Name("cosine/omp")->Apply(Args);

BENCHMARK_MAIN();
