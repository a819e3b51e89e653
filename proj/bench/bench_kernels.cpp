#include <benchmark/benchmark.h>

#include "srvrc/finite_sum.hpp"
#include "srvrc/objectives.hpp"

namespace {

using namespace srvrc;

// Binary logistic regression has no closed-form full-batch paths, so every
// kernel sums the components.
const FiniteSumProblem& logreg(std::size_t n, std::size_t d) {
  static std::unique_ptr<FiniteSumProblem> p;
  static std::size_t key = 0;
  if (!p || key != n * 100003 + d) {
    Rng rng(1);
    std::normal_distribution<double> normal;
    std::bernoulli_distribution coin(0.5);
    LibsvmDataset data;
    data.d = d;
    for (std::size_t i = 0; i < n; ++i) {
      LibsvmRow row{coin(rng) ? 1.0 : 0.0, {}};
      for (std::size_t j = 1; j <= d; ++j) row.features.push_back({j, normal(rng) / std::sqrt(double(d))});
      data.rows.push_back(std::move(row));
    }
    p = make_binary_logreg(data, 1e-3);
    key = n * 100003 + d;
  }
  return *p;
}

IndexBatch sample(std::size_t n, std::size_t b) {
  Rng rng(2);
  return sample_multiset(rng, n, b);
}

void BM_gradient_parallel(benchmark::State& st) {
  const auto& p = logreg(st.range(0), 50);
  const auto batch = sample(p.size(), p.size() - 1);
  const Vector x = Vector::Constant(p.dim(), 0.1);
  OracleCounter c;
  for (auto _ : st) benchmark::DoNotOptimize(batch_gradient(p, x, batch, c));
}

void BM_gradient_serial(benchmark::State& st) {
  const auto& p = logreg(st.range(0), 50);
  const auto batch = sample(p.size(), p.size() - 1);
  const Vector x = Vector::Constant(p.dim(), 0.1);
  for (auto _ : st) benchmark::DoNotOptimize(serial::batch_gradient(p, x, batch));
}

void BM_hvp_parallel(benchmark::State& st) {
  const auto& p = logreg(st.range(0), 50);
  const auto batch = sample(p.size(), p.size() - 1);
  const Vector x = Vector::Constant(p.dim(), 0.1);
  const Vector v = Vector::Ones(p.dim());
  OracleCounter c;
  for (auto _ : st) benchmark::DoNotOptimize(batch_hvp(p, x, batch, v, c));
}

void BM_hvp_serial(benchmark::State& st) {
  const auto& p = logreg(st.range(0), 50);
  const auto batch = sample(p.size(), p.size() - 1);
  const Vector x = Vector::Constant(p.dim(), 0.1);
  const Vector v = Vector::Ones(p.dim());
  for (auto _ : st) benchmark::DoNotOptimize(serial::batch_hvp(p, x, batch, v));
}

void BM_hessian_parallel(benchmark::State& st) {
  const auto& p = logreg(st.range(0), 50);
  const auto batch = sample(p.size(), p.size() - 1);
  const Vector x = Vector::Constant(p.dim(), 0.1);
  OracleCounter c;
  for (auto _ : st) benchmark::DoNotOptimize(batch_hessian(p, x, batch, c));
}

void BM_hessian_serial(benchmark::State& st) {
  const auto& p = logreg(st.range(0), 50);
  const auto batch = sample(p.size(), p.size() - 1);
  const Vector x = Vector::Constant(p.dim(), 0.1);
  for (auto _ : st) benchmark::DoNotOptimize(serial::batch_hessian(p, x, batch));
}

}  // namespace

BENCHMARK(BM_gradient_parallel)->Arg(1000)->Arg(20000);
BENCHMARK(BM_gradient_serial)->Arg(1000)->Arg(20000);
BENCHMARK(BM_hvp_parallel)->Arg(1000)->Arg(20000);
BENCHMARK(BM_hvp_serial)->Arg(1000)->Arg(20000);
BENCHMARK(BM_hessian_parallel)->Arg(1000)->Arg(20000);
BENCHMARK(BM_hessian_serial)->Arg(1000)->Arg(20000);

BENCHMARK_MAIN();
