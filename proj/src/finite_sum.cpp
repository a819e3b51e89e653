#include "srvrc/finite_sum.hpp"

#include <algorithm>
#include <string>

namespace srvrc {

void FiniteSumProblem::add_component_hessian(std::size_t, const Vector&, Matrix&) const {
  throw std::logic_error("problem does not expose explicit component Hessians");
}

double FiniteSumProblem::value(std::size_t i, const Vector& x) const {
  return component_value(i, x) + shared_value(x);
}

Vector FiniteSumProblem::gradient(std::size_t i, const Vector& x) const {
  Vector g = Vector::Zero(dim());
  add_component_gradient(i, x, g);
  add_shared_gradient(x, g);
  return g;
}

Matrix FiniteSumProblem::hessian(std::size_t i, const Vector& x) const {
  Matrix h = Matrix::Zero(dim(), dim());
  add_component_hessian(i, x, h);
  add_shared_hessian(x, h);
  return h;
}

Vector FiniteSumProblem::hvp(std::size_t i, const Vector& x, const Vector& v) const {
  Vector out = Vector::Zero(dim());
  add_component_hvp(i, x, v, out);
  add_shared_hvp(x, v, out);
  return out;
}

IndexBatch IndexBatch::of(std::vector<std::size_t> idx, std::size_t n) {
  std::sort(idx.begin(), idx.end());
  return IndexBatch{std::move(idx), false, n};
}

IndexBatch sample_multiset(Rng& rng, std::size_t n, std::size_t batch_size) {
  if (n == 0) throw std::invalid_argument("sample_multiset: n must be positive");
  if (batch_size == 0) throw std::invalid_argument("sample_multiset: batch size must be positive");
  if (batch_size >= n) return IndexBatch::all(n);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> idx(batch_size);
  for (auto& i : idx) i = pick(rng);
  return IndexBatch::of(std::move(idx), n);
}

namespace {

void check_batch(const FiniteSumProblem& p, const Vector& x, const IndexBatch& batch) {
  if (static_cast<std::size_t>(x.size()) != p.dim())
    throw std::invalid_argument("dimension mismatch: x has " + std::to_string(x.size()) +
                                " entries, problem has " + std::to_string(p.dim()));
  if (batch.size() == 0) throw std::invalid_argument("empty index batch");
  if (batch.full) {
    if (batch.n != p.size()) throw std::invalid_argument("full batch built for a different n");
    return;
  }
  for (auto i : batch.indices)
    if (i >= p.size())
      throw std::invalid_argument("component index " + std::to_string(i) + " out of range");
}

inline std::size_t entry(const IndexBatch& b, std::size_t k) { return b.full ? k : b.indices[k]; }

// Chunk boundaries depend only on the batch size, so the floating-point
// association of the sum is the same for any thread count.
struct ChunkPlan {
  std::size_t count;
  std::size_t width;
};

ChunkPlan plan_chunks(std::size_t size, std::size_t max_chunks) {
  constexpr std::size_t kMinWidth = 64;
  std::size_t width = std::max(kMinWidth, (size + max_chunks - 1) / max_chunks);
  return {(size + width - 1) / width, width};
}

// Below this many scalar operations a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 15;

template <class Acc, class Zero, class AddOne>
void chunked_sum(const IndexBatch& batch, std::size_t max_chunks, std::size_t work_per_entry,
                 Zero zero, AddOne add_one, Acc& out) {
  const std::size_t size = batch.size();
  const ChunkPlan plan = plan_chunks(size, max_chunks);
  if (plan.count == 1) {
    out = zero();
    for (std::size_t k = 0; k < size; ++k) add_one(entry(batch, k), out);
    return;
  }
  std::vector<Acc> partial(plan.count);
  const bool parallel = size * work_per_entry >= kParallelWork;
  const auto chunks = static_cast<std::ptrdiff_t>(plan.count);
#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t c = 0; c < chunks; ++c) {
    const std::size_t lo = static_cast<std::size_t>(c) * plan.width;
    const std::size_t hi = std::min(size, lo + plan.width);
    Acc acc = zero();
    for (std::size_t k = lo; k < hi; ++k) add_one(entry(batch, k), acc);
    partial[static_cast<std::size_t>(c)] = std::move(acc);
  }
  out = std::move(partial[0]);
  for (std::size_t c = 1; c < plan.count; ++c) out += partial[c];
}

}  // namespace

Vector batch_gradient(const FiniteSumProblem& p, const Vector& x, const IndexBatch& batch,
                      OracleCounter& counter) {
  check_batch(p, x, batch);
  const std::size_t d = p.dim();
  Vector g;
  bool done = false;
  if (batch.full) {
    g = Vector::Zero(d);
    done = p.full_component_gradient(x, g);
  }
  if (!done) {
    chunked_sum(
        batch, 64, 4 * d, [d] { return Vector(Vector::Zero(d)); },
        [&](std::size_t i, Vector& acc) { p.add_component_gradient(i, x, acc); }, g);
    g /= static_cast<double>(batch.size());
  }
  p.add_shared_gradient(x, g);
  counter.grad_calls += batch.size();
  return g;
}

Matrix batch_hessian(const FiniteSumProblem& p, const Vector& x, const IndexBatch& batch,
                     OracleCounter& counter) {
  check_batch(p, x, batch);
  if (!p.has_hessian()) throw std::invalid_argument("problem has no explicit Hessian oracle");
  const std::size_t d = p.dim();
  Matrix h;
  bool done = false;
  if (batch.full) {
    h = Matrix::Zero(d, d);
    done = p.full_component_hessian(x, h);
  }
  if (!done) {
    chunked_sum(
        batch, 8, 2 * d * d, [d] { return Matrix(Matrix::Zero(d, d)); },
        [&](std::size_t i, Matrix& acc) { p.add_component_hessian(i, x, acc); }, h);
    h /= static_cast<double>(batch.size());
  }
  p.add_shared_hessian(x, h);
  counter.hess_calls += batch.size();
  return h;
}

void batch_hvp(const FiniteSumProblem& p, const Vector& x, const IndexBatch& batch,
               const Vector& v, Vector& out, OracleCounter& counter) {
  check_batch(p, x, batch);
  if (v.size() != x.size()) throw std::invalid_argument("dimension mismatch: v and x");
  const std::size_t d = p.dim();
  bool done = false;
  if (batch.full) {
    out.setZero(d);
    done = p.full_component_hvp(x, v, out);
  }
  if (!done) {
    chunked_sum(
        batch, 64, 4 * d, [d] { return Vector(Vector::Zero(d)); },
        [&](std::size_t i, Vector& acc) { p.add_component_hvp(i, x, v, acc); }, out);
    out /= static_cast<double>(batch.size());
  }
  p.add_shared_hvp(x, v, out);
  counter.hvp_calls += batch.size();
}

Vector batch_hvp(const FiniteSumProblem& p, const Vector& x, const IndexBatch& batch,
                 const Vector& v, OracleCounter& counter) {
  Vector out;
  batch_hvp(p, x, batch, v, out, counter);
  return out;
}

double full_value(const FiniteSumProblem& p, const Vector& x) {
  const IndexBatch all = IndexBatch::all(p.size());
  check_batch(p, x, all);
  double sum = 0.0;
  chunked_sum(
      all, 64, 4 * p.dim(), [] { return 0.0; },
      [&](std::size_t i, double& acc) { acc += p.component_value(i, x); }, sum);
  return sum / static_cast<double>(p.size()) + p.shared_value(x);
}

Vector full_gradient(const FiniteSumProblem& p, const Vector& x) {
  OracleCounter scratch;
  return batch_gradient(p, x, IndexBatch::all(p.size()), scratch);
}

Matrix full_hessian(const FiniteSumProblem& p, const Vector& x) {
  OracleCounter scratch;
  return batch_hessian(p, x, IndexBatch::all(p.size()), scratch);
}

Vector full_hvp(const FiniteSumProblem& p, const Vector& x, const Vector& v) {
  OracleCounter scratch;
  return batch_hvp(p, x, IndexBatch::all(p.size()), v, scratch);
}

namespace serial {

Vector batch_gradient(const FiniteSumProblem& p, const Vector& x, const IndexBatch& batch) {
  check_batch(p, x, batch);
  Vector g = Vector::Zero(p.dim());
  for (std::size_t k = 0; k < batch.size(); ++k) g += p.gradient(entry(batch, k), x);
  return g / static_cast<double>(batch.size());
}

Matrix batch_hessian(const FiniteSumProblem& p, const Vector& x, const IndexBatch& batch) {
  check_batch(p, x, batch);
  Matrix h = Matrix::Zero(p.dim(), p.dim());
  for (std::size_t k = 0; k < batch.size(); ++k) h += p.hessian(entry(batch, k), x);
  return h / static_cast<double>(batch.size());
}

Vector batch_hvp(const FiniteSumProblem& p, const Vector& x, const IndexBatch& batch,
                 const Vector& v) {
  check_batch(p, x, batch);
  Vector out = Vector::Zero(p.dim());
  for (std::size_t k = 0; k < batch.size(); ++k) out += p.hvp(entry(batch, k), x, v);
  return out / static_cast<double>(batch.size());
}

double batch_value(const FiniteSumProblem& p, const Vector& x, const IndexBatch& batch) {
  check_batch(p, x, batch);
  double s = 0.0;
  for (std::size_t k = 0; k < batch.size(); ++k) s += p.value(entry(batch, k), x);
  return s / static_cast<double>(batch.size());
}

}  // namespace serial
}  // namespace srvrc
