#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace srvrc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

/// Lipschitz metadata supplied with a problem. They are not estimated.
struct ProblemConstants {
  double lipschitz_grad = 0.0;  ///< L, bound on every ||grad^2 f_i||.
  double lipschitz_hess = 1.0;  ///< rho, Lipschitz constant of every grad^2 f_i.
  /// M, bound on every ||grad f_i||. Empty means unbounded.
  std::optional<double> grad_bound;
};

/// Number of individual component-oracle evaluations charged to a run.
/// Incremented once per batched call, from the calling thread.
struct OracleCounter {
  std::uint64_t grad_calls = 0;
  std::uint64_t hess_calls = 0;
  std::uint64_t hvp_calls = 0;

  OracleCounter& operator+=(const OracleCounter& o) {
    grad_calls += o.grad_calls;
    hess_calls += o.hess_calls;
    hvp_calls += o.hvp_calls;
    return *this;
  }
  friend bool operator==(const OracleCounter&, const OracleCounter&) = default;
};

/// F(x) = (1/n) sum_i f_i(x), with f_i = c_i + r.
///
/// Implementations provide the per-component part c_i and, optionally, a
/// term r that every component shares (a regularizer, typically). Batched
/// oracles average the component parts and add r once, which is the same
/// quantity as averaging the f_i.
class FiniteSumProblem {
 public:
  explicit FiniteSumProblem(ProblemConstants constants) : constants_(constants) {}
  virtual ~FiniteSumProblem() = default;

  virtual std::size_t size() const = 0;
  virtual std::size_t dim() const = 0;

  virtual double component_value(std::size_t i, const Vector& x) const = 0;
  /// acc += grad c_i(x)
  virtual void add_component_gradient(std::size_t i, const Vector& x, Vector& acc) const = 0;
  /// acc += grad^2 c_i(x). Only called when has_hessian() is true.
  virtual void add_component_hessian(std::size_t i, const Vector& x, Matrix& acc) const;
  /// acc += grad^2 c_i(x) v
  virtual void add_component_hvp(std::size_t i, const Vector& x, const Vector& v,
                                 Vector& acc) const = 0;
  virtual bool has_hessian() const { return true; }

  virtual double shared_value(const Vector&) const { return 0.0; }
  virtual void add_shared_gradient(const Vector&, Vector&) const {}
  virtual void add_shared_hessian(const Vector&, Matrix&) const {}
  virtual void add_shared_hvp(const Vector&, const Vector&, Vector&) const {}

  // Closed forms for the average of c_i over all n components. Returning
  // false falls back to summation.
  virtual bool full_component_gradient(const Vector&, Vector&) const { return false; }
  virtual bool full_component_hessian(const Vector&, Matrix&) const { return false; }
  virtual bool full_component_hvp(const Vector&, const Vector&, Vector&) const { return false; }

  const ProblemConstants& constants() const { return constants_; }
  void set_constants(const ProblemConstants& c) { constants_ = c; }

  // Single-component oracles, f_i = c_i + r.
  double value(std::size_t i, const Vector& x) const;
  Vector gradient(std::size_t i, const Vector& x) const;
  Matrix hessian(std::size_t i, const Vector& x) const;
  Vector hvp(std::size_t i, const Vector& x, const Vector& v) const;

 private:
  ProblemConstants constants_;
};

/// An index multiset, kept in ascending order. `full` stands for {0..n-1}
/// and is produced whenever the requested size reaches n.
struct IndexBatch {
  std::vector<std::size_t> indices;
  bool full = false;
  std::size_t n = 0;

  std::size_t size() const { return full ? n : indices.size(); }
  static IndexBatch all(std::size_t n) { return IndexBatch{{}, true, n}; }
  static IndexBatch of(std::vector<std::size_t> idx, std::size_t n);
};

/// B draws with replacement from {0..n-1}, sorted. B >= n returns the full
/// set without touching the generator.
IndexBatch sample_multiset(Rng& rng, std::size_t n, std::size_t batch_size);

// Batched oracles. Each returns the multiset average and charges |I| calls.
// Component contributions are reduced in fixed chunks so the result does
// not depend on the OpenMP thread count.
Vector batch_gradient(const FiniteSumProblem& p, const Vector& x, const IndexBatch& batch,
                      OracleCounter& counter);
Matrix batch_hessian(const FiniteSumProblem& p, const Vector& x, const IndexBatch& batch,
                     OracleCounter& counter);
void batch_hvp(const FiniteSumProblem& p, const Vector& x, const IndexBatch& batch,
               const Vector& v, Vector& out, OracleCounter& counter);
Vector batch_hvp(const FiniteSumProblem& p, const Vector& x, const IndexBatch& batch,
                 const Vector& v, OracleCounter& counter);

/// Exact F(x). Not charged to any counter; used for traces and diagnostics.
double full_value(const FiniteSumProblem& p, const Vector& x);
Vector full_gradient(const FiniteSumProblem& p, const Vector& x);
Matrix full_hessian(const FiniteSumProblem& p, const Vector& x);
Vector full_hvp(const FiniteSumProblem& p, const Vector& x, const Vector& v);

/// Single-threaded reference kernels: a plain ascending sum with no chunking
/// and no closed-form shortcuts. Kept to check the parallel kernels.
namespace serial {
Vector batch_gradient(const FiniteSumProblem& p, const Vector& x, const IndexBatch& batch);
Matrix batch_hessian(const FiniteSumProblem& p, const Vector& x, const IndexBatch& batch);
Vector batch_hvp(const FiniteSumProblem& p, const Vector& x, const IndexBatch& batch,
                 const Vector& v);
double batch_value(const FiniteSumProblem& p, const Vector& x, const IndexBatch& batch);
}  // namespace serial

}  // namespace srvrc
