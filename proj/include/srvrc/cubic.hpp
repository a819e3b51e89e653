#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>

#include "srvrc/finite_sum.hpp"

namespace srvrc {

/// v -> A v. `out` never aliases `in`.
using LinearOperator = std::function<void(const Vector& in, Vector& out)>;

class SolverDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// m(h) = <b, h> + 1/2 <A h, h> + tau/6 ||h||^3
///
/// A is either an explicit symmetric matrix or only reachable through
/// products. `hess_norm_bound` is a known bound beta >= ||A||; the
/// gradient-based solvers use it for their perturbation and step-size rules.
class CubicModel {
 public:
  CubicModel(Vector b, Matrix a, double penalty, double hess_norm_bound);
  CubicModel(Vector b, LinearOperator a, double penalty, double hess_norm_bound);
  template <typename Derived>
  CubicModel(Vector b, const Eigen::MatrixBase<Derived>& a, double penalty, double hess_norm_bound)
      : CubicModel(std::move(b), Matrix(a), penalty, hess_norm_bound) {}

  const Vector& b() const { return b_; }
  double penalty() const { return penalty_; }
  double hess_norm_bound() const { return beta_; }
  std::size_t dim() const { return static_cast<std::size_t>(b_.size()); }

  bool has_matrix() const { return std::holds_alternative<Matrix>(a_); }
  /// Throws std::logic_error in operator mode.
  const Matrix& matrix() const;
  void apply(const Vector& v, Vector& out) const;
  Vector apply(const Vector& v) const;

 private:
  Vector b_;
  std::variant<Matrix, LinearOperator> a_;
  double penalty_;
  double beta_;
};

enum class SolveStatus { exact, subsolver_early_exit, subsolver_iterated, finalsolver };

struct CubicSolution {
  Vector h;
  double m_value = 0.0;
  /// tau ||h|| / 2, reported by the exact solver only.
  std::optional<double> lambda;
  SolveStatus status = SolveStatus::exact;
  /// Gradient steps taken by the iterative solvers.
  std::size_t iterations = 0;
};

double cubic_function(const CubicModel& m, const Vector& h);
Vector cubic_gradient(const CubicModel& m, const Vector& h);

/// Minimizer of the model along -b: -R_c b/||b||. Zero when b = 0.
Vector cauchy_point(const CubicModel& m);

struct ExactSolverOptions {
  /// Target for |phi(lambda)| relative to 1 + ||b||.
  double tol = 1e-12;
  std::size_t dense_limit = 2000;
};

/// Global minimizer of a model with an explicit matrix.
///
/// With A = Q diag(l) Q' and c = Q'b, any global minimizer satisfies
/// (A + lambda I) h = -b with lambda = tau ||h||/2 >= max(0, -l_1). The
/// scalar equation ||(diag(l) + lambda I)^{-1} c|| = 2 lambda / tau is solved
/// by safeguarded Newton on its reciprocal form. When c has no weight on the
/// bottom eigenspace and the remaining terms are too short at lambda = -l_1
/// (the hard case), the solution is completed along a bottom eigenvector.
CubicSolution solve_exact(const CubicModel& m, const ExactSolverOptions& opts = {});

struct SubsolverParams {
  double eta = 0.0;          ///< gradient step
  double zeta = 0.0;         ///< target radius
  double eps_prime = 0.5;    ///< in (0,1)
  double delta_prime = 0.1;  ///< failure probability, in (0,1)
};

/// T' = 480/(eta tau zeta eps') [6 log(1 + sqrt(d)/delta') + 32 log(12/(eta tau zeta eps'))].
double subsolver_iteration_budget(const SubsolverParams& p, double tau, std::size_t d);

/// Gradient descent on a randomly perturbed model, started at the Cauchy
/// point, stopping once the value drops to -(1-eps') tau zeta^3 / 12. Uses
/// one product with A per step. The returned m_value is always the value of
/// the unperturbed model.
CubicSolution cubic_subsolver(const CubicModel& m, const SubsolverParams& p, Rng& rng);

struct FinalsolverParams {
  double eta = 0.0;
  double eps_g = 1e-6;
  std::size_t max_iterations = 1'000'000;
};

/// Gradient descent from the Cauchy point until ||grad m|| <= eps_g. Requires
/// eta < 1/(4(beta + tau R)), R = beta/(2 tau) + sqrt((beta/(2 tau))^2 + ||b||/tau).
CubicSolution cubic_finalsolver(const CubicModel& m, const FinalsolverParams& p);

}  // namespace srvrc
