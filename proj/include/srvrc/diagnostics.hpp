#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>

#include "srvrc/cubic.hpp"
#include "srvrc/finite_sum.hpp"

namespace srvrc {

/// Second-order stationarity measures at a point.
struct LocalMinCertificate {
  double grad_norm = 0.0;
  double lambda_min = 0.0;
  /// max{ ||grad F||^{3/2}, (-min(lambda_min, 0))^3 / rho^{3/2} }
  double mu = 0.0;
  double eps_g = 0.0;  ///< epsilon
  double eps_h = 0.0;  ///< sqrt(rho epsilon)
};

inline constexpr std::size_t kDenseEigenLimit = 2000;

/// Smallest eigenvalue, to within tol * ||H||. Dense eigendecomposition up
/// to kDenseEigenLimit, shifted power iteration beyond.
double min_eigenvalue(const Matrix& h, double tol = 1e-10);

/// Smallest eigenvalue by power iteration on (c I - H), c an upper bound on
/// lambda_max. Throws std::runtime_error when max_iterations is exhausted.
double min_eigenvalue_power(const LinearOperator& h, std::size_t d, double upper_bound, double tol,
                            std::size_t max_iterations = 200000, std::uint64_t seed = 7);

/// Gershgorin bound on max |lambda(H)|.
double gershgorin_bound(const Matrix& h);

/// mu from given gradient norm and smallest Hessian eigenvalue.
double mu_value(double grad_norm, double lambda_min, double rho);

/// Certificate at x from full-batch oracles. Uses the dense Hessian when the
/// problem exposes one and d <= kDenseEigenLimit, Hessian-vector products
/// otherwise.
LocalMinCertificate local_min_certificate(const FiniteSumProblem& p, const Vector& x, double rho,
                                          double epsilon = 0.0);

double mu_criterion(const FiniteSumProblem& p, const Vector& x, double rho);

/// True iff mu(x) <= c * epsilon^{3/2}.
std::pair<bool, LocalMinCertificate> certify_local_min(const FiniteSumProblem& p, const Vector& x,
                                                       double epsilon, double rho, double c);

/// max_j |central difference_j - grad_j| / (1 + |grad_j|) for the full objective.
double finite_diff_grad_check(const FiniteSumProblem& p, const Vector& x, double step);

/// ||H v - (H)v|| / (1 + ||v||) comparing the full-batch product oracle
/// against the explicit full Hessian.
double hvp_consistency_error(const FiniteSumProblem& p, const Vector& x, const Vector& v);

}  // namespace srvrc
