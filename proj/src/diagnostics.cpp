#include "srvrc/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace srvrc {

double gershgorin_bound(const Matrix& h) { return h.cwiseAbs().rowwise().sum().maxCoeff(); }

double min_eigenvalue_power(const LinearOperator& h, std::size_t d, double upper_bound, double tol,
                            std::size_t max_iterations, std::uint64_t seed) {
  if (d == 0) throw std::invalid_argument("min_eigenvalue_power: empty operator");
  const double c = upper_bound;
  Rng rng(seed);
  std::normal_distribution<double> normal;
  Vector x(static_cast<Eigen::Index>(d));
  for (auto& e : x) e = normal(rng);
  x.normalize();
  Vector hx(x.size()), y(x.size());
  double previous = std::numeric_limits<double>::infinity();
  const double scale = std::max(std::abs(c), 1e-300);
  for (std::size_t k = 0; k < max_iterations; ++k) {
    h(x, hx);
    const double rayleigh = x.dot(hx);
    // The residual bounds the distance from the Rayleigh quotient to the spectrum.
    const double residual = (hx - rayleigh * x).norm();
    if (residual <= tol * scale || std::abs(rayleigh - previous) <= 1e-3 * tol * scale) return rayleigh;
    previous = rayleigh;
    y = c * x - hx;
    const double yn = y.norm();
    if (yn == 0.0) return rayleigh;  // H = c I on the iterate
    x = y / yn;
  }
  throw std::runtime_error("min_eigenvalue_power: no convergence");
}

double min_eigenvalue(const Matrix& h, double tol) {
  if (h.rows() != h.cols() || h.rows() == 0) throw std::invalid_argument("min_eigenvalue: need a square matrix");
  if (static_cast<std::size_t>(h.rows()) <= kDenseEigenLimit) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(h, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success) throw std::runtime_error("min_eigenvalue: eigensolver failed");
    return eig.eigenvalues()[0];
  }
  const LinearOperator op = [&h](const Vector& in, Vector& out) { out.noalias() = h * in; };
  return min_eigenvalue_power(op, static_cast<std::size_t>(h.rows()), gershgorin_bound(h), tol);
}

double mu_value(double grad_norm, double lambda_min, double rho) {
  const double curvature = std::max(-lambda_min, 0.0);
  return std::max(std::pow(grad_norm, 1.5), curvature * curvature * curvature / std::pow(rho, 1.5));
}

LocalMinCertificate local_min_certificate(const FiniteSumProblem& p, const Vector& x, double rho,
                                          double epsilon) {
  if (!(rho > 0.0)) throw std::invalid_argument("mu: rho must be positive");
  LocalMinCertificate cert;
  cert.grad_norm = full_gradient(p, x).norm();
  if (p.has_hessian() && p.dim() <= kDenseEigenLimit) {
    cert.lambda_min = min_eigenvalue(full_hessian(p, x));
  } else {
    const LinearOperator op = [&](const Vector& in, Vector& out) { out = full_hvp(p, x, in); };
    // |lambda| <= L for every component Hessian, hence for their average.
    double bound = p.constants().lipschitz_grad;
    if (!(bound > 0.0)) throw std::invalid_argument("mu: problem needs L > 0 for the iterative eigensolver");
    cert.lambda_min = min_eigenvalue_power(op, p.dim(), bound, 1e-10);
  }
  cert.mu = mu_value(cert.grad_norm, cert.lambda_min, rho);
  cert.eps_g = epsilon;
  cert.eps_h = std::sqrt(rho * epsilon);
  return cert;
}

double mu_criterion(const FiniteSumProblem& p, const Vector& x, double rho) {
  return local_min_certificate(p, x, rho).mu;
}

std::pair<bool, LocalMinCertificate> certify_local_min(const FiniteSumProblem& p, const Vector& x,
                                                       double epsilon, double rho, double c) {
  if (!(c > 0.0)) throw std::invalid_argument("certify_local_min: c must be positive");
  auto cert = local_min_certificate(p, x, rho, epsilon);
  return {cert.mu <= c * std::pow(epsilon, 1.5), cert};
}

double finite_diff_grad_check(const FiniteSumProblem& p, const Vector& x, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("finite_diff_grad_check: step must be positive");
  const Vector g = full_gradient(p, x);
  double worst = 0.0;
  Vector probe = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    probe[j] = x[j] + step;
    const double up = full_value(p, probe);
    probe[j] = x[j] - step;
    const double down = full_value(p, probe);
    probe[j] = x[j];
    const double fd = (up - down) / (2.0 * step);
    worst = std::max(worst, std::abs(fd - g[j]) / (1.0 + std::abs(g[j])));
  }
  return worst;
}

double hvp_consistency_error(const FiniteSumProblem& p, const Vector& x, const Vector& v) {
  const Vector via_product = full_hvp(p, x, v);
  const Vector via_matrix = full_hessian(p, x) * v;
  return (via_product - via_matrix).norm() / (1.0 + v.norm());
}

}  // namespace srvrc
