#include "srvrc/cubic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace srvrc {

CubicModel::CubicModel(Vector b, Matrix a, double penalty, double hess_norm_bound)
    : b_(std::move(b)), a_(std::move(a)), penalty_(penalty), beta_(hess_norm_bound) {
  const auto& m = std::get<Matrix>(a_);
  if (m.rows() != b_.size() || m.cols() != b_.size())
    throw std::invalid_argument("CubicModel: A must be d x d");
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + m.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("CubicModel: A must be symmetric");
  if (!(penalty > 0.0)) throw std::invalid_argument("CubicModel: penalty must be positive");
  if (!(hess_norm_bound >= 0.0)) throw std::invalid_argument("CubicModel: beta must be nonnegative");
}

CubicModel::CubicModel(Vector b, LinearOperator a, double penalty, double hess_norm_bound)
    : b_(std::move(b)), a_(std::move(a)), penalty_(penalty), beta_(hess_norm_bound) {
  if (!std::get<LinearOperator>(a_)) throw std::invalid_argument("CubicModel: empty operator");
  if (!(penalty > 0.0)) throw std::invalid_argument("CubicModel: penalty must be positive");
  if (!(hess_norm_bound >= 0.0)) throw std::invalid_argument("CubicModel: beta must be nonnegative");
}

const Matrix& CubicModel::matrix() const {
  if (!has_matrix()) throw std::logic_error("CubicModel: no explicit matrix in operator mode");
  return std::get<Matrix>(a_);
}

void CubicModel::apply(const Vector& v, Vector& out) const {
  if (const auto* m = std::get_if<Matrix>(&a_))
    out.noalias() = *m * v;
  else
    std::get<LinearOperator>(a_)(v, out);
}

Vector CubicModel::apply(const Vector& v) const {
  Vector out(v.size());
  apply(v, out);
  return out;
}

namespace {

void check_dim(const CubicModel& m, const Vector& h) {
  if (static_cast<std::size_t>(h.size()) != m.dim())
    throw std::invalid_argument("cubic model: dimension mismatch");
}

// Model value at h from a precomputed A h.
double value_from_image(const Vector& b, double tau, const Vector& h, const Vector& ah) {
  const double r = h.norm();
  return b.dot(h) + 0.5 * h.dot(ah) + tau * r * r * r / 6.0;
}

void gradient_from_image(const Vector& b, double tau, const Vector& h, const Vector& ah, Vector& g) {
  g = b + ah;
  g += (0.5 * tau * h.norm()) * h;
}

// Cauchy point and its image under A, at the cost of one product.
void cauchy_with_image(const CubicModel& m, Vector& x, Vector& ax) {
  const Vector& b = m.b();
  const double bn = b.norm();
  if (bn == 0.0) {
    x = Vector::Zero(b.size());
    ax = Vector::Zero(b.size());
    return;
  }
  Vector ab(b.size());
  m.apply(b, ab);
  const double tau = m.penalty();
  const double first = -b.dot(ab) / (tau * bn * bn);
  const double c = 2.0 * bn / tau;
  const double root = std::sqrt(first * first + c);
  // first + root, written without cancellation when first < 0
  const double rc = first >= 0.0 ? first + root : c / (root - first);
  x = (-rc / bn) * b;
  ax = (-rc / bn) * ab;
}

bool finite(const Vector& v) { return v.allFinite(); }

}  // namespace

double cubic_function(const CubicModel& m, const Vector& h) {
  check_dim(m, h);
  Vector ah(h.size());
  m.apply(h, ah);
  return value_from_image(m.b(), m.penalty(), h, ah);
}

Vector cubic_gradient(const CubicModel& m, const Vector& h) {
  check_dim(m, h);
  Vector ah(h.size());
  m.apply(h, ah);
  Vector g;
  gradient_from_image(m.b(), m.penalty(), h, ah, g);
  return g;
}

Vector cauchy_point(const CubicModel& m) {
  Vector x, ax;
  cauchy_with_image(m, x, ax);
  return x;
}

CubicSolution solve_exact(const CubicModel& m, const ExactSolverOptions& opts) {
  if (!m.has_matrix()) throw std::invalid_argument("solve_exact needs an explicit matrix");
  if (m.dim() > opts.dense_limit)
    throw std::invalid_argument("solve_exact: dimension " + std::to_string(m.dim()) +
                                " exceeds the dense limit");
  const Matrix& a = m.matrix();
  const Vector& b = m.b();
  const double tau = m.penalty();
  const auto d = b.size();

  Eigen::SelfAdjointEigenSolver<Matrix> eig(a);
  if (eig.info() != Eigen::Success) throw std::runtime_error("solve_exact: eigendecomposition failed");
  const Vector& lam = eig.eigenvalues();  // ascending
  const Matrix& q = eig.eigenvectors();
  const Vector c = q.transpose() * b;
  const double bn = b.norm();
  const double low = lam[0];
  const double lo = std::max(0.0, -low);

  // Bottom eigenspace: eigenvalues indistinguishable from the smallest.
  const double spread = 1e-12 * std::max(1.0, lam.cwiseAbs().maxCoeff());
  Eigen::Index bottom = 1;
  while (bottom < d && lam[bottom] - low <= spread) ++bottom;
  const double c_bottom = c.head(bottom).norm();
  const bool drop_bottom = low <= 0.0 && c_bottom <= 1e-12 * bn;
  const Eigen::Index first = drop_bottom ? bottom : 0;

  auto finish = [&](const Vector& coords) {
    CubicSolution s;
    s.h = q * coords;
    s.m_value = cubic_function(m, s.h);
    s.lambda = 0.5 * tau * s.h.norm();
    s.status = SolveStatus::exact;
    return s;
  };
  auto coords_at = [&](double lambda) {
    Vector y = Vector::Zero(d);
    for (Eigen::Index i = first; i < d; ++i) y[i] = -c[i] / (lam[i] + lambda);
    return y;
  };

  if (drop_bottom) {
    // Either b = 0 along with everything off the bottom space, or the hard case.
    if (lo == 0.0 && bn == 0.0) return finish(Vector::Zero(d));
    Vector y = coords_at(lo);
    const double target = 2.0 * lo / tau;
    const double yn = y.norm();
    if (yn <= target) {
      y[0] = std::sqrt(std::max(0.0, target * target - yn * yn));
      return finish(y);
    }
  }
  if (bn == 0.0) return finish(Vector::Zero(d));

  // psi(lambda) = 1/||y(lambda)|| - tau/(2 lambda), increasing, root > lo.
  auto norm_and_slope = [&](double lambda, double& yn, double& dyn) {
    double s = 0.0, s3 = 0.0;
    for (Eigen::Index i = first; i < d; ++i) {
      const double den = lam[i] + lambda;
      const double ci2 = c[i] * c[i];
      s += ci2 / (den * den);
      s3 += ci2 / (den * den * den);
    }
    yn = std::sqrt(s);
    dyn = -s3 / yn;  // d||y||/d lambda
  };
  auto phi = [&](double lambda) {
    double yn, dyn;
    norm_and_slope(lambda, yn, dyn);
    return yn - 2.0 * lambda / tau;
  };

  double left = lo;
  double right = lo + 1.0;
  while (phi(right) > 0.0) {
    left = right;
    right = lo + 2.0 * (right - lo);
    if (!std::isfinite(right)) throw std::runtime_error("solve_exact: could not bracket the root");
  }
  const double stop = opts.tol * (1.0 + bn);
  double lambda = 0.5 * (left + right);
  for (int iter = 0; iter < 500; ++iter) {
    double yn, dyn;
    norm_and_slope(lambda, yn, dyn);
    const double f = yn - 2.0 * lambda / tau;
    if (std::abs(f) <= stop) break;
    if (f > 0.0)
      left = lambda;
    else
      right = lambda;
    if (right - left <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, right)) break;
    // Newton step on psi
    const double psi = 1.0 / yn - tau / (2.0 * lambda);
    const double dpsi = -dyn / (yn * yn) + tau / (2.0 * lambda * lambda);
    double next = lambda - psi / dpsi;
    if (!(next > left && next < right)) next = 0.5 * (left + right);
    lambda = next;
  }
  Vector y = coords_at(lambda);
  // Near the hard case the bottom coordinates carry a tiny denominator; set
  // their length from ||y|| = 2 lambda / tau instead.
  const double target = 2.0 * lambda / tau;
  const double head = y.head(bottom).squaredNorm();
  if (first == 0 && head >= 0.5 * target * target) {
    const double rest = y.squaredNorm() - head;
    y.head(bottom) *= std::sqrt(std::max(0.0, target * target - rest) / head);
  }
  return finish(y);
}

double subsolver_iteration_budget(const SubsolverParams& p, double tau, std::size_t d) {
  const double k = p.eta * tau * p.zeta * p.eps_prime;
  return 480.0 / k *
         (6.0 * std::log(1.0 + std::sqrt(static_cast<double>(d)) / p.delta_prime) +
          32.0 * std::log(12.0 / k));
}

CubicSolution cubic_subsolver(const CubicModel& m, const SubsolverParams& p, Rng& rng) {
  if (!(p.eta > 0.0) || !(p.zeta > 0.0)) throw std::invalid_argument("cubic_subsolver: eta, zeta must be positive");
  if (!(p.eps_prime > 0.0 && p.eps_prime < 1.0)) throw std::invalid_argument("cubic_subsolver: eps' must lie in (0,1)");
  if (!(p.delta_prime > 0.0 && p.delta_prime < 1.0))
    throw std::invalid_argument("cubic_subsolver: delta' must lie in (0,1)");

  const double tau = m.penalty();
  const double target = -(1.0 - p.eps_prime) * tau * p.zeta * p.zeta * p.zeta / 12.0;
  const Vector& b = m.b();
  const auto d = b.size();

  CubicSolution s;
  Vector ax;
  cauchy_with_image(m, s.h, ax);
  s.m_value = value_from_image(b, tau, s.h, ax);
  if (s.m_value <= target) {
    s.status = SolveStatus::subsolver_early_exit;
    return s;
  }

  const double budget = subsolver_iteration_budget(p, tau, m.dim());
  const std::size_t steps = budget > 0.0 ? static_cast<std::size_t>(std::ceil(budget)) : 0;

  std::normal_distribution<double> normal;
  Vector dir(d);
  do {
    for (auto& e : dir) e = normal(rng);
  } while (dir.norm() == 0.0);
  dir.normalize();
  const double beta = m.hess_norm_bound();
  const double sigma = tau * tau * p.zeta * p.zeta * p.zeta * p.eps_prime / (beta + tau * p.zeta) / 576.0;
  const Vector bt = b + sigma * dir;

  Vector g(d);
  Vector& x = s.h;
  std::size_t k = 0;
  while (k < steps) {
    ++k;
    gradient_from_image(bt, tau, x, ax, g);
    x.noalias() -= p.eta * g;
    m.apply(x, ax);
    if (!finite(x) || !finite(ax))
      throw SolverDivergence("cubic_subsolver diverged at step " + std::to_string(k));
    if (value_from_image(bt, tau, x, ax) <= target) break;
  }
  s.iterations = k;
  s.m_value = value_from_image(b, tau, x, ax);
  s.status = SolveStatus::subsolver_iterated;
  return s;
}

CubicSolution cubic_finalsolver(const CubicModel& m, const FinalsolverParams& p) {
  const double tau = m.penalty();
  const double beta = m.hess_norm_bound();
  const double half = beta / (2.0 * tau);
  const double radius = half + std::sqrt(half * half + m.b().norm() / tau);
  if (!(p.eta > 0.0 && p.eta < 1.0 / (4.0 * (beta + tau * radius))))
    throw std::invalid_argument("cubic_finalsolver: step size must satisfy eta < 1/(4(beta + tau R))");
  if (!(p.eps_g > 0.0)) throw std::invalid_argument("cubic_finalsolver: eps_g must be positive");

  CubicSolution s;
  s.status = SolveStatus::finalsolver;
  Vector& x = s.h;
  Vector ax, g;
  cauchy_with_image(m, x, ax);
  const Vector& b = m.b();
  std::size_t k = 0;
  for (;;) {
    gradient_from_image(b, tau, x, ax, g);
    if (g.norm() <= p.eps_g) break;
    if (k == p.max_iterations)
      throw BudgetExceeded("cubic_finalsolver: no convergence within " + std::to_string(k) + " steps");
    ++k;
    x.noalias() -= p.eta * g;
    m.apply(x, ax);
    if (!finite(x) || !finite(ax))
      throw SolverDivergence("cubic_finalsolver diverged at step " + std::to_string(k));
  }
  s.iterations = k;
  s.m_value = value_from_image(b, tau, x, ax);
  return s;
}

}  // namespace srvrc
