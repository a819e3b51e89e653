#include <doctest.h>

#include <cmath>
#include <random>

#include "srvrc/cubic.hpp"

using namespace srvrc;

namespace {

Matrix random_symmetric(Rng& rng, int d, double scale = 1.0) {
  std::normal_distribution<double> normal;
  Matrix a(d, d);
  for (auto& e : a.reshaped()) e = normal(rng);
  return scale * 0.5 * (a + a.transpose());
}

Vector random_vector(Rng& rng, int d, double scale = 1.0) {
  std::normal_distribution<double> normal;
  Vector v(d);
  for (auto& e : v) e = scale * normal(rng);
  return v;
}

double spectral_norm(const Matrix& a) {
  return Eigen::SelfAdjointEigenSolver<Matrix>(a, Eigen::EigenvaluesOnly).eigenvalues().cwiseAbs().maxCoeff();
}

double lambda_min(const Matrix& a) {
  return Eigen::SelfAdjointEigenSolver<Matrix>(a, Eigen::EigenvaluesOnly).eigenvalues()[0];
}

CubicModel scalar_model(double b, double a, double tau) {
  return CubicModel(Vector::Constant(1, b), Matrix::Constant(1, 1, a), tau, std::abs(a));
}

// Crude global search: gradient descent from many starts.
double multistart_min(const CubicModel& m, Rng& rng, int starts) {
  const double beta = m.hess_norm_bound();
  const double tau = m.penalty();
  const double radius = 2.0 * (beta / tau + std::sqrt(m.b().norm() / tau));
  double best = 0.0;
  for (int s = 0; s < starts; ++s) {
    Vector h = random_vector(rng, static_cast<int>(m.dim()), radius / 2);
    const double eta = 1.0 / (4.0 * (beta + tau * radius));
    for (int k = 0; k < 20000; ++k) h -= eta * cubic_gradient(m, h);
    best = std::min(best, cubic_function(m, h));
  }
  return best;
}

}  // namespace

TEST_CASE("model value and gradient") {
  const CubicModel unit(Vector::Zero(1), Matrix::Identity(1, 1), 6.0, 1.0);
  CHECK(cubic_function(unit, Vector::Zero(1)) == 0.0);
  CHECK(cubic_function(unit, Vector::Ones(1)) == doctest::Approx(1.5).epsilon(1e-15));

  const CubicModel m = scalar_model(1.0, 0.0, 6.0);
  CHECK(cubic_gradient(m, Vector::Zero(1))[0] == 1.0);
  CHECK(std::abs(cubic_gradient(m, Vector::Constant(1, -1.0 / std::sqrt(3.0)))[0]) <= 1e-15);

  Rng rng(1);
  const Matrix a = random_symmetric(rng, 6);
  const Vector b = random_vector(rng, 6);
  const CubicModel dense(b, a, 2.5, spectral_norm(a));
  const CubicModel op(b, LinearOperator([&a](const Vector& v, Vector& out) { out = a * v; }), 2.5, spectral_norm(a));
  for (int k = 0; k < 5; ++k) {
    const Vector h = random_vector(rng, 6);
    CHECK(cubic_function(op, h) == doctest::Approx(cubic_function(dense, h)).epsilon(1e-12));
    const Vector g = cubic_gradient(dense, h);
    const double step = 1e-6;
    for (int j = 0; j < 6; ++j) {
      Vector up = h, down = h;
      up[j] += step;
      down[j] -= step;
      const double fd = (cubic_function(dense, up) - cubic_function(dense, down)) / (2 * step);
      CHECK(std::abs(fd - g[j]) <= 1e-6 * (1.0 + std::abs(g[j])));
    }
  }
}

TEST_CASE("model construction checks") {
  Matrix asym = Matrix::Identity(2, 2);
  asym(0, 1) = 1.0;
  CHECK_THROWS_AS(CubicModel(Vector::Zero(2), asym, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(CubicModel(Vector::Zero(2), Matrix::Identity(2, 2), 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(CubicModel(Vector::Zero(3), Matrix::Identity(2, 2), 1.0, 1.0), std::invalid_argument);
  const CubicModel op(Vector::Zero(2), LinearOperator([](const Vector& v, Vector& out) { out = v; }), 1.0, 1.0);
  CHECK_FALSE(op.has_matrix());
  CHECK_THROWS_AS(op.matrix(), std::logic_error);
}

TEST_CASE("Cauchy point") {
  CHECK(cauchy_point(scalar_model(1.0, 0.0, 2.0))[0] == doctest::Approx(-1.0).epsilon(1e-15));
  const Vector b = (Vector(3) << 3.0, 0.0, -4.0).finished();
  const CubicModel flat(b, Matrix::Zero(3, 3), 0.5, 0.0);
  CHECK(cauchy_point(flat).norm() == doctest::Approx(std::sqrt(2.0 * 5.0 / 0.5)).epsilon(1e-14));
  CHECK(cauchy_point(CubicModel(Vector::Zero(3), Matrix::Identity(3, 3), 1.0, 1.0)).norm() == 0.0);

  Rng rng(2);
  for (int k = 0; k < 30; ++k) {
    const Matrix a = random_symmetric(rng, 4);
    const CubicModel m(random_vector(rng, 4), a, 0.5 + k * 0.1, spectral_norm(a));
    const Vector c = cauchy_point(m);
    const double mc = cubic_function(m, c);
    CHECK(mc <= 0.0);
    // line search along -b
    const Vector dir = -m.b().normalized();
    double best = 0.0;
    for (int i = 0; i <= 20000; ++i) best = std::min(best, cubic_function(m, (i * 1e-3) * dir));
    CHECK(mc <= best + 1e-9);
  }
}

TEST_CASE("exact solver: closed forms") {
  const CubicSolution s = solve_exact(scalar_model(1.0, 0.0, 6.0));
  CHECK(s.h[0] == doctest::Approx(-1.0 / std::sqrt(3.0)).epsilon(1e-12));
  CHECK(s.m_value == doctest::Approx(-(2.0 / 3.0) / std::sqrt(3.0)).epsilon(1e-12));
  double grid = 0.0;
  for (int i = -20000; i <= 20000; ++i) grid = std::min(grid, cubic_function(scalar_model(1.0, 0.0, 6.0), Vector::Constant(1, i * 1e-4)));
  CHECK(s.m_value <= grid + 1e-12);
  CHECK(s.lambda.value() == doctest::Approx(3.0 * std::abs(s.h[0])).epsilon(1e-12));

  const CubicSolution zero = solve_exact(CubicModel(Vector::Zero(3), Matrix::Identity(3, 3), 1.0, 1.0));
  CHECK(zero.h.norm() == 0.0);
  CHECK(zero.m_value == 0.0);
  CHECK(*zero.lambda == 0.0);

  // b = 0 with negative curvature: ||h|| = -2 lambda_1 / tau along the bottom eigenvector.
  const Matrix a = (Vector(2) << -0.5, 2.0).finished().asDiagonal();
  const CubicSolution neg = solve_exact(CubicModel(Vector::Zero(2), a, 2.0, 2.0));
  CHECK(neg.h.norm() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::abs(neg.h[1]) <= 1e-12);
}

TEST_CASE("exact solver: hard case") {
  const Matrix a = (Vector(2) << -1.0, 1.0).finished().asDiagonal();
  for (double c : {0.0, 0.1, 0.5}) {
    const Vector b = (Vector(2) << 0.0, c).finished();
    const CubicModel m(b, a, 1.0, 1.0);
    const CubicSolution s = solve_exact(m);
    CHECK(*s.lambda >= 1.0 - 1e-12);
    CHECK(cubic_gradient(m, s.h).norm() <= 1e-10 * (1.0 + b.norm()));
    double grid = 0.0;
    for (int i = -600; i <= 600; ++i)
      for (int j = -600; j <= 600; ++j)
        grid = std::min(grid, cubic_function(m, (Vector(2) << i * 5e-3, j * 5e-3).finished()));
    CHECK(s.m_value <= grid + 1e-9);
  }
}

TEST_CASE("exact solver: optimality conditions on random models") {
  Rng rng(3);
  for (int k = 0; k < 50; ++k) {
    const int d = 1 + k % 9;
    const Matrix a = random_symmetric(rng, d);
    const Vector b = random_vector(rng, d, k % 3 == 0 ? 1e-3 : 1.0);
    const double tau = 0.1 + 0.2 * (k % 7);
    const CubicModel m(b, a, tau, spectral_norm(a));
    const CubicSolution s = solve_exact(m);
    CHECK(cubic_gradient(m, s.h).norm() <= 1e-10 * (1.0 + b.norm()));
    CHECK(lambda_min(a) + tau * s.h.norm() / 2 >= -1e-10);
    CHECK(s.m_value == doctest::Approx(cubic_function(m, s.h)).epsilon(1e-10));
    CHECK(s.m_value <= cubic_function(m, cauchy_point(m)) + 1e-12);
    const double lam = *s.lambda;
    const Matrix shifted = a + lam * Matrix::Identity(d, d);
    if (lambda_min(shifted) > 1e-6) {
      const double secular = shifted.ldlt().solve(b).norm();
      CHECK(secular == doctest::Approx(2.0 * lam / tau).epsilon(1e-6));
    }
  }
}

TEST_CASE("exact solver beats multistart descent") {
  Rng rng(4);
  for (int k = 0; k < 10; ++k) {
    const Matrix a = random_symmetric(rng, 5);
    const CubicModel m(random_vector(rng, 5), a, 1.0, spectral_norm(a));
    CHECK(solve_exact(m).m_value <= multistart_min(m, rng, 8) + 1e-8);
  }
}

TEST_CASE("exact solver needs an explicit matrix") {
  const CubicModel op(Vector::Ones(2), LinearOperator([](const Vector& v, Vector& out) { out = v; }), 1.0, 1.0);
  CHECK_THROWS_AS(solve_exact(op), std::logic_error);
}

TEST_CASE("subsolver iteration budget") {
  SubsolverParams p{0.01, 0.2, 0.5, 0.1};
  const double k = 0.01 * 2.0 * 0.2 * 0.5;
  const double expected = 480.0 / k * (6.0 * std::log(1.0 + std::sqrt(4.0) / 0.1) + 32.0 * std::log(12.0 / k));
  CHECK(subsolver_iteration_budget(p, 2.0, 4) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("subsolver: early exit at the Cauchy point") {
  const CubicModel m = scalar_model(10.0, 0.0, 1.0);
  Rng rng(1);
  const Rng before = rng;
  const CubicSolution s = cubic_subsolver(m, {0.01, 0.1, 0.5, 0.1}, rng);
  CHECK(s.status == SolveStatus::subsolver_early_exit);
  CHECK(s.iterations == 0);
  CHECK(rng == before);
  CHECK(s.h == cauchy_point(m));
}

TEST_CASE("subsolver: a budget of one step") {
  const Matrix a = (Vector(2) << -0.3, 0.4).finished().asDiagonal();
  const CubicModel m((Vector(2) << 0.2, 0.1).finished(), a, 1.0, 0.4);
  SubsolverParams p{1e-3, 1.0, 0.5, 0.1};
  // T' falls through zero as zeta grows; bisect for 0 < T' <= 1.
  double lo = 1.0, hi = 1.0;
  while (subsolver_iteration_budget({p.eta, hi, p.eps_prime, p.delta_prime}, 1.0, 2) > 0.0) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double t = subsolver_iteration_budget({p.eta, mid, p.eps_prime, p.delta_prime}, 1.0, 2);
    if (t > 1.0)
      lo = mid;
    else if (t <= 0.0)
      hi = mid;
    else {
      lo = hi = mid;
      break;
    }
  }
  p.zeta = lo;
  const double budget = subsolver_iteration_budget(p, 1.0, 2);
  REQUIRE(budget > 0.0);
  REQUIRE(budget <= 1.0);
  Rng rng(5);
  const CubicSolution s = cubic_subsolver(m, p, rng);
  CHECK(s.status == SolveStatus::subsolver_iterated);
  CHECK(s.iterations == 1);
  CHECK(s.m_value == doctest::Approx(cubic_function(m, s.h)).epsilon(1e-12));
}

TEST_CASE("subsolver uses only products with a closure") {
  Rng rng(6);
  const Matrix a = random_symmetric(rng, 4);
  std::size_t products = 0;
  const CubicModel m(random_vector(rng, 4, 1e-3),
                     LinearOperator([&](const Vector& v, Vector& out) {
                       ++products;
                       out = a * v;
                     }),
                     1.0, spectral_norm(a));
  const double beta = spectral_norm(a);
  const CubicSolution s = cubic_subsolver(m, {1.0 / (16 * beta), 0.3, 0.5, 0.1}, rng);
  CHECK(s.m_value <= 0.0);
  CHECK(products == s.iterations + 1);
}

TEST_CASE("subsolver reports divergence") {
  const CubicModel m(Vector::Zero(2), Matrix::Identity(2, 2), 1e-3, 1.0);
  Rng rng(2);
  CHECK_THROWS_AS(cubic_subsolver(m, {10.0, 1.0, 0.5, 0.1}, rng), SolverDivergence);
}

TEST_CASE("subsolver dominance and decrease on random models") {
  Rng rng(7);
  for (int k = 0; k < 20; ++k) {
    const Matrix a = random_symmetric(rng, 3);
    const double beta = spectral_norm(a);
    const CubicModel m(random_vector(rng, 3, 0.3), a, 1.0, beta);
    const CubicSolution sub = cubic_subsolver(m, {1.0 / (16 * beta), 0.2, 0.5, 0.1}, rng);
    CHECK(sub.m_value <= 1e-12);
    CHECK(solve_exact(m).m_value <= sub.m_value + 1e-8);
  }
}

TEST_CASE("finalsolver") {
  const CubicSolution z = cubic_finalsolver(CubicModel(Vector::Zero(2), Matrix::Identity(2, 2), 1.0, 1.0), {0.05, 1e-8});
  CHECK(z.iterations == 0);
  CHECK(z.h.norm() == 0.0);

  const CubicModel m = scalar_model(1.0, 0.0, 6.0);
  const double R = std::sqrt(1.0 / 6.0);
  const CubicSolution s = cubic_finalsolver(m, {0.9 / (4.0 * 6.0 * R), 1e-8});
  CHECK(std::abs(1.0 + 3.0 * s.h[0] * std::abs(s.h[0])) <= 1e-8);
  CHECK(s.status == SolveStatus::finalsolver);

  CHECK_THROWS_AS(cubic_finalsolver(m, {1.0, 1e-8}), std::invalid_argument);
  const CubicModel slow(Vector::Ones(2), (Vector(2) << 1.0, 3.0).finished().asDiagonal(), 1.0, 3.0);
  CHECK_THROWS_AS(cubic_finalsolver(slow, {1e-3, 1e-10, 3}), BudgetExceeded);
}
