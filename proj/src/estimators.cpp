#include "srvrc/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace srvrc {
namespace {

std::size_t clamp_batch(double size, std::size_t n) {
  if (!(size < static_cast<double>(n))) return n;  // also catches +inf and NaN
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(size)));
}

double sq(double v) { return v * v; }

double require_h(std::optional<double> h, const char* which) {
  if (!h) throw std::invalid_argument(std::string(which) + ": ||h_{t-1}|| is required off reset steps");
  if (*h < 0.0) throw std::invalid_argument(std::string(which) + ": ||h_{t-1}|| must be nonnegative");
  return *h;
}

}  // namespace

void validate(const TheoreticalBatches& r) {
  if (!(r.epsilon > 0.0) || !(r.L > 0.0) || !(r.rho > 0.0))
    throw std::invalid_argument("theoretical batches: epsilon, L, rho must be positive");
  if (!(r.xi > 0.0 && r.xi < 1.0)) throw std::invalid_argument("theoretical batches: xi must lie in (0,1)");
  if (r.T == 0 || r.n == 0 || r.d == 0) throw std::invalid_argument("theoretical batches: T, n, d must be positive");
  if (r.M && !(*r.M > 0.0)) throw std::invalid_argument("theoretical batches: M must be positive");
}

std::size_t theoretical_batch_g(const TheoreticalBatches& r, std::size_t t, std::size_t epoch_g,
                                std::optional<double> h_prev_norm) {
  validate(r);
  if (epoch_g == 0) throw std::invalid_argument("epoch length must be positive");
  const bool free = r.family == ScheduleFamily::hessian_free;
  const double c = free ? 2640.0 : 1440.0;
  const double log_term = sq(std::log((free ? 3.0 : 2.0) * static_cast<double>(r.T) / r.xi));
  if (t % epoch_g == 0) {
    if (!r.M) return r.n;
    return clamp_batch(c * sq(*r.M) * log_term / sq(r.epsilon), r.n);
  }
  const double h = require_h(h_prev_norm, "theoretical_batch_g");
  return clamp_batch(c * sq(r.L) * static_cast<double>(epoch_g) * sq(h) * log_term / sq(r.epsilon), r.n);
}

std::size_t theoretical_batch_h(const TheoreticalBatches& r, std::size_t t, std::size_t epoch_h,
                                std::optional<double> h_prev_norm) {
  validate(r);
  if (epoch_h == 0) throw std::invalid_argument("epoch length must be positive");
  const double td = static_cast<double>(r.T) * static_cast<double>(r.d);
  if (r.family == ScheduleFamily::hessian_free)
    return clamp_batch(1200.0 * sq(r.L) * sq(std::log(3.0 * td / r.xi)) / (r.rho * r.epsilon), r.n);
  const double log_term = sq(std::log(2.0 * td / r.xi));
  if (t % epoch_h == 0) return clamp_batch(800.0 * sq(r.L) * log_term / (r.rho * r.epsilon), r.n);
  const double h = require_h(h_prev_norm, "theoretical_batch_h");
  return clamp_batch(800.0 * r.rho * static_cast<double>(epoch_h) * sq(h) * log_term / r.epsilon, r.n);
}

EpochLengths default_epochs(std::size_t n, double epsilon, double L, double rho,
                            std::optional<double> M) {
  if (n == 0 || !(epsilon > 0.0) || !(L > 0.0) || !(rho > 0.0))
    throw std::invalid_argument("default_epochs: inputs must be positive");
  const double nn = static_cast<double>(n);
  const double g_pool = M ? std::min(nn, sq(*M) / sq(epsilon)) : nn;
  const double sg = std::sqrt(rho * epsilon) / L * std::sqrt(g_pool);
  const double sh = std::sqrt(std::min(nn, L / (rho * epsilon)));
  auto up = [](double s) { return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(s))); };
  return {up(sg), up(sh)};
}

std::pair<std::size_t, std::size_t> practical_batch(const PracticalBatches& r, std::size_t t) {
  if (r.S == 0 || r.Bg == 0 || r.Bh == 0)
    throw std::invalid_argument("practical batches: S, Bg, Bh must be positive");
  if (t % r.S == 0) return {r.Bg, r.Bh};
  return {std::max<std::size_t>(1, r.Bg / r.S), std::max<std::size_t>(1, r.Bh / r.S)};
}

EstimatorState::EstimatorState(std::size_t eg, std::size_t eh) : epoch_g(eg), epoch_h(eh) {
  if (eg == 0 || eh == 0) throw std::invalid_argument("epoch lengths must be positive");
}

const Vector& update_gradient_estimator(EstimatorState& s, const FiniteSumProblem& p,
                                        const Vector& x, const Vector& x_prev, std::size_t batch,
                                        Rng& rng, OracleCounter& counter) {
  const IndexBatch J = sample_multiset(rng, p.size(), batch);
  if (s.gradient_reset(s.t)) {
    s.v = batch_gradient(p, x, J, counter);
    return s.v;
  }
  if (s.v.size() != x.size() || x_prev.size() != x.size())
    throw std::invalid_argument("update_gradient_estimator: dimension mismatch");
  Vector g = batch_gradient(p, x, J, counter);
  g -= batch_gradient(p, x_prev, J, counter);
  s.v += g;
  return s.v;
}

const Matrix& update_hessian_estimator(EstimatorState& s, const FiniteSumProblem& p,
                                       const Vector& x, const Vector& x_prev, std::size_t batch,
                                       Rng& rng, OracleCounter& counter) {
  const IndexBatch I = sample_multiset(rng, p.size(), batch);
  if (s.hessian_reset(s.t)) {
    s.U = batch_hessian(p, x, I, counter);
  } else {
    if (!s.U || s.U->rows() != x.size() || x_prev.size() != x.size())
      throw std::invalid_argument("update_hessian_estimator: dimension mismatch");
    Matrix h = batch_hessian(p, x, I, counter);
    h -= batch_hessian(p, x_prev, I, counter);
    *s.U += h;
  }
  // Component Hessians are symmetric only up to rounding.
  *s.U = 0.5 * (*s.U + s.U->transpose()).eval();
  return *s.U;
}

}  // namespace srvrc
