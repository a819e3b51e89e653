#pragma once

#include <cstddef>
#include <optional>
#include <utility>
#include <variant>

#include "srvrc/finite_sum.hpp"

namespace srvrc {

/// Which constant set the theoretical schedule uses: the exact-Hessian
/// method, or the Hessian-free one (larger constants, 3T in the logs).
enum class ScheduleFamily { exact_hessian, hessian_free };

/// Batch sizes from the variance bounds of the convergence analysis.
struct TheoreticalBatches {
  double epsilon = 1e-2;
  double xi = 0.1;  ///< failure probability, in (0,1)
  std::size_t T = 100;
  double L = 1.0;
  double rho = 1.0;
  std::optional<double> M;  ///< empty = unbounded gradients
  std::size_t d = 1;
  std::size_t n = 1;
  ScheduleFamily family = ScheduleFamily::exact_hessian;
};

/// B^(g), B^(h) at epoch resets, and floor(B/S) in between.
struct PracticalBatches {
  std::size_t Bg = 1;
  std::size_t Bh = 1;
  std::size_t S = 1;
};

/// The same sizes at every step.
struct FixedBatches {
  std::size_t Bg = 1;
  std::size_t Bh = 1;
};

using BatchRule = std::variant<TheoreticalBatches, PracticalBatches, FixedBatches>;

void validate(const TheoreticalBatches& rule);

/// Gradient batch size at step t. `h_prev_norm` is ||h_{t-1}||, needed off
/// reset steps. Result lies in [1, n].
std::size_t theoretical_batch_g(const TheoreticalBatches& rule, std::size_t t, std::size_t epoch_g,
                                std::optional<double> h_prev_norm);
/// Hessian batch size at step t, for the exact-Hessian family. The
/// Hessian-free family samples the same size at every step.
std::size_t theoretical_batch_h(const TheoreticalBatches& rule, std::size_t t, std::size_t epoch_h,
                                std::optional<double> h_prev_norm);

struct EpochLengths {
  std::size_t gradient;
  std::size_t hessian;
};

/// S^(g) = sqrt(rho eps)/L * sqrt(min(n, M^2/eps^2)), S^(h) = sqrt(min(n, L/(rho eps))),
/// both rounded up and at least 1.
EpochLengths default_epochs(std::size_t n, double epsilon, double L, double rho,
                            std::optional<double> M);

/// (B_t^(g), B_t^(h)) for the practical schedule.
std::pair<std::size_t, std::size_t> practical_batch(const PracticalBatches& rule, std::size_t t);

/// Recursive semi-stochastic gradient and Hessian.
struct EstimatorState {
  Vector v;
  std::optional<Matrix> U;  ///< absent in Hessian-free mode
  std::size_t t = 0;        ///< index of the step the estimates belong to
  std::size_t epoch_g = 1;
  std::size_t epoch_h = 1;
  std::optional<double> h_prev_norm;

  EstimatorState(std::size_t epoch_g_, std::size_t epoch_h_);
  bool gradient_reset(std::size_t step) const { return step % epoch_g == 0; }
  bool hessian_reset(std::size_t step) const { return step % epoch_h == 0; }
};

/// Sets state.v for step state.t. Reset steps take a plain subsampled
/// gradient at x; other steps add grad f_J(x) - grad f_J(x_prev) to the
/// previous estimate using one sampled multiset J for both terms.
const Vector& update_gradient_estimator(EstimatorState& state, const FiniteSumProblem& p,
                                        const Vector& x, const Vector& x_prev, std::size_t batch,
                                        Rng& rng, OracleCounter& counter);

/// Sets state.U for step state.t, with the same recursion for Hessians.
const Matrix& update_hessian_estimator(EstimatorState& state, const FiniteSumProblem& p,
                                       const Vector& x, const Vector& x_prev, std::size_t batch,
                                       Rng& rng, OracleCounter& counter);

}  // namespace srvrc
