#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "srvrc/cubic.hpp"
#include "srvrc/estimators.hpp"
#include "srvrc/finite_sum.hpp"

namespace srvrc {

struct FixedPenalty {
  double value = 1.0;
};
/// M_t = 4 rho.
struct TheoreticalPenalty {};
/// ARC-style trust update on the ratio of actual to predicted decrease.
struct AdaptivePenalty {
  double M0 = 1.0;
  double gamma_inc = 2.0;
  double gamma_dec = 0.5;
  double eta1 = 0.1;
  double eta2 = 0.9;
  double floor = 1e-8;
  double cap = 1e12;
};
using PenaltyPolicy = std::variant<FixedPenalty, TheoreticalPenalty, AdaptivePenalty>;

/// Batch sizes from the variance bounds, built from the config's constants.
struct TheoreticalSchedule {};
using BatchSchedule = std::variant<TheoreticalSchedule, PracticalBatches, FixedBatches>;

struct SolverConfig {
  double epsilon = 1e-2;
  double rho = 1.0;
  double L = 1.0;
  std::optional<double> M;  ///< empty = unbounded gradients
  double xi = 0.1;
  std::size_t T = 100;
  PenaltyPolicy penalty = TheoreticalPenalty{};
  BatchSchedule batches = TheoreticalSchedule{};
  std::uint64_t seed = 0;

  // Hessian-free variant. Defaults: eta = 1/(16 L), delta' = xi/(3T).
  std::optional<double> subsolver_eta;
  double eps_prime = 0.5;
  std::optional<double> delta_prime;
  /// Finalsolver gradient tolerance, epsilon when empty.
  std::optional<double> eps_g;
  std::size_t finalsolver_max_iterations = 1'000'000;

  /// false: every step takes a fresh gradient subsample at the reset size.
  bool recursive_gradient = true;
  /// Overrides the schedule's epoch lengths.
  std::optional<EpochLengths> epochs;
  std::optional<Vector> x0;
};

/// Copies L, rho and M from the problem metadata.
SolverConfig config_for(const FiniteSumProblem& p, SolverConfig base = {});

void validate(const SolverConfig& c);

/// Smallest T with T >= 40 Delta_F sqrt(rho) eps^{-3/2}, at least 1.
std::size_t iteration_budget(double delta_f, double rho, double epsilon);

enum class ExitStatus { converged, budget_exhausted };
const char* to_string(ExitStatus e);

struct TraceRow {
  std::size_t t = 0;
  double f = 0.0;  ///< F(x_t)
  double h_norm = 0.0;
  double m_value = 0.0;
  std::size_t Bg = 0;
  std::size_t Bh = 0;
  double Mt = 0.0;
  OracleCounter calls;  ///< cumulative through this row
  double wall_ms = 0.0;
  bool accepted = true;
};

using RunTrace = std::vector<TraceRow>;

struct RunResult {
  Vector x_out;
  ExitStatus exit = ExitStatus::budget_exhausted;
  std::size_t iterations = 0;
  RunTrace trace;
  OracleCounter counters;
  /// Full-batch objective evaluations made for the trace and the adaptive
  /// ratio. Not part of the oracle complexity.
  std::uint64_t diagnostic_value_calls = 0;
};

/// State handed to an observer once the step-t estimates are formed.
struct IterationView {
  std::size_t t;
  const Vector& x;
  const Vector& v;
  const Matrix* U;  ///< null for the Hessian-free variant
};
using Observer = std::function<void(const IterationView&)>;

/// Recursive variance-reduced estimates, exact cubic subproblems, fixed or
/// adaptive penalty. Stops once ||h_t|| <= sqrt(eps/rho).
RunResult run_srvrc(const FiniteSumProblem& p, const SolverConfig& c, Rng& rng,
                    const Observer& observe = {});
/// Hessian-vector products only. Steps while the subsolver reaches
/// m < -4 rho^{-1/2} eps^{3/2}; otherwise finishes with the finalsolver.
RunResult run_srvrc_free(const FiniteSumProblem& p, const SolverConfig& c, Rng& rng,
                         const Observer& observe = {});
/// Deterministic cubic regularization with full oracles.
RunResult run_cr(const FiniteSumProblem& p, const SolverConfig& c);
/// Subsampled cubic regularization: fresh samples of fixed sizes each step.
/// Uses Bg, Bh of a fixed or practical schedule, or the theoretical reset sizes.
RunResult run_scr(const FiniteSumProblem& p, const SolverConfig& c, Rng& rng,
                  const Observer& observe = {});

// Seeded from c.seed.
RunResult run_srvrc(const FiniteSumProblem& p, const SolverConfig& c);
RunResult run_srvrc_free(const FiniteSumProblem& p, const SolverConfig& c);
RunResult run_scr(const FiniteSumProblem& p, const SolverConfig& c);

struct PenaltyUpdate {
  double M = 0.0;
  bool accepted = true;
};

/// ratio >= eta2: shrink; ratio >= eta1: keep; otherwise grow and reject.
/// A NaN ratio is a rejection.
PenaltyUpdate adaptive_penalty_update(double M, double ratio, const AdaptivePenalty& a);

}  // namespace srvrc
