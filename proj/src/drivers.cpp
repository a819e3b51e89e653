#include "srvrc/drivers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <type_traits>

namespace srvrc {

SolverConfig config_for(const FiniteSumProblem& p, SolverConfig base) {
  base.L = p.constants().lipschitz_grad;
  base.rho = p.constants().lipschitz_hess;
  base.M = p.constants().grad_bound;
  return base;
}

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("solver config: ") + what);
}

}  // namespace

void validate(const SolverConfig& c) {
  require(c.epsilon > 0.0, "epsilon must be positive");
  require(c.rho > 0.0, "rho must be positive");
  require(c.L > 0.0, "L must be positive");
  require(!c.M || *c.M > 0.0, "M must be positive");
  require(c.xi > 0.0 && c.xi < 1.0, "xi must lie in (0,1)");
  require(c.eps_prime > 0.0 && c.eps_prime < 1.0, "eps' must lie in (0,1)");
  require(!c.subsolver_eta || *c.subsolver_eta > 0.0, "subsolver eta must be positive");
  require(!c.delta_prime || (*c.delta_prime > 0.0 && *c.delta_prime < 1.0), "delta' must lie in (0,1)");
  require(!c.eps_g || *c.eps_g > 0.0, "eps_g must be positive");
  require(c.finalsolver_max_iterations > 0, "finalsolver iteration cap must be positive");
  require(!c.epochs || (c.epochs->gradient > 0 && c.epochs->hessian > 0), "epoch lengths must be positive");
  require(!c.x0 || c.x0->allFinite(), "x0 must be finite");
  if (const auto* f = std::get_if<FixedPenalty>(&c.penalty)) require(f->value > 0.0, "fixed penalty must be positive");
  if (const auto* a = std::get_if<AdaptivePenalty>(&c.penalty)) {
    require(a->M0 > 0.0, "adaptive M0 must be positive");
    require(a->gamma_inc > 1.0, "gamma_inc must exceed 1");
    require(a->gamma_dec > 0.0 && a->gamma_dec < 1.0, "gamma_dec must lie in (0,1)");
    require(a->eta1 > 0.0 && a->eta1 <= a->eta2 && a->eta2 < 1.0, "need 0 < eta1 <= eta2 < 1");
    require(a->floor > 0.0 && a->floor <= a->cap, "need 0 < floor <= cap");
  }
  if (const auto* pb = std::get_if<PracticalBatches>(&c.batches))
    require(pb->S > 0 && pb->Bg > 0 && pb->Bh > 0, "practical S, Bg, Bh must be positive");
  if (const auto* fb = std::get_if<FixedBatches>(&c.batches))
    require(fb->Bg > 0 && fb->Bh > 0, "fixed Bg, Bh must be positive");
}

std::size_t iteration_budget(double delta_f, double rho, double epsilon) {
  if (!(delta_f >= 0.0) || !(rho > 0.0) || !(epsilon > 0.0))
    throw std::invalid_argument("iteration_budget: need delta_f >= 0, rho > 0, epsilon > 0");
  const double t = std::ceil(40.0 * delta_f * std::sqrt(rho) / std::pow(epsilon, 1.5));
  return std::max<std::size_t>(1, static_cast<std::size_t>(t));
}

const char* to_string(ExitStatus e) {
  return e == ExitStatus::converged ? "converged" : "budget_exhausted";
}

PenaltyUpdate adaptive_penalty_update(double M, double ratio, const AdaptivePenalty& a) {
  if (ratio >= a.eta2) return {std::max(a.floor, M * a.gamma_dec), true};
  if (ratio >= a.eta1) return {M, true};
  return {std::min(a.cap, M * a.gamma_inc), false};
}

namespace {

using Clock = std::chrono::steady_clock;

struct StepResult {
  Vector h;
  double m_value = 0.0;
  std::size_t Bg = 0;
  std::size_t Bh = 0;
  bool stop = false;
};

struct StepInput {
  std::size_t t;
  const Vector& x;
  const Vector& x_prev;
  std::optional<double> h_prev_norm;  ///< length of the last applied step; empty at t = 0
  double Mt;
};

using StepFn = std::function<StepResult(const StepInput&, OracleCounter&)>;

double initial_penalty(const SolverConfig& c) {
  if (const auto* f = std::get_if<FixedPenalty>(&c.penalty)) return f->value;
  if (const auto* a = std::get_if<AdaptivePenalty>(&c.penalty)) return std::clamp(a->M0, a->floor, a->cap);
  return 4.0 * c.rho;
}

double checked_value(const FiniteSumProblem& p, const Vector& x, std::size_t t, RunResult& r) {
  const double f = full_value(p, x);
  ++r.diagnostic_value_calls;
  if (!std::isfinite(f)) throw std::runtime_error("non-finite objective at step " + std::to_string(t));
  return f;
}

RunResult drive(const FiniteSumProblem& p, const SolverConfig& c, const StepFn& step) {
  validate(c);
  const auto d = static_cast<Eigen::Index>(p.dim());
  Vector x = c.x0 ? *c.x0 : Vector::Zero(d);
  if (x.size() != d) throw std::invalid_argument("solver config: x0 has the wrong dimension");

  const auto* adaptive = std::get_if<AdaptivePenalty>(&c.penalty);
  const auto start = Clock::now();
  RunResult r;
  double M = initial_penalty(c);
  Vector x_prev = x;
  std::optional<double> h_prev;
  double fx = checked_value(p, x, 0, r);

  for (std::size_t t = 0; t < c.T; ++t) {
    StepResult s = step(StepInput{t, x, x_prev, h_prev, M}, r.counters);
    if (!s.h.allFinite() || !std::isfinite(s.m_value))
      throw SolverDivergence("non-finite cubic step at step " + std::to_string(t));
    TraceRow row;
    row.t = t;
    row.f = fx;
    row.h_norm = s.h.norm();
    row.m_value = s.m_value;
    row.Bg = s.Bg;
    row.Bh = s.Bh;
    row.Mt = M;
    row.calls = r.counters;

    if (s.stop) {
      row.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
      r.trace.push_back(row);
      r.x_out = x + s.h;
      r.exit = ExitStatus::converged;
      r.iterations = t + 1;
      return r;
    }

    Vector x_next = x + s.h;
    bool accepted = true;
    double f_next = 0.0;
    if (adaptive) {
      f_next = checked_value(p, x_next, t + 1, r);
      const double predicted = -s.m_value;
      const double ratio = predicted > 0.0 ? (fx - f_next) / predicted : -std::numeric_limits<double>::infinity();
      const PenaltyUpdate u = adaptive_penalty_update(M, ratio, *adaptive);
      M = u.M;
      accepted = u.accepted;
    }
    row.accepted = accepted;
    row.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    r.trace.push_back(row);

    x_prev = x;
    if (accepted) {
      x = std::move(x_next);
      fx = adaptive ? f_next : checked_value(p, x, t + 1, r);
      h_prev = row.h_norm;
    } else {
      h_prev = 0.0;
    }
  }
  r.x_out = x;
  r.exit = ExitStatus::budget_exhausted;
  r.iterations = c.T;
  return r;
}

TheoreticalBatches theoretical_rule(const FiniteSumProblem& p, const SolverConfig& c, ScheduleFamily family) {
  TheoreticalBatches b;
  b.epsilon = c.epsilon;
  b.xi = c.xi;
  b.T = std::max<std::size_t>(1, c.T);
  b.L = c.L;
  b.rho = c.rho;
  b.M = c.M;
  b.d = p.dim();
  b.n = p.size();
  b.family = family;
  return b;
}

EpochLengths epochs_for(const FiniteSumProblem& p, const SolverConfig& c) {
  if (c.epochs) return *c.epochs;
  if (const auto* pb = std::get_if<PracticalBatches>(&c.batches)) return {pb->S, pb->S};
  return default_epochs(p.size(), c.epsilon, c.L, c.rho, c.M);
}

// Sizes for one step of the recursive estimators. Reset steps follow the
// estimator's own epoch counters so an epoch override stays consistent.
struct Sizer {
  const FiniteSumProblem& p;
  const SolverConfig& c;
  ScheduleFamily family;
  TheoreticalBatches rule;

  Sizer(const FiniteSumProblem& p_, const SolverConfig& c_, ScheduleFamily f)
      : p(p_), c(c_), family(f), rule(theoretical_rule(p_, c_, f)) {}

  std::size_t gradient(const EstimatorState& st, std::optional<double> h_prev) const {
    const bool reset = st.gradient_reset(st.t);
    return std::visit(
        [&](const auto& s) -> std::size_t {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, TheoreticalSchedule>)
            return theoretical_batch_g(rule, st.t, st.epoch_g, h_prev);
          else if constexpr (std::is_same_v<S, PracticalBatches>)
            return reset ? s.Bg : std::max<std::size_t>(1, s.Bg / s.S);
          else
            return s.Bg;
        },
        c.batches);
  }

  std::size_t hessian(const EstimatorState& st, std::optional<double> h_prev) const {
    const bool reset = st.hessian_reset(st.t);
    return std::visit(
        [&](const auto& s) -> std::size_t {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, TheoreticalSchedule>)
            return theoretical_batch_h(rule, st.t, st.epoch_h, h_prev);
          else if constexpr (std::is_same_v<S, PracticalBatches>)
            // The product batch is drawn fresh every step in the Hessian-free
            // variant, so it never shrinks there.
            return reset || family == ScheduleFamily::hessian_free ? s.Bh : std::max<std::size_t>(1, s.Bh / s.S);
          else
            return s.Bh;
        },
        c.batches);
  }
};

EstimatorState make_state(const FiniteSumProblem& p, const SolverConfig& c) {
  const EpochLengths e = epochs_for(p, c);
  return EstimatorState(c.recursive_gradient ? e.gradient : 1, e.hessian);
}

double stop_radius(const SolverConfig& c) { return std::sqrt(c.epsilon / c.rho); }

}  // namespace

RunResult run_srvrc(const FiniteSumProblem& p, const SolverConfig& c, Rng& rng, const Observer& observe) {
  if (!p.has_hessian()) throw std::invalid_argument("run_srvrc: the problem has no explicit Hessian oracle");
  validate(c);
  EstimatorState st = make_state(p, c);
  const Sizer sizer(p, c, ScheduleFamily::exact_hessian);
  const double radius = stop_radius(c);
  return drive(p, c, [&](const StepInput& in, OracleCounter& counter) {
    st.t = in.t;
    StepResult s;
    s.Bg = sizer.gradient(st, in.h_prev_norm);
    s.Bh = sizer.hessian(st, in.h_prev_norm);
    update_gradient_estimator(st, p, in.x, in.x_prev, s.Bg, rng, counter);
    update_hessian_estimator(st, p, in.x, in.x_prev, s.Bh, rng, counter);
    if (observe) observe(IterationView{in.t, in.x, st.v, &*st.U});
    CubicSolution sol = solve_exact(CubicModel(st.v, *st.U, in.Mt, c.L));
    s.h = std::move(sol.h);
    s.m_value = sol.m_value;
    s.stop = s.h.norm() <= radius;
    return s;
  });
}

RunResult run_srvrc_free(const FiniteSumProblem& p, const SolverConfig& c, Rng& rng, const Observer& observe) {
  validate(c);
  EstimatorState st = make_state(p, c);
  const Sizer sizer(p, c, ScheduleFamily::hessian_free);
  SubsolverParams sp;
  sp.eta = c.subsolver_eta.value_or(1.0 / (16.0 * c.L));
  sp.zeta = std::sqrt(c.epsilon / c.rho);
  sp.eps_prime = c.eps_prime;
  sp.delta_prime = c.delta_prime.value_or(c.xi / (3.0 * static_cast<double>(std::max<std::size_t>(1, c.T))));
  const double threshold = -4.0 * std::pow(c.epsilon, 1.5) / std::sqrt(c.rho);
  const double eps_g = c.eps_g.value_or(c.epsilon);

  return drive(p, c, [&](const StepInput& in, OracleCounter& counter) {
    st.t = in.t;
    StepResult s;
    s.Bg = sizer.gradient(st, in.h_prev_norm);
    s.Bh = sizer.hessian(st, in.h_prev_norm);
    update_gradient_estimator(st, p, in.x, in.x_prev, s.Bg, rng, counter);
    const IndexBatch I = sample_multiset(rng, p.size(), s.Bh);
    if (observe) observe(IterationView{in.t, in.x, st.v, nullptr});
    const Vector& x = in.x;
    LinearOperator op = [&](const Vector& v, Vector& out) { batch_hvp(p, x, I, v, out, counter); };
    const CubicModel model(st.v, std::move(op), in.Mt, c.L);

    CubicSolution sol = cubic_subsolver(model, sp, rng);
    if (!(sol.m_value < threshold)) {
      const double tau = model.penalty();
      const double beta = model.hess_norm_bound();
      const double half = beta / (2.0 * tau);
      const double R = half + std::sqrt(half * half + model.b().norm() / tau);
      FinalsolverParams fp;
      fp.eta = 0.99 / (4.0 * (beta + tau * R));
      fp.eps_g = eps_g;
      fp.max_iterations = c.finalsolver_max_iterations;
      sol = cubic_finalsolver(model, fp);
      s.stop = true;
    }
    s.h = std::move(sol.h);
    s.m_value = sol.m_value;
    return s;
  });
}

RunResult run_cr(const FiniteSumProblem& p, const SolverConfig& c) {
  if (!p.has_hessian()) throw std::invalid_argument("run_cr: the problem has no explicit Hessian oracle");
  const IndexBatch all = IndexBatch::all(p.size());
  const double radius = stop_radius(c);
  return drive(p, c, [&](const StepInput& in, OracleCounter& counter) {
    StepResult s;
    s.Bg = s.Bh = p.size();
    Vector g = batch_gradient(p, in.x, all, counter);
    Matrix H = batch_hessian(p, in.x, all, counter);
    CubicSolution sol = solve_exact(CubicModel(std::move(g), std::move(H), in.Mt, c.L));
    s.h = std::move(sol.h);
    s.m_value = sol.m_value;
    s.stop = s.h.norm() <= radius;
    return s;
  });
}

RunResult run_scr(const FiniteSumProblem& p, const SolverConfig& c, Rng& rng, const Observer& observe) {
  if (!p.has_hessian()) throw std::invalid_argument("run_scr: the problem has no explicit Hessian oracle");
  validate(c);
  std::size_t bg = 0, bh = 0;
  if (const auto* fb = std::get_if<FixedBatches>(&c.batches)) {
    bg = fb->Bg;
    bh = fb->Bh;
  } else if (const auto* pb = std::get_if<PracticalBatches>(&c.batches)) {
    bg = pb->Bg;
    bh = pb->Bh;
  } else {
    const TheoreticalBatches rule = theoretical_rule(p, c, ScheduleFamily::exact_hessian);
    bg = theoretical_batch_g(rule, 0, 1, std::nullopt);
    bh = theoretical_batch_h(rule, 0, 1, std::nullopt);
  }
  bg = std::min(bg, p.size());
  bh = std::min(bh, p.size());
  const double radius = stop_radius(c);
  return drive(p, c, [&](const StepInput& in, OracleCounter& counter) {
    StepResult s;
    s.Bg = bg;
    s.Bh = bh;
    const IndexBatch J = sample_multiset(rng, p.size(), bg);
    const IndexBatch I = sample_multiset(rng, p.size(), bh);
    Vector g = batch_gradient(p, in.x, J, counter);
    Matrix H = batch_hessian(p, in.x, I, counter);
    if (observe) observe(IterationView{in.t, in.x, g, &H});
    CubicSolution sol = solve_exact(CubicModel(std::move(g), std::move(H), in.Mt, c.L));
    s.h = std::move(sol.h);
    s.m_value = sol.m_value;
    s.stop = s.h.norm() <= radius;
    return s;
  });
}

RunResult run_srvrc(const FiniteSumProblem& p, const SolverConfig& c) {
  Rng rng(c.seed);
  return run_srvrc(p, c, rng);
}

RunResult run_srvrc_free(const FiniteSumProblem& p, const SolverConfig& c) {
  Rng rng(c.seed);
  return run_srvrc_free(p, c, rng);
}

RunResult run_scr(const FiniteSumProblem& p, const SolverConfig& c) {
  Rng rng(c.seed);
  return run_scr(p, c, rng);
}

}  // namespace srvrc
