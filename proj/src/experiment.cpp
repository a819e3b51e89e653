#include "srvrc/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <thread>
#include <vector>

#include <json.hpp>

#include "srvrc/diagnostics.hpp"

namespace srvrc {

namespace fs = std::filesystem;
using json = nlohmann::json;

const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::srvrc: return "srvrc";
    case Algorithm::srvrc_free: return "srvrc_free";
    case Algorithm::cr: return "cr";
    case Algorithm::scr: return "scr";
  }
  return "?";
}

namespace {

// Reads fields of one JSON object and rejects keys nobody asked for.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const json& at(const std::string& key) {
    if (!has(key)) throw ConfigError(where_ + ": missing key '" + key + "'");
    return j_.at(key);
  }

  double number(const std::string& key) {
    const json& v = at(key);
    if (!v.is_number()) throw ConfigError(path(key) + ": expected a number");
    return v.get<double>();
  }
  double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

  std::uint64_t count(const std::string& key) {
    const json& v = at(key);
    if (!v.is_number_unsigned()) throw ConfigError(path(key) + ": expected a nonnegative integer");
    return v.get<std::uint64_t>();
  }
  std::uint64_t count(const std::string& key, std::uint64_t fallback) { return has(key) ? count(key) : fallback; }

  bool flag(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError(path(key) + ": expected true or false");
    return v.get<bool>();
  }

  std::string text(const std::string& key) {
    const json& v = at(key);
    if (!v.is_string()) throw ConfigError(path(key) + ": expected a string");
    return v.get<std::string>();
  }
  std::string text(const std::string& key, const std::string& fallback) { return has(key) ? text(key) : fallback; }

  std::string path(const std::string& key) const { return where_ + "." + key; }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key())) throw ConfigError(where_ + ": unknown key '" + item.key() + "'");
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

fs::path resolve_dataset(const fs::path& p, const fs::path& base_dir) {
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv(kDataRootEnv); root && *root) return fs::path(root) / p;
  return base_dir / p;
}

DatasetSpec parse_dataset(Fields& f, const fs::path& base_dir) {
  DatasetSpec d;
  d.path = resolve_dataset(f.text("dataset"), base_dir);
  if (!fs::is_regular_file(d.path)) throw ConfigError("dataset not found: " + d.path.string());
  d.lambda = f.number("lambda", d.lambda);
  d.scale = f.flag("scale", d.scale);
  return d;
}

ProblemSpec parse_problem(const json& j, const fs::path& base_dir) {
  Fields f(j, "problem");
  const std::string type = f.text("type");
  ProblemSpec spec;
  if (type == "synthetic") {
    SyntheticSpec s;
    s.seed = f.count("seed", 0);
    s.options.n = f.count("n", s.options.n);
    s.options.d = f.count("d", s.options.d);
    s.options.alpha = f.number("alpha", s.options.alpha);
    s.options.curvature_floor = f.number("curvature_floor", s.options.curvature_floor);
    s.options.linear_noise = f.number("linear_noise", s.options.linear_noise);
    s.options.psd_components = f.flag("psd_components", s.options.psd_components);
    spec = s;
  } else if (type == "binary_logreg") {
    spec = BinaryLogregSpec{parse_dataset(f, base_dir)};
  } else if (type == "multiclass_logreg") {
    MulticlassLogregSpec s;
    s.data = parse_dataset(f, base_dir);
    if (f.has("classes")) s.classes = f.count("classes");
    const std::string pen = f.text("penalty", "nonconvex");
    if (pen == "nonconvex")
      s.penalty = MulticlassPenalty::nonconvex;
    else if (pen == "printed")
      s.penalty = MulticlassPenalty::printed;
    else
      throw ConfigError("problem.penalty: expected 'nonconvex' or 'printed'");
    spec = s;
  } else {
    throw ConfigError("problem.type: unknown problem '" + type + "'");
  }
  f.finish();
  return spec;
}

PenaltyPolicy parse_penalty(const json& j) {
  Fields f(j, "solver.penalty");
  const std::string type = f.text("type");
  PenaltyPolicy policy;
  if (type == "theoretical") {
    policy = TheoreticalPenalty{};
  } else if (type == "fixed") {
    policy = FixedPenalty{f.number("value")};
  } else if (type == "adaptive") {
    AdaptivePenalty a;
    a.M0 = f.number("M0", a.M0);
    a.gamma_inc = f.number("gamma_inc", a.gamma_inc);
    a.gamma_dec = f.number("gamma_dec", a.gamma_dec);
    a.eta1 = f.number("eta1", a.eta1);
    a.eta2 = f.number("eta2", a.eta2);
    a.floor = f.number("floor", a.floor);
    a.cap = f.number("cap", a.cap);
    policy = a;
  } else {
    throw ConfigError("solver.penalty.type: expected 'theoretical', 'fixed' or 'adaptive'");
  }
  f.finish();
  return policy;
}

BatchSchedule parse_batches(const json& j) {
  Fields f(j, "solver.batches");
  const std::string type = f.text("type");
  BatchSchedule b;
  if (type == "theoretical") {
    b = TheoreticalSchedule{};
  } else if (type == "practical") {
    b = PracticalBatches{f.count("Bg"), f.count("Bh"), f.count("S")};
  } else if (type == "fixed") {
    b = FixedBatches{f.count("Bg"), f.count("Bh")};
  } else {
    throw ConfigError("solver.batches.type: expected 'theoretical', 'practical' or 'fixed'");
  }
  f.finish();
  return b;
}

void parse_solver(const json& j, ExperimentConfig& cfg) {
  Fields f(j, "solver");
  SolverConfig& s = cfg.solver;
  s.epsilon = f.number("epsilon", s.epsilon);
  s.xi = f.number("xi", s.xi);
  if ((cfg.has_rho = f.has("rho"))) s.rho = f.number("rho");
  if ((cfg.has_L = f.has("L"))) s.L = f.number("L");
  if ((cfg.has_M = f.has("M"))) {
    if (j.at("M").is_null())
      s.M.reset();
    else
      s.M = f.number("M");
  }
  const bool has_T = f.has("T");
  if (has_T) s.T = f.count("T");
  if (f.has("delta_f")) {
    if (has_T) throw ConfigError("solver: give either T or delta_f, not both");
    cfg.delta_f = f.number("delta_f");
  }
  s.seed = f.count("seed", s.seed);
  if (f.has("penalty")) s.penalty = parse_penalty(j.at("penalty"));
  if (f.has("batches")) s.batches = parse_batches(j.at("batches"));
  if (f.has("subsolver_eta")) s.subsolver_eta = f.number("subsolver_eta");
  s.eps_prime = f.number("eps_prime", s.eps_prime);
  if (f.has("delta_prime")) s.delta_prime = f.number("delta_prime");
  if (f.has("eps_g")) s.eps_g = f.number("eps_g");
  s.finalsolver_max_iterations = f.count("finalsolver_max_iterations", s.finalsolver_max_iterations);
  s.recursive_gradient = f.flag("recursive_gradient", s.recursive_gradient);
  if (f.has("epochs")) {
    Fields e(j.at("epochs"), "solver.epochs");
    s.epochs = EpochLengths{e.count("gradient"), e.count("hessian")};
    e.finish();
  }
  if (f.has("x0")) {
    const json& x = j.at("x0");
    if (!x.is_array()) throw ConfigError("solver.x0: expected an array of numbers");
    Vector v(static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!x[i].is_number()) throw ConfigError("solver.x0: expected an array of numbers");
      v[static_cast<Eigen::Index>(i)] = x[i].get<double>();
    }
    s.x0 = v;
  }
  f.finish();
}

Algorithm parse_algorithm(const std::string& name) {
  if (name == "srvrc") return Algorithm::srvrc;
  if (name == "srvrc_free") return Algorithm::srvrc_free;
  if (name == "cr") return Algorithm::cr;
  if (name == "scr") return Algorithm::scr;
  throw ConfigError("algorithm: expected srvrc, srvrc_free, cr or scr, got '" + name + "'");
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

ExperimentConfig parse_experiment(std::string_view json_text, const fs::path& base_dir, std::string name) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  Fields f(j, "config");
  ExperimentConfig cfg;
  cfg.name = f.text("name", name);
  cfg.problem = parse_problem(f.at("problem"), base_dir);
  cfg.algorithm = parse_algorithm(f.text("algorithm"));
  if (f.has("solver")) parse_solver(j.at("solver"), cfg);
  if (f.text("trace_format", "csv") != "csv") throw ConfigError("trace_format: only 'csv' is supported");
  fs::path out_dir = f.text("output_dir", ".");
  if (out_dir.is_relative()) out_dir = (base_dir / out_dir).lexically_normal();
  cfg.trace_path = out_dir / (cfg.name + ".trace.csv");
  cfg.summary_path = out_dir / (cfg.name + ".summary.json");
  f.finish();
  return cfg;
}

ExperimentConfig load_experiment(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config " + file.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_experiment(buf.str(), file.parent_path(), file.stem().string());
}

std::unique_ptr<FiniteSumProblem> build_problem(const ProblemSpec& spec) {
  if (const auto* s = std::get_if<SyntheticSpec>(&spec)) return make_synthetic(s->seed, s->options);
  if (const auto* b = std::get_if<BinaryLogregSpec>(&spec)) {
    LibsvmDataset data = load_libsvm(b->data.path);
    normalize_binary_labels(data);
    if (b->data.scale) scale_columns(data);
    return make_binary_logreg(data, b->data.lambda);
  }
  const auto& m = std::get<MulticlassLogregSpec>(spec);
  LibsvmDataset data = load_libsvm(m.data.path);
  std::size_t classes = m.classes ? *m.classes : remap_class_labels(data);
  if (m.data.scale) scale_columns(data);
  return make_multiclass_logreg(data, m.data.lambda, classes, m.penalty);
}

SolverConfig resolve_solver(const ExperimentConfig& cfg, const FiniteSumProblem& p) {
  SolverConfig s = cfg.solver;
  const ProblemConstants& k = p.constants();
  if (!cfg.has_L) s.L = k.lipschitz_grad;
  if (!cfg.has_rho) s.rho = k.lipschitz_hess;
  if (!cfg.has_M) s.M = k.grad_bound;
  if (cfg.delta_f) s.T = iteration_budget(*cfg.delta_f, s.rho, s.epsilon);
  return s;
}

RunResult run_experiment(const ExperimentConfig& cfg, const FiniteSumProblem& p) {
  const SolverConfig s = resolve_solver(cfg, p);
  switch (cfg.algorithm) {
    case Algorithm::srvrc: return run_srvrc(p, s);
    case Algorithm::srvrc_free: return run_srvrc_free(p, s);
    case Algorithm::cr: return run_cr(p, s);
    case Algorithm::scr: return run_scr(p, s);
  }
  throw std::logic_error("unknown algorithm");
}

void write_trace_csv(const RunTrace& trace, std::ostream& out) {
  out << "t,f,h_norm,m_value,Bg,Bh,Mt,grad_calls,hess_calls,hvp_calls,wall_ms\n";
  for (const TraceRow& r : trace) {
    out << r.t << ',' << format_double(r.f) << ',' << format_double(r.h_norm) << ','
        << format_double(r.m_value) << ',' << r.Bg << ',' << r.Bh << ',' << format_double(r.Mt) << ','
        << r.calls.grad_calls << ',' << r.calls.hess_calls << ',' << r.calls.hvp_calls << ','
        << format_double(r.wall_ms) << '\n';
  }
}

RunSummary summarize(const ExperimentConfig& cfg, const FiniteSumProblem& p, const RunResult& r,
                     double wall_ms) {
  const SolverConfig s = resolve_solver(cfg, p);
  RunSummary out;
  out.name = cfg.name;
  out.algorithm = to_string(cfg.algorithm);
  out.exit = to_string(r.exit);
  out.iterations = r.iterations;
  out.final_f = full_value(p, r.x_out);
  out.min_f = out.final_f;
  for (const TraceRow& row : r.trace) out.min_f = std::min(out.min_f, row.f);
  const LocalMinCertificate cert = local_min_certificate(p, r.x_out, s.rho, s.epsilon);
  out.mu = cert.mu;
  out.grad_norm = cert.grad_norm;
  out.lambda_min = cert.lambda_min;
  out.counters = r.counters;
  out.diagnostic_value_calls = r.diagnostic_value_calls;
  out.wall_ms = wall_ms;
  out.seed = s.seed;
  return out;
}

std::string summary_to_json(const RunSummary& s) {
  json j = {{"name", s.name},
            {"algorithm", s.algorithm},
            {"exit", s.exit},
            {"iterations", s.iterations},
            {"final_f", s.final_f},
            {"min_f", s.min_f},
            {"mu", s.mu},
            {"grad_norm", s.grad_norm},
            {"lambda_min", s.lambda_min},
            {"grad_calls", s.counters.grad_calls},
            {"hess_calls", s.counters.hess_calls},
            {"hvp_calls", s.counters.hvp_calls},
            {"diagnostic_value_calls", s.diagnostic_value_calls},
            {"wall_ms", s.wall_ms},
            {"seed", s.seed}};
  return j.dump(2) + "\n";
}

RunSummary summary_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid summary JSON: ") + e.what());
  }
  Fields f(j, "summary");
  RunSummary s;
  s.name = f.text("name");
  s.algorithm = f.text("algorithm");
  s.exit = f.text("exit");
  s.iterations = f.count("iterations");
  s.final_f = f.number("final_f");
  s.min_f = f.number("min_f");
  s.mu = f.number("mu");
  s.grad_norm = f.number("grad_norm");
  s.lambda_min = f.number("lambda_min");
  s.counters.grad_calls = f.count("grad_calls");
  s.counters.hess_calls = f.count("hess_calls");
  s.counters.hvp_calls = f.count("hvp_calls");
  s.diagnostic_value_calls = f.count("diagnostic_value_calls");
  s.wall_ms = f.number("wall_ms");
  s.seed = f.count("seed");
  f.finish();
  return s;
}

CheckReport check_problem(const FiniteSumProblem& p, std::uint64_t seed, std::size_t points, double tol) {
  Rng rng(seed);
  std::normal_distribution<double> normal;
  const auto d = static_cast<Eigen::Index>(p.dim());
  const double step = 1e-5;
  CheckReport rep;
  for (std::size_t k = 0; k < points; ++k) {
    Vector x(d), v(d);
    for (auto& e : x) e = normal(rng);
    for (auto& e : v) e = normal(rng);
    rep.grad_error = std::max(rep.grad_error, finite_diff_grad_check(p, x, step));
    if (p.has_hessian()) {
      rep.hvp_error = std::max(rep.hvp_error, hvp_consistency_error(p, x, v));
    } else {
      const Vector hv = full_hvp(p, x, v);
      const Vector fd = (full_gradient(p, x + step * v) - full_gradient(p, x - step * v)) / (2.0 * step);
      rep.hvp_error = std::max(rep.hvp_error, (fd - hv).norm() / (1.0 + hv.norm()));
    }
  }
  rep.passed = rep.grad_error <= tol && rep.hvp_error <= tol;
  return rep;
}

namespace {

struct Outcome {
  std::string name;
  std::string algorithm;
  std::optional<RunSummary> summary;
  std::string error;
};

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

RunSummary execute(const ExperimentConfig& cfg) {
  const auto problem = build_problem(cfg.problem);
  const auto start = std::chrono::steady_clock::now();
  const RunResult r = run_experiment(cfg, *problem);
  const double wall = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  std::ostringstream trace;
  write_trace_csv(r.trace, trace);
  write_file(cfg.trace_path, trace.str());
  RunSummary s = summarize(cfg, *problem, r, wall);
  write_file(cfg.summary_path, summary_to_json(s));
  return s;
}

}  // namespace

int cmd_run(const fs::path& config, std::ostream& out, std::ostream& err) {
  try {
    const ExperimentConfig cfg = load_experiment(config);
    const RunSummary s = execute(cfg);
    out << s.name << ": " << s.exit << " after " << s.iterations << " iterations, f = " << format_double(s.final_f)
        << ", mu = " << format_double(s.mu) << "\n  trace: " << cfg.trace_path.string()
        << "\n  summary: " << cfg.summary_path.string() << '\n';
    return s.exit == to_string(ExitStatus::converged) ? 0 : 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

int cmd_check(const fs::path& config, std::ostream& out, std::ostream& err) {
  try {
    const ExperimentConfig cfg = load_experiment(config);
    const auto problem = build_problem(cfg.problem);
    const CheckReport rep = check_problem(*problem, cfg.solver.seed);
    out << "gradient check max rel error: " << format_double(rep.grad_error) << '\n'
        << "hvp check max rel error: " << format_double(rep.hvp_error) << '\n'
        << (rep.passed ? "PASS" : "FAIL") << '\n';
    return rep.passed ? 0 : 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

int cmd_compare(const fs::path& dir, std::ostream& out, std::ostream& err) {
  std::vector<fs::path> configs;
  try {
    for (const auto& entry : fs::directory_iterator(dir)) {
      const fs::path& p = entry.path();
      const std::string file = p.filename().string();
      if (!entry.is_regular_file() || p.extension() != ".json") continue;
      if (file.size() >= 13 && file.compare(file.size() - 13, 13, ".summary.json") == 0) continue;
      configs.push_back(p);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  if (configs.empty()) {
    err << "error: no configs in " << dir.string() << '\n';
    return 1;
  }

  std::vector<Outcome> results(configs.size());
  {
    std::vector<std::thread> workers;
    for (std::size_t i = 0; i < configs.size(); ++i) {
      workers.emplace_back([&, i] {
        Outcome& o = results[i];
        o.name = configs[i].stem().string();
        try {
          const ExperimentConfig cfg = load_experiment(configs[i]);
          o.name = cfg.name;
          o.algorithm = to_string(cfg.algorithm);
          o.summary = execute(cfg);
        } catch (const std::exception& e) {
          o.error = e.what();
        }
      });
    }
    for (auto& w : workers) w.join();
  }
  std::sort(results.begin(), results.end(), [](const Outcome& a, const Outcome& b) { return a.name < b.name; });

  double best = std::numeric_limits<double>::infinity();
  for (const auto& o : results)
    if (o.summary) best = std::min(best, o.summary->min_f);

  bool failed = false;
  std::ostringstream csv;
  csv << "config,algorithm,status,f_gap,mu,grad_calls,hess_calls,hvp_calls,wall_ms\n";
  for (const auto& o : results) {
    csv << o.name << ',' << o.algorithm << ',';
    if (!o.summary) {
      failed = true;
      err << "error: " << o.name << ": " << o.error << '\n';
      csv << "failed,,,,,,\n";
      continue;
    }
    const RunSummary& s = *o.summary;
    csv << s.exit << ',' << format_double(s.final_f - best) << ',' << format_double(s.mu) << ','
        << s.counters.grad_calls << ',' << s.counters.hess_calls << ',' << s.counters.hvp_calls << ','
        << format_double(s.wall_ms) << '\n';
  }
  try {
    write_file(dir / "comparison.csv", csv.str());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  out << csv.str();
  return failed ? 1 : 0;
}

}  // namespace srvrc
