#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

#include "srvrc/drivers.hpp"
#include "srvrc/objectives.hpp"

namespace srvrc {

/// Environment variable naming the directory relative dataset paths are resolved against.
inline constexpr const char* kDataRootEnv = "SRVRC_DATA_ROOT";

struct SyntheticSpec {
  std::uint64_t seed = 0;
  SyntheticOptions options;
};

struct DatasetSpec {
  std::filesystem::path path;
  double lambda = 1e-3;
  bool scale = false;
};

struct BinaryLogregSpec {
  DatasetSpec data;
};

struct MulticlassLogregSpec {
  DatasetSpec data;
  /// Labels must lie in 1..classes when given; otherwise they are remapped.
  std::optional<std::size_t> classes;
  MulticlassPenalty penalty = MulticlassPenalty::nonconvex;
};

using ProblemSpec = std::variant<SyntheticSpec, BinaryLogregSpec, MulticlassLogregSpec>;

enum class Algorithm { srvrc, srvrc_free, cr, scr };
const char* to_string(Algorithm a);

struct ExperimentConfig {
  std::string name;
  ProblemSpec problem;
  Algorithm algorithm = Algorithm::srvrc;
  /// Constants left unset in the file are filled from the problem metadata.
  SolverConfig solver;
  bool has_L = false, has_rho = false, has_M = false;
  /// When set, T comes from iteration_budget(delta_f, rho, epsilon).
  std::optional<double> delta_f;
  std::filesystem::path trace_path;
  std::filesystem::path summary_path;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses a JSON experiment. Relative output paths resolve against base_dir,
/// relative dataset paths against $SRVRC_DATA_ROOT if set, else base_dir.
/// Unknown keys are errors.
ExperimentConfig parse_experiment(std::string_view json_text, const std::filesystem::path& base_dir,
                                  std::string name = "experiment");
ExperimentConfig load_experiment(const std::filesystem::path& file);

std::unique_ptr<FiniteSumProblem> build_problem(const ProblemSpec& spec);
/// The solver config with problem constants filled in.
SolverConfig resolve_solver(const ExperimentConfig& cfg, const FiniteSumProblem& p);
RunResult run_experiment(const ExperimentConfig& cfg, const FiniteSumProblem& p);

/// t,f,h_norm,m_value,Bg,Bh,Mt,grad_calls,hess_calls,hvp_calls,wall_ms
void write_trace_csv(const RunTrace& trace, std::ostream& out);

struct RunSummary {
  std::string name;
  std::string algorithm;
  std::string exit;
  std::size_t iterations = 0;
  double final_f = 0.0;
  double min_f = 0.0;  ///< smallest F over the trace and the output
  double mu = 0.0;
  double grad_norm = 0.0;
  double lambda_min = 0.0;
  OracleCounter counters;
  std::uint64_t diagnostic_value_calls = 0;
  double wall_ms = 0.0;
  std::uint64_t seed = 0;
  friend bool operator==(const RunSummary&, const RunSummary&) = default;
};

RunSummary summarize(const ExperimentConfig& cfg, const FiniteSumProblem& p, const RunResult& r,
                     double wall_ms);
std::string summary_to_json(const RunSummary& s);
RunSummary summary_from_json(std::string_view text);

struct CheckReport {
  double grad_error = 0.0;
  double hvp_error = 0.0;
  bool passed = false;
};

/// Finite-difference gradient check and Hessian-vector product check at
/// `points` seeded random points. The product is compared with the explicit
/// Hessian when there is one, with differences of gradients otherwise.
CheckReport check_problem(const FiniteSumProblem& p, std::uint64_t seed, std::size_t points = 5,
                          double tol = 1e-4);

// Commands. Messages go to `err`, results to `out`.
/// 0 converged, 2 budget exhausted, 1 error.
int cmd_run(const std::filesystem::path& config, std::ostream& out, std::ostream& err);
/// 0 iff every check error is at most 1e-4.
int cmd_check(const std::filesystem::path& config, std::ostream& out, std::ostream& err);
/// Runs every *.json in dir except *.summary.json and writes dir/comparison.csv.
/// 1 if the directory has no configs or any run failed.
int cmd_compare(const std::filesystem::path& dir, std::ostream& out, std::ostream& err);

}  // namespace srvrc
