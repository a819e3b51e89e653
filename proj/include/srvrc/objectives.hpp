#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "srvrc/finite_sum.hpp"

namespace srvrc {

// ---------------------------------------------------------------------------
// libsvm data

struct SparseEntry {
  std::size_t index;  ///< 1-based feature index, as in the file.
  double value;
  friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

struct LibsvmRow {
  double label;
  std::vector<SparseEntry> features;  ///< strictly increasing indices
  friend bool operator==(const LibsvmRow&, const LibsvmRow&) = default;
};

struct LibsvmDataset {
  std::vector<LibsvmRow> rows;
  std::size_t d = 0;  ///< largest feature index seen

  std::size_t n() const { return rows.size(); }
  friend bool operator==(const LibsvmDataset&, const LibsvmDataset&) = default;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Reads "<label> <idx>:<val> ..." lines. Blank lines and text after '#'
/// are skipped. Labels are kept as read.
LibsvmDataset parse_libsvm(std::istream& in);
/// Same, from a file; files ending in ".gz" are decompressed.
LibsvmDataset load_libsvm(const std::filesystem::path& path);
/// Writes with round-trip precision.
void write_libsvm(const LibsvmDataset& data, std::ostream& out);

/// Maps two distinct labels to {0,1}, the smaller one to 0. A dataset whose
/// labels already lie in {0,1} is left alone. Anything else throws
/// std::invalid_argument.
void normalize_binary_labels(LibsvmDataset& data);
/// Replaces the distinct labels, in ascending order, by 1..k. Returns k.
std::size_t remap_class_labels(LibsvmDataset& data);
/// Divides each feature column by its largest magnitude, so values end up in [-1,1].
void scale_columns(LibsvmDataset& data);

// ---------------------------------------------------------------------------
// Objectives

/// Bounds of the penalty r(w) = w^2/(1+w^2) and its derivatives.
namespace penalty_bounds {
inline constexpr double kFirst = 0.64951905283832898;   // max |r'|, at w = 1/sqrt(3)
inline constexpr double kSecond = 2.0;                  // max |r''|, at w = 0
inline constexpr double kThird = 4.6685592841552133;    // max |r'''|, at w^2 = 1 - 2/sqrt(5)
}  // namespace penalty_bounds

enum class MulticlassPenalty {
  nonconvex,  ///< lambda * sum w^2/(1+w^2)
  printed,    ///< lambda * sum (1 + w^2), the convex form
};

/// f_i(w) = -[y_i log s(a_i.w) + (1-y_i) log(1 - s(a_i.w))] + lambda sum_j w_j^2/(1+w_j^2).
/// Labels must already be 0/1.
std::unique_ptr<FiniteSumProblem> make_binary_logreg(const LibsvmDataset& data, double lambda);

/// f_i(W) = -log softmax(W a_i)[y_i] + penalty(W), W (m x d) flattened row by
/// row into an (m*d)-vector. Labels must lie in {1..m}. Explicit Hessians are
/// available only for m*d <= kDenseLimit.
std::unique_ptr<FiniteSumProblem> make_multiclass_logreg(
    const LibsvmDataset& data, double lambda, std::size_t classes,
    MulticlassPenalty penalty = MulticlassPenalty::nonconvex);

inline constexpr std::size_t kDenseLimit = 2000;

struct SyntheticOptions {
  std::size_t n = 100;
  std::size_t d = 10;
  /// Weight alpha of the shared penalty alpha * sum_j x_j^2/(1+x_j^2).
  double alpha = 1.0;
  /// Smallest eigenvalue of the averaged quadratic part, before scaling.
  double curvature_floor = 0.1;
  /// Spread of the per-component linear terms around their mean.
  double linear_noise = 1.0;
  /// Make every A_i positive semidefinite (used for convex checks).
  bool psd_components = false;
};

/// f_i(x) = 1/2 x'A_i x + b_i'x + alpha sum_j x_j^2/(1+x_j^2).
///
/// A_i = s (D + sigma_i u_i u_i') with a shared diagonal D, unit vectors u_i
/// and signs sigma_i, scaled by s so that every ||A_i|| <= 1. D is shifted so
/// the average of the A_i is positive definite, which keeps F bounded below
/// while the penalty makes it nonconvex. Metadata: L = 1 + 2 alpha,
/// rho = alpha * max|r'''|, grad bound unbounded.
std::unique_ptr<FiniteSumProblem> make_synthetic(std::uint64_t seed, const SyntheticOptions& opts);
std::unique_ptr<FiniteSumProblem> make_synthetic(std::uint64_t seed, std::size_t n, std::size_t d,
                                                 double difficulty);

/// Quadratic components plus the shared penalty, from explicit data.
/// rho defaults to alpha * max|r'''|, floored at 1e-6 when alpha is 0.
std::unique_ptr<FiniteSumProblem> make_quadratic(std::vector<Matrix> a, std::vector<Vector> b,
                                                 double alpha);

}  // namespace srvrc
