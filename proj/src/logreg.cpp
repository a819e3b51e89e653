#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "penalty.hpp"
#include "srvrc/objectives.hpp"

namespace srvrc {
namespace {

// Feature rows with 0-based column indices.
struct SparseRows {
  std::vector<std::size_t> offsets{0};
  std::vector<std::size_t> cols;
  std::vector<double> vals;

  explicit SparseRows(const LibsvmDataset& data) {
    for (const auto& r : data.rows) {
      for (const auto& e : r.features) {
        cols.push_back(e.index - 1);
        vals.push_back(e.value);
      }
      offsets.push_back(cols.size());
    }
  }

  template <class Dense>
  double dot(std::size_t i, const Dense& w, std::size_t shift = 0) const {
    double s = 0.0;
    for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k) s += vals[k] * w[shift + cols[k]];
    return s;
  }

  template <class Dense>
  void axpy(std::size_t i, double alpha, Dense& out, std::size_t shift = 0) const {
    for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k)
      out[shift + cols[k]] += alpha * vals[k];
  }

  double max_norm() const {
    double best = 0.0;
    for (std::size_t i = 0; i + 1 < offsets.size(); ++i) {
      double s = 0.0;
      for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k) s += vals[k] * vals[k];
      best = std::max(best, std::sqrt(s));
    }
    return best;
  }
};

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// max |s''(z)| for the logistic function s, i.e. max |s(1-s)(1-2s)|.
constexpr double kLogisticThird = 1.0 / (6.0 * std::numbers::sqrt3);

class BinaryLogReg final : public FiniteSumProblem {
 public:
  BinaryLogReg(const LibsvmDataset& data, double lambda)
      : FiniteSumProblem({}), rows_(data), d_(data.d), penalty_{lambda, false} {
    labels_.reserve(data.n());
    for (const auto& r : data.rows) {
      if (r.label != 0.0 && r.label != 1.0)
        throw std::invalid_argument("binary logistic regression needs 0/1 labels, got " +
                                    std::to_string(r.label));
      labels_.push_back(r.label);
    }
    const double a = rows_.max_norm();
    const double sd = std::sqrt(static_cast<double>(d_));
    set_constants({a * a / 4.0 + penalty_bounds::kSecond * lambda,
                   kLogisticThird * a * a * a + penalty_bounds::kThird * lambda,
                   a + penalty_bounds::kFirst * lambda * sd});
  }

  std::size_t size() const override { return labels_.size(); }
  std::size_t dim() const override { return d_; }

  double component_value(std::size_t i, const Vector& w) const override {
    const double z = rows_.dot(i, w);
    return softplus(z) - labels_[i] * z;
  }
  void add_component_gradient(std::size_t i, const Vector& w, Vector& acc) const override {
    rows_.axpy(i, sigmoid(rows_.dot(i, w)) - labels_[i], acc);
  }
  void add_component_hessian(std::size_t i, const Vector& w, Matrix& acc) const override {
    const double s = sigmoid(rows_.dot(i, w));
    const double c = s * (1.0 - s);
    for (std::size_t p = rows_.offsets[i]; p < rows_.offsets[i + 1]; ++p)
      for (std::size_t q = rows_.offsets[i]; q < rows_.offsets[i + 1]; ++q)
        acc(rows_.cols[p], rows_.cols[q]) += c * rows_.vals[p] * rows_.vals[q];
  }
  void add_component_hvp(std::size_t i, const Vector& w, const Vector& v,
                         Vector& acc) const override {
    const double s = sigmoid(rows_.dot(i, w));
    rows_.axpy(i, s * (1.0 - s) * rows_.dot(i, v), acc);
  }
  bool has_hessian() const override { return d_ <= kDenseLimit; }

  double shared_value(const Vector& w) const override { return penalty_.value(w); }
  void add_shared_gradient(const Vector& w, Vector& acc) const override { penalty_.add_gradient(w, acc); }
  void add_shared_hessian(const Vector& w, Matrix& acc) const override { penalty_.add_hessian(w, acc); }
  void add_shared_hvp(const Vector& w, const Vector& v, Vector& acc) const override {
    penalty_.add_hvp(w, v, acc);
  }

 private:
  SparseRows rows_;
  std::vector<double> labels_;
  std::size_t d_;
  detail::SeparablePenalty penalty_;
};

class MulticlassLogReg final : public FiniteSumProblem {
 public:
  MulticlassLogReg(const LibsvmDataset& data, double lambda, std::size_t classes,
                   MulticlassPenalty form)
      : FiniteSumProblem({}),
        rows_(data),
        d_(data.d),
        m_(classes),
        penalty_{lambda, form == MulticlassPenalty::printed} {
    if (classes < 2) throw std::invalid_argument("multiclass objective needs at least 2 classes");
    labels_.reserve(data.n());
    for (const auto& r : data.rows) {
      const double y = r.label;
      if (y != std::floor(y) || y < 1.0 || y > static_cast<double>(classes))
        throw std::invalid_argument("class label " + std::to_string(y) + " outside 1.." +
                                    std::to_string(classes));
      labels_.push_back(static_cast<std::size_t>(y) - 1);
    }
    const double a = rows_.max_norm();
    const double sd = std::sqrt(static_cast<double>(m_ * d_));
    ProblemConstants c;
    c.lipschitz_grad = a * a / 2.0 + penalty_bounds::kSecond * lambda;
    // The third directional derivative of log-sum-exp is bounded by ||u||^3
    // for u = V a, hence the a^3 term.
    c.lipschitz_hess = a * a * a + (penalty_.convex ? 0.0 : penalty_bounds::kThird * lambda);
    if (!penalty_.convex) c.grad_bound = std::numbers::sqrt2 * a + penalty_bounds::kFirst * lambda * sd;
    set_constants(c);
  }

  std::size_t size() const override { return labels_.size(); }
  std::size_t dim() const override { return m_ * d_; }

  double component_value(std::size_t i, const Vector& w) const override {
    const Vector z = logits(i, w);
    const double top = z.maxCoeff();
    return top + std::log((z.array() - top).exp().sum()) - z[static_cast<Eigen::Index>(labels_[i])];
  }
  void add_component_gradient(std::size_t i, const Vector& w, Vector& acc) const override {
    Vector p = probabilities(i, w);
    p[static_cast<Eigen::Index>(labels_[i])] -= 1.0;
    for (std::size_t k = 0; k < m_; ++k) rows_.axpy(i, p[static_cast<Eigen::Index>(k)], acc, k * d_);
  }
  void add_component_hessian(std::size_t i, const Vector& w, Matrix& acc) const override {
    const Vector p = probabilities(i, w);
    for (std::size_t k = 0; k < m_; ++k)
      for (std::size_t l = 0; l < m_; ++l) {
        const double c = (k == l ? p[k] : 0.0) - p[k] * p[l];
        for (std::size_t s = rows_.offsets[i]; s < rows_.offsets[i + 1]; ++s)
          for (std::size_t t = rows_.offsets[i]; t < rows_.offsets[i + 1]; ++t)
            acc(k * d_ + rows_.cols[s], l * d_ + rows_.cols[t]) += c * rows_.vals[s] * rows_.vals[t];
      }
  }
  void add_component_hvp(std::size_t i, const Vector& w, const Vector& v,
                         Vector& acc) const override {
    const Vector p = probabilities(i, w);
    const Vector u = logits(i, v);
    const double pu = p.dot(u);
    for (std::size_t k = 0; k < m_; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      rows_.axpy(i, p[kk] * (u[kk] - pu), acc, k * d_);
    }
  }
  bool has_hessian() const override { return m_ * d_ <= kDenseLimit; }

  double shared_value(const Vector& w) const override { return penalty_.value(w); }
  void add_shared_gradient(const Vector& w, Vector& acc) const override { penalty_.add_gradient(w, acc); }
  void add_shared_hessian(const Vector& w, Matrix& acc) const override { penalty_.add_hessian(w, acc); }
  void add_shared_hvp(const Vector& w, const Vector& v, Vector& acc) const override {
    penalty_.add_hvp(w, v, acc);
  }

 private:
  Vector logits(std::size_t i, const Vector& w) const {
    Vector z(static_cast<Eigen::Index>(m_));
    for (std::size_t k = 0; k < m_; ++k) z[static_cast<Eigen::Index>(k)] = rows_.dot(i, w, k * d_);
    return z;
  }
  Vector probabilities(std::size_t i, const Vector& w) const {
    Vector z = logits(i, w);
    z = (z.array() - z.maxCoeff()).exp();
    return z / z.sum();
  }

  SparseRows rows_;
  std::vector<std::size_t> labels_;
  std::size_t d_;
  std::size_t m_;
  detail::SeparablePenalty penalty_;
};

}  // namespace

std::unique_ptr<FiniteSumProblem> make_binary_logreg(const LibsvmDataset& data, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  return std::make_unique<BinaryLogReg>(data, lambda);
}

std::unique_ptr<FiniteSumProblem> make_multiclass_logreg(const LibsvmDataset& data, double lambda,
                                                         std::size_t classes,
                                                         MulticlassPenalty penalty) {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  return std::make_unique<MulticlassLogReg>(data, lambda, classes, penalty);
}

}  // namespace srvrc
