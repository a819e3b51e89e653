#include <algorithm>
#include <cmath>
#include <random>

#include "penalty.hpp"
#include "srvrc/objectives.hpp"

namespace srvrc {
namespace {

double penalty_rho(double alpha) {
  return alpha > 0.0 ? alpha * penalty_bounds::kThird : 1e-6;
}

// c_i(x) = 1/2 x' s(D + sigma_i u_i u_i') x + b_i'x
class RankOneQuadratic final : public FiniteSumProblem {
 public:
  RankOneQuadratic(Vector diag, Matrix dirs, Vector signs, Matrix linear, double alpha)
      : FiniteSumProblem({}),
        diag_(std::move(diag)),
        dirs_(std::move(dirs)),
        signs_(std::move(signs)),
        linear_(std::move(linear)),
        penalty_{alpha, false} {
    mean_hessian_ = diag_.asDiagonal();
    for (Eigen::Index i = 0; i < dirs_.cols(); ++i)
      mean_hessian_.noalias() +=
          (signs_[i] / static_cast<double>(size())) * dirs_.col(i) * dirs_.col(i).transpose();
    mean_linear_ = linear_.rowwise().mean();
    // The generator scales every component so that ||A_i|| <= 1.
    set_constants({1.0 + penalty_bounds::kSecond * alpha, penalty_rho(alpha), {}});
  }

  std::size_t size() const override { return static_cast<std::size_t>(dirs_.cols()); }
  std::size_t dim() const override { return static_cast<std::size_t>(diag_.size()); }

  double component_value(std::size_t i, const Vector& x) const override {
    const auto c = static_cast<Eigen::Index>(i);
    const double ux = dirs_.col(c).dot(x);
    return 0.5 * (x.dot(diag_.cwiseProduct(x)) + signs_[c] * ux * ux) + linear_.col(c).dot(x);
  }
  void add_component_gradient(std::size_t i, const Vector& x, Vector& acc) const override {
    const auto c = static_cast<Eigen::Index>(i);
    acc += diag_.cwiseProduct(x) + linear_.col(c);
    acc += (signs_[c] * dirs_.col(c).dot(x)) * dirs_.col(c);
  }
  void add_component_hessian(std::size_t i, const Vector&, Matrix& acc) const override {
    const auto c = static_cast<Eigen::Index>(i);
    acc.diagonal() += diag_;
    acc.noalias() += signs_[c] * dirs_.col(c) * dirs_.col(c).transpose();
  }
  void add_component_hvp(std::size_t i, const Vector&, const Vector& v, Vector& acc) const override {
    const auto c = static_cast<Eigen::Index>(i);
    acc += diag_.cwiseProduct(v);
    acc += (signs_[c] * dirs_.col(c).dot(v)) * dirs_.col(c);
  }

  bool full_component_gradient(const Vector& x, Vector& out) const override {
    out.noalias() = mean_hessian_ * x;
    out += mean_linear_;
    return true;
  }
  bool full_component_hessian(const Vector&, Matrix& out) const override {
    out = mean_hessian_;
    return true;
  }
  bool full_component_hvp(const Vector&, const Vector& v, Vector& out) const override {
    out.noalias() = mean_hessian_ * v;
    return true;
  }

  double shared_value(const Vector& x) const override { return penalty_.value(x); }
  void add_shared_gradient(const Vector& x, Vector& acc) const override { penalty_.add_gradient(x, acc); }
  void add_shared_hessian(const Vector& x, Matrix& acc) const override { penalty_.add_hessian(x, acc); }
  void add_shared_hvp(const Vector& x, const Vector& v, Vector& acc) const override {
    penalty_.add_hvp(x, v, acc);
  }

 private:
  Vector diag_;
  Matrix dirs_;    // d x n, unit columns
  // sigma_i * s
  Vector signs_;
  Matrix linear_;  // d x n
  Matrix mean_hessian_;
  Vector mean_linear_;
  detail::SeparablePenalty penalty_;
};

class DenseQuadratic final : public FiniteSumProblem {
 public:
  DenseQuadratic(std::vector<Matrix> a, std::vector<Vector> b, double alpha)
      : FiniteSumProblem({}), a_(std::move(a)), b_(std::move(b)), penalty_{alpha, false} {
    if (a_.empty() || a_.size() != b_.size())
      throw std::invalid_argument("make_quadratic: need matching, nonempty A and b lists");
    const auto d = a_.front().rows();
    mean_a_ = Matrix::Zero(d, d);
    mean_b_ = Vector::Zero(d);
    double norm = 0.0;
    for (std::size_t i = 0; i < a_.size(); ++i) {
      if (a_[i].rows() != d || a_[i].cols() != d || b_[i].size() != d)
        throw std::invalid_argument("make_quadratic: inconsistent dimensions");
      if (!a_[i].isApprox(a_[i].transpose(), 1e-12))
        throw std::invalid_argument("make_quadratic: A_i must be symmetric");
      mean_a_ += a_[i];
      mean_b_ += b_[i];
      norm = std::max(norm, Eigen::SelfAdjointEigenSolver<Matrix>(a_[i], Eigen::EigenvaluesOnly)
                                .eigenvalues()
                                .cwiseAbs()
                                .maxCoeff());
    }
    mean_a_ /= static_cast<double>(a_.size());
    mean_b_ /= static_cast<double>(a_.size());
    set_constants({norm + penalty_bounds::kSecond * alpha, penalty_rho(alpha), {}});
  }

  std::size_t size() const override { return a_.size(); }
  std::size_t dim() const override { return static_cast<std::size_t>(mean_b_.size()); }

  double component_value(std::size_t i, const Vector& x) const override {
    return 0.5 * x.dot(a_[i] * x) + b_[i].dot(x);
  }
  void add_component_gradient(std::size_t i, const Vector& x, Vector& acc) const override {
    acc.noalias() += a_[i] * x;
    acc += b_[i];
  }
  void add_component_hessian(std::size_t i, const Vector&, Matrix& acc) const override { acc += a_[i]; }
  void add_component_hvp(std::size_t i, const Vector&, const Vector& v, Vector& acc) const override {
    acc.noalias() += a_[i] * v;
  }

  bool full_component_gradient(const Vector& x, Vector& out) const override {
    out.noalias() = mean_a_ * x;
    out += mean_b_;
    return true;
  }
  bool full_component_hessian(const Vector&, Matrix& out) const override {
    out = mean_a_;
    return true;
  }
  bool full_component_hvp(const Vector&, const Vector& v, Vector& out) const override {
    out.noalias() = mean_a_ * v;
    return true;
  }

  double shared_value(const Vector& x) const override { return penalty_.value(x); }
  void add_shared_gradient(const Vector& x, Vector& acc) const override { penalty_.add_gradient(x, acc); }
  void add_shared_hessian(const Vector& x, Matrix& acc) const override { penalty_.add_hessian(x, acc); }
  void add_shared_hvp(const Vector& x, const Vector& v, Vector& acc) const override {
    penalty_.add_hvp(x, v, acc);
  }

 private:
  std::vector<Matrix> a_;
  std::vector<Vector> b_;
  Matrix mean_a_;
  Vector mean_b_;
  detail::SeparablePenalty penalty_;
};

}  // namespace

std::unique_ptr<FiniteSumProblem> make_synthetic(std::uint64_t seed, const SyntheticOptions& o) {
  if (o.n == 0 || o.d == 0) throw std::invalid_argument("make_synthetic: n and d must be positive");
  if (o.alpha < 0.0) throw std::invalid_argument("make_synthetic: alpha must be nonnegative");
  Rng rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.0, 0.5);

  const auto d = static_cast<Eigen::Index>(o.d);
  const auto n = static_cast<Eigen::Index>(o.n);
  Vector diag(d);
  for (auto& c : diag) c = unif(rng);
  Matrix dirs(d, n);
  Vector signs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) dirs(j, i) = normal(rng);
    dirs.col(i).normalize();
    signs[i] = (o.psd_components || normal(rng) > 0.0) ? 1.0 : -1.0;
  }

  Matrix mean = diag.asDiagonal();
  mean.noalias() += dirs * signs.asDiagonal() * dirs.transpose() / static_cast<double>(n);
  const double low = Eigen::SelfAdjointEigenSolver<Matrix>(mean, Eigen::EigenvaluesOnly).eigenvalues()[0];
  double shift = o.curvature_floor - low;
  if (o.psd_components) shift = std::max(shift, 0.0);
  diag.array() += shift;

  // ||D + sigma u u'|| <= max|D_jj| + 1.
  const double scale = 1.0 / (diag.cwiseAbs().maxCoeff() + 1.0);
  diag *= scale;
  signs *= scale;

  Vector center(d);
  for (auto& c : center) c = 0.5 * normal(rng);
  Matrix linear(d, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) linear(j, i) = center[j] + o.linear_noise * normal(rng);

  return std::make_unique<RankOneQuadratic>(std::move(diag), std::move(dirs), std::move(signs),
                                            std::move(linear), o.alpha);
}

std::unique_ptr<FiniteSumProblem> make_synthetic(std::uint64_t seed, std::size_t n, std::size_t d,
                                                 double difficulty) {
  SyntheticOptions o;
  o.n = n;
  o.d = d;
  o.alpha = difficulty;
  return make_synthetic(seed, o);
}

std::unique_ptr<FiniteSumProblem> make_quadratic(std::vector<Matrix> a, std::vector<Vector> b,
                                                 double alpha) {
  return std::make_unique<DenseQuadratic>(std::move(a), std::move(b), alpha);
}

}  // namespace srvrc
