#pragma once

#include "srvrc/finite_sum.hpp"

namespace srvrc::detail {

/// weight * sum_j r(x_j) with r(w) = w^2/(1+w^2), or r(w) = 1 + w^2 when
/// `convex` is set.
struct SeparablePenalty {
  double weight = 0.0;
  bool convex = false;

  double value(const Vector& x) const {
    if (weight == 0.0) return 0.0;
    double s = 0.0;
    for (double w : x) {
      const double w2 = w * w;
      s += convex ? 1.0 + w2 : w2 / (1.0 + w2);
    }
    return weight * s;
  }

  double first(double w) const {
    if (convex) return 2.0 * w;
    const double q = 1.0 + w * w;
    return 2.0 * w / (q * q);
  }

  double second(double w) const {
    if (convex) return 2.0;
    const double w2 = w * w;
    const double q = 1.0 + w2;
    return (2.0 - 6.0 * w2) / (q * q * q);
  }

  void add_gradient(const Vector& x, Vector& acc) const {
    if (weight == 0.0) return;
    for (Eigen::Index j = 0; j < x.size(); ++j) acc[j] += weight * first(x[j]);
  }

  void add_hessian(const Vector& x, Matrix& acc) const {
    if (weight == 0.0) return;
    for (Eigen::Index j = 0; j < x.size(); ++j) acc(j, j) += weight * second(x[j]);
  }

  void add_hvp(const Vector& x, const Vector& v, Vector& acc) const {
    if (weight == 0.0) return;
    for (Eigen::Index j = 0; j < x.size(); ++j) acc[j] += weight * second(x[j]) * v[j];
  }
};

}  // namespace srvrc::detail
