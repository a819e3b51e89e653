#include <doctest.h>
#include <omp.h>

#include <algorithm>
#include <random>

#include "srvrc/finite_sum.hpp"
#include "srvrc/objectives.hpp"

using namespace srvrc;

namespace {

// f_i(x) = 1/2 a_i ||x||^2
class ScaledNorm final : public FiniteSumProblem {
 public:
  ScaledNorm(std::vector<double> a, std::size_t d) : FiniteSumProblem({1.0, 1.0, {}}), a_(std::move(a)), d_(d) {}
  std::size_t size() const override { return a_.size(); }
  std::size_t dim() const override { return d_; }
  double component_value(std::size_t i, const Vector& x) const override { return 0.5 * a_[i] * x.squaredNorm(); }
  void add_component_gradient(std::size_t i, const Vector& x, Vector& acc) const override { acc += a_[i] * x; }
  void add_component_hessian(std::size_t i, const Vector&, Matrix& acc) const override {
    acc.diagonal().array() += a_[i];
  }
  void add_component_hvp(std::size_t i, const Vector&, const Vector& v, Vector& acc) const override {
    acc += a_[i] * v;
  }

 private:
  std::vector<double> a_;
  std::size_t d_;
};

LibsvmDataset random_dataset(std::uint64_t seed, std::size_t n, std::size_t d) {
  Rng rng(seed);
  std::normal_distribution<double> normal;
  std::bernoulli_distribution coin(0.5), keep(0.6);
  LibsvmDataset data;
  data.d = d;
  for (std::size_t i = 0; i < n; ++i) {
    LibsvmRow row{coin(rng) ? 1.0 : 0.0, {}};
    for (std::size_t j = 1; j <= d; ++j)
      if (keep(rng)) row.features.push_back({j, normal(rng)});
    data.rows.push_back(std::move(row));
  }
  return data;
}

Vector random_vector(Rng& rng, std::size_t d) {
  std::normal_distribution<double> normal;
  Vector v(static_cast<Eigen::Index>(d));
  for (auto& e : v) e = normal(rng);
  return v;
}

}  // namespace

TEST_CASE("sample_multiset: full set when B >= n, without consuming randomness") {
  Rng rng(3);
  const Rng before = rng;
  for (std::size_t b : {5, 7}) {
    const IndexBatch batch = sample_multiset(rng, 5, b);
    CHECK(batch.full);
    CHECK(batch.size() == 5);
  }
  CHECK(rng == before);
}

TEST_CASE("sample_multiset: draws are in range, sorted and seed-determined") {
  Rng a(42), b(42);
  const IndexBatch x = sample_multiset(a, 100, 10);
  const IndexBatch y = sample_multiset(b, 100, 10);
  REQUIRE(x.size() == 10);
  CHECK_FALSE(x.full);
  CHECK(x.indices == y.indices);
  CHECK(std::is_sorted(x.indices.begin(), x.indices.end()));
  for (std::size_t i : x.indices) CHECK(i < 100);
}

TEST_CASE("sample_multiset: rejects n = 0 and B = 0") {
  Rng rng(1);
  CHECK_THROWS_AS(sample_multiset(rng, 0, 3), std::invalid_argument);
  CHECK_THROWS_AS(sample_multiset(rng, 3, 0), std::invalid_argument);
}

TEST_CASE("batch oracles on hand-computed quadratics") {
  const ScaledNorm p({1.0, 3.0, 5.0}, 4);
  const Vector x = Vector::LinSpaced(4, -1.0, 2.0);
  OracleCounter c;

  SUBCASE("pair average") {
    const Vector g = batch_gradient(p, x, IndexBatch::of({0, 1}, 3), c);
    CHECK((g - 2.0 * x).norm() <= 1e-15);
    CHECK(c.grad_calls == 2);
  }
  SUBCASE("singleton") {
    CHECK((batch_gradient(p, x, IndexBatch::of({2}, 3), c) - 5.0 * x).norm() <= 1e-15);
    CHECK((batch_hessian(p, x, IndexBatch::of({2}, 3), c) - 5.0 * Matrix::Identity(4, 4)).norm() <= 1e-15);
  }
  SUBCASE("multiset weights repeated indices") {
    const Vector g = batch_gradient(p, x, IndexBatch::of({0, 0, 2}, 3), c);
    CHECK((g - (7.0 / 3.0) * x).norm() <= 1e-14);
    CHECK(c.grad_calls == 3);
  }
  SUBCASE("full set charges n") {
    const Vector v = Vector::Ones(4);
    CHECK((batch_hvp(p, x, IndexBatch::all(3), v, c) - 3.0 * v).norm() <= 1e-15);
    CHECK(c.hvp_calls == 3);
    CHECK((batch_hvp(p, x, IndexBatch::all(3), Vector::Zero(4), c)).norm() == 0.0);
  }
}

TEST_CASE("batch oracles reject bad input") {
  const ScaledNorm p({1.0, 2.0}, 3);
  OracleCounter c;
  const Vector x = Vector::Zero(3);
  CHECK_THROWS_AS(batch_gradient(p, x, IndexBatch::of({2}, 2), c), std::invalid_argument);
  CHECK_THROWS_AS(batch_gradient(p, Vector::Zero(2), IndexBatch::of({0}, 2), c), std::invalid_argument);
  CHECK_THROWS_AS(batch_gradient(p, x, IndexBatch::all(5), c), std::invalid_argument);
  CHECK(c == OracleCounter{});
}

TEST_CASE("parallel kernels agree with the serial reference on logistic regression") {
  const auto data = random_dataset(7, 3000, 40);
  const auto p = make_binary_logreg(data, 1e-3);
  Rng rng(11);
  const Vector x = 0.3 * random_vector(rng, 40);
  const Vector v = random_vector(rng, 40);
  const IndexBatch batch = sample_multiset(rng, p->size(), 2500);
  OracleCounter c;

  const Vector g = batch_gradient(*p, x, batch, c);
  const Vector gs = serial::batch_gradient(*p, x, batch);
  CHECK((g - gs).norm() <= 1e-12 * (1.0 + gs.norm()));

  const Matrix h = batch_hessian(*p, x, batch, c);
  const Matrix hs = serial::batch_hessian(*p, x, batch);
  CHECK((h - hs).norm() <= 1e-12 * (1.0 + hs.norm()));

  const Vector hv = batch_hvp(*p, x, batch, v, c);
  CHECK((hv - hs * v).norm() <= 1e-10 * (1.0 + v.norm()));
  CHECK((hv - serial::batch_hvp(*p, x, batch, v)).norm() <= 1e-12 * (1.0 + hv.norm()));
  CHECK(c == OracleCounter{2500, 2500, 2500});
}

TEST_CASE("reductions are bit-identical across thread counts") {
  const auto data = random_dataset(8, 4000, 30);
  const auto p = make_binary_logreg(data, 1e-3);
  Rng rng(5);
  const Vector x = 0.2 * random_vector(rng, 30);
  const IndexBatch batch = sample_multiset(rng, p->size(), 3999);
  OracleCounter c;
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const Vector one = batch_gradient(*p, x, batch, c);
  const Matrix h_one = batch_hessian(*p, x, batch, c);
  omp_set_num_threads(4);
  const Vector four = batch_gradient(*p, x, batch, c);
  const Matrix h_four = batch_hessian(*p, x, batch, c);
  omp_set_num_threads(saved);
  CHECK(one == four);
  CHECK(h_one == h_four);
}

TEST_CASE("linearity over a disjoint union") {
  const auto data = random_dataset(9, 60, 6);
  const auto p = make_binary_logreg(data, 1e-3);
  Rng rng(2);
  const Vector x = random_vector(rng, 6);
  OracleCounter c;
  const IndexBatch left = IndexBatch::of({0, 3, 5, 9}, 60);
  const IndexBatch right = IndexBatch::of({1, 2, 40}, 60);
  const IndexBatch both = IndexBatch::of({0, 1, 2, 3, 5, 9, 40}, 60);
  const Vector combined = (4.0 * batch_gradient(*p, x, left, c) + 3.0 * batch_gradient(*p, x, right, c)) / 7.0;
  const Vector direct = batch_gradient(*p, x, both, c);
  CHECK((combined - direct).norm() <= 1e-12 * (1.0 + direct.norm()));
}

TEST_CASE("closed-form full-batch paths match the component sum") {
  SyntheticOptions o;
  o.n = 300;
  o.d = 8;
  const auto p = make_synthetic(4, o);
  Rng rng(6);
  const Vector x = random_vector(rng, 8);
  const Vector v = random_vector(rng, 8);
  const IndexBatch all = IndexBatch::all(p->size());
  const Vector g = full_gradient(*p, x);
  CHECK((g - serial::batch_gradient(*p, x, all)).norm() <= 1e-12 * (1.0 + g.norm()));
  const Matrix h = full_hessian(*p, x);
  CHECK((h - serial::batch_hessian(*p, x, all)).norm() <= 1e-12 * (1.0 + h.norm()));
  CHECK((full_hvp(*p, x, v) - h * v).norm() <= 1e-12 * (1.0 + v.norm()));
  CHECK(full_value(*p, x) == doctest::Approx(serial::batch_value(*p, x, all)).epsilon(1e-13));
}
