#include <doctest.h>
#include <zlib.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "srvrc/diagnostics.hpp"
#include "srvrc/objectives.hpp"

using namespace srvrc;

namespace {

LibsvmDataset parse(const std::string& text) {
  std::istringstream in(text);
  return parse_libsvm(in);
}

LibsvmDataset random_dataset(std::uint64_t seed, std::size_t n, std::size_t d, std::size_t classes) {
  Rng rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<std::size_t> label(classes == 2 ? 0 : 1, classes == 2 ? 1 : classes);
  std::bernoulli_distribution keep(0.7);
  LibsvmDataset data;
  data.d = d;
  for (std::size_t i = 0; i < n; ++i) {
    LibsvmRow row{static_cast<double>(label(rng)), {}};
    for (std::size_t j = 1; j <= d; ++j)
      if (keep(rng)) row.features.push_back({j, normal(rng)});
    data.rows.push_back(std::move(row));
  }
  return data;
}

Vector random_vector(Rng& rng, std::size_t d, double scale = 1.0) {
  std::normal_distribution<double> normal;
  Vector v(static_cast<Eigen::Index>(d));
  for (auto& e : v) e = scale * normal(rng);
  return v;
}

}  // namespace

TEST_CASE("parse_libsvm reads rows as written") {
  const LibsvmDataset d = parse("1 1:0.5 3:2.0\n");
  REQUIRE(d.n() == 1);
  CHECK(d.d == 3);
  CHECK(d.rows[0].label == 1.0);
  CHECK(d.rows[0].features == std::vector<SparseEntry>{{1, 0.5}, {3, 2.0}});
}

TEST_CASE("parse_libsvm skips blank lines and comments") {
  const LibsvmDataset d = parse("# header\n\n-1 2:1e-3 # trailing\n+1\n");
  REQUIRE(d.n() == 2);
  CHECK(d.d == 2);
  CHECK(d.rows[1].features.empty());
}

TEST_CASE("parse_libsvm reports the offending line") {
  CHECK_THROWS_AS(parse(""), ParseError);
  auto line_of = [](const std::string& text) {
    try {
      parse(text);
    } catch (const ParseError& e) {
      return e.line();
    }
    return std::size_t{0};
  };
  CHECK(line_of("1 1:2\n1 3:1 2:1\n") == 2);
  CHECK(line_of("1 1:2\n\n0 0:1\n") == 3);
  CHECK(line_of("1 1:x\n") == 1);
  CHECK(line_of("abc 1:1\n") == 1);
  CHECK(line_of("1 12\n") == 1);
}

TEST_CASE("write_libsvm then parse_libsvm is the identity") {
  const LibsvmDataset d = random_dataset(1, 20, 7, 3);
  std::ostringstream out;
  write_libsvm(d, out);
  CHECK(parse(out.str()) == d);
}

TEST_CASE("gzip input") {
  const auto dir = std::filesystem::temp_directory_path() / "srvrc_test_gz";
  std::filesystem::create_directories(dir);
  const auto path = dir / "tiny.svm.gz";
  const std::string text = "-1 1:1 2:2\n1 2:0.25\n";
  gzFile f = gzopen(path.string().c_str(), "wb");
  REQUIRE(f != nullptr);
  gzwrite(f, text.data(), static_cast<unsigned>(text.size()));
  gzclose(f);
  CHECK(load_libsvm(path) == parse(text));
  CHECK_THROWS(load_libsvm(dir / "missing.svm"));
}

TEST_CASE("binary labels map the smaller value to 0") {
  LibsvmDataset d = parse("1 1:1\n-1 1:2\n1 1:3\n");
  normalize_binary_labels(d);
  CHECK(d.rows[0].label == 1.0);
  CHECK(d.rows[1].label == 0.0);
  LibsvmDataset twos = parse("2 1:1\n4 1:1\n");
  normalize_binary_labels(twos);
  CHECK(twos.rows[0].label == 0.0);
  CHECK(twos.rows[1].label == 1.0);
  LibsvmDataset three = parse("1 1:1\n2 1:1\n3 1:1\n");
  CHECK_THROWS_AS(normalize_binary_labels(three), std::invalid_argument);
}

TEST_CASE("class labels are remapped to 1..k in ascending order") {
  LibsvmDataset d = parse("7 1:1\n-2 1:1\n7 1:1\n0 1:1\n");
  CHECK(remap_class_labels(d) == 3);
  CHECK(d.rows[0].label == 3.0);
  CHECK(d.rows[1].label == 1.0);
  CHECK(d.rows[3].label == 2.0);
}

TEST_CASE("scale_columns bounds every feature by 1") {
  LibsvmDataset d = parse("1 1:4 2:-3\n0 1:-2 2:1.5\n");
  scale_columns(d);
  CHECK(d.rows[0].features[0].value == 1.0);
  CHECK(d.rows[0].features[1].value == -1.0);
  CHECK(d.rows[1].features[0].value == -0.5);
  CHECK(d.rows[1].features[1].value == 0.5);
}

TEST_CASE("penalty bounds agree with a fine grid") {
  double r1 = 0.0, r2 = 0.0, r3 = 0.0;
  for (int k = -400000; k <= 400000; ++k) {
    const double w = k * 1e-5;
    const double q = 1.0 + w * w;
    r1 = std::max(r1, std::abs(2.0 * w / (q * q)));
    r2 = std::max(r2, std::abs((2.0 - 6.0 * w * w) / (q * q * q)));
    r3 = std::max(r3, std::abs(24.0 * w * (w * w - 1.0) / (q * q * q * q)));
  }
  CHECK(r1 == doctest::Approx(penalty_bounds::kFirst).epsilon(1e-9));
  CHECK(r2 == doctest::Approx(penalty_bounds::kSecond).epsilon(1e-12));
  CHECK(r3 == doctest::Approx(penalty_bounds::kThird).epsilon(1e-9));
}

TEST_CASE("binary logistic regression values") {
  LibsvmDataset one = parse("1 1:0.3 2:-1\n");
  normalize_binary_labels(one);
  const auto p = make_binary_logreg(one, 1e-3);
  CHECK(full_value(*p, Vector::Zero(2)) == doctest::Approx(std::log(2.0)).epsilon(1e-15));

  SUBCASE("regularizer only") {
    LibsvmDataset empty = parse("0\n1\n");
    empty.d = 3;
    const double lambda = 0.2;
    const auto q = make_binary_logreg(empty, lambda);
    const Vector w = (Vector(3) << 0.5, -2.0, 3.0).finished();
    const Vector g = full_gradient(*q, w);
    for (int j = 0; j < 3; ++j) {
      const double s = 1.0 + w[j] * w[j];
      CHECK(g[j] == doctest::Approx(2.0 * lambda * w[j] / (s * s)).epsilon(1e-14));
    }
    const double reg = full_value(*q, w) - std::log(2.0);
    CHECK(reg >= 0.0);
    CHECK(reg <= lambda * 3);
  }
  CHECK_THROWS_AS(make_binary_logreg(parse("2 1:1\n0 1:1\n"), 1e-3), std::invalid_argument);
  CHECK_THROWS_AS(make_binary_logreg(one, 0.0), std::invalid_argument);
}

TEST_CASE("multiclass logistic regression values") {
  const LibsvmDataset d = random_dataset(3, 15, 4, 3);
  const auto p = make_multiclass_logreg(d, 1e-3, 3);
  CHECK(p->dim() == 12);
  CHECK(full_value(*p, Vector::Zero(12)) == doctest::Approx(std::log(3.0)).epsilon(1e-14));
  CHECK_THROWS_AS(make_multiclass_logreg(d, 1e-3, 2), std::invalid_argument);

  const auto printed = make_multiclass_logreg(d, 0.5, 3, MulticlassPenalty::printed);
  const Vector w = Vector::Constant(12, 2.0);
  const auto plain = make_multiclass_logreg(d, 0.5, 3);
  // 0.5 * sum (1 + 4) against 0.5 * sum 4/5
  CHECK(full_value(*printed, w) - full_value(*plain, w) == doctest::Approx(0.5 * 12 * (5.0 - 0.8)).epsilon(1e-12));
}

TEST_CASE("derivative checks on every objective") {
  const LibsvmDataset bin = random_dataset(4, 40, 6, 2);
  const LibsvmDataset multi = random_dataset(5, 40, 4, 3);
  std::vector<std::unique_ptr<FiniteSumProblem>> problems;
  problems.push_back(make_binary_logreg(bin, 1e-3));
  problems.push_back(make_multiclass_logreg(multi, 1e-3, 3));
  problems.push_back(make_multiclass_logreg(multi, 1e-3, 3, MulticlassPenalty::printed));
  problems.push_back(make_synthetic(6, 50, 7, 1.0));
  Rng rng(7);
  for (const auto& p : problems) {
    for (int k = 0; k < 10; ++k) {
      const Vector x = random_vector(rng, p->dim());
      const Vector v = random_vector(rng, p->dim());
      CHECK(finite_diff_grad_check(*p, x, 1e-5) <= 1e-5);
      CHECK(hvp_consistency_error(*p, x, v) <= 1e-10);
      for (std::size_t i : {std::size_t{0}, p->size() - 1}) {
        const Matrix h = p->hessian(i, x);
        CHECK((h - h.transpose()).norm() <= 1e-12 * (1.0 + h.norm()));
        CHECK((p->hvp(i, x, v) - h * v).norm() <= 1e-10 * (1.0 + v.norm()));
      }
    }
  }
}

TEST_CASE("multiclass explicit Hessian only within the dense limit") {
  const LibsvmDataset wide = random_dataset(8, 5, 700, 3);
  const auto p = make_multiclass_logreg(wide, 1e-3, 3);
  CHECK_FALSE(p->has_hessian());
  Rng rng(1);
  const Vector x = random_vector(rng, p->dim(), 0.1);
  const Vector v = random_vector(rng, p->dim());
  const double step = 1e-5;
  const Vector fd = (full_gradient(*p, x + step * v) - full_gradient(*p, x - step * v)) / (2 * step);
  const Vector hv = full_hvp(*p, x, v);
  CHECK((fd - hv).norm() <= 1e-5 * (1.0 + hv.norm()));
}

TEST_CASE("constants reported by the logistic objectives bound the curvature") {
  const LibsvmDataset bin = random_dataset(9, 30, 5, 2);
  const auto p = make_binary_logreg(bin, 1e-2);
  Rng rng(2);
  for (int k = 0; k < 20; ++k) {
    const Vector x = random_vector(rng, 5, 2.0);
    for (std::size_t i = 0; i < p->size(); ++i) {
      const Eigen::SelfAdjointEigenSolver<Matrix> eig(p->hessian(i, x), Eigen::EigenvaluesOnly);
      CHECK(eig.eigenvalues().cwiseAbs().maxCoeff() <= p->constants().lipschitz_grad);
      CHECK(p->gradient(i, x).norm() <= *p->constants().grad_bound);
    }
  }
}

TEST_CASE("synthetic generator") {
  SyntheticOptions o;
  o.n = 40;
  o.d = 6;
  o.alpha = 0.0;
  const auto a = make_synthetic(12, o);
  const auto b = make_synthetic(12, o);
  Rng rng(3);
  const Vector x = random_vector(rng, 6);
  CHECK(full_value(*a, x) == full_value(*b, x));
  CHECK(full_gradient(*a, x) == full_gradient(*b, x));
  CHECK(a->constants().lipschitz_hess == 1e-6);
  CHECK_FALSE(a->constants().grad_bound.has_value());

  for (std::size_t i = 0; i < a->size(); ++i) {
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(a->hessian(i, x), Eigen::EigenvaluesOnly);
    CHECK(eig.eigenvalues().cwiseAbs().maxCoeff() <= 1.0 + 1e-12);
  }
  const Eigen::SelfAdjointEigenSolver<Matrix> mean(full_hessian(*a, x), Eigen::EigenvaluesOnly);
  CHECK(mean.eigenvalues()[0] > 0.0);

  SUBCASE("convex instance: minimizer from a linear solve") {
    o.psd_components = true;
    const auto c = make_synthetic(13, o);
    for (std::size_t i = 0; i < c->size(); ++i) {
      const Eigen::SelfAdjointEigenSolver<Matrix> eig(c->hessian(i, x), Eigen::EigenvaluesOnly);
      CHECK(eig.eigenvalues()[0] >= -1e-12);
    }
    const Matrix h = full_hessian(*c, x);
    const Vector star = -h.ldlt().solve(full_gradient(*c, Vector::Zero(6)));
    CHECK(mu_criterion(*c, star, c->constants().lipschitz_hess) <= 1e-18);
  }
  CHECK_THROWS_AS(make_synthetic(1, 0, 3, 1.0), std::invalid_argument);
}

TEST_CASE("make_quadratic checks its input") {
  CHECK_THROWS_AS(make_quadratic({}, {}, 0.0), std::invalid_argument);
  Matrix asym(2, 2);
  asym << 1, 2, 0, 1;
  CHECK_THROWS_AS(make_quadratic({asym}, {Vector::Zero(2)}, 0.0), std::invalid_argument);
  const auto q = make_quadratic({Matrix::Identity(1, 1)}, {Vector::Zero(1)}, 0.0);
  CHECK(full_value(*q, Vector::Constant(1, 2.0)) == 2.0);
  CHECK(q->constants().lipschitz_grad == 1.0);
}
