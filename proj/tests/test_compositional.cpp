#include "pamir/compositional.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace pamir;

namespace {

Composition random_composition(std::mt19937_64& rng, int p) {
  std::gamma_distribution<double> gamma_dist(1.0, 1.0);
  Vector z(p);
  for (int j = 0; j < p; ++j) z[j] = gamma_dist(rng) + 1e-6;
  z /= z.sum();
  z /= z.sum();
  return Composition(std::move(z));
}

}  // namespace

TEST_SUITE("compositional") {

TEST_CASE("alr maps the uniform composition to the origin") {
  const Composition z(Vector::Constant(3, 1.0 / 3.0));
  const Vector w = alr(z);
  CHECK(w.size() == 2);
  CHECK(w.cwiseAbs().maxCoeff() == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("alr of (0.5, 0.3, 0.2)") {
  Vector z(3);
  z << 0.5, 0.3, 0.2;
  const Vector w = alr(Composition(z));
  CHECK(w[0] == doctest::Approx(std::log(2.5)).epsilon(1e-12));
  CHECK(w[1] == doctest::Approx(std::log(1.5)).epsilon(1e-12));
}

TEST_CASE("alr with p = 2") {
  Vector z(2);
  z << 0.5, 0.5;
  const Vector w = alr(Composition(z));
  CHECK(w.size() == 1);
  CHECK(w[0] == 0.0);
}

TEST_CASE("compositions with non-positive entries are rejected by index") {
  Vector z(3);
  z << 0.5, 0.0, 0.5;
  CHECK_THROWS_WITH_AS(Composition(z), doctest::Contains("index 1"), Error);
  z << 0.5, 0.6, -0.1;
  CHECK_THROWS_AS(Composition(z), Error);
}

TEST_CASE("alr_inv inverts the origin") {
  Vector w(2);
  w << 0.0, 0.0;
  const Composition z = alr_inv(w);
  for (int j = 0; j < 3; ++j)
    CHECK(z[j] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("alr_inv round-trips the hand example") {
  Vector w(2);
  w << std::log(2.5), std::log(1.5);
  const Composition z = alr_inv(w);
  CHECK(z[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(z[1] == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(z[2] == doctest::Approx(0.2).epsilon(1e-14));
}

TEST_CASE("alr_inv survives overflow-scale inputs") {
  Vector w(2);
  w << 700.0, 0.0;
  const Composition z = alr_inv(w);
  CHECK(z[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(z[1] > 0.0);
  CHECK(z[2] > 0.0);
  CHECK(std::abs(z.probs().sum() - 1.0) <= 1e-12);
}

TEST_CASE("alr round trip properties") {
  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> unif(-20.0, 20.0);
  for (int rep = 0; rep < 200; ++rep) {
    const int p = 2 + static_cast<int>(rng() % 7);
    const Composition z = random_composition(rng, p);
    const Composition back = alr_inv(alr(z));
    for (int j = 0; j < p; ++j)
      CHECK(std::abs(back[j] - z[j]) <= 1e-12);

    Vector w(p - 1);
    for (int j = 0; j < p - 1; ++j) w[j] = unif(rng);
    const Vector back_w = alr(alr_inv(w));
    CHECK((back_w - w).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("link_probs with zero predictors is exactly uniform") {
  const BasisVector h{Vector::Zero(3), true};
  const Composition z = link_probs(Vector::Zero(4), Matrix::Zero(4, 1),
                                   Matrix::Zero(1, 3), h);
  for (int j = 0; j < 5; ++j)
    CHECK(std::abs(z[j] - 0.2) <= 1e-15);
}

TEST_CASE("link_probs softmax of (log 3, 0)") {
  Vector a(1);
  a << std::log(3.0);
  const BasisVector h{Vector::Zero(1), true};
  const Composition z =
      link_probs(a, Matrix::Zero(1, 1), Matrix::Zero(1, 1), h);
  CHECK(z[0] == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(z[1] == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("link_probs output is a strictly positive unit-sum composition") {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> normal;
  for (int rep = 0; rep < 50; ++rep) {
    const int p = 3, d = 2, r = 3;
    Vector a(p - 1);
    Matrix g(p - 1, d), b(d, r);
    for (int i = 0; i < p - 1; ++i) a[i] = 5.0 * normal(rng);
    for (int i = 0; i < g.size(); ++i) g(i / d, i % d) = normal(rng);
    for (int i = 0; i < b.size(); ++i) b(i / r, i % r) = normal(rng);
    Vector hv(r);
    for (int i = 0; i < r; ++i) hv[i] = normal(rng);
    const Composition z = link_probs(a, g, b, BasisVector{hv, false});
    CHECK(std::abs(z.probs().sum() - 1.0) <= 1e-12);
    CHECK(z.probs().minCoeff() > 0.0);
  }
  CHECK_THROWS_AS(link_probs(Vector::Zero(3), Matrix::Zero(2, 1),
                             Matrix::Zero(1, 3),
                             BasisVector{Vector::Zero(3), false}),
                  Error);
}

TEST_CASE("multinomial_logpmf single trial") {
  IntVector x(2);
  x << 1, 0;
  Vector z(2);
  z << 0.7, 0.3;
  CHECK(multinomial_logpmf(CountVector(x), Composition(z)) ==
        doctest::Approx(std::log(0.7)).epsilon(1e-14));
}

TEST_CASE("multinomial_logpmf trinomial hand value") {
  IntVector x(2);
  x << 2, 1;
  Vector z(2);
  z << 0.5, 0.5;
  CHECK(multinomial_logpmf(CountVector(x), Composition(z)) ==
        doctest::Approx(std::log(0.375)).epsilon(1e-14));
}

TEST_CASE("multinomial_logpmf normalizes by brute force") {
  std::mt19937_64 rng(7);
  for (int p = 2; p <= 3; ++p) {
    for (std::int64_t m = 1; m <= 6; ++m) {
      Composition z = random_composition(rng, p);
      double total = 0.0;
      oracles::enumerate_counts(p, m, [&](const IntVector& x) {
        total += std::exp(multinomial_logpmf(CountVector(x), z));
      });
      CHECK(std::abs(total - 1.0) <= 1e-10);
    }
  }
}

TEST_CASE("multinomial_logpmf rejects length mismatch") {
  IntVector x(2);
  x << 1, 1;
  CHECK_THROWS_AS(
      multinomial_logpmf(CountVector(x), Composition(Vector::Constant(3, 1.0 / 3))),
      Error);
}

TEST_CASE("zero counts contribute nothing even for tiny probabilities") {
  IntVector x(3);
  x << 0, 2, 0;
  Vector z(3);
  z << 1e-300, 0.5, 0.5 - 1e-300;
  const double lp = multinomial_logpmf(CountVector(x), Composition(z));
  CHECK(std::isfinite(lp));
  CHECK(lp == doctest::Approx(std::log(0.25)).epsilon(1e-12));
}

TEST_CASE("basis evaluates monomials") {
  const Vector h = basis(2.0, BasisSpec::polynomial(3));
  CHECK(h[0] == 2.0);
  CHECK(h[1] == 4.0);
  CHECK(h[2] == 8.0);
  const Vector h1 = basis(-1.5, BasisSpec::polynomial(1));
  CHECK(h1.size() == 1);
  CHECK(h1[0] == -1.5);
  CHECK_THROWS_AS(BasisSpec::polynomial(0), Error);
}

TEST_CASE("basis table lookup") {
  std::vector<std::pair<double, Vector>> entries;
  Vector h0(2), h1(2);
  h0 << 1.0, 2.0;
  h1 << 3.0, 4.0;
  entries.emplace_back(0.0, h0);
  entries.emplace_back(1.0, h1);
  const BasisSpec spec = BasisSpec::from_table(entries);
  CHECK(basis(1.0, spec) == h1);
  CHECK_THROWS_AS(basis(2.0, spec), Error);
}

TEST_CASE("centered bases sum to zero over any training set") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal;
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> ys(5 + rng() % 50);
    for (auto& y : ys) y = 3.0 * normal(rng);
    const BasisSpec spec = BasisSpec::polynomial(3);
    const Vector offset = center_basis(ys, spec);
    Vector total = Vector::Zero(3);
    for (double y : ys) total += centered_basis(y, spec, offset).h;
    CHECK(total.cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("log_density_w_given_y at the mean with identity covariance") {
  const int p = 4;
  ModelParams theta;
  theta.mu = Vector::Zero(p - 1);
  theta.gamma = Matrix::Identity(p - 1, 1);
  theta.beta = Matrix::Constant(1, 3, 0.5);
  theta.sigma = Matrix::Identity(p - 1, p - 1);
  Vector hv(3);
  hv << 1.0, -1.0, 0.5;
  const BasisVector h{hv, true};
  const Vector w = theta.mu + theta.gamma * (theta.beta * hv);
  CHECK(log_density_w_given_y(w, h, theta) ==
        doctest::Approx(-0.5 * (p - 1) * std::log(2.0 * std::numbers::pi))
            .epsilon(1e-14));
}

TEST_CASE("log_density_w_given_y matches the dense-inverse oracle") {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> normal;
  for (int rep = 0; rep < 30; ++rep) {
    const int pm1 = 3, d = 1, r = 2;
    Matrix a(pm1, pm1);
    for (int i = 0; i < pm1; ++i)
      for (int j = 0; j < pm1; ++j) a(i, j) = normal(rng);
    ModelParams theta;
    theta.sigma = a * a.transpose() + 0.5 * Matrix::Identity(pm1, pm1);
    theta.mu = Vector::NullaryExpr(pm1, [&](Eigen::Index) { return normal(rng); });
    theta.gamma = Matrix::NullaryExpr(pm1, d, [&](Eigen::Index, Eigen::Index) {
      return normal(rng);
    });
    theta.beta = Matrix::NullaryExpr(d, r, [&](Eigen::Index, Eigen::Index) {
      return normal(rng);
    });
    Vector hv(r), w(pm1);
    for (int i = 0; i < r; ++i) hv[i] = normal(rng);
    for (int i = 0; i < pm1; ++i) w[i] = normal(rng);
    const BasisVector h{hv, true};
    const double got = log_density_w_given_y(w, h, theta);
    const double want = oracles::mvn_logpdf_dense(
        w, theta.mu + theta.gamma * (theta.beta * hv), theta.sigma);
    CHECK(got == doctest::Approx(want).epsilon(1e-10));
  }
}

TEST_CASE("log_density_w_given_y integrates to one in 1-D") {
  ModelParams theta;
  theta.mu = Vector::Constant(1, 0.3);
  theta.gamma = Matrix::Constant(1, 1, 1.0);
  theta.beta = Matrix::Constant(1, 1, 0.7);
  theta.sigma = Matrix::Constant(1, 1, 1.3);
  Vector hv = Vector::Constant(1, 0.4);
  const BasisVector h{hv, true};
  const double integral = oracles::simpson(
      [&](double w) {
        return std::exp(log_density_w_given_y(Vector::Constant(1, w), h, theta));
      },
      -15.0, 15.0, 4000);
  CHECK(std::abs(integral - 1.0) <= 1e-6);
}

TEST_CASE("log_density_w_given_y rejects non-PD sigma") {
  ModelParams theta;
  theta.mu = Vector::Zero(2);
  theta.gamma = Matrix::Identity(2, 1);
  theta.beta = Matrix::Constant(1, 1, 1.0);
  theta.sigma = -Matrix::Identity(2, 2);
  CHECK_THROWS_AS(log_density_w_given_y(Vector::Zero(2),
                                        BasisVector{Vector::Zero(1), true},
                                        theta),
                  Error);
}

TEST_CASE("CountVector invariants") {
  IntVector x(3);
  x << 0, 0, 0;
  CHECK_THROWS_AS(CountVector(x), Error);
  x << 1, -1, 2;
  CHECK_THROWS_AS(CountVector(x), Error);
  x << 3, 0, 2;
  const CountVector cv(x);
  CHECK(cv.library_size() == 5);
}

}  // TEST_SUITE
