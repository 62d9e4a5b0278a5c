#include "pamir/mh.hpp"

#include "pamir/compositional.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace pamir;

namespace {

const LogTarget kStdNormal = [](const LatentVector& w) {
  return -0.5 * w.squaredNorm();
};

ModelParams tiny_theta_1d(double mu, double sigma2) {
  ModelParams theta;
  theta.mu = Vector::Constant(1, mu);
  theta.gamma = Matrix::Constant(1, 1, std::sqrt(sigma2));
  theta.beta = Matrix::Constant(1, 1, 1.0);
  theta.sigma = Matrix::Constant(1, 1, sigma2);
  return theta;
}

}  // namespace

TEST_SUITE("mh") {

TEST_CASE("standard normal moments from a long chain") {
  MHConfig cfg;
  cfg.burn_in = 2000;
  cfg.n_keep = 50000;
  cfg.proposal_scale = 2.4;
  cfg.auto_tune = false;
  cfg.seed = 31;
  const ChainOutput out = mh_run(kStdNormal, Vector::Zero(1), cfg);
  CHECK(std::abs(out.mean[0]) < 0.03);
  const double var = out.second_moment(0, 0) - out.mean[0] * out.mean[0];
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("degenerate proposal accepts everything and barely moves") {
  MHConfig cfg;
  cfg.burn_in = 100;
  cfg.n_keep = 2000;
  cfg.proposal_scale = 1e-9;
  cfg.auto_tune = false;
  cfg.seed = 5;
  const Vector init = Vector::Constant(2, 0.25);
  const ChainOutput out = mh_run(kStdNormal, init, cfg);
  CHECK(out.acceptance_rate > 0.999);
  for (const auto& w : out.samples)
    CHECK((w - init).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("identical seed and config give bit-identical output") {
  MHConfig cfg;
  cfg.burn_in = 200;
  cfg.n_keep = 500;
  cfg.seed = 77;
  const ChainOutput a = mh_run(kStdNormal, Vector::Zero(3), cfg);
  const ChainOutput b = mh_run(kStdNormal, Vector::Zero(3), cfg);
  CHECK(a.acceptance_rate == b.acceptance_rate);
  CHECK(a.tuned_scale == b.tuned_scale);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i)
    CHECK((a.samples[i].array() == b.samples[i].array()).all());
  CHECK((a.mean.array() == b.mean.array()).all());
  CHECK((a.second_moment.array() == b.second_moment.array()).all());
}

TEST_CASE("chain summary invariants") {
  MHConfig cfg;
  cfg.burn_in = 100;
  cfg.n_keep = 3000;
  cfg.seed = 13;
  const ChainOutput out = mh_run(kStdNormal, Vector::Zero(3), cfg);
  Vector mean = Vector::Zero(3);
  for (const auto& w : out.samples) mean += w;
  mean /= static_cast<double>(out.samples.size());
  CHECK((mean - out.mean).cwiseAbs().maxCoeff() <= 1e-12);
  Eigen::SelfAdjointEigenSolver<Matrix> es(
      out.second_moment - out.mean * out.mean.transpose());
  CHECK(es.eigenvalues().minCoeff() >= -1e-10);
}

TEST_CASE("thinning keeps n_keep samples") {
  MHConfig cfg;
  cfg.burn_in = 50;
  cfg.n_keep = 200;
  cfg.thinning = 5;
  cfg.seed = 3;
  const ChainOutput out = mh_run(kStdNormal, Vector::Zero(1), cfg);
  CHECK(out.samples.size() == 200);
}

TEST_CASE("non-finite target at the initial state errors") {
  const LogTarget bad = [](const LatentVector&) {
    return std::numeric_limits<double>::quiet_NaN();
  };
  MHConfig cfg;
  cfg.seed = 1;
  CHECK_THROWS_AS(mh_run(bad, Vector::Zero(1), cfg), Error);
}

TEST_CASE("NaN proposals are rejected and counted") {
  // Target is NaN outside a band, finite inside; the chain must stay put
  // on bad proposals and record them.
  const LogTarget banded = [](const LatentVector& w) {
    if (std::abs(w[0]) > 0.5)
      return std::numeric_limits<double>::quiet_NaN();
    return 0.0;
  };
  MHConfig cfg;
  cfg.burn_in = 0;
  cfg.n_keep = 2000;
  cfg.proposal_scale = 2.0;
  cfg.auto_tune = false;
  cfg.seed = 17;
  const ChainOutput out = mh_run(banded, Vector::Zero(1), cfg);
  CHECK(out.nonfinite_proposals > 0);
  for (const auto& w : out.samples) CHECK(std::abs(w[0]) <= 0.5);
}

TEST_CASE("acceptance rate non-increasing in proposal scale") {
  const std::vector<double> scales{0.5, 2.0, 8.0};
  std::vector<double> rates(scales.size(), 0.0);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (std::size_t s = 0; s < scales.size(); ++s) {
      MHConfig cfg;
      cfg.burn_in = 0;
      cfg.n_keep = 20000;
      cfg.proposal_scale = scales[s];
      cfg.auto_tune = false;
      cfg.seed = 1000 + seed;
      rates[s] += mh_run(kStdNormal, Vector::Zero(1), cfg,
                         /*store_samples=*/false)
                      .acceptance_rate;
    }
  }
  CHECK(rates[0] >= rates[1]);
  CHECK(rates[1] >= rates[2]);
}

TEST_CASE("symmetric proposal log-ratio negates exactly under swap") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> normal;
  IntVector xv(3);
  xv << 4, 2, 1;
  const CountVector x(xv);
  ModelParams theta;
  theta.mu = Vector::Zero(2);
  theta.gamma = Matrix::Identity(2, 1);
  theta.beta = Matrix::Constant(1, 1, 1.0);
  theta.sigma = Matrix::Identity(2, 2);
  const LogTarget lt =
      estep_log_target(x, BasisVector{Vector::Constant(1, 0.2), true}, theta);
  for (int rep = 0; rep < 100; ++rep) {
    Vector a(2), b(2);
    for (int j = 0; j < 2; ++j) {
      a[j] = 3.0 * normal(rng);
      b[j] = 3.0 * normal(rng);
    }
    const double forward = lt(b) - lt(a);
    const double backward = lt(a) - lt(b);
    CHECK(forward == -backward);
  }
}

TEST_CASE("estep target differences match the normalized likelihood oracle") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> normal;
  const int p = 4;
  IntVector xv(p);
  xv << 5, 0, 3, 2;
  const CountVector x(xv);
  ModelParams theta;
  theta.mu = Vector::Constant(p - 1, 0.1);
  Matrix a(p - 1, p - 1);
  for (int i = 0; i < p - 1; ++i)
    for (int j = 0; j < p - 1; ++j) a(i, j) = normal(rng);
  theta.sigma = a * a.transpose() + Matrix::Identity(p - 1, p - 1);
  theta.gamma = Matrix::Identity(p - 1, 1);
  theta.beta = Matrix::Constant(1, 3, 0.2);
  Vector hv(3);
  hv << 0.5, -0.2, 0.1;
  const BasisVector h{hv, true};
  const LogTarget lt = estep_log_target(x, h, theta);

  for (int rep = 0; rep < 50; ++rep) {
    Vector w1(p - 1), w2(p - 1);
    for (int j = 0; j < p - 1; ++j) {
      w1[j] = normal(rng);
      w2[j] = normal(rng);
    }
    const double got = lt(w1) - lt(w2);
    const double want =
        (multinomial_logpmf(x, alr_inv(w1)) +
         log_density_w_given_y(w1, h, theta)) -
        (multinomial_logpmf(x, alr_inv(w2)) +
         log_density_w_given_y(w2, h, theta));
    CHECK(got == doctest::Approx(want).epsilon(1e-10));
  }
}

TEST_CASE("p = 2 estep target reduces to binomial times normal") {
  IntVector xv(2);
  xv << 3, 2;  // k = 3, m = 5
  const CountVector x(xv);
  const ModelParams theta = tiny_theta_1d(0.4, 2.0);
  const BasisVector h{Vector::Zero(1), true};
  const LogTarget lt = estep_log_target(x, h, theta);
  for (double w : {-1.0, 0.0, 0.7, 2.5}) {
    const double hand = 3.0 * w - 5.0 * std::log1p(std::exp(w)) -
                        0.5 * std::log(2.0 * std::numbers::pi * 2.0) -
                        0.5 * (w - 0.4) * (w - 0.4) / 2.0;
    CHECK(lt(Vector::Constant(1, w)) ==
          doctest::Approx(hand).epsilon(1e-12));
  }
}

TEST_CASE("prediction target with one component equals the estep target") {
  IntVector xv(3);
  xv << 2, 3, 4;
  const CountVector x(xv);
  ModelParams theta;
  theta.mu = Vector::Constant(2, -0.2);
  theta.gamma = Matrix::Identity(2, 1);
  theta.beta = Matrix::Constant(1, 2, 0.3);
  theta.sigma = 1.5 * Matrix::Identity(2, 2);
  Vector hv(2);
  hv << 1.0, -0.5;
  const std::vector<BasisVector> bases{BasisVector{hv, true}};
  const LogTarget pred = prediction_log_target(x, bases, theta);
  const LogTarget estep = estep_log_target(x, bases[0], theta);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  for (int rep = 0; rep < 20; ++rep) {
    Vector w(2);
    w << normal(rng), normal(rng);
    CHECK(pred(w) == doctest::Approx(estep(w)).epsilon(1e-12));
  }
}

TEST_CASE("prediction target is exactly invariant to permuting bases") {
  IntVector xv(3);
  xv << 1, 2, 3;
  const CountVector x(xv);
  ModelParams theta;
  theta.mu = Vector::Zero(2);
  theta.gamma = Matrix::Identity(2, 1);
  theta.beta = Matrix::Constant(1, 1, 1.0);
  theta.sigma = Matrix::Identity(2, 2);
  std::vector<BasisVector> bases;
  for (double v : {-1.0, 0.3, 2.0, 0.9, -0.4})
    bases.push_back(BasisVector{Vector::Constant(1, v), true});
  std::vector<BasisVector> shuffled{bases[3], bases[0], bases[4], bases[2],
                                    bases[1]};
  const LogTarget a = prediction_log_target(x, bases, theta);
  const LogTarget b = prediction_log_target(x, shuffled, theta);
  std::mt19937_64 rng(6);
  std::normal_distribution<double> normal;
  for (int rep = 0; rep < 50; ++rep) {
    Vector w(2);
    w << 2.0 * normal(rng), 2.0 * normal(rng);
    CHECK(a(w) == b(w));
  }
}

TEST_CASE("two-component prediction target matches a dense oracle") {
  IntVector xv(2);
  xv << 4, 3;
  const CountVector x(xv);
  const ModelParams theta = tiny_theta_1d(0.2, 1.7);
  const std::vector<BasisVector> bases{
      BasisVector{Vector::Constant(1, -0.8), true},
      BasisVector{Vector::Constant(1, 1.1), true}};
  const LogTarget lt = prediction_log_target(x, bases, theta);
  for (double w : {-2.0, -0.5, 0.0, 0.9, 3.0}) {
    const Vector wv = Vector::Constant(1, w);
    const double f1 = std::exp(oracles::mvn_logpdf_dense(
        wv, theta.mu + theta.gamma * (theta.beta * bases[0].h), theta.sigma));
    const double f2 = std::exp(oracles::mvn_logpdf_dense(
        wv, theta.mu + theta.gamma * (theta.beta * bases[1].h), theta.sigma));
    const double want = count_loglik_term(x, wv) + std::log(f1 + f2);
    CHECK(lt(wv) == doctest::Approx(want).epsilon(1e-10));
  }
}

TEST_CASE("estep chain is stationary against the quadrature target") {
  // p = 2, m = 5: long-run chain histogram vs the normalized 1-D target.
  IntVector xv(2);
  xv << 3, 2;
  const CountVector x(xv);
  const ModelParams theta = tiny_theta_1d(0.0, 1.0);
  const BasisVector h{Vector::Zero(1), true};
  const LogTarget lt = estep_log_target(x, h, theta);

  MHConfig cfg;
  cfg.burn_in = 5000;
  cfg.n_keep = 100000;
  cfg.seed = 2024;
  const ChainOutput out = mh_run(lt, chain_init(x), cfg);

  const double z = oracles::simpson(
      [&](double w) { return std::exp(lt(Vector::Constant(1, w))); }, -12.0,
      12.0, 8000);
  const auto cdf = [&](double w) {
    return oracles::simpson(
               [&](double t) { return std::exp(lt(Vector::Constant(1, t))); },
               -12.0, w, 4000) /
           z;
  };
  std::vector<double> samples;
  samples.reserve(out.samples.size());
  for (const auto& w : out.samples) samples.push_back(w[0]);
  CHECK(oracles::ks_distance(std::move(samples), cdf) < 0.02);
}

TEST_CASE("chain_init uses pseudo-count proportions") {
  IntVector xv(3);
  xv << 0, 1, 3;
  const LatentVector w = chain_init(CountVector(xv));
  CHECK(w[0] == doctest::Approx(std::log(0.5 / 3.5)).epsilon(1e-12));
  CHECK(w[1] == doctest::Approx(std::log(1.5 / 3.5)).epsilon(1e-12));
}

}  // TEST_SUITE
