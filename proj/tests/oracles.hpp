// Test-side oracles, deliberately independent of the library's own
// computational paths: dense-inverse Gaussian densities, brute-force
// enumeration, quadrature, the generalized-eigenproblem route to the
// reduced-rank fixed point, and raw-sample M-step computations.
#pragma once

#include "pamir/mcem.hpp"
#include "pamir/types.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

namespace oracles {

using pamir::Matrix;
using pamir::Vector;

// Dense-inverse multivariate normal log-density (no Cholesky).
inline double mvn_logpdf_dense(const Vector& w, const Vector& mean,
                               const Matrix& sigma) {
  const Eigen::Index k = w.size();
  const Matrix inv = sigma.inverse();
  const double det = sigma.determinant();
  const Vector r = w - mean;
  return -0.5 * static_cast<double>(k) * std::log(2.0 * std::numbers::pi) -
         0.5 * std::log(det) - 0.5 * r.dot(inv * r);
}

// Enumerates all count vectors of length p summing to m.
inline void enumerate_counts(
    int p, std::int64_t m,
    const std::function<void(const pamir::IntVector&)>& visit) {
  pamir::IntVector x = pamir::IntVector::Zero(p);
  std::function<void(int, std::int64_t)> rec = [&](int j, std::int64_t left) {
    if (j == p - 1) {
      x[j] = left;
      visit(x);
      return;
    }
    for (std::int64_t v = 0; v <= left; ++v) {
      x[j] = v;
      rec(j + 1, left - v);
    }
  };
  rec(0, m);
}

// Composite Simpson quadrature on [a, b].
inline double simpson(const std::function<double(double)>& f, double a,
                      double b, int intervals) {
  if (intervals % 2 != 0) ++intervals;
  const double h = (b - a) / intervals;
  double s = f(a) + f(b);
  for (int i = 1; i < intervals; ++i)
    s += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return s * h / 3.0;
}

// One-sample Kolmogorov-Smirnov distance against a CDF.
inline double ks_distance(std::vector<double> samples,
                          const std::function<double(double)>& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double F = cdf(samples[i]);
    d = std::max(d, std::abs(F - static_cast<double>(i) / n));
    d = std::max(d, std::abs(static_cast<double>(i + 1) / n - F));
  }
  return d;
}

struct RrrSolution {
  Vector mu;
  Matrix gamma;
  Matrix beta;
  Matrix sigma;
  Matrix coefficient;  // gamma * beta
};

// Reduced-rank Gaussian ML via the generalized eigenproblem of
// (Wc P_H Wc^T / n, S_WW): an algebraically different route to the same
// fixed point as the library's (Gamma,beta)/Sigma alternation.
inline RrrSolution rrr_closed_form(const Matrix& w, const Matrix& h, int d) {
  const Eigen::Index n = w.cols();
  const Vector mu = w.rowwise().mean();
  const Matrix wc = w.colwise() - mu;
  const Matrix hht = h * h.transpose();
  const Matrix c_full = wc * h.transpose() * hht.inverse();
  const Matrix m_tilde = c_full * h * wc.transpose();
  const Matrix s_ww = wc * wc.transpose() / static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<Matrix> es_w(s_ww);
  const Matrix s_half =
      es_w.eigenvectors() * es_w.eigenvalues().cwiseSqrt().asDiagonal() *
      es_w.eigenvectors().transpose();
  const Matrix s_ihalf = es_w.eigenvectors() *
                         es_w.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                         es_w.eigenvectors().transpose();

  Eigen::SelfAdjointEigenSolver<Matrix> es_g(
      s_ihalf * (m_tilde / static_cast<double>(n)) * s_ihalf);
  const Eigen::Index pm1 = w.rows();
  Matrix u(pm1, d);
  for (int j = 0; j < d; ++j)
    u.col(j) = es_g.eigenvectors().col(pm1 - 1 - j);

  const Matrix projector = s_half * u * u.transpose() * s_ihalf;
  RrrSolution sol;
  sol.mu = mu;
  sol.coefficient = projector * c_full;
  const Matrix resid = wc - sol.coefficient * h;
  sol.sigma = resid * resid.transpose() / static_cast<double>(n);

  // Factor the coefficient against the residual covariance so that
  // gamma^T sigma^-1 gamma = I_d.
  Eigen::SelfAdjointEigenSolver<Matrix> es_s(sol.sigma);
  const Matrix sig_half =
      es_s.eigenvectors() * es_s.eigenvalues().cwiseSqrt().asDiagonal() *
      es_s.eigenvectors().transpose();
  const Matrix sig_ihalf = es_s.eigenvectors() *
                           es_s.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                           es_s.eigenvectors().transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> es_k(sig_ihalf * m_tilde * sig_ihalf);
  Matrix v(pm1, d);
  for (int j = 0; j < d; ++j)
    v.col(j) = es_k.eigenvectors().col(pm1 - 1 - j);
  sol.gamma = sig_half * v;
  sol.beta = v.transpose() * sig_ihalf * c_full;
  return sol;
}

// Raw-sample versions of the M-step quantities, summing over every kept
// draw instead of using {wbar_y, S_y}.
struct RawChains {
  std::vector<std::vector<Vector>> samples;  // per observation
};

inline Vector raw_grand_mean(const RawChains& chains) {
  Vector acc = Vector::Zero(chains.samples.front().front().size());
  std::size_t count = 0;
  for (const auto& chain : chains.samples)
    for (const auto& w : chain) {
      acc += w;
      ++count;
    }
  return acc / static_cast<double>(count);
}

inline Matrix raw_sigma_update(const RawChains& chains, const Vector& wbar,
                               const Matrix& gamma, const Matrix& beta,
                               const std::vector<pamir::BasisVector>& bases) {
  const Eigen::Index pm1 = wbar.size();
  Matrix acc = Matrix::Zero(pm1, pm1);
  std::size_t total = 0;
  for (std::size_t i = 0; i < chains.samples.size(); ++i) {
    const Vector c = wbar + gamma * (beta * bases[i].h);
    for (const auto& w : chains.samples[i]) {
      const Vector r = w - c;
      acc += r * r.transpose();
      ++total;
    }
  }
  return acc / static_cast<double>(total);
}

inline double raw_q_tilde(const RawChains& chains, const pamir::ModelParams& theta,
                          const std::vector<pamir::BasisVector>& bases) {
  const Matrix inv = theta.sigma.inverse();
  const double logdet = std::log(theta.sigma.determinant());
  const double n = static_cast<double>(chains.samples.size());
  const double b = static_cast<double>(chains.samples.front().size());
  double quad = 0.0;
  for (std::size_t i = 0; i < chains.samples.size(); ++i) {
    const Vector c = theta.mu + theta.gamma * (theta.beta * bases[i].h);
    for (const auto& w : chains.samples[i]) {
      const Vector r = w - c;
      quad += r.dot(inv * r);
    }
  }
  return -0.5 * n * logdet - 0.5 * quad / b;
}

// The alternation objective J from the trace-maximization derivation,
// computed on degenerate (B = 1) statistics.
inline double j_objective(const std::vector<Vector>& w_obs, const Vector& wbar,
                          const Matrix& gamma, const Matrix& beta,
                          const Matrix& sigma,
                          const std::vector<pamir::BasisVector>& bases) {
  const Matrix inv = sigma.inverse();
  double j = 0.0;
  for (std::size_t i = 0; i < w_obs.size(); ++i) {
    const Vector r = w_obs[i] - wbar - gamma * (beta * bases[i].h);
    j += r.dot(inv * r);
  }
  return j;
}

// Average negative log-likelihood of a logistic model; used with a plain
// gradient-descent fitter as the IRLS oracle.
inline double logistic_loss(const Matrix& design, const Vector& y,
                            const Vector& weights) {
  double loss = 0.0;
  for (Eigen::Index i = 0; i < design.rows(); ++i) {
    const double eta = design.row(i).dot(weights);
    // log(1 + e^eta) - y eta, stable form
    const double softplus =
        eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
    loss += softplus - y[i] * eta;
  }
  return loss / static_cast<double>(design.rows());
}

inline Vector logistic_gradient_descent(const Matrix& design, const Vector& y,
                                        int iters = 200000,
                                        double lr = 0.5) {
  Vector w = Vector::Zero(design.cols());
  const double n = static_cast<double>(design.rows());
  for (int it = 0; it < iters; ++it) {
    Vector p(design.rows());
    for (Eigen::Index i = 0; i < design.rows(); ++i)
      p[i] = 1.0 / (1.0 + std::exp(-design.row(i).dot(w)));
    const Vector grad = design.transpose() * (p - y) / n;
    w -= lr * grad;
    if (grad.cwiseAbs().maxCoeff() < 1e-12) break;
  }
  return w;
}

}  // namespace oracles
