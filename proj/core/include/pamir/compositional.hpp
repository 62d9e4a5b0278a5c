// The model vocabulary: additive log-ratio transform pair, the
// multinomial-logit link, the count log-likelihood, response basis
// evaluation, and the latent Gaussian density.
#pragma once

#include "pamir/types.hpp"

#include <Eigen/Cholesky>

#include <span>

namespace pamir {

// w_j = log(z_j / z_p); the reference category is the last index.
LatentVector alr(const Composition& z);

// Inverse transform, overflow-guarded by max-subtraction.
Composition alr_inv(const LatentVector& w);

// Softmax over p categories with the p-th linear predictor pinned at 0:
// alr_inv of (a_j + gamma_j^T beta h).
Composition link_probs(const Vector& intercepts, const Matrix& gamma,
                       const Matrix& beta, const BasisVector& h);

// log C(m; x) + sum_j x_j log z_j. Zero counts contribute nothing.
double multinomial_logpmf(const CountVector& x, const Composition& z);

// Uncentered basis value h_y.
Vector basis(double y, const BasisSpec& spec);

// Per-coordinate mean of h over the training responses; subtracting it
// makes the training bases sum to zero.
Vector center_basis(std::span<const double> training_responses,
                    const BasisSpec& spec);

BasisVector centered_basis(double y, const BasisSpec& spec,
                           const Vector& offset);

// Multivariate normal log-density with a cached Cholesky factor of Sigma.
class GaussianLogDensity {
 public:
  explicit GaussianLogDensity(const Matrix& sigma);

  double operator()(const Vector& w, const Vector& mean) const;

  // 0.5 * r^T Sigma^-1 r
  double half_quadratic(const Vector& r) const;

  // -(k/2) log(2 pi) - 0.5 log det(Sigma)
  double log_normalizer() const { return log_normalizer_; }

  const Eigen::LLT<Matrix>& llt() const { return llt_; }
  Eigen::Index dim() const { return dim_; }

 private:
  Eigen::LLT<Matrix> llt_;
  double log_normalizer_;
  Eigen::Index dim_;
};

// Normal log-density of W given Y: mean mu + Gamma beta h, covariance Sigma.
double log_density_w_given_y(const LatentVector& w, const BasisVector& h,
                             const ModelParams& theta);

}  // namespace pamir
