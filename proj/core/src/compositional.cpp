#include "pamir/compositional.hpp"

#include <cmath>
#include <numbers>

namespace pamir {

LatentVector alr(const Composition& z) {
  const Eigen::Index p = z.size();
  if (p < 2) throw Error("alr: composition needs at least two parts");
  // Composition construction guarantees positivity; re-check so the error
  // names the offending index when callers bypass validation.
  for (Eigen::Index j = 0; j < p; ++j) {
    if (!(z[j] > 0.0))
      throw Error("alr: non-positive entry at index " + std::to_string(j));
  }
  const double ref = std::log(z[p - 1]);
  Vector w(p - 1);
  for (Eigen::Index j = 0; j + 1 < p; ++j) w[j] = std::log(z[j]) - ref;
  return w;
}

Composition alr_inv(const LatentVector& w) {
  if (w.size() < 1) throw Error("alr_inv: empty latent vector");
  if (!all_finite(w)) throw Error("alr_inv: non-finite latent vector");
  const Eigen::Index p = w.size() + 1;
  // Shift so the largest linear predictor (including the implicit 0 of the
  // reference category) becomes 0 before exponentiating.
  const double shift = std::max(0.0, w.maxCoeff());
  Vector e(p);
  for (Eigen::Index j = 0; j + 1 < p; ++j) e[j] = std::exp(w[j] - shift);
  e[p - 1] = std::exp(-shift);
  e /= e.sum();
  // Renormalize exactly; rounding in the division can leave the sum a few
  // ulps from one, and Composition enforces 1e-12.
  e /= e.sum();
  return Composition(std::move(e));
}

Composition link_probs(const Vector& intercepts, const Matrix& gamma,
                       const Matrix& beta, const BasisVector& h) {
  if (gamma.rows() != intercepts.size())
    throw Error("link_probs: gamma rows must match intercept length");
  if (beta.rows() != gamma.cols())
    throw Error("link_probs: beta rows must match gamma columns");
  if (beta.cols() != h.h.size())
    throw Error("link_probs: basis dimension mismatch");
  return alr_inv(intercepts + gamma * (beta * h.h));
}

double multinomial_logpmf(const CountVector& x, const Composition& z) {
  if (x.size() != z.size())
    throw Error("multinomial_logpmf: count/composition length mismatch");
  double logp = std::lgamma(static_cast<double>(x.library_size()) + 1.0);
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    logp -= std::lgamma(static_cast<double>(x[j]) + 1.0);
    if (x[j] > 0) logp += static_cast<double>(x[j]) * std::log(z[j]);
  }
  return logp;
}

Vector basis(double y, const BasisSpec& spec) {
  switch (spec.kind) {
    case BasisSpec::Kind::Polynomial: {
      if (spec.degree < 1) throw Error("basis: polynomial degree must be >= 1");
      Vector h(spec.degree);
      double v = 1.0;
      for (int k = 0; k < spec.degree; ++k) {
        v *= y;
        h[k] = v;
      }
      return h;
    }
    case BasisSpec::Kind::Identity: {
      Vector h(1);
      h[0] = y;
      return h;
    }
    case BasisSpec::Kind::Table: {
      for (const auto& [yk, hk] : spec.table) {
        if (yk == y || std::abs(yk - y) <= 1e-12 * std::max(1.0, std::abs(y)))
          return hk;
      }
      throw Error("basis: response value " + std::to_string(y) +
                  " not found in basis table");
    }
  }
  throw Error("basis: unknown basis kind");
}

Vector center_basis(std::span<const double> training_responses,
                    const BasisSpec& spec) {
  if (training_responses.empty())
    throw Error("center_basis: empty training responses");
  Vector offset = Vector::Zero(spec.dim());
  for (double y : training_responses) offset += basis(y, spec);
  offset /= static_cast<double>(training_responses.size());
  return offset;
}

BasisVector centered_basis(double y, const BasisSpec& spec,
                           const Vector& offset) {
  Vector h = basis(y, spec);
  if (h.size() != offset.size())
    throw Error("centered_basis: offset dimension mismatch");
  return BasisVector{h - offset, true};
}

GaussianLogDensity::GaussianLogDensity(const Matrix& sigma)
    : llt_(sigma), dim_(sigma.rows()) {
  if (sigma.rows() != sigma.cols())
    throw Error("GaussianLogDensity: sigma must be square");
  if (llt_.info() != Eigen::Success)
    throw Error("GaussianLogDensity: sigma is not positive definite");
  double log_det = 0.0;
  for (Eigen::Index j = 0; j < dim_; ++j)
    log_det += 2.0 * std::log(llt_.matrixLLT()(j, j));
  log_normalizer_ = -0.5 * static_cast<double>(dim_) *
                        std::log(2.0 * std::numbers::pi) -
                    0.5 * log_det;
}

double GaussianLogDensity::operator()(const Vector& w,
                                      const Vector& mean) const {
  return log_normalizer_ - half_quadratic(w - mean);
}

double GaussianLogDensity::half_quadratic(const Vector& r) const {
  return 0.5 * llt_.matrixL().solve(r).squaredNorm();
}

double log_density_w_given_y(const LatentVector& w, const BasisVector& h,
                             const ModelParams& theta) {
  if (w.size() != theta.mu.size())
    throw Error("log_density_w_given_y: latent dimension mismatch");
  GaussianLogDensity density(theta.sigma);
  return density(w, theta.mu + theta.gamma * (theta.beta * h.h));
}

}  // namespace pamir
