#include "pamir/mcem.hpp"

#include "pamir/compositional.hpp"
#include "pamir/parallel.hpp"
#include "pamir/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace pamir {

namespace {

constexpr double kGramRidgeCondition = 1e12;
constexpr double kGramSingularCondition = 1e15;
constexpr double kEigengapWarning = 1e-12;
constexpr double kSigmaEigenFloor = 1e-10;

// B growth when the moving-average criterion stalls: multiply by 1.5, cap
// at 10x the initial chain length, require 5 stalled iterations.
constexpr double kGrowthFactor = 1.5;
constexpr double kGrowthCap = 10.0;
constexpr int kStallWindow = 5;
constexpr int kMovingAverageWindow = 3;

Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

// Σ^{±1/2} via eigendecomposition; throws if sigma is not PD.
struct SigmaRoots {
  Matrix half;
  Matrix inv_half;
};

SigmaRoots sigma_roots(const Matrix& sigma) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(sigma));
  if (es.info() != Eigen::Success)
    throw Error("m_step: eigendecomposition of sigma failed");
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw Error("m_step: sigma is not positive definite");
  const Vector sqrt_ev = es.eigenvalues().cwiseSqrt();
  SigmaRoots roots;
  roots.half = es.eigenvectors() * sqrt_ev.asDiagonal() *
               es.eigenvectors().transpose();
  roots.inv_half = es.eigenvectors() * sqrt_ev.cwiseInverse().asDiagonal() *
                   es.eigenvectors().transpose();
  return roots;
}

// Centered chain-mean matrix Wc = Wbar - wbar 1^T, (p-1) x n.
Matrix centered_means(const EStepStats& stats) {
  const Eigen::Index n = static_cast<Eigen::Index>(stats.chain_means.size());
  const Eigen::Index pm1 = stats.grand_mean.size();
  Matrix wc(pm1, n);
  for (Eigen::Index i = 0; i < n; ++i)
    wc.col(i) = stats.chain_means[i] - stats.grand_mean;
  return wc;
}

// Solve X (H H^T) = A for X, i.e. A (H H^T)^-1, with the ridge fallback.
Matrix solve_against_gram(const Matrix& a, const Dataset& data, bool* ridged) {
  const Matrix& h = data.basis_matrix();
  Matrix gram = h * h.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
  const double emax = es.eigenvalues().maxCoeff();
  const double emin = es.eigenvalues().minCoeff();
  const double cond = emin > 0.0 ? emax / emin
                                 : std::numeric_limits<double>::infinity();
  if (!(cond <= kGramRidgeCondition)) {
    const double ridge =
        1e-10 * gram.trace() / static_cast<double>(gram.rows());
    gram.diagonal().array() += ridge;
    if (ridged) *ridged = true;
    Eigen::SelfAdjointEigenSolver<Matrix> es2(gram);
    if (es2.eigenvalues().minCoeff() <= 0.0 ||
        es2.eigenvalues().maxCoeff() / es2.eigenvalues().minCoeff() >
            kGramSingularCondition)
      throw Error(
          "build_m_matrix: basis Gram matrix H H^T is rank deficient even "
          "after ridging; use a smaller basis dimension r");
  }
  return gram.llt().solve(a.transpose()).transpose();
}

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

double rel_change(const Matrix& next, const Matrix& prev) {
  return max_abs(next - prev) / std::max(1.0, max_abs(prev));
}

}  // namespace

Dataset::Dataset(std::vector<double> responses, std::vector<CountVector> counts,
                 BasisSpec basis_spec)
    : responses_(std::move(responses)),
      counts_(std::move(counts)),
      basis_spec_(std::move(basis_spec)) {
  const std::size_t n = counts_.size();
  if (responses_.size() != n)
    throw Error("Dataset: responses and counts differ in length");
  if (n < 2) throw Error("Dataset: need at least 2 observations");
  const Eigen::Index p = counts_.front().size();
  if (p < 2) throw Error("Dataset: need at least 2 taxa");
  for (const auto& x : counts_) {
    if (x.size() != p)
      throw Error("Dataset: all count vectors must share the same p");
  }
  for (double y : responses_) {
    if (!std::isfinite(y)) throw Error("Dataset: non-finite response");
  }

  basis_offset_ = center_basis(responses_, basis_spec_);
  const Eigen::Index r = basis_offset_.size();
  H_.resize(r, static_cast<Eigen::Index>(n));
  centered_bases_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    centered_bases_.push_back(
        centered_basis(responses_[i], basis_spec_, basis_offset_));
    H_.col(static_cast<Eigen::Index>(i)) = centered_bases_[i].h;
  }
  if (H_.rowwise().sum().cwiseAbs().maxCoeff() > 1e-10)
    throw Error("Dataset: centered bases do not sum to zero");

  const Matrix gram = H_ * H_.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
  const double emax = es.eigenvalues().maxCoeff();
  const double emin = es.eigenvalues().minCoeff();
  gram_condition_ = emin > 0.0 ? emax / emin
                               : std::numeric_limits<double>::infinity();
  if (!(emin > 0.0) || gram_condition_ > kGramSingularCondition)
    throw Error(
        "Dataset: basis Gram matrix H H^T is numerically singular "
        "(condition " +
        std::to_string(gram_condition_) +
        "); the responses do not support this basis - reduce r");

  for (Eigen::Index j = 0; j < p; ++j) {
    bool any = false;
    for (const auto& x : counts_) {
      if (x[j] > 0) {
        any = true;
        break;
      }
    }
    if (!any) all_zero_taxa_.push_back(j);
  }
}

EStepStats EStepStats::from_observed(const std::vector<LatentVector>& w) {
  if (w.empty()) throw Error("EStepStats: no observed latents");
  EStepStats stats;
  stats.chain_means = w;
  stats.chain_second_moments.reserve(w.size());
  Vector grand = Vector::Zero(w.front().size());
  for (const auto& wi : w) {
    stats.chain_second_moments.push_back(wi * wi.transpose());
    grand += wi;
  }
  stats.grand_mean = grand / static_cast<double>(w.size());
  stats.acceptance_rates.assign(w.size(), 1.0);
  return stats;
}

void FitConfig::validate() const {
  if (d < 1) throw Error("FitConfig: d must be >= 1");
  if (max_em_iters < 1) throw Error("FitConfig: max_em_iters must be >= 1");
  if (!(em_tol > 0.0)) throw Error("FitConfig: em_tol must be > 0");
  if (inner_max_iters < 1)
    throw Error("FitConfig: inner_max_iters must be >= 1");
  if (!(inner_tol > 0.0)) throw Error("FitConfig: inner_tol must be > 0");
  if (sigma_jitter < 0.0) throw Error("FitConfig: sigma_jitter must be >= 0");
  mh.validate();
}

EStepStats e_step(const Dataset& data, const ModelParams& theta,
                  const FitConfig& cfg, int em_iter,
                  std::vector<LatentVector>* warm_starts) {
  const std::size_t n = static_cast<std::size_t>(data.n());
  if (warm_starts && warm_starts->size() != n)
    throw Error("e_step: warm start count does not match dataset size");

  EStepStats stats;
  stats.chain_means.resize(n);
  stats.chain_second_moments.resize(n);
  stats.acceptance_rates.resize(n);

  parallel_for(n, cfg.threads, [&](std::size_t i) {
    try {
      MHConfig chain_cfg = cfg.mh;
      chain_cfg.seed = derive_seed(cfg.mh.seed,
                                   static_cast<std::uint64_t>(em_iter),
                                   static_cast<std::uint64_t>(i));
      const LatentVector init =
          warm_starts ? (*warm_starts)[i] : chain_init(data.counts()[i]);
      const LogTarget target = estep_log_target(
          data.counts()[i], data.centered_bases()[i], theta);
      ChainOutput chain = mh_run(target, init, chain_cfg,
                                 /*store_samples=*/false);
      stats.chain_means[i] = std::move(chain.mean);
      stats.chain_second_moments[i] = std::move(chain.second_moment);
      stats.acceptance_rates[i] = chain.acceptance_rate;
      if (warm_starts) (*warm_starts)[i] = std::move(chain.final_state);
    } catch (const Error& e) {
      throw Error("e_step: observation " + std::to_string(i) + ": " +
                  e.what());
    }
  });

  Vector grand = Vector::Zero(theta.mu.size());
  for (const auto& m : stats.chain_means) grand += m;
  stats.grand_mean = grand / static_cast<double>(n);
  return stats;
}

Vector m_step_mu(const EStepStats& stats) {
  if (stats.chain_means.empty()) throw Error("m_step_mu: empty statistics");
  return stats.grand_mean;
}

Matrix build_m_matrix(const EStepStats& stats, const Dataset& data,
                      bool* ridged) {
  const Matrix wc = centered_means(stats);
  const Matrix& h = data.basis_matrix();
  const Matrix a = wc * h.transpose();  // (p-1) x r
  const Matrix coef = solve_against_gram(a, data, ridged);
  return symmetrized(coef * a.transpose());
}

GammaBetaResult m_step_gamma_beta(const Matrix& M, const Matrix& sigma,
                                  const EStepStats& stats, const Dataset& data,
                                  int d) {
  const Eigen::Index pm1 = sigma.rows();
  if (d < 1 || d > std::min<Eigen::Index>(pm1, data.r()))
    throw Error("m_step_gamma_beta: d must satisfy 1 <= d <= min(p-1, r)");
  const SigmaRoots roots = sigma_roots(sigma);
  Eigen::SelfAdjointEigenSolver<Matrix> es(
      symmetrized(roots.inv_half * M * roots.inv_half));
  if (es.info() != Eigen::Success)
    throw Error("m_step_gamma_beta: eigendecomposition failed");

  // Eigen returns ascending order; take the top d, descending.
  Matrix v(pm1, d);
  for (int j = 0; j < d; ++j) v.col(j) = es.eigenvectors().col(pm1 - 1 - j);

  GammaBetaResult out;
  out.eigengap =
      d < pm1 ? es.eigenvalues()[pm1 - d] - es.eigenvalues()[pm1 - 1 - d]
              : std::numeric_limits<double>::infinity();
  out.tie_warning = out.eigengap < kEigengapWarning;

  // Deterministic sign: the largest-magnitude entry of each eigenvector is
  // made positive (ties on magnitude resolved by the lowest index, which
  // Eigen's ordering already fixes).
  for (int j = 0; j < d; ++j) {
    Eigen::Index imax = 0;
    v.col(j).cwiseAbs().maxCoeff(&imax);
    if (v(imax, j) < 0.0) v.col(j) = -v.col(j);
  }

  const Matrix wc = centered_means(stats);
  const Matrix a = wc * data.basis_matrix().transpose();
  const Matrix coef = solve_against_gram(a, data, nullptr);  // Wc H^T (HH^T)^-1

  out.gamma = roots.half * v;
  out.beta = v.transpose() * roots.inv_half * coef;
  return out;
}

Matrix m_step_sigma(const EStepStats& stats, const Vector& mu,
                    const Matrix& gamma, const Matrix& beta,
                    const Dataset& data, double sigma_jitter) {
  const Eigen::Index n = data.n();
  if (static_cast<Eigen::Index>(stats.chain_means.size()) != n)
    throw Error("m_step_sigma: statistics do not match dataset size");
  const Eigen::Index pm1 = mu.size();
  Matrix acc = Matrix::Zero(pm1, pm1);
  const Matrix gb = gamma * beta;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector c = mu + gb * data.centered_bases()[i].h;
    const Vector& wbar = stats.chain_means[i];
    acc += stats.chain_second_moments[i];
    acc -= wbar * c.transpose();
    acc -= c * wbar.transpose();
    acc += c * c.transpose();
  }
  Matrix sigma = symmetrized(acc / static_cast<double>(n));
  Eigen::SelfAdjointEigenSolver<Matrix> es(sigma);
  if (es.eigenvalues().minCoeff() < kSigmaEigenFloor) {
    sigma.diagonal().array() += sigma_jitter;
    Eigen::SelfAdjointEigenSolver<Matrix> es2(sigma);
    if (es2.eigenvalues().minCoeff() <= 0.0)
      throw Error(
          "m_step_sigma: updated covariance is not positive definite even "
          "after jitter");
  }
  return sigma;
}

MStepResult m_step(const EStepStats& stats, const Dataset& data,
                   const Matrix& sigma_init, const FitConfig& cfg) {
  MStepResult out;
  out.theta.mu = m_step_mu(stats);
  const Matrix m = build_m_matrix(stats, data, &out.ridged);

  Matrix sigma = sigma_init;
  Matrix gamma, beta;
  for (int it = 0; it < cfg.inner_max_iters; ++it) {
    GammaBetaResult gb = m_step_gamma_beta(m, sigma, stats, data, cfg.d);
    Matrix sigma_next = m_step_sigma(stats, out.theta.mu, gb.gamma, gb.beta,
                                     data, cfg.sigma_jitter);
    const bool converged =
        it > 0 && rel_change(sigma_next, sigma) < cfg.inner_tol &&
        rel_change(gb.gamma * gb.beta, gamma * beta) < cfg.inner_tol;
    gamma = std::move(gb.gamma);
    beta = std::move(gb.beta);
    sigma = std::move(sigma_next);
    out.inner_iters = it + 1;
    out.eigengap = gb.eigengap;
    out.tie_warning = out.tie_warning || gb.tie_warning;
    if (converged) {
      out.inner_converged = true;
      break;
    }
  }
  // Final half-step against the settled Sigma so the identifiability
  // constraint holds exactly for the returned pair.
  GammaBetaResult gb = m_step_gamma_beta(m, sigma, stats, data, cfg.d);
  out.theta.gamma = std::move(gb.gamma);
  out.theta.beta = std::move(gb.beta);
  out.theta.sigma = std::move(sigma);
  return out;
}

double q_tilde(const EStepStats& stats, const Dataset& data,
               const ModelParams& theta) {
  const Eigen::Index n = data.n();
  GaussianLogDensity density(theta.sigma);
  const Matrix gb = theta.gamma * theta.beta;
  double trace_term = 0.0;
  const auto& llt = density.llt();
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector c = theta.mu + gb * data.centered_bases()[i].h;
    const Vector& wbar = stats.chain_means[i];
    const Matrix r = stats.chain_second_moments[i] - wbar * c.transpose() -
                     c * wbar.transpose() + c * c.transpose();
    trace_term += llt.solve(r).trace();
  }
  double log_det = 0.0;
  for (Eigen::Index j = 0; j < theta.mu.size(); ++j)
    log_det += 2.0 * std::log(llt.matrixLLT()(j, j));
  return -0.5 * static_cast<double>(n) * log_det - 0.5 * trace_term;
}

ModelParams initial_params(const Dataset& data, const FitConfig& cfg,
                           std::vector<LatentVector>* w0_out) {
  const Eigen::Index n = data.n();
  const Eigen::Index pm1 = data.p() - 1;
  std::vector<LatentVector> w0;
  w0.reserve(n);
  for (const auto& x : data.counts()) w0.push_back(chain_init(x));

  EStepStats stats = EStepStats::from_observed(w0);
  Vector mu = stats.grand_mean;
  Matrix cov = Matrix::Zero(pm1, pm1);
  for (const auto& w : w0) {
    const Vector c = w - mu;
    cov += c * c.transpose();
  }
  cov /= static_cast<double>(n);
  cov.diagonal().array() += 1e-6;

  const Matrix m = build_m_matrix(stats, data, nullptr);
  GammaBetaResult gb = m_step_gamma_beta(m, cov, stats, data, cfg.d);

  ModelParams theta;
  theta.mu = std::move(mu);
  theta.gamma = std::move(gb.gamma);
  theta.beta = std::move(gb.beta);
  theta.sigma = std::move(cov);
  if (w0_out) *w0_out = std::move(w0);
  return theta;
}

FitResult fit(const Dataset& data, const FitConfig& cfg) {
  cfg.validate();
  if (cfg.d > std::min<Eigen::Index>(data.p() - 1, data.r()))
    throw Error("fit: d exceeds min(p-1, r)");

  std::vector<LatentVector> warm;
  ModelParams theta = initial_params(data, cfg, &warm);

  FitResult result;
  const int b0 = cfg.mh.n_keep;
  const int b_cap = static_cast<int>(std::lround(kGrowthCap * b0));
  int b_cur = b0;
  std::deque<double> deltas;
  double best_ma = std::numeric_limits<double>::infinity();
  int stall = 0;
  double acceptance_sum = 0.0;

  for (int t = 1; t <= cfg.max_em_iters; ++t) {
    FitConfig iter_cfg = cfg;
    iter_cfg.mh.n_keep = b_cur;
    const EStepStats stats = e_step(data, theta, iter_cfg, t, &warm);

    MStepResult ms = m_step(stats, data, theta.sigma, cfg);
    if (ms.tie_warning)
      result.warnings.push_back("EM iteration " + std::to_string(t) +
                                ": eigenvalue tie, reduction subspace "
                                "ill-determined");

    // Sign-align new Gamma columns with the previous iterate so parameter
    // deltas are not dominated by eigenvector sign flips; flipping a
    // column of Gamma together with the matching row of beta leaves the
    // model unchanged.
    for (Eigen::Index j = 0; j < ms.theta.gamma.cols(); ++j) {
      if (theta.gamma.cols() == ms.theta.gamma.cols() &&
          ms.theta.gamma.col(j).dot(theta.gamma.col(j)) < 0.0) {
        ms.theta.gamma.col(j) = -ms.theta.gamma.col(j);
        ms.theta.beta.row(j) = -ms.theta.beta.row(j);
      }
    }

    const double delta = std::max(
        {rel_change(ms.theta.mu, theta.mu),
         rel_change(ms.theta.gamma, theta.gamma),
         rel_change(ms.theta.beta, theta.beta),
         rel_change(ms.theta.sigma, theta.sigma)});
    theta = std::move(ms.theta);

    EmIterRecord rec;
    rec.iteration = t;
    rec.q_value = q_tilde(stats, data, theta);
    rec.param_delta = delta;
    double acc = 0.0;
    for (double a : stats.acceptance_rates) acc += a;
    rec.mean_acceptance = acc / static_cast<double>(data.n());
    rec.b_used = b_cur;
    rec.constraint_violation = theta.constraint_violation();
    rec.inner_iters = ms.inner_iters;
    result.em_trace.push_back(rec);
    acceptance_sum += rec.mean_acceptance;
    result.max_constraint_violation =
        std::max(result.max_constraint_violation, rec.constraint_violation);
    if (rec.constraint_violation > 1e-8)
      throw Error("fit: identifiability constraint violated at iteration " +
                  std::to_string(t));

    deltas.push_back(delta);
    if (static_cast<int>(deltas.size()) > kMovingAverageWindow)
      deltas.pop_front();
    result.iterations_used = t;
    result.final_delta = delta;

    if (static_cast<int>(deltas.size()) == kMovingAverageWindow) {
      double ma = 0.0;
      for (double d : deltas) ma += d;
      ma /= kMovingAverageWindow;
      if (ma < cfg.em_tol) {
        result.converged = true;
        break;
      }
      // Monte Carlo noise can hold the criterion at a plateau; grow the
      // chain length when no new best appears for a while.
      if (ma < best_ma * (1.0 - 1e-3)) {
        best_ma = ma;
        stall = 0;
      } else if (++stall >= kStallWindow) {
        stall = 0;
        if (b_cur < b_cap)
          b_cur = std::min(
              b_cap, static_cast<int>(std::lround(b_cur * kGrowthFactor)));
      }
    }
  }

  result.mean_acceptance =
      acceptance_sum / static_cast<double>(result.iterations_used);
  result.theta = std::move(theta);
  result.theta.validate();
  return result;
}

}  // namespace pamir
