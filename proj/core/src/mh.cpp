#include "pamir/mh.hpp"

#include "pamir/rng.hpp"

#include <algorithm>
#include <cmath>

namespace pamir {

void MHConfig::validate() const {
  if (burn_in < 0) throw Error("MHConfig: burn_in must be >= 0");
  if (n_keep < 1) throw Error("MHConfig: n_keep must be >= 1");
  if (!(proposal_scale > 0.0))
    throw Error("MHConfig: proposal_scale must be > 0");
  if (thinning < 1) throw Error("MHConfig: thinning must be >= 1");
}

namespace {

// Tuning window for burn-in scale adaptation.
constexpr int kTuneWindow = 50;
constexpr double kTuneLow = 0.2;
constexpr double kTuneHigh = 0.4;
constexpr double kTuneFactor = 1.5;

struct StepResult {
  bool accepted = false;
  bool nonfinite = false;
};

StepResult mh_step(const LogTarget& log_target, LatentVector& w, double& logp,
                   double scale, std::mt19937_64& rng, LatentVector& proposal,
                   std::normal_distribution<double>& normal,
                   std::uniform_real_distribution<double>& unif) {
  for (Eigen::Index j = 0; j < w.size(); ++j)
    proposal[j] = w[j] + scale * normal(rng);
  const double logp_prop = log_target(proposal);
  const double u = unif(rng);
  StepResult res;
  if (std::isnan(logp_prop)) {
    res.nonfinite = true;
    return res;
  }
  // kappa >= u in log space; u == 0 always accepts since kappa >= 0.
  if (u <= 0.0 || logp_prop - logp >= std::log(u)) {
    w.swap(proposal);
    logp = logp_prop;
    res.accepted = true;
  }
  return res;
}

}  // namespace

ChainOutput mh_run(const LogTarget& log_target, const LatentVector& init,
                   const MHConfig& cfg, bool store_samples) {
  cfg.validate();
  if (!all_finite(init)) throw Error("mh_run: non-finite initial state");
  double logp = log_target(init);
  if (!std::isfinite(logp))
    throw Error("mh_run: log target is not finite at the initial state");

  const Eigen::Index dim = init.size();
  std::mt19937_64 rng = seeded_engine(cfg.seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  LatentVector w = init;
  LatentVector proposal(dim);
  double scale = cfg.proposal_scale;

  ChainOutput out;
  int window_accepts = 0;
  int window_steps = 0;
  for (int it = 0; it < cfg.burn_in; ++it) {
    const StepResult res =
        mh_step(log_target, w, logp, scale, rng, proposal, normal, unif);
    out.nonfinite_proposals += res.nonfinite ? 1 : 0;
    if (cfg.auto_tune) {
      window_accepts += res.accepted ? 1 : 0;
      if (++window_steps == kTuneWindow) {
        const double rate =
            static_cast<double>(window_accepts) / kTuneWindow;
        if (rate > kTuneHigh)
          scale *= kTuneFactor;
        else if (rate < kTuneLow)
          scale /= kTuneFactor;
        window_accepts = 0;
        window_steps = 0;
      }
    }
  }

  const long total_steps = static_cast<long>(cfg.n_keep) * cfg.thinning;
  long accepts = 0;
  Vector mean = Vector::Zero(dim);
  Matrix second = Matrix::Zero(dim, dim);
  if (store_samples) out.samples.reserve(cfg.n_keep);
  for (long it = 0; it < total_steps; ++it) {
    const StepResult res =
        mh_step(log_target, w, logp, scale, rng, proposal, normal, unif);
    out.nonfinite_proposals += res.nonfinite ? 1 : 0;
    accepts += res.accepted ? 1 : 0;
    if ((it + 1) % cfg.thinning == 0) {
      mean += w;
      second.selfadjointView<Eigen::Lower>().rankUpdate(w);
      if (store_samples) out.samples.push_back(w);
    }
  }
  mean /= static_cast<double>(cfg.n_keep);
  second /= static_cast<double>(cfg.n_keep);
  out.mean = std::move(mean);
  out.second_moment = second.selfadjointView<Eigen::Lower>();
  out.acceptance_rate =
      static_cast<double>(accepts) / static_cast<double>(total_steps);
  out.tuned_scale = scale;
  out.final_state = std::move(w);
  return out;
}

double count_loglik_term(const CountVector& x, const LatentVector& w) {
  // sum_{j<p} x_j w_j - m log(sum_{j<p} exp(w_j) + 1), the latter
  // evaluated as log-sum-exp over (w, 0).
  const Eigen::Index pm1 = w.size();
  double dot = 0.0;
  for (Eigen::Index j = 0; j < pm1; ++j)
    dot += static_cast<double>(x[j]) * w[j];
  const double shift = std::max(0.0, w.maxCoeff());
  double sum = std::exp(-shift);
  for (Eigen::Index j = 0; j < pm1; ++j) sum += std::exp(w[j] - shift);
  const double lse = shift + std::log(sum);
  return dot - static_cast<double>(x.library_size()) * lse;
}

LogTarget estep_log_target(const CountVector& x, const BasisVector& h,
                           const ModelParams& theta) {
  if (x.size() != theta.p())
    throw Error("estep_log_target: count dimension does not match theta");
  GaussianLogDensity density(theta.sigma);
  Vector mean = theta.mu + theta.gamma * (theta.beta * h.h);
  return [x, density = std::move(density),
          mean = std::move(mean)](const LatentVector& w) {
    return count_loglik_term(x, w) + density.log_normalizer() -
           density.half_quadratic(w - mean);
  };
}

LogTarget prediction_log_target(const CountVector& x_new,
                                const std::vector<BasisVector>& training_bases,
                                const ModelParams& theta) {
  if (training_bases.empty())
    throw Error("prediction_log_target: no training bases");
  if (x_new.size() != theta.p())
    throw Error("prediction_log_target: count dimension does not match theta");
  GaussianLogDensity density(theta.sigma);
  const Eigen::Index pm1 = theta.mu.size();
  const Eigen::Index n = static_cast<Eigen::Index>(training_bases.size());
  // Whitened component means: L^-1 (mu + G b h_y) stacked columnwise, so a
  // target evaluation needs one triangular solve plus column distances.
  Matrix whitened_means(pm1, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    whitened_means.col(i) = density.llt().matrixL().solve(
        theta.mu + theta.gamma * (theta.beta * training_bases[i].h));
  }
  const double log_norm = density.log_normalizer();
  auto llt = density.llt();
  return [x_new, whitened_means = std::move(whitened_means), llt, log_norm](
             const LatentVector& w) {
    const Vector z = llt.matrixL().solve(w);
    Vector sq =
        (whitened_means.colwise() - z).colwise().squaredNorm().transpose();
    // Canonical summation order makes the mixture term exactly invariant
    // to permutations of the training set.
    std::sort(sq.data(), sq.data() + sq.size());
    const double qmin = sq[0];
    double sum = 0.0;
    for (Eigen::Index i = sq.size() - 1; i >= 0; --i)
      sum += std::exp(-0.5 * (sq[i] - qmin));
    return count_loglik_term(x_new, w) + log_norm - 0.5 * qmin +
           std::log(sum);
  };
}

LatentVector chain_init(const CountVector& x) {
  const Eigen::Index p = x.size();
  Vector prop(p);
  for (Eigen::Index j = 0; j < p; ++j)
    prop[j] = static_cast<double>(x[j]) + 0.5;
  prop /= prop.sum();
  prop /= prop.sum();
  return alr(Composition(std::move(prop)));
}

}  // namespace pamir
