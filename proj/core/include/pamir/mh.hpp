// Random-walk Metropolis-Hastings over the latent ALR coordinates, with
// the two log-targets used by the fitter (per-observation posterior) and
// the predictor (mixture posterior for a new count vector).
#pragma once

#include "pamir/compositional.hpp"
#include "pamir/types.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace pamir {

using LogTarget = std::function<double(const LatentVector&)>;

struct MHConfig {
  int burn_in = 500;
  int n_keep = 200;  // B, samples retained after thinning
  double proposal_scale = 1.0;
  std::uint64_t seed = 0;
  int thinning = 1;
  // Scale adaptation happens only during burn-in (targets 20-40%
  // acceptance), so the kept chain is a valid MH chain.
  bool auto_tune = true;

  void validate() const;
};

struct ChainOutput {
  std::vector<LatentVector> samples;  // length n_keep
  LatentVector mean;                  // arithmetic average of samples
  Matrix second_moment;               // (1/B) sum_b w_b w_b^T
  double acceptance_rate = 0.0;       // over the post-burn-in phase
  int nonfinite_proposals = 0;        // rejected because the target was NaN
  double tuned_scale = 1.0;           // proposal scale after burn-in
  LatentVector final_state;           // warm-start handle for the next run
};

// Proposal w* ~ N(w, scale^2 I); accept iff the acceptance ratio
// kappa = min{1, target ratio} is >= u, u ~ Uniform[0,1]. Deterministic
// given (seed, config, target). store_samples=false drops the raw chain
// and keeps only the summary statistics.
ChainOutput mh_run(const LogTarget& log_target, const LatentVector& init,
                   const MHConfig& cfg, bool store_samples = true);

// E-step target: log f(w | x) up to a constant, i.e.
//   sum_{j<p} x_j w_j - m log(sum_{j<p} exp(w_j) + 1) + log N(w; mu+Gbh, Sigma)
LogTarget estep_log_target(const CountVector& x, const BasisVector& h,
                           const ModelParams& theta);

// Prediction-time target: the same count likelihood plus the log of the
// empirical mixture of latent priors over the training responses.
LogTarget prediction_log_target(const CountVector& x_new,
                                const std::vector<BasisVector>& training_bases,
                                const ModelParams& theta);

// Count log-likelihood term shared by both targets (normalizing constant
// dropped); exposed for tests.
double count_loglik_term(const CountVector& x, const LatentVector& w);

// Chain starting point: ALR of the pseudo-count proportions
// (x + 0.5) / sum(x + 0.5). The pseudo-count is used only here, never in
// the likelihood.
LatentVector chain_init(const CountVector& x);

}  // namespace pamir
