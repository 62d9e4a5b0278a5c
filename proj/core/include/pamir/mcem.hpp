// Monte Carlo EM: per-observation MH chains in the E-step reduced to
// sufficient statistics {wbar_y, S_y}, and the M-step's closed-form mu
// update, alternating (Gamma, beta) eigen-update and Sigma update.
#pragma once

#include "pamir/mh.hpp"
#include "pamir/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace pamir {

class Dataset {
 public:
  Dataset(std::vector<double> responses, std::vector<CountVector> counts,
          BasisSpec basis_spec);

  Eigen::Index n() const { return static_cast<Eigen::Index>(counts_.size()); }
  Eigen::Index p() const { return counts_.front().size(); }
  Eigen::Index r() const { return basis_offset_.size(); }

  const std::vector<double>& responses() const { return responses_; }
  const std::vector<CountVector>& counts() const { return counts_; }
  const BasisSpec& basis_spec() const { return basis_spec_; }
  const std::vector<BasisVector>& centered_bases() const {
    return centered_bases_;
  }
  const Vector& basis_offset() const { return basis_offset_; }

  // r x n matrix H of centered basis vectors.
  const Matrix& basis_matrix() const { return H_; }

  // Condition number of H H^T, reported for preflight diagnostics.
  double gram_condition() const { return gram_condition_; }

  // Taxa with zero count in every sample; identifiability of the matching
  // Gamma rows is weak, surfaced as a warning and left in place.
  const std::vector<Eigen::Index>& all_zero_taxa() const {
    return all_zero_taxa_;
  }

 private:
  std::vector<double> responses_;
  std::vector<CountVector> counts_;
  BasisSpec basis_spec_;
  std::vector<BasisVector> centered_bases_;
  Vector basis_offset_;
  Matrix H_;
  double gram_condition_;
  std::vector<Eigen::Index> all_zero_taxa_;
};

struct EStepStats {
  std::vector<LatentVector> chain_means;       // wbar_y
  std::vector<Matrix> chain_second_moments;    // S_y = (1/B) sum_b w w^T
  LatentVector grand_mean;                     // wbar
  std::vector<double> acceptance_rates;

  // Degenerate statistics for directly observed latents (B = 1 point-mass
  // chains); used by the noiseless-recovery checks.
  static EStepStats from_observed(const std::vector<LatentVector>& w);
};

struct FitConfig {
  int d = 1;
  int max_em_iters = 100;
  double em_tol = 1e-3;      // on the 3-iteration moving average of deltas
  int inner_max_iters = 50;  // (Gamma,beta) / Sigma alternation
  double inner_tol = 1e-8;
  MHConfig mh;
  double sigma_jitter = 1e-8;
  std::uint64_t seed = 0;
  int threads = 1;  // 0 = hardware concurrency

  void validate() const;
};

struct EmIterRecord {
  int iteration = 0;
  double q_value = 0.0;
  double param_delta = 0.0;
  double mean_acceptance = 0.0;
  int b_used = 0;
  double constraint_violation = 0.0;
  int inner_iters = 0;
};

struct FitResult {
  ModelParams theta;
  std::vector<EmIterRecord> em_trace;
  bool converged = false;
  int iterations_used = 0;
  double final_delta = 0.0;
  double mean_acceptance = 0.0;
  double max_constraint_violation = 0.0;
  std::vector<std::string> warnings;
};

// Runs one MH chain per observation against estep_log_target, warm-started
// from warm_starts when given (updated in place with the final states).
// Chain seeds derive from (cfg.seed, em_iter, observation index).
EStepStats e_step(const Dataset& data, const ModelParams& theta,
                  const FitConfig& cfg, int em_iter = 0,
                  std::vector<LatentVector>* warm_starts = nullptr);

// mu update: exactly the grand mean of the chain means.
Vector m_step_mu(const EStepStats& stats);

// M = Wc H^T (H H^T)^-1 H Wc^T with Wc the centered chain means; solved
// against H H^T, with a ridge fallback when its condition exceeds 1e12.
Matrix build_m_matrix(const EStepStats& stats, const Dataset& data,
                      bool* ridged = nullptr);

struct GammaBetaResult {
  Matrix gamma;
  Matrix beta;
  double eigengap = 0.0;  // lambda_d - lambda_{d+1} of Sigma^-1/2 M Sigma^-1/2
  bool tie_warning = false;
};

// Eigen-update: Gamma = Sigma^1/2 V with V the top-d eigenvectors of
// Sigma^-1/2 M Sigma^-1/2; beta = V^T Sigma^-1/2 Wc H^T (H H^T)^-1. The
// result satisfies Gamma^T Sigma^-1 Gamma = I_d by construction.
GammaBetaResult m_step_gamma_beta(const Matrix& M, const Matrix& sigma,
                                  const EStepStats& stats, const Dataset& data,
                                  int d);

// Sigma update in second-moment form; adds sigma_jitter * I when the
// minimum eigenvalue falls below 1e-10.
Matrix m_step_sigma(const EStepStats& stats, const Vector& mu,
                    const Matrix& gamma, const Matrix& beta,
                    const Dataset& data, double sigma_jitter = 0.0);

struct MStepResult {
  ModelParams theta;
  int inner_iters = 0;
  bool inner_converged = false;
  bool ridged = false;
  double eigengap = 0.0;
  bool tie_warning = false;
};

// Full M-step: mu, then the (Gamma,beta)/Sigma alternation from sigma_init
// until inner_tol, ending on a (Gamma,beta) half-step so the constraint
// holds exactly against the returned Sigma.
MStepResult m_step(const EStepStats& stats, const Dataset& data,
                   const Matrix& sigma_init, const FitConfig& cfg);

// Sample-average expected complete-data log-likelihood (constants
// dropped): -(n/2) log det Sigma - (1/2) sum_y tr(Sigma^-1 R_y).
double q_tilde(const EStepStats& stats, const Dataset& data,
               const ModelParams& theta);

// Initial parameters from pseudo-count ALR proportions.
ModelParams initial_params(const Dataset& data, const FitConfig& cfg,
                           std::vector<LatentVector>* w0_out = nullptr);

FitResult fit(const Dataset& data, const FitConfig& cfg);

}  // namespace pamir
