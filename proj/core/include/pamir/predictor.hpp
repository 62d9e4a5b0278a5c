// Two-stage prediction: sample W given a new count vector, reduce through
// U = Gamma^T Sigma^-1 W, and average the kernel-weighted response
// estimator over the chain. Includes the binary cutoff classifier.
#pragma once

#include "pamir/mcem.hpp"
#include "pamir/mh.hpp"
#include "pamir/types.hpp"

#include <vector>

namespace pamir {

class PredictorState {
 public:
  PredictorState(ModelParams theta, std::vector<double> training_responses,
                 std::vector<BasisVector> training_bases, Vector basis_offset);

  static PredictorState from_fit(const ModelParams& theta,
                                 const Dataset& data);

  const ModelParams& theta() const { return theta_; }
  const std::vector<double>& training_responses() const {
    return training_responses_;
  }
  const std::vector<BasisVector>& training_bases() const {
    return training_bases_;
  }
  const Vector& basis_offset() const { return basis_offset_; }

  // d x (p-1) reduction matrix Gamma^T Sigma^-1.
  const Matrix& reduction() const { return reduction_; }

  // d x n kernel means Gamma^T Sigma^-1 mu + beta h_y.
  const Matrix& kernel_means() const { return kernel_means_; }

  double min_response() const { return min_response_; }
  double max_response() const { return max_response_; }

 private:
  ModelParams theta_;
  std::vector<double> training_responses_;
  std::vector<BasisVector> training_bases_;
  Vector basis_offset_;
  Matrix reduction_;
  Matrix kernel_means_;
  double min_response_;
  double max_response_;
};

struct PredictDiagnostics {
  int underflow_fallbacks = 0;
  double acceptance_rate = 0.0;
};

// Kernel-weighted average of training responses; the Gaussian kernel in
// U-space has identity covariance because Gamma^T Sigma^-1 Gamma = I_d.
double conditional_mean_given_u(const ReducedVector& u,
                                const PredictorState& state,
                                PredictDiagnostics* diag = nullptr);

// Samples the mixture posterior of W given x_new, reduces each kept sample
// to U-space, and averages the conditional-mean estimates. Deterministic
// given cfg.seed.
double predict(const CountVector& x_new, const PredictorState& state,
               const MHConfig& cfg, PredictDiagnostics* diag = nullptr);

// 1 iff predict(...) > cutoff (strict). Training responses must be binary.
int classify(const CountVector& x_new, const PredictorState& state,
             double cutoff, const MHConfig& cfg,
             PredictDiagnostics* diag = nullptr);

}  // namespace pamir
