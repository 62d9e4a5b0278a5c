#include "pamir/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pamir {

PredictorState::PredictorState(ModelParams theta,
                               std::vector<double> training_responses,
                               std::vector<BasisVector> training_bases,
                               Vector basis_offset)
    : theta_(std::move(theta)),
      training_responses_(std::move(training_responses)),
      training_bases_(std::move(training_bases)),
      basis_offset_(std::move(basis_offset)) {
  theta_.validate();
  const std::size_t n = training_responses_.size();
  if (n == 0) throw Error("PredictorState: no training responses");
  if (training_bases_.size() != n)
    throw Error("PredictorState: responses and bases differ in length");
  for (const auto& b : training_bases_) {
    if (b.h.size() != theta_.r())
      throw Error("PredictorState: basis dimension does not match theta");
  }

  reduction_ = theta_.gamma.transpose() *
               theta_.sigma.llt().solve(Matrix::Identity(
                   theta_.mu.size(), theta_.mu.size()));
  const Vector u_mu = reduction_ * theta_.mu;
  kernel_means_.resize(theta_.d(), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    kernel_means_.col(static_cast<Eigen::Index>(i)) =
        u_mu + theta_.beta * training_bases_[i].h;

  auto [mn, mx] = std::minmax_element(training_responses_.begin(),
                                      training_responses_.end());
  min_response_ = *mn;
  max_response_ = *mx;
}

PredictorState PredictorState::from_fit(const ModelParams& theta,
                                        const Dataset& data) {
  return PredictorState(theta, data.responses(), data.centered_bases(),
                        data.basis_offset());
}

double conditional_mean_given_u(const ReducedVector& u,
                                const PredictorState& state,
                                PredictDiagnostics* diag) {
  const Matrix& means = state.kernel_means();
  if (u.size() != means.rows())
    throw Error("conditional_mean_given_u: dimension mismatch");
  const Vector sq =
      (means.colwise() - u).colwise().squaredNorm().transpose();
  Eigen::Index nearest = 0;
  const double qmin = sq.minCoeff(&nearest);
  if (!std::isfinite(qmin)) {
    // All kernel weights underflowed; fall back to the nearest mean by
    // index and record the event so extrapolation is detectable.
    if (diag) ++diag->underflow_fallbacks;
    return state.training_responses()[static_cast<std::size_t>(nearest)];
  }
  // Accumulate in canonical (distance, response) order so the estimate is
  // exactly invariant to permutations of the training set.
  std::vector<std::pair<double, double>> terms(
      static_cast<std::size_t>(sq.size()));
  for (Eigen::Index i = 0; i < sq.size(); ++i)
    terms[static_cast<std::size_t>(i)] = {
        sq[i], state.training_responses()[static_cast<std::size_t>(i)]};
  std::sort(terms.begin(), terms.end());
  double wsum = 0.0;
  double ysum = 0.0;
  for (auto it = terms.rbegin(); it != terms.rend(); ++it) {
    const double wt = std::exp(-0.5 * (it->first - qmin));
    wsum += wt;
    ysum += wt * it->second;
  }
  return ysum / wsum;
}

double predict(const CountVector& x_new, const PredictorState& state,
               const MHConfig& cfg, PredictDiagnostics* diag) {
  if (x_new.size() != state.theta().p())
    throw Error("predict: count vector has wrong number of taxa");
  const LogTarget target =
      prediction_log_target(x_new, state.training_bases(), state.theta());
  const ChainOutput chain = mh_run(target, chain_init(x_new), cfg);
  if (diag) diag->acceptance_rate = chain.acceptance_rate;
  double acc = 0.0;
  for (const auto& w : chain.samples)
    acc += conditional_mean_given_u(state.reduction() * w, state, diag);
  return acc / static_cast<double>(chain.samples.size());
}

int classify(const CountVector& x_new, const PredictorState& state,
             double cutoff, const MHConfig& cfg, PredictDiagnostics* diag) {
  for (double y : state.training_responses()) {
    if (y != 0.0 && y != 1.0)
      throw Error("classify: training responses must be binary {0, 1}");
  }
  if (!(cutoff > 0.0 && cutoff < 1.0))
    throw Error("classify: cutoff must lie in (0, 1)");
  return predict(x_new, state, cfg, diag) > cutoff ? 1 : 0;
}

}  // namespace pamir
