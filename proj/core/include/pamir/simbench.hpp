// Synthetic data generation, evaluation metrics, the benchmark drivers
// (estimation/prediction grid, basis mis-specification sweep, binary
// classification with cutoff sweep), and the logistic-regression baseline.
#pragma once

#include "pamir/mcem.hpp"
#include "pamir/predictor.hpp"
#include "pamir/types.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace pamir {

struct LibrarySizeLaw {
  enum class Kind { Fixed, Uniform };
  Kind kind = Kind::Fixed;
  std::int64_t m = 1000;
  std::int64_t m_lo = 0;
  std::int64_t m_hi = 0;

  static LibrarySizeLaw fixed(std::int64_t m);
  static LibrarySizeLaw uniform(std::int64_t lo, std::int64_t hi);
  std::int64_t draw(std::mt19937_64& rng) const;
};

// v_y in the generator W = Gamma v_y + xi.
struct VFunction {
  enum class Kind { Linear, AbsMix };
  Kind kind = Kind::Linear;
  double a = 10.0;
  double c = 0.0;

  static VFunction linear(double a);
  static VFunction abs_mix(double a, double c);
  double operator()(double y) const;
};

struct SimSpec {
  int n = 100;
  int p = 5;
  int d = 1;
  Vector gamma_true;  // (p-1)-vector
  VFunction v_fn = VFunction::linear(10.0);
  Matrix sigma_true;  // (p-1) x (p-1)
  LibrarySizeLaw library_size_law = LibrarySizeLaw::fixed(1000);
  int n_test = 50;
  std::uint64_t seed = 0;
  BasisSpec fit_basis = BasisSpec::polynomial(3);

  // Paper-style defaults: gamma = (1,1,-1,-1,0,...)/2, sigma = I.
  static SimSpec defaults(int n, int p);
  void validate() const;
};

// Everything the generator knew: recorded latents and compositions for
// measure-consistency checks.
struct GeneratorRecord {
  std::vector<double> y;
  Matrix w;  // (p-1) x n
  Matrix z;  // p x n
  std::vector<std::int64_t> library_sizes;
};

struct SimData {
  Dataset train;
  Dataset test;
  GeneratorRecord train_truth;
  GeneratorRecord test_truth;
  Vector gamma_true;
  std::optional<std::string> warning;
};

SimData generate(const SimSpec& spec);

// Euclidean distance between subspace bases: sign-aligned for d = 1,
// minimized over right rotations (orthogonal Procrustes) for d > 1.
double gamma_distance(const Matrix& gamma_hat, const Matrix& gamma_true);

// Mean squared prediction error.
double perr(const std::vector<double>& predictions,
            const std::vector<double>& truths);

struct RepRecord {
  int n = 0;
  int p = 0;
  int rep = 0;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  double gamma_dist = 0.0;
  double perr = 0.0;
  bool converged = false;
  int iterations = 0;
  double mean_acceptance = 0.0;
  double max_constraint_violation = 0.0;
};

struct CellSummary {
  int n = 0;
  int p = 0;
  int successes = 0;
  int failures = 0;
  double dist_mean = 0.0;
  double dist_sd = 0.0;  // NaN when undefined (fewer than 2 successes)
  double perr_mean = 0.0;
  double perr_sd = 0.0;
};

struct Table1Report {
  std::vector<std::pair<int, int>> cells;
  std::vector<RepRecord> replications;
  std::vector<CellSummary> summaries;
  double max_constraint_violation = 0.0;
};

Table1Report run_table1(int reps, const std::vector<std::pair<int, int>>& cells,
                        const FitConfig& fit_cfg, const MHConfig& predict_cfg,
                        std::uint64_t seed, int threads = 1, int n_test = 50,
                        LibrarySizeLaw lib = LibrarySizeLaw::fixed(1000));

struct MisspecRecord {
  double c = 0.0;
  int rep = 0;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  double perr = 0.0;
};

struct MisspecReport {
  std::vector<double> c_values;
  std::vector<MisspecRecord> replications;
  std::vector<double> medians;  // per c, over successful replications
  double max_constraint_violation = 0.0;
};

// Generator v_y = a (y + c |y|) fitted with the (now mis-specified) cubic
// polynomial basis.
MisspecReport run_misspec(int reps, const std::vector<double>& c_values,
                          const FitConfig& fit_cfg, const MHConfig& predict_cfg,
                          std::uint64_t seed, int threads = 1, int n = 100,
                          int p = 5, double a = 10.0, int n_test = 50,
                          LibrarySizeLaw lib = LibrarySizeLaw::fixed(1000));

// Two classes with different U-space means and a quadratic within-class
// dispersion along a secondary direction.
struct BinarySimSpec {
  int n = 33;
  double class1_frac = 2.0 / 3.0;
  int p = 5;
  double separation = 3.0;
  double quad_strength = 1.0;
  Matrix sigma_true;  // default I
  LibrarySizeLaw library_size_law = LibrarySizeLaw::fixed(1000);
  std::uint64_t seed = 0;

  void validate() const;
};

struct BinaryLabeledData {
  std::vector<double> labels;  // all 0/1
  std::vector<CountVector> counts;
};

BinaryLabeledData generate_binary(const BinarySimSpec& spec);

struct BinarySplitRecord {
  int rep = 0;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  std::vector<double> pamir_error;     // per cutoff
  std::vector<double> logistic_error;  // per cutoff
  double majority_error = 0.0;
  bool logistic_ridged = false;
  double max_constraint_violation = 0.0;
};

struct BinaryReport {
  std::vector<double> cutoffs;
  std::vector<BinarySplitRecord> splits;
  std::vector<double> pamir_mean_error;     // per cutoff
  std::vector<double> logistic_mean_error;  // per cutoff
  double majority_mean_error = 0.0;
  int failures = 0;
  double max_constraint_violation = 0.0;
};

// Stratified 2/3-1/3 splits of a labeled count table; fits PAMIR (degree-1
// basis by default, binary responses carry no higher-order signal) and the
// logistic baseline on ALR proportions per split.
BinaryReport run_binary_benchmark(const BinaryLabeledData& data, int reps,
                                  const std::vector<double>& cutoffs,
                                  const FitConfig& fit_cfg,
                                  const MHConfig& predict_cfg,
                                  std::uint64_t seed, int threads = 1,
                                  BasisSpec fit_basis = BasisSpec::polynomial(1));

BinaryReport run_binary_benchmark(const BinarySimSpec& spec, int reps,
                                  const std::vector<double>& cutoffs,
                                  const FitConfig& fit_cfg,
                                  const MHConfig& predict_cfg,
                                  std::uint64_t seed, int threads = 1);

struct LogisticModel {
  Vector weights;  // intercept first
  bool converged = false;
  bool ridged = false;
};

// Maximum-likelihood logistic regression by iteratively reweighted least
// squares; falls back to a ridge (1e-6) refit when the unpenalized
// iteration diverges (separation).
LogisticModel logistic_baseline_fit(const std::vector<Vector>& features,
                                    const std::vector<int>& labels,
                                    int max_iters = 100, double tol = 1e-8,
                                    double ridge = 1e-6);

double logistic_baseline_predict(const LogisticModel& model,
                                 const Vector& feature);

// ALR of (x + 0.5) pseudo-count proportions, the baseline's feature map.
Vector logistic_feature(const CountVector& x);

// --- report emission -----------------------------------------------------

void write_table1_csv(const Table1Report& report, const std::string& path);
void write_table1_cells_csv(const Table1Report& report,
                            const std::string& path);
void write_table1_summary_json(const Table1Report& report,
                               const std::string& path);
std::string format_table1_grid(const Table1Report& report);

void write_misspec_csv(const MisspecReport& report, const std::string& path);
void write_misspec_summary_json(const MisspecReport& report,
                                const std::string& path);
std::string format_misspec_summary(const MisspecReport& report);

void write_binary_csv(const BinaryReport& report, const std::string& path);
void write_binary_cutoffs_csv(const BinaryReport& report,
                              const std::string& path);
void write_binary_summary_json(const BinaryReport& report,
                               const std::string& path);
std::string format_binary_table(const BinaryReport& report);

}  // namespace pamir
