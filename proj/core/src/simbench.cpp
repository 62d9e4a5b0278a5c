#include "pamir/simbench.hpp"

#include "pamir/compositional.hpp"
#include "pamir/parallel.hpp"
#include "pamir/rng.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace pamir {

namespace {

using json = nlohmann::ordered_json;

std::string full_precision(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fixed3(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open output file: " + path);
  return out;
}

void write_json_file(const json& doc, const std::string& path) {
  auto out = open_out(path);
  out << doc.dump(2) << "\n";
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double median_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size() / 2;
  return v.size() % 2 == 1 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

// Paper-style leading subspace directions for the generators.
Vector primary_direction(int pm1) {
  Vector g = Vector::Zero(pm1);
  const int k = std::min(pm1, 4);
  for (int j = 0; j < k; ++j) g[j] = (j < 2) ? 0.5 : -0.5;
  g /= g.norm();
  return g;
}

Vector secondary_direction(int pm1, const Vector& primary) {
  if (pm1 < 2) return Vector::Zero(pm1);
  Vector g(pm1);
  for (int j = 0; j < pm1; ++j) g[j] = (j % 2 == 0) ? 1.0 : -1.0;
  g -= g.dot(primary) * primary;
  const double norm = g.norm();
  if (norm < 1e-12) return Vector::Zero(pm1);
  return g / norm;
}

}  // namespace

LibrarySizeLaw LibrarySizeLaw::fixed(std::int64_t m) {
  if (m < 1) throw Error("LibrarySizeLaw: fixed m must be >= 1");
  LibrarySizeLaw law;
  law.kind = Kind::Fixed;
  law.m = m;
  return law;
}

LibrarySizeLaw LibrarySizeLaw::uniform(std::int64_t lo, std::int64_t hi) {
  if (lo < 1 || hi < lo)
    throw Error("LibrarySizeLaw: need 1 <= lo <= hi");
  LibrarySizeLaw law;
  law.kind = Kind::Uniform;
  law.m_lo = lo;
  law.m_hi = hi;
  return law;
}

std::int64_t LibrarySizeLaw::draw(std::mt19937_64& rng) const {
  if (kind == Kind::Fixed) return m;
  std::uniform_int_distribution<std::int64_t> dist(m_lo, m_hi);
  return dist(rng);
}

VFunction VFunction::linear(double a) {
  VFunction f;
  f.kind = Kind::Linear;
  f.a = a;
  return f;
}

VFunction VFunction::abs_mix(double a, double c) {
  VFunction f;
  f.kind = Kind::AbsMix;
  f.a = a;
  f.c = c;
  return f;
}

double VFunction::operator()(double y) const {
  return kind == Kind::Linear ? a * y : a * (y + c * std::abs(y));
}

SimSpec SimSpec::defaults(int n, int p) {
  if (p < 5)
    throw Error("SimSpec::defaults: the paper-style gamma needs p >= 5");
  SimSpec spec;
  spec.n = n;
  spec.p = p;
  spec.gamma_true = primary_direction(p - 1);
  spec.sigma_true = Matrix::Identity(p - 1, p - 1);
  return spec;
}

void SimSpec::validate() const {
  if (n < 2) throw Error("SimSpec: n must be >= 2");
  if (n_test < 2) throw Error("SimSpec: n_test must be >= 2");
  if (p < 2) throw Error("SimSpec: p must be >= 2");
  if (d != 1) throw Error("SimSpec: the generator uses d = 1");
  if (gamma_true.size() != p - 1)
    throw Error("SimSpec: gamma_true must have length p-1");
  if (sigma_true.rows() != p - 1 || sigma_true.cols() != p - 1)
    throw Error("SimSpec: sigma_true must be (p-1) x (p-1)");
}

SimData generate(const SimSpec& spec) {
  spec.validate();
  std::mt19937_64 rng = seeded_engine(spec.seed);
  std::normal_distribution<double> normal;

  Eigen::LLT<Matrix> llt(spec.sigma_true);
  if (llt.info() != Eigen::Success)
    throw Error("generate: sigma_true is not positive definite");

  const int pm1 = spec.p - 1;
  auto make_block = [&](int count) {
    GeneratorRecord rec;
    rec.y.resize(count);
    rec.w.resize(pm1, count);
    rec.z.resize(spec.p, count);
    rec.library_sizes.resize(count);
    std::vector<CountVector> counts;
    counts.reserve(count);
    for (int i = 0; i < count; ++i) {
      const double y = normal(rng);
      rec.y[i] = y;
      Vector xi(pm1);
      for (int j = 0; j < pm1; ++j) xi[j] = normal(rng);
      const Vector w = spec.gamma_true * spec.v_fn(y) + llt.matrixL() * xi;
      rec.w.col(i) = w;
      const Composition z = alr_inv(w);
      rec.z.col(i) = z.probs();
      const std::int64_t m = spec.library_size_law.draw(rng);
      rec.library_sizes[i] = m;
      counts.emplace_back(multinomial_draw(rng, m, z));
    }
    return std::pair{std::move(rec), std::move(counts)};
  };

  auto [train_truth, train_counts] = make_block(spec.n);
  auto [test_truth, test_counts] = make_block(spec.n_test);

  SimData data{
      Dataset(train_truth.y, std::move(train_counts), spec.fit_basis),
      Dataset(test_truth.y, std::move(test_counts), spec.fit_basis),
      std::move(train_truth),
      std::move(test_truth),
      spec.gamma_true,
      std::nullopt};

  const double cviol = std::abs(
      (spec.gamma_true.transpose() * llt.solve(spec.gamma_true))(0) - 1.0);
  if (cviol > 1e-8)
    data.warning = "gamma_true does not satisfy the unit constraint under "
                   "sigma_true (deviation " +
                   std::to_string(cviol) + ")";
  return data;
}

double gamma_distance(const Matrix& gamma_hat, const Matrix& gamma_true) {
  if (gamma_hat.rows() != gamma_true.rows() ||
      gamma_hat.cols() != gamma_true.cols())
    throw Error("gamma_distance: shape mismatch");
  if (gamma_hat.cols() == 1) {
    const double plus = (gamma_hat - gamma_true).norm();
    const double minus = (gamma_hat + gamma_true).norm();
    return std::min(plus, minus);
  }
  // Orthogonal Procrustes: align gamma_hat by the rotation from the SVD of
  // gamma_hat^T gamma_true.
  Eigen::JacobiSVD<Matrix> svd(gamma_hat.transpose() * gamma_true,
                               Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Matrix rot = svd.matrixU() * svd.matrixV().transpose();
  return (gamma_hat * rot - gamma_true).norm();
}

double perr(const std::vector<double>& predictions,
            const std::vector<double>& truths) {
  if (predictions.size() != truths.size() || predictions.empty())
    throw Error("perr: prediction/truth length mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < predictions.size(); ++k) {
    const double d = predictions[k] - truths[k];
    s += d * d;
  }
  return s / static_cast<double>(predictions.size());
}

namespace {

RepRecord run_one_replication(const SimSpec& spec, int rep,
                              std::uint64_t rep_seed, const FitConfig& fit_cfg,
                              const MHConfig& predict_cfg) {
  RepRecord rec;
  rec.n = spec.n;
  rec.p = spec.p;
  rec.rep = rep;
  rec.seed = rep_seed;
  try {
    SimSpec local = spec;
    local.seed = derive_seed(rep_seed, 0);
    const SimData data = generate(local);

    FitConfig fc = fit_cfg;
    fc.threads = 1;
    fc.mh.seed = derive_seed(rep_seed, 1);
    const FitResult fit_result = fit(data.train, fc);
    rec.converged = fit_result.converged;
    rec.iterations = fit_result.iterations_used;
    rec.mean_acceptance = fit_result.mean_acceptance;
    rec.max_constraint_violation = fit_result.max_constraint_violation;
    rec.gamma_dist = gamma_distance(fit_result.theta.gamma,
                                    data.gamma_true);

    const PredictorState state =
        PredictorState::from_fit(fit_result.theta, data.train);
    std::vector<double> predictions(data.test.n());
    for (Eigen::Index k = 0; k < data.test.n(); ++k) {
      MHConfig pc = predict_cfg;
      pc.seed = derive_seed(rep_seed, 2, static_cast<std::uint64_t>(k));
      predictions[static_cast<std::size_t>(k)] =
          predict(data.test.counts()[static_cast<std::size_t>(k)], state, pc);
    }
    rec.perr = perr(predictions, data.test.responses());
  } catch (const std::exception& e) {
    rec.failed = true;
    rec.error = e.what();
  }
  return rec;
}

CellSummary summarize_cell(int n, int p, const std::vector<RepRecord>& recs) {
  CellSummary s;
  s.n = n;
  s.p = p;
  std::vector<double> dists, perrs;
  for (const auto& r : recs) {
    if (r.n != n || r.p != p) continue;
    if (r.failed) {
      ++s.failures;
      continue;
    }
    ++s.successes;
    dists.push_back(r.gamma_dist);
    perrs.push_back(r.perr);
  }
  if (!dists.empty()) {
    s.dist_mean = mean_of(dists);
    s.dist_sd = sample_sd(dists);
    s.perr_mean = mean_of(perrs);
    s.perr_sd = sample_sd(perrs);
  } else {
    s.dist_mean = s.perr_mean = std::numeric_limits<double>::quiet_NaN();
    s.dist_sd = s.perr_sd = std::numeric_limits<double>::quiet_NaN();
  }
  return s;
}

}  // namespace

Table1Report run_table1(int reps, const std::vector<std::pair<int, int>>& cells,
                        const FitConfig& fit_cfg, const MHConfig& predict_cfg,
                        std::uint64_t seed, int threads, int n_test,
                        LibrarySizeLaw lib) {
  if (reps < 1) throw Error("run_table1: reps must be >= 1");
  if (cells.empty()) throw Error("run_table1: no cells requested");

  Table1Report report;
  report.cells = cells;
  report.replications.resize(cells.size() * static_cast<std::size_t>(reps));

  parallel_for(report.replications.size(), threads, [&](std::size_t task) {
    const std::size_t cell = task / static_cast<std::size_t>(reps);
    const int rep = static_cast<int>(task % static_cast<std::size_t>(reps));
    const auto [n, p] = cells[cell];
    SimSpec spec = SimSpec::defaults(n, p);
    spec.n_test = n_test;
    spec.library_size_law = lib;
    // Shared seed schedule: the replication seed depends on the replication
    // index only, so cells are paired across the grid.
    const std::uint64_t rep_seed =
        derive_seed(seed, static_cast<std::uint64_t>(rep));
    report.replications[task] =
        run_one_replication(spec, rep, rep_seed, fit_cfg, predict_cfg);
  });

  for (const auto& [n, p] : cells)
    report.summaries.push_back(summarize_cell(n, p, report.replications));
  for (const auto& r : report.replications)
    if (!r.failed)
      report.max_constraint_violation =
          std::max(report.max_constraint_violation,
                   r.max_constraint_violation);
  return report;
}

MisspecReport run_misspec(int reps, const std::vector<double>& c_values,
                          const FitConfig& fit_cfg, const MHConfig& predict_cfg,
                          std::uint64_t seed, int threads, int n, int p,
                          double a, int n_test, LibrarySizeLaw lib) {
  if (reps < 1) throw Error("run_misspec: reps must be >= 1");
  if (c_values.empty()) throw Error("run_misspec: no c values");

  MisspecReport report;
  report.c_values = c_values;
  report.replications.resize(c_values.size() * static_cast<std::size_t>(reps));

  parallel_for(report.replications.size(), threads, [&](std::size_t task) {
    const std::size_t ci = task / static_cast<std::size_t>(reps);
    const int rep = static_cast<int>(task % static_cast<std::size_t>(reps));
    SimSpec spec = SimSpec::defaults(n, p);
    spec.n_test = n_test;
    spec.library_size_law = lib;
    spec.v_fn = VFunction::abs_mix(a, c_values[ci]);
    // Same replication seed across c values so the sweep is paired.
    const std::uint64_t rep_seed =
        derive_seed(seed, static_cast<std::uint64_t>(rep), 0);
    const RepRecord r =
        run_one_replication(spec, rep, rep_seed, fit_cfg, predict_cfg);
    MisspecRecord& out = report.replications[task];
    out.c = c_values[ci];
    out.rep = rep;
    out.seed = rep_seed;
    out.failed = r.failed;
    out.error = r.error;
    out.perr = r.perr;
  });

  for (std::size_t ci = 0; ci < c_values.size(); ++ci) {
    std::vector<double> perrs;
    for (const auto& r : report.replications)
      if (!r.failed && r.c == c_values[ci]) perrs.push_back(r.perr);
    report.medians.push_back(median_of(perrs));
  }
  return report;
}

void BinarySimSpec::validate() const {
  if (n < 6) throw Error("BinarySimSpec: n must be >= 6");
  if (!(class1_frac > 0.0 && class1_frac < 1.0))
    throw Error("BinarySimSpec: class1_frac must lie in (0, 1)");
  if (p < 2) throw Error("BinarySimSpec: p must be >= 2");
  if (sigma_true.size() != 0 &&
      (sigma_true.rows() != p - 1 || sigma_true.cols() != p - 1))
    throw Error("BinarySimSpec: sigma_true must be (p-1) x (p-1)");
}

BinaryLabeledData generate_binary(const BinarySimSpec& spec) {
  spec.validate();
  const int pm1 = spec.p - 1;
  const Matrix sigma = spec.sigma_true.size() != 0
                           ? spec.sigma_true
                           : Matrix::Identity(pm1, pm1);
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw Error("generate_binary: sigma_true is not positive definite");

  const Vector g1 = primary_direction(pm1);
  const Vector g2 = secondary_direction(pm1, g1);

  const int n1 = static_cast<int>(std::llround(spec.class1_frac * spec.n));
  if (n1 < 3 || spec.n - n1 < 3)
    throw Error("generate_binary: each class needs at least 3 observations");

  std::mt19937_64 rng = seeded_engine(spec.seed);
  std::normal_distribution<double> normal;
  BinaryLabeledData data;
  data.labels.reserve(spec.n);
  data.counts.reserve(spec.n);
  for (int i = 0; i < spec.n; ++i) {
    const double label = i < n1 ? 1.0 : 0.0;
    const double t = normal(rng);
    Vector xi(pm1);
    for (int j = 0; j < pm1; ++j) xi[j] = normal(rng);
    const Vector w = g1 * (spec.separation * (label - 0.5) + t) +
                     g2 * (spec.quad_strength * (t * t - 1.0)) +
                     llt.matrixL() * xi;
    const Composition z = alr_inv(w);
    const std::int64_t m = spec.library_size_law.draw(rng);
    data.labels.push_back(label);
    data.counts.emplace_back(multinomial_draw(rng, m, z));
  }
  return data;
}

namespace {

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

SplitIndices stratified_split(const std::vector<double>& labels,
                              std::mt19937_64& rng) {
  std::vector<std::size_t> idx0, idx1;
  for (std::size_t i = 0; i < labels.size(); ++i)
    (labels[i] == 1.0 ? idx1 : idx0).push_back(i);
  SplitIndices split;
  for (auto* cls : {&idx0, &idx1}) {
    std::shuffle(cls->begin(), cls->end(), rng);
    const std::size_t n_train = static_cast<std::size_t>(
        std::llround(2.0 * static_cast<double>(cls->size()) / 3.0));
    for (std::size_t i = 0; i < cls->size(); ++i)
      (i < n_train ? split.train : split.test).push_back((*cls)[i]);
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

}  // namespace

BinaryReport run_binary_benchmark(const BinaryLabeledData& data, int reps,
                                  const std::vector<double>& cutoffs,
                                  const FitConfig& fit_cfg,
                                  const MHConfig& predict_cfg,
                                  std::uint64_t seed, int threads,
                                  BasisSpec fit_basis) {
  if (reps < 1) throw Error("run_binary_benchmark: reps must be >= 1");
  if (cutoffs.empty()) throw Error("run_binary_benchmark: no cutoffs");
  if (data.labels.size() != data.counts.size() || data.labels.empty())
    throw Error("run_binary_benchmark: label/count length mismatch");
  std::size_t n0 = 0, n1 = 0;
  for (double y : data.labels) {
    if (y == 0.0)
      ++n0;
    else if (y == 1.0)
      ++n1;
    else
      throw Error("run_binary_benchmark: labels must be 0 or 1");
  }
  if (n0 < 3 || n1 < 3)
    throw Error("run_binary_benchmark: each class needs at least 3 "
                "observations for a stratified split");

  BinaryReport report;
  report.cutoffs = cutoffs;
  report.splits.resize(static_cast<std::size_t>(reps));

  parallel_for(report.splits.size(), threads, [&](std::size_t rep) {
    BinarySplitRecord rec;
    rec.rep = static_cast<int>(rep);
    rec.seed = derive_seed(seed, rep);
    try {
      std::mt19937_64 rng = seeded_engine(rec.seed, 0);
      const SplitIndices split = stratified_split(data.labels, rng);

      std::vector<double> train_labels, test_labels;
      std::vector<CountVector> train_counts;
      for (std::size_t i : split.train) {
        train_labels.push_back(data.labels[i]);
        train_counts.push_back(data.counts[i]);
      }
      for (std::size_t i : split.test) test_labels.push_back(data.labels[i]);

      // PAMIR
      Dataset train_ds(train_labels, std::move(train_counts), fit_basis);
      FitConfig fc = fit_cfg;
      fc.threads = 1;
      fc.mh.seed = derive_seed(rec.seed, 1);
      const FitResult fr = fit(train_ds, fc);
      const PredictorState state =
          PredictorState::from_fit(fr.theta, train_ds);
      std::vector<double> yhat(split.test.size());
      for (std::size_t k = 0; k < split.test.size(); ++k) {
        MHConfig pc = predict_cfg;
        pc.seed = derive_seed(rec.seed, 2, k);
        yhat[k] = predict(data.counts[split.test[k]], state, pc);
      }
      rec.pamir_error.resize(cutoffs.size());
      for (std::size_t c = 0; c < cutoffs.size(); ++c) {
        int wrong = 0;
        for (std::size_t k = 0; k < yhat.size(); ++k) {
          const int cls = yhat[k] > cutoffs[c] ? 1 : 0;
          wrong += (cls != static_cast<int>(test_labels[k])) ? 1 : 0;
        }
        rec.pamir_error[c] =
            static_cast<double>(wrong) / static_cast<double>(yhat.size());
      }

      // Logistic baseline on ALR pseudo-count proportions
      std::vector<Vector> feat_train;
      std::vector<int> lab_train;
      for (std::size_t i : split.train) {
        feat_train.push_back(logistic_feature(data.counts[i]));
        lab_train.push_back(static_cast<int>(data.labels[i]));
      }
      const LogisticModel lm = logistic_baseline_fit(feat_train, lab_train);
      rec.logistic_ridged = lm.ridged;
      rec.logistic_error.resize(cutoffs.size());
      std::vector<double> probs(split.test.size());
      for (std::size_t k = 0; k < split.test.size(); ++k)
        probs[k] = logistic_baseline_predict(
            lm, logistic_feature(data.counts[split.test[k]]));
      for (std::size_t c = 0; c < cutoffs.size(); ++c) {
        int wrong = 0;
        for (std::size_t k = 0; k < probs.size(); ++k) {
          const int cls = probs[k] > cutoffs[c] ? 1 : 0;
          wrong += (cls != static_cast<int>(test_labels[k])) ? 1 : 0;
        }
        rec.logistic_error[c] =
            static_cast<double>(wrong) / static_cast<double>(probs.size());
      }

      // Majority-class baseline from the training split
      std::size_t train_ones = 0;
      for (double y : train_labels)
        if (y == 1.0) ++train_ones;
      const int majority =
          2 * train_ones >= train_labels.size() ? 1 : 0;
      int wrong = 0;
      for (double y : test_labels)
        wrong += (static_cast<int>(y) != majority) ? 1 : 0;
      rec.majority_error =
          static_cast<double>(wrong) / static_cast<double>(test_labels.size());
      rec.max_constraint_violation = fr.max_constraint_violation;
    } catch (const std::exception& e) {
      rec.failed = true;
      rec.error = e.what();
    }
    report.splits[rep] = std::move(rec);
  });

  report.pamir_mean_error.assign(cutoffs.size(), 0.0);
  report.logistic_mean_error.assign(cutoffs.size(), 0.0);
  int ok = 0;
  for (const auto& s : report.splits) {
    if (s.failed) {
      ++report.failures;
      continue;
    }
    ++ok;
    for (std::size_t c = 0; c < cutoffs.size(); ++c) {
      report.pamir_mean_error[c] += s.pamir_error[c];
      report.logistic_mean_error[c] += s.logistic_error[c];
    }
    report.majority_mean_error += s.majority_error;
    report.max_constraint_violation = std::max(
        report.max_constraint_violation, s.max_constraint_violation);
  }
  if (ok > 0) {
    for (std::size_t c = 0; c < cutoffs.size(); ++c) {
      report.pamir_mean_error[c] /= ok;
      report.logistic_mean_error[c] /= ok;
    }
    report.majority_mean_error /= ok;
  }
  return report;
}

BinaryReport run_binary_benchmark(const BinarySimSpec& spec, int reps,
                                  const std::vector<double>& cutoffs,
                                  const FitConfig& fit_cfg,
                                  const MHConfig& predict_cfg,
                                  std::uint64_t seed, int threads) {
  BinarySimSpec local = spec;
  local.seed = derive_seed(seed, 12345);
  const BinaryLabeledData data = generate_binary(local);
  return run_binary_benchmark(data, reps, cutoffs, fit_cfg, predict_cfg, seed,
                              threads);
}

Vector logistic_feature(const CountVector& x) {
  Vector prop(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j)
    prop[j] = static_cast<double>(x[j]) + 0.5;
  prop /= prop.sum();
  prop /= prop.sum();
  return alr(Composition(std::move(prop)));
}

namespace {

struct IrlsOutcome {
  Vector weights;
  bool converged = false;
  bool diverged = false;
};

IrlsOutcome irls(const Matrix& design, const Vector& y, double lambda,
                 int max_iters, double tol) {
  const Eigen::Index k = design.cols();
  IrlsOutcome out;
  out.weights = Vector::Zero(k);
  for (int it = 0; it < max_iters; ++it) {
    const Vector eta = design * out.weights;
    Vector prob(eta.size());
    Vector wt(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      prob[i] = 1.0 / (1.0 + std::exp(-eta[i]));
      wt[i] = prob[i] * (1.0 - prob[i]);
    }
    Matrix hess = design.transpose() * wt.asDiagonal() * design;
    hess.diagonal().array() += lambda;
    const Vector grad = design.transpose() * (y - prob);
    Eigen::LDLT<Matrix> ldlt(hess);
    if (ldlt.info() != Eigen::Success) {
      out.diverged = true;
      return out;
    }
    const Vector step = ldlt.solve(grad);
    if (!step.allFinite()) {
      out.diverged = true;
      return out;
    }
    out.weights += step;
    if (out.weights.cwiseAbs().maxCoeff() > 1e6) {
      out.diverged = true;
      return out;
    }
    if (step.cwiseAbs().maxCoeff() <=
        tol * std::max(1.0, out.weights.cwiseAbs().maxCoeff())) {
      out.converged = true;
      return out;
    }
  }
  return out;
}

}  // namespace

LogisticModel logistic_baseline_fit(const std::vector<Vector>& features,
                                    const std::vector<int>& labels,
                                    int max_iters, double tol, double ridge) {
  if (features.size() != labels.size() || features.empty())
    throw Error("logistic_baseline_fit: feature/label length mismatch");
  int n0 = 0, n1 = 0;
  for (int y : labels) {
    if (y == 0)
      ++n0;
    else if (y == 1)
      ++n1;
    else
      throw Error("logistic_baseline_fit: labels must be 0 or 1");
  }
  if (n0 < 2 || n1 < 2)
    throw Error("logistic_baseline_fit: need >= 2 observations per class");

  const Eigen::Index n = static_cast<Eigen::Index>(features.size());
  const Eigen::Index k = features.front().size();
  Matrix design(n, k + 1);
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (features[static_cast<std::size_t>(i)].size() != k)
      throw Error("logistic_baseline_fit: inconsistent feature dimensions");
    design(i, 0) = 1.0;
    design.row(i).tail(k) = features[static_cast<std::size_t>(i)].transpose();
    y[i] = static_cast<double>(labels[static_cast<std::size_t>(i)]);
  }

  LogisticModel model;
  IrlsOutcome plain = irls(design, y, 0.0, max_iters, tol);
  if (plain.converged) {
    model.weights = std::move(plain.weights);
    model.converged = true;
    return model;
  }
  // Separation or divergence: refit with the ridge and flag it.
  IrlsOutcome ridged = irls(design, y, ridge, max_iters, tol);
  model.weights = std::move(ridged.weights);
  model.converged = ridged.converged;
  model.ridged = true;
  return model;
}

double logistic_baseline_predict(const LogisticModel& model,
                                 const Vector& feature) {
  if (feature.size() + 1 != model.weights.size())
    throw Error("logistic_baseline_predict: feature dimension mismatch");
  const double eta =
      model.weights[0] + model.weights.tail(feature.size()).dot(feature);
  const double p = 1.0 / (1.0 + std::exp(-eta));
  return std::clamp(p, 1e-12, 1.0 - 1e-12);
}

// --- report emission -------------------------------------------------------

void write_table1_csv(const Table1Report& report, const std::string& path) {
  auto out = open_out(path);
  out << "n,p,rep,seed,failed,gamma_dist,perr,converged,iterations,"
         "mean_acceptance,max_constraint_violation,error\n";
  for (const auto& r : report.replications) {
    out << r.n << ',' << r.p << ',' << r.rep << ',' << r.seed << ','
        << (r.failed ? 1 : 0) << ',' << full_precision(r.gamma_dist) << ','
        << full_precision(r.perr) << ',' << (r.converged ? 1 : 0) << ','
        << r.iterations << ',' << full_precision(r.mean_acceptance) << ','
        << full_precision(r.max_constraint_violation) << ',' << r.error
        << '\n';
  }
}

void write_table1_cells_csv(const Table1Report& report,
                            const std::string& path) {
  auto out = open_out(path);
  out << "n,p,successes,failures,dist_mean,dist_sd,perr_mean,perr_sd\n";
  for (const auto& s : report.summaries) {
    out << s.n << ',' << s.p << ',' << s.successes << ',' << s.failures << ','
        << full_precision(s.dist_mean) << ',' << full_precision(s.dist_sd)
        << ',' << full_precision(s.perr_mean) << ','
        << full_precision(s.perr_sd) << '\n';
  }
}

void write_table1_summary_json(const Table1Report& report,
                               const std::string& path) {
  json doc;
  doc["report"] = "table1";
  doc["max_constraint_violation"] = report.max_constraint_violation;
  doc["cells"] = json::array();
  for (const auto& s : report.summaries) {
    json cell;
    cell["n"] = s.n;
    cell["p"] = s.p;
    cell["successes"] = s.successes;
    cell["failures"] = s.failures;
    cell["dist_mean"] = s.dist_mean;
    cell["dist_sd"] = s.dist_sd;
    cell["perr_mean"] = s.perr_mean;
    cell["perr_sd"] = s.perr_sd;
    doc["cells"].push_back(cell);
  }
  write_json_file(doc, path);
}

std::string format_table1_grid(const Table1Report& report) {
  std::ostringstream os;
  os << "          " << "  ||gamma_hat - gamma||_2" << "   PErr\n";
  for (const auto& s : report.summaries) {
    os << "n=" << s.n << " p=" << s.p << "\t" << fixed3(s.dist_mean) << " ("
       << fixed3(s.dist_sd) << ")\t" << fixed3(s.perr_mean) << " ("
       << fixed3(s.perr_sd) << ")";
    if (s.failures > 0) os << "\t[" << s.failures << " failed]";
    os << "\n";
  }
  return os.str();
}

void write_misspec_csv(const MisspecReport& report, const std::string& path) {
  auto out = open_out(path);
  out << "c,rep,seed,failed,perr,error\n";
  for (const auto& r : report.replications) {
    out << full_precision(r.c) << ',' << r.rep << ',' << r.seed << ','
        << (r.failed ? 1 : 0) << ',' << full_precision(r.perr) << ','
        << r.error << '\n';
  }
}

void write_misspec_summary_json(const MisspecReport& report,
                                const std::string& path) {
  json doc;
  doc["report"] = "misspec";
  doc["max_constraint_violation"] = report.max_constraint_violation;
  doc["c_values"] = report.c_values;
  doc["perr_medians"] = report.medians;
  write_json_file(doc, path);
}

std::string format_misspec_summary(const MisspecReport& report) {
  std::ostringstream os;
  os << "c\tmedian PErr\n";
  for (std::size_t i = 0; i < report.c_values.size(); ++i)
    os << fixed3(report.c_values[i]) << "\t" << fixed3(report.medians[i])
       << "\n";
  return os.str();
}

void write_binary_csv(const BinaryReport& report, const std::string& path) {
  auto out = open_out(path);
  out << "rep,seed,failed,cutoff,pamir_error,logistic_error,majority_error,"
         "logistic_ridged,error\n";
  for (const auto& s : report.splits) {
    for (std::size_t c = 0; c < report.cutoffs.size(); ++c) {
      out << s.rep << ',' << s.seed << ',' << (s.failed ? 1 : 0) << ','
          << full_precision(report.cutoffs[c]) << ','
          << full_precision(s.failed ? std::numeric_limits<double>::quiet_NaN()
                                     : s.pamir_error[c])
          << ','
          << full_precision(s.failed ? std::numeric_limits<double>::quiet_NaN()
                                     : s.logistic_error[c])
          << ',' << full_precision(s.majority_error) << ','
          << (s.logistic_ridged ? 1 : 0) << ',' << s.error << '\n';
    }
  }
}

void write_binary_cutoffs_csv(const BinaryReport& report,
                              const std::string& path) {
  auto out = open_out(path);
  out << "cutoff,logistic_mean_error,pamir_mean_error,majority_mean_error\n";
  for (std::size_t c = 0; c < report.cutoffs.size(); ++c) {
    out << full_precision(report.cutoffs[c]) << ','
        << full_precision(report.logistic_mean_error[c]) << ','
        << full_precision(report.pamir_mean_error[c]) << ','
        << full_precision(report.majority_mean_error) << '\n';
  }
}

void write_binary_summary_json(const BinaryReport& report,
                               const std::string& path) {
  json doc;
  doc["report"] = "binary";
  doc["max_constraint_violation"] = report.max_constraint_violation;
  doc["failures"] = report.failures;
  doc["cutoffs"] = report.cutoffs;
  doc["logistic_mean_error"] = report.logistic_mean_error;
  doc["pamir_mean_error"] = report.pamir_mean_error;
  doc["majority_mean_error"] = report.majority_mean_error;
  write_json_file(doc, path);
}

std::string format_binary_table(const BinaryReport& report) {
  std::ostringstream os;
  os << "Cutoff\tLogistic regression\tPAMIR\n";
  for (std::size_t c = 0; c < report.cutoffs.size(); ++c)
    os << fixed3(report.cutoffs[c]) << "\t" << fixed3(
           report.logistic_mean_error[c])
       << "\t" << fixed3(report.pamir_mean_error[c]) << "\n";
  os << "majority-class baseline: " << fixed3(report.majority_mean_error)
     << "\n";
  return os.str();
}

}  // namespace pamir
