#include "pamir/types.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <sstream>

namespace pamir {

ParseError::ParseError(const std::string& file, std::size_t line,
                       std::size_t column, const std::string& msg)
    : Error(file + ":" + std::to_string(line) + ":" + std::to_string(column) +
            ": " + msg),
      line_(line),
      column_(column) {}

bool all_finite(const Vector& v) { return v.allFinite(); }
bool all_finite(const Matrix& m) { return m.allFinite(); }

CountVector::CountVector(IntVector counts) : counts_(std::move(counts)) {
  if (counts_.size() == 0) throw Error("CountVector: empty count vector");
  library_size_ = 0;
  for (Eigen::Index j = 0; j < counts_.size(); ++j) {
    if (counts_[j] < 0)
      throw Error("CountVector: negative count at index " + std::to_string(j));
    library_size_ += counts_[j];
  }
  if (library_size_ < 1)
    throw Error("CountVector: all counts are zero (library size must be >= 1)");
}

Composition::Composition(Vector probs) : probs_(std::move(probs)) {
  if (probs_.size() == 0) throw Error("Composition: empty probability vector");
  for (Eigen::Index j = 0; j < probs_.size(); ++j) {
    if (!(probs_[j] > 0.0))
      throw Error("Composition: non-positive entry at index " +
                  std::to_string(j));
  }
  const double total = probs_.sum();
  if (std::abs(total - 1.0) > 1e-12)
    throw Error("Composition: entries sum to " + std::to_string(total) +
                ", expected 1 within 1e-12");
}

BasisSpec BasisSpec::polynomial(int degree) {
  if (degree < 1) throw Error("BasisSpec: polynomial degree must be >= 1");
  BasisSpec spec;
  spec.kind = Kind::Polynomial;
  spec.degree = degree;
  return spec;
}

BasisSpec BasisSpec::identity() {
  BasisSpec spec;
  spec.kind = Kind::Identity;
  spec.degree = 1;
  return spec;
}

BasisSpec BasisSpec::from_table(std::vector<std::pair<double, Vector>> entries) {
  if (entries.empty()) throw Error("BasisSpec: empty basis table");
  const Eigen::Index r = entries.front().second.size();
  if (r < 1) throw Error("BasisSpec: basis table entries must be non-empty");
  for (const auto& [y, h] : entries) {
    if (h.size() != r)
      throw Error("BasisSpec: inconsistent basis dimensions in table");
  }
  BasisSpec spec;
  spec.kind = Kind::Table;
  spec.table = std::move(entries);
  return spec;
}

int BasisSpec::dim() const {
  switch (kind) {
    case Kind::Polynomial:
      return degree;
    case Kind::Identity:
      return 1;
    case Kind::Table:
      return static_cast<int>(table.front().second.size());
  }
  throw Error("BasisSpec: unknown kind");
}

void ModelParams::validate() const {
  const Eigen::Index pm1 = mu.size();
  if (pm1 < 1) throw Error("ModelParams: mu is empty");
  if (gamma.rows() != pm1)
    throw Error("ModelParams: gamma has " + std::to_string(gamma.rows()) +
                " rows, expected " + std::to_string(pm1));
  if (beta.rows() != gamma.cols())
    throw Error("ModelParams: beta rows do not match gamma columns");
  if (sigma.rows() != pm1 || sigma.cols() != pm1)
    throw Error("ModelParams: sigma must be (p-1) x (p-1)");
  if (d() < 1 || d() > std::min<Eigen::Index>(pm1, r()))
    throw Error("ModelParams: d must satisfy 1 <= d <= min(p-1, r)");
  if (!all_finite(mu) || !all_finite(gamma) || !all_finite(beta) ||
      !all_finite(sigma))
    throw Error("ModelParams: non-finite entries");

  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() >
      1e-10 * std::max(1.0, sigma.cwiseAbs().maxCoeff()))
    throw Error("ModelParams: sigma is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(sigma);
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0)
    throw Error("ModelParams: sigma is not positive definite");

  const double cviol = constraint_violation();
  if (cviol > 1e-8)
    throw Error("ModelParams: Gamma^T Sigma^-1 Gamma deviates from I_d by " +
                std::to_string(cviol));

  Eigen::JacobiSVD<Matrix> svd(beta);
  const double smax = svd.singularValues().maxCoeff();
  const double smin = svd.singularValues().minCoeff();
  if (!(smin > 1e-10 * smax))
    throw Error("ModelParams: beta is rank deficient");
}

double ModelParams::constraint_violation() const {
  const Matrix gtg =
      gamma.transpose() * sigma.llt().solve(gamma) -
      Matrix::Identity(gamma.cols(), gamma.cols());
  return gtg.norm();
}

}  // namespace pamir
