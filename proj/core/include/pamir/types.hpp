// Domain types shared across the library: counts, compositions, basis
// vectors, and the model parameter bundle with its identifiability
// constraint.
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pamir {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IntVector = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;

// ALR-scale latent coordinates live in R^{p-1}; plain vectors with
// finiteness checked at module boundaries.
using LatentVector = Vector;
using ReducedVector = Vector;

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ParseError : public Error {
 public:
  ParseError(const std::string& file, std::size_t line, std::size_t column,
             const std::string& msg);
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

bool all_finite(const Vector& v);
bool all_finite(const Matrix& m);

// One sample's raw taxon counts. Total count (library size) is fixed by
// sequencing depth; inference conditions on it.
class CountVector {
 public:
  explicit CountVector(IntVector counts);

  const IntVector& counts() const { return counts_; }
  std::int64_t library_size() const { return library_size_; }
  Eigen::Index size() const { return counts_.size(); }
  std::int64_t operator[](Eigen::Index j) const { return counts_[j]; }

 private:
  IntVector counts_;
  std::int64_t library_size_;
};

// Probability vector on the open simplex. Entries are strictly positive
// and sum to one within 1e-12; the logistic-normal construction never
// produces exact zeros.
class Composition {
 public:
  explicit Composition(Vector probs);

  const Vector& probs() const { return probs_; }
  Eigen::Index size() const { return probs_.size(); }
  double operator[](Eigen::Index j) const { return probs_[j]; }

 private:
  Vector probs_;
};

// Known vector-valued function of the response. Polynomial covers the
// standard choice; Table supports a user-supplied lookup.
struct BasisSpec {
  enum class Kind { Polynomial, Identity, Table };

  Kind kind = Kind::Polynomial;
  int degree = 3;
  // Table entries: (y, h_y) pairs, exact-match lookup.
  std::vector<std::pair<double, Vector>> table;

  static BasisSpec polynomial(int degree);
  static BasisSpec identity();
  static BasisSpec from_table(std::vector<std::pair<double, Vector>> entries);

  int dim() const;
};

struct BasisVector {
  Vector h;
  bool centered = false;
};

// theta = {mu, Gamma, beta, Sigma} with Gamma^T Sigma^-1 Gamma = I_d.
struct ModelParams {
  Vector mu;     // p-1
  Matrix gamma;  // (p-1) x d
  Matrix beta;   // d x r
  Matrix sigma;  // (p-1) x (p-1), symmetric positive definite

  Eigen::Index p() const { return mu.size() + 1; }
  Eigen::Index d() const { return gamma.cols(); }
  Eigen::Index r() const { return beta.cols(); }

  // Throws Error naming the first violated invariant.
  void validate() const;

  // Frobenius norm of Gamma^T Sigma^-1 Gamma - I_d.
  double constraint_violation() const;
};

}  // namespace pamir
