#pragma once

#include "tpca/random.hpp"

#include <Eigen/Dense>

namespace tpca {

using Eigen::Index;

/// Floor used for positive-definiteness repair and eigenvalue guards.
inline constexpr double kPdFloor = 1e-8;

/// Symmetric positive-definite matrix with unit diagonal. Construction validates;
/// an instance is immutable afterwards.
class CorrelationMatrix {
 public:
  /// Throws NotCorrelation (shape/diagonal/symmetry/range) or
  /// DegenerateCorrelation (not strictly positive definite).
  static CorrelationMatrix from(const Eigen::MatrixXd& entries);

  static CorrelationMatrix identity(Index dim);

  const Eigen::MatrixXd& matrix() const noexcept { return entries_; }
  Index dim() const noexcept { return entries_.rows(); }
  double operator()(Index i, Index j) const { return entries_(i, j); }

 private:
  explicit CorrelationMatrix(Eigen::MatrixXd entries) : entries_(std::move(entries)) {}
  Eigen::MatrixXd entries_;
};

/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Eigen::MatrixXd& sym);

/// Descending eigenpairs; column j of `vectors` pairs with `values(j)`.
/// Each eigenvector has its largest-magnitude entry positive (first index on ties).
struct EigenSystem {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;

  Index dim() const noexcept { return values.size(); }
};

struct TrainingSummary {
  Eigen::VectorXd mean;
  Eigen::VectorXd sdev;  // divisor m
  CorrelationMatrix corr;
  Index m = 0;
};

/// Column means, standard deviations and Pearson correlation, all with divisor m.
TrainingSummary estimate_training(const Eigen::MatrixXd& data);

/// Applies S0^{-1}(x - mean0) row by row.
Eigen::MatrixXd standardize(const Eigen::MatrixXd& data, const TrainingSummary& summary);

EigenSystem eigensystem(const CorrelationMatrix& corr);

/// Same decomposition for any symmetric matrix (no correlation checks).
EigenSystem symmetric_eigensystem(const Eigen::MatrixXd& sym);

/// Random correlation matrix from a D-vine of partial correlations.
/// The partial correlation at vine level k is 2 Beta(b_k, b_k) - 1 with
/// b_k = alpha_d + (D - 1 - k) / 2; the resulting density is proportional to
/// det(R)^(alpha_d - 1). Small alpha_d favours large correlations. Numerically
/// singular draws are lifted to the PD floor with nearest_pd_correlation.
CorrelationMatrix random_correlation(Index dim, double alpha_d, Rng& rng);

/// Eigenvalue clipping at `eps` followed by diagonal rescaling, repeated while it
/// makes progress, then a minimal shrink towards the identity so that the result
/// is a correlation matrix with smallest eigenvalue >= eps. Feasible input is
/// returned unchanged. Throws NoConvergence only on non-finite intermediate results.
CorrelationMatrix nearest_pd_correlation(const Eigen::MatrixXd& sym, double eps = kPdFloor,
                                         int max_iter = 100);

/// Large-sample covariance of the j-th sample eigenvector from n observations,
///   Gamma_j = (lambda_j / n) * sum_{l != j} lambda_l / (lambda_j - lambda_l)^2 * v_j v_j^T.
/// Throws DegenerateSpectrum when two eigenvalues are closer than 1e-10.
Eigen::MatrixXd eigvec_asymptotic_cov(const EigenSystem& es, Index j, double n);

}  // namespace tpca
