#pragma once

#include "tpca/changemodel.hpp"
#include "tpca/corrcore.hpp"

#include <Eigen/Dense>

#include <vector>

namespace tpca {

/// Monte Carlo summary of which projection is most sensitive.
struct ArgmaxEstimate {
  Eigen::VectorXd probs;             // P_j, sums to 1
  Eigen::VectorXd mean_sensitivity;  // E[H_j]
  Eigen::MatrixXd type_contrib;      // D x 3, column c = P(argmax = j, type = c)
  Eigen::MatrixXd type_mean_sensitivity;  // D x 3, E[H_j | type = c] (0 if type unseen)
  Eigen::Vector3i type_counts = Eigen::Vector3i::Zero();
  int draws = 0;
};

struct ProjectionSelection {
  std::vector<Index> indices;    // selected axes, in selection order
  Eigen::VectorXd eigenvalues;   // lambda_j for j in indices
  Eigen::MatrixXd eigenvectors;  // D x |indices|
  ArgmaxEstimate estimate;
  double cutoff = 0.0;
  Index lag = 0;
};

/// Estimates P_j = P(argmax_i H_i = j) from `draws` changes. Draw b uses its own
/// generator stream derived from one value taken from `rng`, so the result does not
/// depend on the worker count. Ties in the argmax go to the lowest index.
ArgmaxEstimate estimate_argmax_probabilities(const CorrelationMatrix& base,
                                             const ChangeDistributionSpec& spec, int draws,
                                             Rng& rng, Index lag = 0);

/// Same estimate from a precomputed eigensystem of `base`.
ArgmaxEstimate estimate_argmax_probabilities(const CorrelationMatrix& base, const EigenSystem& es,
                                             const ChangeDistributionSpec& spec, int draws,
                                             Rng& rng, Index lag = 0);

/// Greedy minimal set with cumulative probability >= cutoff. Axes are taken in
/// decreasing probability; equal probabilities go to the larger (less varying) axis
/// first. cutoff = 0 yields the single top axis.
std::vector<Index> select_axes(const Eigen::VectorXd& probs, double cutoff);

ProjectionSelection tailor(const CorrelationMatrix& base, const ChangeDistributionSpec& spec,
                           double cutoff, int draws, Rng& rng, Index lag = 0);

/// Selections of the J most / least varying axes of `es`.
ProjectionSelection max_pca_selection(const EigenSystem& es, Index count);
ProjectionSelection min_pca_selection(const EigenSystem& es, Index count);

}  // namespace tpca
