#pragma once

#include "tpca/corrcore.hpp"
#include "tpca/random.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace tpca {

struct NormalParams {
  double mean = 0.0;
  double sdev = 1.0;
};

/// Hellinger distance between N(mean1, sdev1^2) and N(mean2, sdev2^2):
///   H^2 = 1 - sqrt(2 s1 s2 / (s1^2 + s2^2)) exp(-(m1 - m2)^2 / (4 (s1^2 + s2^2))).
template <typename Scalar>
Scalar hellinger_normal(Scalar mean1, Scalar sdev1, Scalar mean2, Scalar sdev2) {
  using std::exp;
  using std::sqrt;
  const Scalar var_sum = sdev1 * sdev1 + sdev2 * sdev2;
  const Scalar diff = mean1 - mean2;
  const Scalar affinity =
      sqrt(Scalar(2) * sdev1 * sdev2 / var_sum) * exp(-diff * diff / (Scalar(4) * var_sum));
  const Scalar h2 = Scalar(1) - affinity;
  return h2 > Scalar(0) ? sqrt(h2) : Scalar(0);
}

inline double hellinger_normal(const NormalParams& p, const NormalParams& q) {
  return hellinger_normal(p.mean, p.sdev, q.mean, q.sdev);
}

/// Divergence between the pre- and post-change marginal of a projection.
using Divergence = std::function<double(const NormalParams&, const NormalParams&)>;

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

enum class ChangeType { Mean = 0, Variance = 1, Correlation = 2 };
std::string to_string(ChangeType type);
ChangeType change_type_from_string(const std::string& name);

/// Distribution over sparse single-type changes. Defaults reproduce the
/// uninformative distribution: equal type probabilities, K ~ Unif{1..floor(D/2)},
/// mu_d ~ U[-1.5, 1.5], sigma_d from an even mixture of U[1/2.5, 1] and U[1, 2.5],
/// a_di ~ U[0, 1].
struct ChangeDistributionSpec {
  std::array<double, 3> type_probs{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  std::optional<int> sparsity_max;
  Range mean_range{-1.5, 1.5};
  std::array<Range, 2> sdev_ranges{Range{1.0 / 2.5, 1.0}, Range{1.0, 2.5}};
  Range corr_factor_range{0.0, 1.0};
  bool equal_across_dims = false;

  /// Throws InvalidArgument when the spec cannot be sampled for `dim` streams.
  void validate(Index dim) const;
  int resolved_sparsity_max(Index dim) const;

  static ChangeDistributionSpec only(ChangeType type);
};

/// One sampled change. Index vectors are sorted ascending; only the fields of
/// `type` are populated. corr_factors is K x K symmetric (diagonal unused).
struct ChangeScenario {
  ChangeType type = ChangeType::Mean;
  std::vector<Index> affected;
  Eigen::VectorXd mean_sizes;
  Eigen::VectorXd sdev_factors;
  Eigen::MatrixXd corr_factors;

  Index sparsity() const { return static_cast<Index>(affected.size()); }
};

struct PostChangeParams {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Draws a change for `base`. With lag > 0, base is the correlation matrix of
/// lag-extended vectors of dimension D (lag + 1): the change is sampled over the D
/// original streams and duplicated across the lag blocks.
ChangeScenario sample_change(const ChangeDistributionSpec& spec, const CorrelationMatrix& base,
                             Rng& rng, Index lag = 0);

/// Duplicates a change on D streams onto the D (lag + 1) lag-extended coordinates.
ChangeScenario lag_expand(const ChangeScenario& scenario, Index dim, Index lag);

/// Post-change mean and covariance of standardized data with pre-change (0, base).
PostChangeParams apply_change(const CorrelationMatrix& base, const ChangeScenario& scenario,
                              double pd_floor = kPdFloor);

/// Divergence of each principal projection under the change:
///   H_j = div(N(0, sqrt(lambda_j)), N(v_j' mu1, sqrt(v_j' Sigma1 v_j))).
/// Throws ZeroEigenvalue if some lambda_j <= pd_floor.
Eigen::VectorXd projection_sensitivities(const EigenSystem& es, const PostChangeParams& post,
                                         const Divergence& divergence = {},
                                         double pd_floor = kPdFloor);

}  // namespace tpca
