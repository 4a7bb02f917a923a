#pragma once

#include <cmath>
#include <limits>
#include <span>

namespace tpca {

struct ConfidenceInterval {
  double lower = 0.0;
  double upper = 0.0;
};

/// Digamma for x > 0: upward recurrence to x >= 10, then the asymptotic series.
template <typename Scalar>
Scalar digamma(Scalar x) {
  using std::log;
  if (!(x > Scalar(0))) return std::numeric_limits<Scalar>::quiet_NaN();
  Scalar acc(0);
  while (x < Scalar(10)) {
    acc -= Scalar(1) / x;
    x += Scalar(1);
  }
  const Scalar inv = Scalar(1) / x;
  const Scalar inv2 = inv * inv;
  const Scalar tail =
      inv2 * (Scalar(1) / 12 -
              inv2 * (Scalar(1) / 120 -
                      inv2 * (Scalar(1) / 252 -
                              inv2 * (Scalar(1) / 240 - inv2 * (Scalar(1) / 132)))));
  return acc + log(x) - inv / 2 - tail;
}

/// P(X <= k) for X ~ Binomial(n, p).
double binomial_cdf(long k, long n, double p);

/// Exact (Clopper-Pearson) two-sided interval for a binomial proportion.
ConfidenceInterval clopper_pearson(long successes, long trials, double level = 0.95);

/// Largest r such that P(Binomial(n, alpha) <= r) <= 1 - confidence, or -1 if none.
/// Observing at most r exceedances out of n bounds the exceedance probability by
/// alpha with the requested one-sided confidence.
long max_allowed_exceedances(long n, double alpha, double confidence);

/// Mean with a normal-approximation 95% interval.
struct MeanEstimate {
  double mean = 0.0;
  ConfidenceInterval ci;
  double standard_error = 0.0;
};
MeanEstimate mean_with_ci(std::span<const double> values);

}  // namespace tpca
