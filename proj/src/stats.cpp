#include "tpca/stats.hpp"

#include "tpca/error.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace tpca {

namespace {

double log_binomial_pmf(long i, long n, double p) {
  if (p <= 0.0) return i == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return i == n ? 0.0 : -std::numeric_limits<double>::infinity();
  return std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) +
         i * std::log(p) + (n - i) * std::log1p(-p);
}

template <class F>
double bisect_decreasing(F&& f, double target) {
  // f decreasing on [0, 1]; returns p with f(p) == target.
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) > target)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double binomial_cdf(long k, long n, double p) {
  if (k < 0) return 0.0;
  if (k >= n) return 1.0;
  double max_log = -std::numeric_limits<double>::infinity();
  std::vector<double> logs(static_cast<std::size_t>(k + 1));
  for (long i = 0; i <= k; ++i) {
    logs[static_cast<std::size_t>(i)] = log_binomial_pmf(i, n, p);
    max_log = std::max(max_log, logs[static_cast<std::size_t>(i)]);
  }
  if (!std::isfinite(max_log)) return 0.0;
  double s = 0.0;
  for (double l : logs) s += std::exp(l - max_log);
  return std::min(1.0, std::exp(max_log) * s);
}

ConfidenceInterval clopper_pearson(long successes, long trials, double level) {
  if (trials <= 0 || successes < 0 || successes > trials)
    throw Error(ErrorKind::InvalidArgument, "clopper_pearson: invalid counts");
  const double tail = 0.5 * (1.0 - level);
  ConfidenceInterval ci;
  ci.lower = successes == 0
                 ? 0.0
                 : bisect_decreasing(
                       [&](double p) { return binomial_cdf(successes - 1, trials, p); },
                       1.0 - tail);
  ci.upper = successes == trials
                 ? 1.0
                 : bisect_decreasing(
                       [&](double p) { return binomial_cdf(successes, trials, p); }, tail);
  return ci;
}

long max_allowed_exceedances(long n, double alpha, double confidence) {
  long r = -1;
  for (long k = 0; k <= n; ++k) {
    if (binomial_cdf(k, n, alpha) <= 1.0 - confidence)
      r = k;
    else
      break;
  }
  return r;
}

MeanEstimate mean_with_ci(std::span<const double> values) {
  MeanEstimate out;
  if (values.empty()) return out;
  const double n = static_cast<double>(values.size());
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  const double sd = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  out.standard_error = sd / std::sqrt(n);
  constexpr double z975 = 1.959963984540054;
  out.ci = {out.mean - z975 * out.standard_error, out.mean + z975 * out.standard_error};
  return out;
}

}  // namespace tpca
