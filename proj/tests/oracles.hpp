// Independent reference implementations used as test oracles. Deliberately naive:
// no shared code with the library beyond plain Eigen containers.
#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/digamma.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <vector>

namespace oracle {

// Two-pass MLE variance (divisor n).
inline double variance(const std::vector<double>& x) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return ss / static_cast<double>(x.size());
}

// Maximized log-likelihood ratio for a mean/variance change between two segments.
inline double llr(const std::vector<double>& before, const std::vector<double>& after) {
  std::vector<double> all = before;
  all.insert(all.end(), after.begin(), after.end());
  const double va = variance(all);
  return -0.5 * static_cast<double>(before.size()) * std::log(variance(before) / va) -
         0.5 * static_cast<double>(after.size()) * std::log(variance(after) / va);
}

inline double bartlett(long m, long k, long t) {
  auto term = [](double n) { return n * std::log(n) - n * boost::math::digamma((n - 1.0) / 2.0); };
  return 0.5 * (-term(static_cast<double>(m + t)) + term(static_cast<double>(m + k)) +
                term(static_cast<double>(t - k)));
}

// Unmixed sum-of-streams corrected GLR at time t for data columns `z` (rows are
// times 1..t) with training columns `train`, maximized over 2 <= t - k <= w + 1, k >= 0.
inline double sum_of_streams_glr(const Eigen::MatrixXd& train, const Eigen::MatrixXd& z, long t,
                                 long w) {
  const long m = train.rows();
  double best = -std::numeric_limits<double>::infinity();
  for (long k = std::max(0L, t - w - 1); k <= t - 2; ++k) {
    double total = 0.0;
    for (long d = 0; d < z.cols(); ++d) {
      std::vector<double> before, after;
      for (long i = 0; i < m; ++i) before.push_back(train(i, d));
      for (long i = 0; i < k; ++i) before.push_back(z(i, d));
      for (long i = k; i < t; ++i) after.push_back(z(i, d));
      total += llr(before, after);
    }
    best = std::max(best, total / bartlett(m, k, t));
  }
  return best;
}

// 1 - integral of sqrt(p q), squared Hellinger distance by adaptive quadrature.
inline double hellinger_quadrature(double m1, double s1, double m2, double s2) {
  auto pdf = [](double x, double m, double s) {
    const double u = (x - m) / s;
    return std::exp(-0.5 * u * u) / (s * std::sqrt(2.0 * M_PI));
  };
  auto f = [&](double x) { return std::sqrt(pdf(x, m1, s1) * pdf(x, m2, s2)); };
  const double inf = std::numeric_limits<double>::infinity();
  const double bc = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -inf, inf, 15, 1e-14);
  return std::sqrt(std::max(0.0, 1.0 - bc));
}

}  // namespace oracle
