#include "tpca/changemodel.hpp"

#include "tpca/error.hpp"

#include <algorithm>
#include <numeric>

namespace tpca {

namespace {

constexpr int kMaxCorrelationRedraws = 100;

void check_range(const Range& r, const char* name) {
  if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo > r.hi)
    throw Error(ErrorKind::InvalidArgument, std::string("invalid interval for ") + name);
}

double uniform_in(const Range& r, Rng& rng) {
  if (r.lo == r.hi) return r.lo;
  std::uniform_real_distribution<double> u(r.lo, r.hi);
  return u(rng);
}

double draw_sdev_factor(const ChangeDistributionSpec& spec, Rng& rng) {
  std::bernoulli_distribution coin(0.5);
  return uniform_in(coin(rng) ? spec.sdev_ranges[1] : spec.sdev_ranges[0], rng);
}

ChangeType draw_type(const std::array<double, 3>& probs, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double x = u(rng);
  double acc = 0.0;
  for (int i = 0; i < 3; ++i) {
    acc += probs[static_cast<std::size_t>(i)];
    if (x < acc) return static_cast<ChangeType>(i);
  }
  // Rounding: fall back to the last type with positive probability.
  for (int i = 2; i >= 0; --i)
    if (probs[static_cast<std::size_t>(i)] > 0.0) return static_cast<ChangeType>(i);
  return ChangeType::Mean;
}

std::vector<Index> draw_subset(Index dim, Index k, Rng& rng) {
  std::vector<Index> pool(static_cast<std::size_t>(dim));
  std::iota(pool.begin(), pool.end(), Index{0});
  for (Index i = 0; i < k; ++i) {
    std::uniform_int_distribution<Index> pick(i, dim - 1);
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
  }
  pool.resize(static_cast<std::size_t>(k));
  std::sort(pool.begin(), pool.end());
  return pool;
}

Eigen::MatrixXd draw_corr_factors(const ChangeDistributionSpec& spec, Index k, Rng& rng) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Ones(k, k);
  const double shared = spec.equal_across_dims ? uniform_in(spec.corr_factor_range, rng) : 0.0;
  for (Index p = 0; p < k; ++p)
    for (Index q = p + 1; q < k; ++q) {
      const double v = spec.equal_across_dims ? shared : uniform_in(spec.corr_factor_range, rng);
      a(p, q) = v;
      a(q, p) = v;
    }
  return a;
}

bool correlation_factors_admissible(const CorrelationMatrix& base, const ChangeScenario& sc) {
  for (Index p = 0; p < sc.sparsity(); ++p)
    for (Index q = p + 1; q < sc.sparsity(); ++q) {
      const double v = sc.corr_factors(p, q) *
                       base(sc.affected[static_cast<std::size_t>(p)],
                            sc.affected[static_cast<std::size_t>(q)]);
      if (!(std::abs(v) < 1.0)) return false;
    }
  return true;
}

}  // namespace

std::string to_string(ChangeType type) {
  switch (type) {
    case ChangeType::Mean: return "mean";
    case ChangeType::Variance: return "variance";
    case ChangeType::Correlation: return "correlation";
  }
  return "unknown";
}

ChangeType change_type_from_string(const std::string& name) {
  if (name == "mean") return ChangeType::Mean;
  if (name == "variance" || name == "var") return ChangeType::Variance;
  if (name == "correlation" || name == "cor") return ChangeType::Correlation;
  throw Error(ErrorKind::Schema, "unknown change type '" + name + "'");
}

void ChangeDistributionSpec::validate(Index dim) const {
  double total = 0.0;
  for (double p : type_probs) {
    if (!(p >= 0.0 && p <= 1.0))
      throw Error(ErrorKind::InvalidArgument, "type_probs entries must lie in [0, 1]");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw Error(ErrorKind::InvalidArgument, "type_probs must sum to 1");
  if (dim < 1) throw Error(ErrorKind::InvalidArgument, "dimension must be positive");
  if (sparsity_max && (*sparsity_max < 1 || *sparsity_max > dim))
    throw Error(ErrorKind::InvalidArgument, "sparsity_max must lie in [1, D]");
  check_range(mean_range, "mean_range");
  check_range(sdev_ranges[0], "sdev_ranges[0]");
  check_range(sdev_ranges[1], "sdev_ranges[1]");
  if (!(sdev_ranges[0].lo > 0.0) || !(sdev_ranges[1].lo > 0.0))
    throw Error(ErrorKind::InvalidArgument, "sdev_ranges must be strictly positive");
  check_range(corr_factor_range, "corr_factor_range");
  if (type_probs[2] > 0.0 && dim < 2)
    throw Error(ErrorKind::InvalidArgument, "correlation changes need at least two streams");
}

int ChangeDistributionSpec::resolved_sparsity_max(Index dim) const {
  if (sparsity_max) return *sparsity_max;
  return std::max<int>(1, static_cast<int>(dim / 2));
}

ChangeDistributionSpec ChangeDistributionSpec::only(ChangeType type) {
  ChangeDistributionSpec spec;
  spec.type_probs = {0.0, 0.0, 0.0};
  spec.type_probs[static_cast<std::size_t>(type)] = 1.0;
  return spec;
}

ChangeScenario sample_change(const ChangeDistributionSpec& spec, const CorrelationMatrix& base,
                             Rng& rng, Index lag) {
  if (lag < 0) throw Error(ErrorKind::InvalidArgument, "lag must be non-negative");
  if (base.dim() % (lag + 1) != 0)
    throw Error(ErrorKind::DimensionMismatch, "base dimension is not a multiple of lag + 1");
  const Index dim = base.dim() / (lag + 1);
  spec.validate(dim);
  const Index kmax = spec.resolved_sparsity_max(dim);

  ChangeScenario sc;
  sc.type = draw_type(spec.type_probs, rng);
  // A correlation change needs at least one pair of affected streams.
  const Index kmin = sc.type == ChangeType::Correlation ? 2 : 1;
  const Index khi = std::min(dim, std::max(kmin, kmax));
  std::uniform_int_distribution<Index> sparsity(kmin, khi);
  const Index k = sparsity(rng);
  sc.affected = draw_subset(dim, k, rng);

  switch (sc.type) {
    case ChangeType::Mean: {
      sc.mean_sizes.resize(k);
      const double shared = spec.equal_across_dims ? uniform_in(spec.mean_range, rng) : 0.0;
      for (Index i = 0; i < k; ++i)
        sc.mean_sizes(i) = spec.equal_across_dims ? shared : uniform_in(spec.mean_range, rng);
      return lag_expand(sc, dim, lag);
    }
    case ChangeType::Variance: {
      sc.sdev_factors.resize(k);
      const double shared = spec.equal_across_dims ? draw_sdev_factor(spec, rng) : 0.0;
      for (Index i = 0; i < k; ++i)
        sc.sdev_factors(i) = spec.equal_across_dims ? shared : draw_sdev_factor(spec, rng);
      return lag_expand(sc, dim, lag);
    }
    case ChangeType::Correlation: {
      for (int attempt = 0; attempt < kMaxCorrelationRedraws; ++attempt) {
        sc.corr_factors = draw_corr_factors(spec, k, rng);
        ChangeScenario expanded = lag_expand(sc, dim, lag);
        if (correlation_factors_admissible(base, expanded)) return expanded;
      }
      throw Error(ErrorKind::NoConvergence,
                  "correlation factors left (-1, 1) in every redraw; check corr_factor_range");
    }
  }
  return sc;
}

ChangeScenario lag_expand(const ChangeScenario& sc, Index dim, Index lag) {
  if (lag == 0) return sc;
  const Index k = sc.sparsity();
  const Index blocks = lag + 1;
  ChangeScenario out;
  out.type = sc.type;
  // Coordinate (block s, stream d) of the lag-extended vector sits at s * dim + d.
  for (Index s = 0; s < blocks; ++s)
    for (Index d : sc.affected) out.affected.push_back(s * dim + d);
  std::vector<Index> order(out.affected.size());
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    return out.affected[static_cast<std::size_t>(a)] < out.affected[static_cast<std::size_t>(b)];
  });
  std::vector<Index> sorted_affected;
  for (Index o : order) sorted_affected.push_back(out.affected[static_cast<std::size_t>(o)]);
  out.affected = sorted_affected;
  // Position in the original affected list for each expanded coordinate.
  auto source = [&](Index pos) { return order[static_cast<std::size_t>(pos)] % k; };
  const Index kk = k * blocks;
  if (sc.mean_sizes.size() == k) {
    out.mean_sizes.resize(kk);
    for (Index p = 0; p < kk; ++p) out.mean_sizes(p) = sc.mean_sizes(source(p));
  }
  if (sc.sdev_factors.size() == k) {
    out.sdev_factors.resize(kk);
    for (Index p = 0; p < kk; ++p) out.sdev_factors(p) = sc.sdev_factors(source(p));
  }
  if (sc.corr_factors.rows() == k) {
    out.corr_factors = Eigen::MatrixXd::Ones(kk, kk);
    for (Index p = 0; p < kk; ++p)
      for (Index q = 0; q < kk; ++q) {
        const Index sp = source(p);
        const Index sq = source(q);
        // The same stream at different lags keeps its autocorrelation.
        out.corr_factors(p, q) = sp == sq ? 1.0 : sc.corr_factors(sp, sq);
      }
  }
  return out;
}

PostChangeParams apply_change(const CorrelationMatrix& base, const ChangeScenario& sc,
                              double pd_floor) {
  const Index d = base.dim();
  for (Index a : sc.affected)
    if (a < 0 || a >= d) throw Error(ErrorKind::DimensionMismatch, "affected index out of range");
  PostChangeParams post{Eigen::VectorXd::Zero(d), base.matrix()};
  const Index k = sc.sparsity();
  switch (sc.type) {
    case ChangeType::Mean:
      if (sc.mean_sizes.size() != k)
        throw Error(ErrorKind::InvalidArgument, "mean change without sizes");
      for (Index p = 0; p < k; ++p) post.mean(sc.affected[static_cast<std::size_t>(p)]) = sc.mean_sizes(p);
      break;
    case ChangeType::Variance: {
      if (sc.sdev_factors.size() != k)
        throw Error(ErrorKind::InvalidArgument, "variance change without factors");
      Eigen::VectorXd c = Eigen::VectorXd::Ones(d);
      for (Index p = 0; p < k; ++p) c(sc.affected[static_cast<std::size_t>(p)]) = sc.sdev_factors(p);
      post.cov = c.asDiagonal() * base.matrix() * c.asDiagonal();
      break;
    }
    case ChangeType::Correlation: {
      if (sc.corr_factors.rows() != k || sc.corr_factors.cols() != k)
        throw Error(ErrorKind::InvalidArgument, "correlation change without factors");
      Eigen::MatrixXd r = base.matrix();
      for (Index p = 0; p < k; ++p)
        for (Index q = p + 1; q < k; ++q) {
          const Index i = sc.affected[static_cast<std::size_t>(p)];
          const Index j = sc.affected[static_cast<std::size_t>(q)];
          r(i, j) *= sc.corr_factors(p, q);
          r(j, i) = r(i, j);
        }
      post.cov = nearest_pd_correlation(r, pd_floor).matrix();
      break;
    }
  }
  return post;
}

Eigen::VectorXd projection_sensitivities(const EigenSystem& es, const PostChangeParams& post,
                                         const Divergence& divergence, double pd_floor) {
  const Index d = es.dim();
  if (post.mean.size() != d || post.cov.rows() != d || post.cov.cols() != d)
    throw Error(ErrorKind::DimensionMismatch, "post-change parameters do not match eigensystem");
  for (Index j = 0; j < d; ++j)
    if (!(es.values(j) > pd_floor))
      throw Error(ErrorKind::ZeroEigenvalue, "eigenvalue " + std::to_string(j) + " below floor");

  const Eigen::VectorXd means = es.vectors.transpose() * post.mean;
  const Eigen::VectorXd vars =
      (es.vectors.array() * (post.cov * es.vectors).array()).colwise().sum().transpose();
  Eigen::VectorXd h(d);
  for (Index j = 0; j < d; ++j) {
    const NormalParams p{0.0, std::sqrt(es.values(j))};
    const NormalParams q{means(j), std::sqrt(std::max(vars(j), 0.0))};
    h(j) = divergence ? divergence(p, q) : hellinger_normal(p, q);
  }
  return h;
}

}  // namespace tpca
