#include "tpca/tailor.hpp"

#include "tpca/error.hpp"

#include <algorithm>
#include <numeric>

namespace tpca {

namespace {

constexpr double kCutoffSlack = 1e-12;

// Sensitivities using Sigma1 - Sigma0, which is confined to the affected rows
// unless positive-definiteness repair spread it out.
Eigen::VectorXd sparse_sensitivities(const CorrelationMatrix& base, const EigenSystem& es,
                                     const PostChangeParams& post) {
  const Index d = es.dim();
  const Eigen::MatrixXd delta = post.cov - base.matrix();
  std::vector<Index> rows;
  for (Index i = 0; i < d; ++i)
    if (delta.row(i).cwiseAbs().maxCoeff() > 0.0) rows.push_back(i);

  Eigen::VectorXd vars = es.values;
  if (!rows.empty()) {
    const Index r = static_cast<Index>(rows.size());
    Eigen::MatrixXd delta_rows(r, d);
    Eigen::MatrixXd v_rows(r, d);
    for (Index p = 0; p < r; ++p) {
      delta_rows.row(p) = delta.row(rows[static_cast<std::size_t>(p)]);
      v_rows.row(p) = es.vectors.row(rows[static_cast<std::size_t>(p)]);
    }
    const Eigen::MatrixXd dv = delta_rows * es.vectors;  // r x d
    vars += (v_rows.array() * dv.array()).colwise().sum().transpose().matrix();
  }
  const Eigen::VectorXd means = es.vectors.transpose() * post.mean;
  Eigen::VectorXd h(d);
  for (Index j = 0; j < d; ++j)
    h(j) = hellinger_normal(0.0, std::sqrt(es.values(j)), means(j),
                            std::sqrt(std::max(vars(j), 0.0)));
  return h;
}

ProjectionSelection make_selection(const EigenSystem& es, std::vector<Index> indices) {
  ProjectionSelection sel;
  sel.eigenvalues.resize(static_cast<Index>(indices.size()));
  sel.eigenvectors.resize(es.dim(), static_cast<Index>(indices.size()));
  for (std::size_t i = 0; i < indices.size(); ++i) {
    sel.eigenvalues(static_cast<Index>(i)) = es.values(indices[i]);
    sel.eigenvectors.col(static_cast<Index>(i)) = es.vectors.col(indices[i]);
  }
  sel.indices = std::move(indices);
  return sel;
}

}  // namespace

ArgmaxEstimate estimate_argmax_probabilities(const CorrelationMatrix& base,
                                             const ChangeDistributionSpec& spec, int draws,
                                             Rng& rng, Index lag) {
  return estimate_argmax_probabilities(base, eigensystem(base), spec, draws, rng, lag);
}

ArgmaxEstimate estimate_argmax_probabilities(const CorrelationMatrix& base, const EigenSystem& es,
                                             const ChangeDistributionSpec& spec, int draws,
                                             Rng& rng, Index lag) {
  if (draws < 1) throw Error(ErrorKind::InvalidArgument, "draws must be >= 1");
  const Index d = base.dim();
  if (es.dim() != d) throw Error(ErrorKind::DimensionMismatch, "eigensystem does not match base");
  for (Index j = 0; j < d; ++j)
    if (!(es.values(j) > kPdFloor))
      throw Error(ErrorKind::ZeroEigenvalue, "base correlation has a vanishing eigenvalue");

  const std::uint64_t seed = rng();
  std::vector<Index> winners(static_cast<std::size_t>(draws));
  std::vector<int> types(static_cast<std::size_t>(draws));
  Eigen::MatrixXd sens(d, draws);
  parallel_for(static_cast<std::size_t>(draws), [&](std::size_t b) {
    Rng local = make_rng(seed, b);
    const ChangeScenario sc = sample_change(spec, base, local, lag);
    const PostChangeParams post = apply_change(base, sc);
    const Eigen::VectorXd h = sparse_sensitivities(base, es, post);
    Index arg = 0;
    for (Index j = 1; j < d; ++j)
      if (h(j) > h(arg)) arg = j;
    winners[b] = arg;
    types[b] = static_cast<int>(sc.type);
    sens.col(static_cast<Index>(b)) = h;
  });

  // Reduction in draw order keeps the result independent of scheduling.
  ArgmaxEstimate est;
  est.draws = draws;
  est.probs = Eigen::VectorXd::Zero(d);
  est.mean_sensitivity = Eigen::VectorXd::Zero(d);
  est.type_contrib = Eigen::MatrixXd::Zero(d, 3);
  est.type_mean_sensitivity = Eigen::MatrixXd::Zero(d, 3);
  Eigen::MatrixXi counts = Eigen::MatrixXi::Zero(d, 3);
  for (int b = 0; b < draws; ++b) {
    const auto bi = static_cast<std::size_t>(b);
    counts(winners[bi], types[bi]) += 1;
    est.type_counts(types[bi]) += 1;
    est.mean_sensitivity += sens.col(b);
    est.type_mean_sensitivity.col(types[bi]) += sens.col(b);
  }
  const double inv = 1.0 / static_cast<double>(draws);
  est.type_contrib = counts.cast<double>() * inv;
  est.probs = counts.rowwise().sum().cast<double>() * inv;
  est.mean_sensitivity *= inv;
  for (int c = 0; c < 3; ++c)
    if (est.type_counts(c) > 0) est.type_mean_sensitivity.col(c) /= est.type_counts(c);
  return est;
}

std::vector<Index> select_axes(const Eigen::VectorXd& probs, double cutoff) {
  if (!(cutoff >= 0.0 && cutoff <= 1.0))
    throw Error(ErrorKind::InvalidArgument, "cutoff must lie in [0, 1]");
  if (probs.size() == 0) throw Error(ErrorKind::InvalidArgument, "empty probability vector");
  std::vector<Index> order(static_cast<std::size_t>(probs.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    if (probs(a) != probs(b)) return probs(a) > probs(b);
    return a > b;
  });
  std::vector<Index> chosen;
  double total = 0.0;
  for (Index j : order) {
    chosen.push_back(j);
    total += probs(j);
    if (total >= cutoff - kCutoffSlack) break;
  }
  return chosen;
}

ProjectionSelection tailor(const CorrelationMatrix& base, const ChangeDistributionSpec& spec,
                           double cutoff, int draws, Rng& rng, Index lag) {
  const EigenSystem es = eigensystem(base);
  ArgmaxEstimate est = estimate_argmax_probabilities(base, es, spec, draws, rng, lag);
  ProjectionSelection sel = make_selection(es, select_axes(est.probs, cutoff));
  sel.estimate = std::move(est);
  sel.cutoff = cutoff;
  sel.lag = lag;
  return sel;
}

ProjectionSelection max_pca_selection(const EigenSystem& es, Index count) {
  if (count < 1 || count > es.dim())
    throw Error(ErrorKind::InvalidArgument, "projection count out of range");
  std::vector<Index> idx(static_cast<std::size_t>(count));
  std::iota(idx.begin(), idx.end(), Index{0});
  return make_selection(es, std::move(idx));
}

ProjectionSelection min_pca_selection(const EigenSystem& es, Index count) {
  if (count < 1 || count > es.dim())
    throw Error(ErrorKind::InvalidArgument, "projection count out of range");
  std::vector<Index> idx;
  for (Index j = es.dim() - 1; j >= es.dim() - count; --j) idx.push_back(j);
  return make_selection(es, std::move(idx));
}

}  // namespace tpca
