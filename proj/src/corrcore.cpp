#include "tpca/corrcore.hpp"

#include "tpca/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tpca {

namespace {

// Eigenvalues below this are treated as zero when checking strict definiteness.
constexpr double kStrictPdTol = 1e-13;
constexpr double kSymmetryTol = 1e-10;
// Partial correlations are kept strictly inside (-1, 1) so that every vine
// level contributes a positive factor (1 - rho^2) to the determinant.
constexpr double kMaxPartialCorrelation = 1.0 - 1e-9;

void normalize_signs(Eigen::MatrixXd& vectors) {
  for (Index j = 0; j < vectors.cols(); ++j) {
    Index arg = 0;
    double best = -1.0;
    for (Index i = 0; i < vectors.rows(); ++i) {
      const double a = std::abs(vectors(i, j));
      if (a > best) {
        best = a;
        arg = i;
      }
    }
    if (vectors(arg, j) < 0.0) vectors.col(j) *= -1.0;
  }
}

bool is_feasible_correlation(const Eigen::MatrixXd& x, double eps) {
  for (Index i = 0; i < x.rows(); ++i) {
    if (x(i, i) != 1.0) return false;
    for (Index j = 0; j < x.cols(); ++j) {
      if (i == j) continue;
      if (!(std::abs(x(i, j)) < 1.0)) return false;
      if (std::abs(x(i, j) - x(j, i)) > kSymmetryTol) return false;
    }
  }
  return min_eigenvalue(x) >= eps;
}

// log of a Gamma(shape, 1) draw, stable for small shapes.
double log_gamma_draw(double shape, Rng& rng) {
  if (shape >= 1.0) {
    std::gamma_distribution<double> g(shape, 1.0);
    return std::log(g(rng));
  }
  std::gamma_distribution<double> g(shape + 1.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double uu = u(rng);
  while (uu <= 0.0) uu = u(rng);
  return std::log(g(rng)) + std::log(uu) / shape;
}

// 2 Beta(b, b) - 1 computed as tanh of half the log-ratio of two gamma draws.
double symmetric_beta_on_pm1(double b, Rng& rng) {
  const double l1 = log_gamma_draw(b, rng);
  const double l2 = log_gamma_draw(b, rng);
  const double rho = std::tanh(0.5 * (l1 - l2));
  return std::clamp(rho, -kMaxPartialCorrelation, kMaxPartialCorrelation);
}

}  // namespace

CorrelationMatrix CorrelationMatrix::from(const Eigen::MatrixXd& entries) {
  if (entries.rows() != entries.cols() || entries.rows() == 0)
    throw Error(ErrorKind::NotCorrelation, "matrix must be square and non-empty");
  if (!entries.allFinite()) throw Error(ErrorKind::NotCorrelation, "non-finite entries");
  const Index d = entries.rows();
  for (Index i = 0; i < d; ++i) {
    if (entries(i, i) != 1.0)
      throw Error(ErrorKind::NotCorrelation,
                  "diagonal entry " + std::to_string(i) + " is not 1");
    for (Index j = i + 1; j < d; ++j) {
      if (std::abs(entries(i, j) - entries(j, i)) > kSymmetryTol)
        throw Error(ErrorKind::NotCorrelation, "matrix is not symmetric");
      if (!(std::abs(entries(i, j)) < 1.0))
        throw Error(ErrorKind::DegenerateCorrelation,
                    "off-diagonal entry (" + std::to_string(i) + "," + std::to_string(j) +
                        ") outside (-1, 1)");
    }
  }
  Eigen::MatrixXd sym = 0.5 * (entries + entries.transpose());
  sym.diagonal().setOnes();
  if (!(min_eigenvalue(sym) > kStrictPdTol))
    throw Error(ErrorKind::DegenerateCorrelation, "matrix is not positive definite");
  return CorrelationMatrix(std::move(sym));
}

CorrelationMatrix CorrelationMatrix::identity(Index dim) {
  return CorrelationMatrix(Eigen::MatrixXd::Identity(dim, dim));
}

double min_eigenvalue(const Eigen::MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

TrainingSummary estimate_training(const Eigen::MatrixXd& data) {
  const Index m = data.rows();
  const Index d = data.cols();
  if (m < 2) throw Error(ErrorKind::InvalidArgument, "training needs at least 2 rows");
  if (d < 1) throw Error(ErrorKind::DimensionMismatch, "training has no columns");
  if (!data.allFinite()) throw Error(ErrorKind::InvalidArgument, "training has non-finite values");

  Eigen::VectorXd mean = data.colwise().mean().transpose();
  Eigen::MatrixXd centered = data.rowwise() - mean.transpose();
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(m);
  Eigen::VectorXd sdev = cov.diagonal().cwiseSqrt();
  for (Index j = 0; j < d; ++j)
    if (!(sdev(j) > 0.0))
      throw Error(ErrorKind::ConstantColumn, "column " + std::to_string(j) + " is constant");

  Eigen::VectorXd inv = sdev.cwiseInverse();
  Eigen::MatrixXd corr = inv.asDiagonal() * cov * inv.asDiagonal();
  corr = 0.5 * (corr + corr.transpose()).eval();
  corr.diagonal().setOnes();
  return TrainingSummary{std::move(mean), std::move(sdev), CorrelationMatrix::from(corr), m};
}

Eigen::MatrixXd standardize(const Eigen::MatrixXd& data, const TrainingSummary& summary) {
  if (data.cols() != summary.mean.size())
    throw Error(ErrorKind::DimensionMismatch, "data width does not match training summary");
  Eigen::MatrixXd u = data.rowwise() - summary.mean.transpose();
  return u * summary.sdev.cwiseInverse().asDiagonal();
}

EigenSystem symmetric_eigensystem(const Eigen::MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success)
    throw Error(ErrorKind::NoConvergence, "eigen decomposition failed");
  EigenSystem out;
  out.values = es.eigenvalues().reverse();
  out.vectors = es.eigenvectors().rowwise().reverse();
  normalize_signs(out.vectors);
  return out;
}

EigenSystem eigensystem(const CorrelationMatrix& corr) { return symmetric_eigensystem(corr.matrix()); }

CorrelationMatrix random_correlation(Index dim, double alpha_d, Rng& rng) {
  if (dim < 2) throw Error(ErrorKind::InvalidArgument, "random_correlation needs dim >= 2");
  if (!(alpha_d > 0.0)) throw Error(ErrorKind::InvalidArgument, "alpha_d must be positive");

  Eigen::MatrixXd r = Eigen::MatrixXd::Identity(dim, dim);
  for (Index k = 1; k < dim; ++k) {
    const double shape = alpha_d + 0.5 * static_cast<double>(dim - 1 - k);
    for (Index i = 0; i + k < dim; ++i) {
      const Index j = i + k;
      const double partial = symmetric_beta_on_pm1(shape, rng);
      double value = partial;
      if (k > 1) {
        // Invert the partial correlation given the block of intermediate variables.
        const Index s = k - 1;
        Eigen::LDLT<Eigen::MatrixXd> inner(r.block(i + 1, i + 1, s, s));
        const Eigen::VectorXd r1 = r.block(i + 1, i, s, 1);
        const Eigen::VectorXd r2 = r.block(i + 1, j, s, 1);
        const Eigen::VectorXd w1 = inner.solve(r1);
        const Eigen::VectorXd w2 = inner.solve(r2);
        const double resid1 = std::max(0.0, 1.0 - r1.dot(w1));
        const double resid2 = std::max(0.0, 1.0 - r2.dot(w2));
        value = r1.dot(w2) + partial * std::sqrt(resid1 * resid2);
        value = std::clamp(value, -kMaxPartialCorrelation, kMaxPartialCorrelation);
      }
      r(i, j) = value;
      r(j, i) = value;
    }
  }
  // Small alpha_d drives top-level partial correlations to +-1, leaving a
  // numerically singular matrix; lift its spectrum to the PD floor.
  if (!(min_eigenvalue(r) >= kPdFloor)) return nearest_pd_correlation(r, kPdFloor);
  return CorrelationMatrix::from(r);
}

CorrelationMatrix nearest_pd_correlation(const Eigen::MatrixXd& sym, double eps, int max_iter) {
  if (sym.rows() != sym.cols() || sym.rows() == 0)
    throw Error(ErrorKind::InvalidArgument, "nearest_pd_correlation: matrix must be square");
  if (!sym.allFinite())
    throw Error(ErrorKind::InvalidArgument, "nearest_pd_correlation: non-finite entries");
  if ((sym - sym.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol)
    throw Error(ErrorKind::InvalidArgument, "nearest_pd_correlation: input is not symmetric");
  if (!(eps > 0.0)) throw Error(ErrorKind::InvalidArgument, "eps must be positive");

  if (is_feasible_correlation(sym, eps)) return CorrelationMatrix::from(sym);

  // Alternating projections onto {lambda >= eps} and {unit diagonal}. Rescaling the
  // diagonal pulls the smallest eigenvalue slightly back under eps, so the loop
  // ends with a shrink towards the identity, which keeps the unit diagonal.
  Eigen::MatrixXd x = 0.5 * (sym + sym.transpose());
  x.diagonal().setOnes();
  for (int it = 0; it < max_iter; ++it) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(x);
    if (es.info() != Eigen::Success) break;
    const Eigen::VectorXd clipped = es.eigenvalues().cwiseMax(eps);
    x = es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
    const Eigen::VectorXd scale = x.diagonal().cwiseSqrt().cwiseInverse();
    x = scale.asDiagonal() * x * scale.asDiagonal();
    x = 0.5 * (x + x.transpose()).eval();
    x.diagonal().setOnes();
    if (is_feasible_correlation(x, eps)) return CorrelationMatrix::from(x);
    if (min_eigenvalue(x) > 0.5 * eps) break;
  }
  const double target = eps * (1.0 + 1e-6);
  const double lambda = min_eigenvalue(x);
  if (std::isfinite(lambda) && lambda < 1.0) {
    const double theta = std::max(0.0, (target - lambda) / (1.0 - lambda));
    x = (1.0 - theta) * x + theta * Eigen::MatrixXd::Identity(x.rows(), x.cols());
    x.diagonal().setOnes();
    if (is_feasible_correlation(x, eps)) return CorrelationMatrix::from(x);
  }
  throw Error(ErrorKind::NoConvergence,
              "nearest_pd_correlation did not converge in " + std::to_string(max_iter) +
                  " iterations");
}

Eigen::MatrixXd eigvec_asymptotic_cov(const EigenSystem& es, Index j, double n) {
  const Index d = es.dim();
  if (j < 0 || j >= d) throw Error(ErrorKind::InvalidArgument, "axis index out of range");
  if (!(n > 0.0)) throw Error(ErrorKind::InvalidArgument, "sample count must be positive");
  for (Index a = 0; a < d; ++a)
    for (Index b = a + 1; b < d; ++b)
      if (std::abs(es.values(a) - es.values(b)) <= 1e-10)
        throw Error(ErrorKind::DegenerateSpectrum, "eigenvalues are not distinct");

  const double lj = es.values(j);
  double factor = 0.0;
  for (Index l = 0; l < d; ++l) {
    if (l == j) continue;
    const double gap = lj - es.values(l);
    factor += es.values(l) / (gap * gap);
  }
  factor *= lj / n;
  const Eigen::VectorXd v = es.vectors.col(j);
  return factor * v * v.transpose();
}

}  // namespace tpca
