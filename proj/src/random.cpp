#include "tpca/random.hpp"

#include <cstdlib>
#include <string>

namespace tpca {

namespace {
std::atomic<unsigned> g_thread_limit{0};
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Eigen::MatrixXd standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd out(rows, cols);
  // Row-major fill order so that the stream of draws maps to observations in time.
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = normal(rng);
  return out;
}

Eigen::MatrixXd covariance_factor(const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal();
}

Eigen::MatrixXd sample_normal_rows(Eigen::Index rows, const Eigen::VectorXd& mean,
                                   const Eigen::MatrixXd& factor, Rng& rng) {
  Eigen::MatrixXd z = standard_normal(rows, factor.cols(), rng);
  Eigen::MatrixXd x = z * factor.transpose();
  x.rowwise() += mean.transpose();
  return x;
}

unsigned thread_count() {
  if (unsigned limit = g_thread_limit.load(); limit > 0) return limit;
  if (const char* env = std::getenv("TPCA_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (...) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void set_thread_limit(unsigned threads) { g_thread_limit.store(threads); }

}  // namespace tpca
