#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <random>
#include <thread>
#include <vector>

namespace tpca {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; maps (base, stream) to a well-mixed 64-bit seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept;

/// Independent generator for sub-task `stream` of a computation seeded by `base`.
inline Rng make_rng(std::uint64_t base, std::uint64_t stream = 0) {
  return Rng(derive_seed(base, stream));
}

Eigen::MatrixXd standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng);

/// Lower factor L with L L^T = cov. Falls back to a clipped eigen square root when
/// Cholesky fails on a numerically semi-definite input.
Eigen::MatrixXd covariance_factor(const Eigen::MatrixXd& cov);

/// rows x D draws from N(mean, L L^T).
Eigen::MatrixXd sample_normal_rows(Eigen::Index rows, const Eigen::VectorXd& mean,
                                   const Eigen::MatrixXd& factor, Rng& rng);

/// Worker count: explicit limit if set, else TPCA_THREADS, else hardware concurrency.
unsigned thread_count();
void set_thread_limit(unsigned threads);

/// Runs body(i) for i in [0, n) on up to thread_count() workers. Each index is
/// executed exactly once; results must be written to index-addressed storage.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(thread_count(), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next.store(n);
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace tpca
