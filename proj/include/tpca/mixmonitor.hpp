#pragma once

#include "tpca/corrcore.hpp"
#include "tpca/tailor.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace tpca {

inline constexpr double kVarFloor = 1e-12;
inline constexpr double kNoStatistic = -std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Lag extension

/// Concatenates the rows of `history` (oldest first) into one vector.
template <typename Derived>
Eigen::VectorXd lag_extend(const Eigen::MatrixBase<Derived>& history) {
  const Index rows = history.rows();
  const Index dim = history.cols();
  Eigen::VectorXd out(rows * dim);
  for (Index s = 0; s < rows; ++s) out.segment(s * dim, dim) = history.row(s).transpose();
  return out;
}

/// Row t of the result is (x_{t}, ..., x_{t+lag}) for consecutive input rows.
/// Throws InsufficientHistory when data has at most `lag` rows.
Eigen::MatrixXd lag_extend_rows(const Eigen::MatrixXd& data, Index lag);

// ---------------------------------------------------------------------------
// Per-stream statistics

/// Count, sum and sum of squares of a segment of one stream.
struct SegmentSums {
  double count = 0.0;
  double sum = 0.0;
  double sumsq = 0.0;

  double mean() const { return sum / count; }
  /// Maximum-likelihood variance (divisor = count).
  double variance() const {
    const double mu = sum / count;
    return std::max(0.0, sumsq / count - mu * mu);
  }
  SegmentSums& operator+=(const SegmentSums& o) {
    count += o.count;
    sum += o.sum;
    sumsq += o.sumsq;
    return *this;
  }
  friend SegmentSums operator+(SegmentSums a, const SegmentSums& b) { return a += b; }
  friend SegmentSums operator-(SegmentSums a, const SegmentSums& b) {
    a.count -= b.count;
    a.sum -= b.sum;
    a.sumsq -= b.sumsq;
    return a;
  }
};

SegmentSums segment_sums(std::span<const double> values);

/// Bartlett factor C(k, t) for training length m, candidate change k and time t:
///   2C = -(m+t) log(m+t) + (m+t) psi((m+t-1)/2)
///        + (m+k) log(m+k) - (m+k) psi((m+k-1)/2)
///        + (t-k) log(t-k) - (t-k) psi((t-k-1)/2).
double bartlett_correction(Index m, Index k, Index t);

/// Maximized log-likelihood ratio for a mean and/or variance change between the
/// segments `before` and `after`. Segment variances below `var_floor` are clamped
/// and counted in `*clamped`; with clamped == nullptr they throw DegenerateSegment.
double stream_llr(const SegmentSums& before, const SegmentSums& after, double var_floor = kVarFloor,
                  int* clamped = nullptr);

/// log(1 - p0 + p0 exp(x)) without overflow.
template <typename Scalar>
Scalar mixture_term(Scalar x, Scalar p0) {
  using std::exp;
  using std::expm1;
  using std::log;
  using std::log1p;
  if (p0 == Scalar(1)) return x;
  if (x > Scalar(0)) return x + log(p0 + (Scalar(1) - p0) * exp(-x));
  return log1p(p0 * expm1(x));
}

/// sum_d log(1 - p0 + p0 exp(llr_d / correction)).
double mixture_statistic(std::span<const double> llrs, double correction, double p0);

/// Monitoring statistics of one stream: frozen training sums, compensated running
/// sums of every monitored value and a ring buffer of the most recent w + 1 values.
class StreamStats {
 public:
  StreamStats(const SegmentSums& training, Index window);

  void push(double value);

  Index time() const noexcept { return time_; }
  Index window() const noexcept { return window_; }
  Index buffered() const noexcept { return static_cast<Index>(std::min<std::size_t>(filled_, ring_.size())); }
  Index capacity() const noexcept { return static_cast<Index>(ring_.size()); }
  const SegmentSums& training() const noexcept { return training_; }

  /// Value observed `lag` steps ago (0 = latest). Requires lag < buffered().
  double back(Index lag) const;
  /// Sums over (-m, t].
  SegmentSums total() const;
  /// Sums over the last `count` monitored values, (t - count, t].
  SegmentSums recent(Index count) const;

 private:
  SegmentSums training_;
  Index window_;
  Index time_ = 0;
  std::vector<double> ring_;
  std::size_t head_ = 0;  // slot of the next write
  std::size_t filled_ = 0;
  // Neumaier-compensated running sums of monitored values.
  double sum_ = 0.0, sum_c_ = 0.0;
  double sumsq_ = 0.0, sumsq_c_ = 0.0;
};

/// llr of a change at k given the stream up to its current time t.
/// Requires 2 <= t - k <= buffered() and m + k >= 2; throws DegenerateSegment.
double stream_llr(const StreamStats& stats, Index k);

// ---------------------------------------------------------------------------
// Monitor model

/// z = weights^T ((x - center) ./ scale).
struct Projection {
  Eigen::VectorXd center;
  Eigen::VectorXd scale;
  Eigen::MatrixXd weights;
};

struct MonitorOptions {
  double p0 = 1.0;
  Index window = 200;
  Index lag = 0;
  double threshold = std::numeric_limits<double>::infinity();
  double var_floor = kVarFloor;
};

struct MonitorModel {
  Projection projection;
  std::vector<Index> axes;  // principal axis (or raw stream) behind each monitored stream
  std::vector<SegmentSums> training;
  Index training_count = 0;  // m, counted in lag-extended rows
  Index raw_dim = 0;
  MonitorOptions options;

  Index streams() const noexcept { return static_cast<Index>(axes.size()); }
  Index extended_dim() const noexcept { return projection.center.size(); }
};

/// Projections onto `axes` of the eigensystem estimated from `training_raw`
/// (lag-extended by options.lag first).
MonitorModel make_projection_monitor(const Eigen::MatrixXd& training_raw,
                                     const std::vector<Index>& axes, const MonitorOptions& options);

/// Projections onto precomputed eigenpairs (e.g. from tailoring on the same training set).
MonitorModel make_selection_monitor(const Eigen::MatrixXd& training_raw,
                                    const ProjectionSelection& selection,
                                    const MonitorOptions& options);

/// Identity projection: each standardized stream is monitored directly.
MonitorModel make_raw_monitor(const Eigen::MatrixXd& training_raw, const MonitorOptions& options);

/// Standardized projections of one (lag-extended) observation.
Eigen::VectorXd project_observation(const MonitorModel& model, const Eigen::VectorXd& x);

struct StepResult {
  Index t = 0;
  double stat = kNoStatistic;
  Index argmax_k = -1;
  bool alarm = false;
  int warnings = 0;
};

/// Streaming evaluation of max_{k in K} Lambda^C_{k,t}(p0) with
/// K = {k >= 0 : 2 <= t - k <= w + 1}; alarm when the maximum reaches the threshold.
class Monitor {
 public:
  explicit Monitor(MonitorModel model);

  /// Feeds a raw observation. Returns nullopt while the lag history fills up.
  std::optional<StepResult> push(const Eigen::VectorXd& x_raw);
  /// Feeds an already projected observation.
  StepResult step_projected(const Eigen::VectorXd& z);

  Index time() const noexcept { return time_; }
  const MonitorModel& model() const noexcept { return model_; }
  const StreamStats& stream(Index d) const { return stats_[static_cast<std::size_t>(d)]; }
  /// Number of per-stream llr evaluations so far.
  std::uint64_t llr_evaluations() const noexcept { return llr_evaluations_; }

 private:
  MonitorModel model_;
  std::vector<StreamStats> stats_;
  std::deque<Eigen::VectorXd> history_;
  Index time_ = 0;
  std::uint64_t llr_evaluations_ = 0;
  std::vector<SegmentSums> post_;
  std::vector<SegmentSums> total_;
};

struct RunResult {
  std::optional<Index> stopping_time;  // nullopt: censored at the end of the stream
  std::vector<StepResult> trace;
};

using StreamSource = std::function<std::optional<Eigen::VectorXd>()>;

RunResult run_monitor(const MonitorModel& model, const StreamSource& source,
                      bool stop_on_alarm = true, bool keep_trace = true);
/// Rows of `stream` are raw observations in time order.
RunResult run_monitor(const MonitorModel& model, const Eigen::MatrixXd& stream,
                      bool stop_on_alarm = true, bool keep_trace = true);

/// max over all monitored t of the statistic (threshold ignored).
double max_statistic(const MonitorModel& model, const Eigen::MatrixXd& stream);

}  // namespace tpca
