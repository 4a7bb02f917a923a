#include "tpca/mixmonitor.hpp"

#include "tpca/error.hpp"
#include "tpca/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace tpca {

namespace {

// n log n - n psi((n - 1) / 2), the per-segment term of 2C.
double bartlett_term(double n) { return n * std::log(n) - n * digamma((n - 1.0) / 2.0); }

void neumaier_add(double& sum, double& comp, double x) {
  const double t = sum + x;
  if (std::abs(sum) >= std::abs(x))
    comp += (sum - t) + x;
  else
    comp += (x - t) + sum;
  sum = t;
}

double clamped_variance(const SegmentSums& s, double floor, int* clamped) {
  const double v = s.variance();
  if (v >= floor) return v;
  if (clamped == nullptr)
    throw Error(ErrorKind::DegenerateSegment,
                "segment variance " + std::to_string(v) + " below floor");
  ++*clamped;
  return floor;
}

MonitorModel finish_model(const Eigen::MatrixXd& training_ext, const TrainingSummary& summary,
                          Eigen::MatrixXd weights, std::vector<Index> axes, Index raw_dim,
                          const MonitorOptions& options) {
  MonitorModel model;
  model.projection = Projection{summary.mean, summary.sdev, std::move(weights)};
  model.axes = std::move(axes);
  model.training_count = training_ext.rows();
  model.raw_dim = raw_dim;
  model.options = options;
  const Eigen::MatrixXd z = standardize(training_ext, summary) * model.projection.weights;
  model.training.resize(static_cast<std::size_t>(z.cols()));
  for (Index j = 0; j < z.cols(); ++j) {
    const Eigen::VectorXd col = z.col(j);
    model.training[static_cast<std::size_t>(j)] =
        segment_sums(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())));
  }
  return model;
}

void check_options(const MonitorOptions& options) {
  if (!(options.p0 > 0.0 && options.p0 <= 1.0))
    throw Error(ErrorKind::InvalidArgument, "p0 must lie in (0, 1]");
  if (options.window < 2) throw Error(ErrorKind::InvalidArgument, "window must be >= 2");
  if (options.lag < 0) throw Error(ErrorKind::InvalidArgument, "lag must be >= 0");
  if (!(options.var_floor > 0.0)) throw Error(ErrorKind::InvalidArgument, "var_floor must be > 0");
  if (std::isnan(options.threshold)) throw Error(ErrorKind::InvalidArgument, "threshold is NaN");
}

}  // namespace

Eigen::MatrixXd lag_extend_rows(const Eigen::MatrixXd& data, Index lag) {
  if (lag < 0) throw Error(ErrorKind::InvalidArgument, "lag must be >= 0");
  if (data.rows() <= lag)
    throw Error(ErrorKind::InsufficientHistory,
                "need more than " + std::to_string(lag) + " rows for lag extension");
  if (lag == 0) return data;
  const Index d = data.cols();
  const Index rows = data.rows() - lag;
  Eigen::MatrixXd out(rows, d * (lag + 1));
  for (Index s = 0; s <= lag; ++s) out.middleCols(s * d, d) = data.middleRows(s, rows);
  return out;
}

SegmentSums segment_sums(std::span<const double> values) {
  SegmentSums s;
  for (double v : values) {
    s.count += 1.0;
    s.sum += v;
    s.sumsq += v * v;
  }
  return s;
}

double bartlett_correction(Index m, Index k, Index t) {
  if (m + t < 2 || m + k < 2 || t - k < 2)
    throw Error(ErrorKind::InvalidArgument, "bartlett_correction outside its domain");
  const double two_c = -bartlett_term(static_cast<double>(m + t)) +
                       bartlett_term(static_cast<double>(m + k)) +
                       bartlett_term(static_cast<double>(t - k));
  return two_c / 2.0;
}

double stream_llr(const SegmentSums& before, const SegmentSums& after, double var_floor,
                  int* clamped) {
  const SegmentSums all = before + after;
  const double v_all = clamped_variance(all, var_floor, clamped);
  const double v_before = clamped_variance(before, var_floor, clamped);
  const double v_after = clamped_variance(after, var_floor, clamped);
  return -0.5 * before.count * std::log(v_before / v_all) -
         0.5 * after.count * std::log(v_after / v_all);
}

double mixture_statistic(std::span<const double> llrs, double correction, double p0) {
  double total = 0.0;
  for (double l : llrs) total += mixture_term(l / correction, p0);
  return total;
}

// ---------------------------------------------------------------------------

StreamStats::StreamStats(const SegmentSums& training, Index window)
    : training_(training), window_(window), ring_(static_cast<std::size_t>(window + 1), 0.0) {
  if (window < 2) throw Error(ErrorKind::InvalidArgument, "window must be >= 2");
}

void StreamStats::push(double value) {
  ring_[head_] = value;
  head_ = (head_ + 1) % ring_.size();
  ++filled_;
  ++time_;
  neumaier_add(sum_, sum_c_, value);
  neumaier_add(sumsq_, sumsq_c_, value * value);
}

double StreamStats::back(Index lag) const {
  if (lag < 0 || lag >= buffered())
    throw Error(ErrorKind::InvalidArgument, "value is outside the monitoring window");
  const std::size_t n = ring_.size();
  return ring_[(head_ + n - 1 - static_cast<std::size_t>(lag)) % n];
}

SegmentSums StreamStats::total() const {
  SegmentSums s = training_;
  s.count += static_cast<double>(time_);
  s.sum += sum_ + sum_c_;
  s.sumsq += sumsq_ + sumsq_c_;
  return s;
}

SegmentSums StreamStats::recent(Index count) const {
  if (count < 0 || count > buffered())
    throw Error(ErrorKind::InvalidArgument, "segment is outside the monitoring window");
  SegmentSums s;
  for (Index i = 0; i < count; ++i) {
    const double v = back(i);
    s.count += 1.0;
    s.sum += v;
    s.sumsq += v * v;
  }
  return s;
}

double stream_llr(const StreamStats& stats, Index k) {
  const Index t = stats.time();
  const Index m = static_cast<Index>(stats.training().count);
  if (t - k < 2 || m + k < 2 || t - k > stats.buffered())
    throw Error(ErrorKind::InvalidArgument, "candidate change-point outside the window");
  const SegmentSums after = stats.recent(t - k);
  return stream_llr(stats.total() - after, after);
}

// ---------------------------------------------------------------------------

MonitorModel make_projection_monitor(const Eigen::MatrixXd& training_raw,
                                     const std::vector<Index>& axes, const MonitorOptions& options) {
  check_options(options);
  const Eigen::MatrixXd ext = lag_extend_rows(training_raw, options.lag);
  const TrainingSummary summary = estimate_training(ext);
  const EigenSystem es = eigensystem(summary.corr);
  if (axes.empty()) throw Error(ErrorKind::InvalidArgument, "no axes to monitor");
  Eigen::MatrixXd weights(ext.cols(), static_cast<Index>(axes.size()));
  for (std::size_t i = 0; i < axes.size(); ++i) {
    const Index j = axes[i];
    if (j < 0 || j >= es.dim()) throw Error(ErrorKind::InvalidArgument, "axis index out of range");
    if (!(es.values(j) > kPdFloor))
      throw Error(ErrorKind::ZeroEigenvalue, "axis " + std::to_string(j) + " has zero variance");
    weights.col(static_cast<Index>(i)) = es.vectors.col(j) / std::sqrt(es.values(j));
  }
  return finish_model(ext, summary, std::move(weights), axes, training_raw.cols(), options);
}

MonitorModel make_selection_monitor(const Eigen::MatrixXd& training_raw,
                                    const ProjectionSelection& selection,
                                    const MonitorOptions& options) {
  check_options(options);
  if (selection.lag != options.lag)
    throw Error(ErrorKind::InvalidArgument, "selection lag differs from monitor lag");
  const Eigen::MatrixXd ext = lag_extend_rows(training_raw, options.lag);
  if (selection.eigenvectors.rows() != ext.cols())
    throw Error(ErrorKind::DimensionMismatch, "selection dimension " +
                                                  std::to_string(selection.eigenvectors.rows()) +
                                                  " does not match training dimension " +
                                                  std::to_string(ext.cols()));
  if (selection.indices.empty()) throw Error(ErrorKind::InvalidArgument, "empty selection");
  const TrainingSummary summary = estimate_training(ext);
  Eigen::MatrixXd weights = selection.eigenvectors;
  for (Index i = 0; i < weights.cols(); ++i) {
    if (!(selection.eigenvalues(i) > kPdFloor))
      throw Error(ErrorKind::ZeroEigenvalue, "selected axis has zero variance");
    weights.col(i) /= std::sqrt(selection.eigenvalues(i));
  }
  return finish_model(ext, summary, std::move(weights), selection.indices, training_raw.cols(),
                      options);
}

MonitorModel make_raw_monitor(const Eigen::MatrixXd& training_raw, const MonitorOptions& options) {
  check_options(options);
  const Eigen::MatrixXd ext = lag_extend_rows(training_raw, options.lag);
  const TrainingSummary summary = estimate_training(ext);
  std::vector<Index> axes(static_cast<std::size_t>(ext.cols()));
  std::iota(axes.begin(), axes.end(), Index{0});
  return finish_model(ext, summary, Eigen::MatrixXd::Identity(ext.cols(), ext.cols()),
                      std::move(axes), training_raw.cols(), options);
}

Eigen::VectorXd project_observation(const MonitorModel& model, const Eigen::VectorXd& x) {
  const Projection& p = model.projection;
  if (x.size() != p.center.size())
    throw Error(ErrorKind::DimensionMismatch, "observation has dimension " +
                                                  std::to_string(x.size()) + ", expected " +
                                                  std::to_string(p.center.size()));
  return p.weights.transpose() * (x - p.center).cwiseQuotient(p.scale);
}

// ---------------------------------------------------------------------------

Monitor::Monitor(MonitorModel model) : model_(std::move(model)) {
  check_options(model_.options);
  if (static_cast<Index>(model_.training.size()) != model_.streams())
    throw Error(ErrorKind::DimensionMismatch, "training sums do not match monitored streams");
  stats_.reserve(model_.training.size());
  for (const SegmentSums& s : model_.training) stats_.emplace_back(s, model_.options.window);
  post_.resize(model_.training.size());
  total_.resize(model_.training.size());
}

std::optional<StepResult> Monitor::push(const Eigen::VectorXd& x_raw) {
  const Index lag = model_.options.lag;
  if (x_raw.size() != model_.raw_dim)
    throw Error(ErrorKind::DimensionMismatch, "observation has dimension " +
                                                  std::to_string(x_raw.size()) + ", expected " +
                                                  std::to_string(model_.raw_dim));
  if (lag == 0) return step_projected(project_observation(model_, x_raw));
  history_.push_back(x_raw);
  if (static_cast<Index>(history_.size()) > lag + 1) history_.pop_front();
  if (static_cast<Index>(history_.size()) <= lag) return std::nullopt;
  Eigen::MatrixXd rows(lag + 1, model_.raw_dim);
  for (Index s = 0; s <= lag; ++s) rows.row(s) = history_[static_cast<std::size_t>(s)].transpose();
  return step_projected(project_observation(model_, lag_extend(rows)));
}

StepResult Monitor::step_projected(const Eigen::VectorXd& z) {
  const Index streams = model_.streams();
  if (z.size() != streams)
    throw Error(ErrorKind::DimensionMismatch, "projected observation has wrong dimension");
  for (Index d = 0; d < streams; ++d) stats_[static_cast<std::size_t>(d)].push(z(d));
  const Index t = ++time_;

  StepResult out;
  out.t = t;
  if (t < 2) return out;

  const Index m = model_.training_count;
  const Index w = model_.options.window;
  const double p0 = model_.options.p0;
  const double floor = model_.options.var_floor;
  const Index k_min = std::max<Index>({Index{0}, t - w - 1, 2 - m});
  const double term_total = bartlett_term(static_cast<double>(m + t));

  for (Index d = 0; d < streams; ++d) {
    post_[static_cast<std::size_t>(d)] = SegmentSums{};
    total_[static_cast<std::size_t>(d)] = stats_[static_cast<std::size_t>(d)].total();
  }

  // Walk k from t - 1 downwards, growing the post-change segment (k, t] one value
  // at a time from the ring buffer.
  for (Index k = t - 1; k >= k_min; --k) {
    for (Index d = 0; d < streams; ++d) {
      const double v = stats_[static_cast<std::size_t>(d)].back(t - 1 - k);
      SegmentSums& post = post_[static_cast<std::size_t>(d)];
      post.count += 1.0;
      post.sum += v;
      post.sumsq += v * v;
    }
    if (t - k < 2) continue;
    const double two_c = -term_total + bartlett_term(static_cast<double>(m + k)) +
                         bartlett_term(static_cast<double>(t - k));
    const double c = two_c / 2.0;
    double lambda = 0.0;
    for (Index d = 0; d < streams; ++d) {
      const SegmentSums& post = post_[static_cast<std::size_t>(d)];
      const double llr =
          stream_llr(total_[static_cast<std::size_t>(d)] - post, post, floor, &out.warnings);
      lambda += mixture_term(llr / c, p0);
    }
    llr_evaluations_ += static_cast<std::uint64_t>(streams);
    if (lambda > out.stat) {
      out.stat = lambda;
      out.argmax_k = k;
    }
  }
  out.alarm = out.stat >= model_.options.threshold;
  return out;
}

// ---------------------------------------------------------------------------

RunResult run_monitor(const MonitorModel& model, const StreamSource& source, bool stop_on_alarm,
                      bool keep_trace) {
  Monitor monitor(model);
  RunResult result;
  while (auto x = source()) {
    const std::optional<StepResult> step = monitor.push(*x);
    if (!step) continue;
    if (keep_trace) result.trace.push_back(*step);
    if (step->alarm && !result.stopping_time) {
      result.stopping_time = step->t;
      if (stop_on_alarm) break;
    }
  }
  return result;
}

RunResult run_monitor(const MonitorModel& model, const Eigen::MatrixXd& stream, bool stop_on_alarm,
                      bool keep_trace) {
  Index row = 0;
  return run_monitor(
      model,
      [&]() -> std::optional<Eigen::VectorXd> {
        if (row >= stream.rows()) return std::nullopt;
        return Eigen::VectorXd(stream.row(row++).transpose());
      },
      stop_on_alarm, keep_trace);
}

double max_statistic(const MonitorModel& model, const Eigen::MatrixXd& stream) {
  Monitor monitor(model);
  double best = kNoStatistic;
  for (Index i = 0; i < stream.rows(); ++i) {
    const std::optional<StepResult> step = monitor.push(stream.row(i).transpose());
    if (step) best = std::max(best, step->stat);
  }
  return best;
}

}  // namespace tpca
