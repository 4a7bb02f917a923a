#include "tpca/calibrate.hpp"

#include "tpca/error.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

namespace tpca {

std::string to_string(CalibrationMode mode) {
  return mode == CalibrationMode::ParametricNormal ? "parametric" : "block";
}

CalibrationMode calibration_mode_from_string(const std::string& name) {
  if (name == "parametric" || name == "ParametricNormal") return CalibrationMode::ParametricNormal;
  if (name == "block" || name == "BlockBootstrap") return CalibrationMode::BlockBootstrap;
  throw Error(ErrorKind::InvalidArgument, "unknown calibration mode '" + name + "'");
}

void CalibrationConfig::validate(Index m) const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::InvalidArgument, "alpha must lie in (0, 1)");
  if (!(confidence > 0.0 && confidence < 1.0))
    throw Error(ErrorKind::InvalidArgument, "confidence must lie in (0, 1)");
  if (n < 2) throw Error(ErrorKind::InvalidArgument, "horizon n must be >= 2");
  if (replicates < 1) throw Error(ErrorKind::InvalidArgument, "replicates must be >= 1");
  if (alpha * replicates < 5.0)
    throw Error(ErrorKind::InvalidArgument,
                "alpha * replicates = " + std::to_string(alpha * replicates) + " < 5");
  if (mode == CalibrationMode::BlockBootstrap && block_len && (*block_len < 1 || *block_len > m))
    throw Error(ErrorKind::InvalidArgument, "block_len must lie in [1, m]");
}

Index CalibrationConfig::resolved_block_len(Index lag) const {
  return block_len ? *block_len : std::max<Index>(25, 2 * lag + 2);
}

MonitorTemplate MonitorTemplate::projection(std::vector<Index> axes, const MonitorOptions& options) {
  return MonitorTemplate{Kind::Projection, std::move(axes), options};
}

MonitorTemplate MonitorTemplate::raw(const MonitorOptions& options) {
  return MonitorTemplate{Kind::Raw, {}, options};
}

MonitorModel build_monitor(const MonitorTemplate& tmpl, const Eigen::MatrixXd& training_raw) {
  if (tmpl.kind == MonitorTemplate::Kind::Raw) return make_raw_monitor(training_raw, tmpl.options);
  return make_projection_monitor(training_raw, tmpl.axes, tmpl.options);
}

double replicate_maximum(const MonitorTemplate& tmpl, const Eigen::MatrixXd& training,
                         const Eigen::MatrixXd& monitoring) {
  MonitorTemplate unbounded = tmpl;
  unbounded.options.threshold = std::numeric_limits<double>::infinity();
  return max_statistic(build_monitor(unbounded, training), monitoring);
}

Eigen::MatrixXd block_bootstrap_sample(const Eigen::MatrixXd& training, Index block_len,
                                       Index out_len, Rng& rng) {
  const Index m = training.rows();
  if (block_len < 1 || block_len > m)
    throw Error(ErrorKind::InvalidArgument, "block_len must lie in [1, m]");
  if (out_len < 0) throw Error(ErrorKind::InvalidArgument, "out_len must be >= 0");
  std::uniform_int_distribution<Index> start(0, m - block_len);
  Eigen::MatrixXd out(out_len, training.cols());
  for (Index row = 0; row < out_len;) {
    const Index s = start(rng);
    const Index take = std::min(block_len, out_len - row);
    out.middleRows(row, take) = training.middleRows(s, take);
    row += take;
  }
  return out;
}

ThresholdChoice threshold_from_maxima(const std::vector<double>& maxima, double alpha,
                                      double confidence) {
  const long b = static_cast<long>(maxima.size());
  const long r = max_allowed_exceedances(b, alpha, confidence);
  if (r < 1)
    throw Error(ErrorKind::InsufficientReplicates,
                "with " + std::to_string(b) +
                    " replicates the confidence-adjusted quantile is the sample maximum");
  std::vector<double> sorted = maxima;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const double upper = sorted[static_cast<std::size_t>(r - 1)];
  const double lower = sorted[static_cast<std::size_t>(r)];
  ThresholdChoice out;
  out.allowed = r;
  if (upper > lower && std::isfinite(upper) && std::isfinite(lower))
    out.threshold = lower + (upper - lower) / 2.0;
  else
    out.threshold = std::nextafter(lower, std::numeric_limits<double>::infinity());
  out.exceedances = static_cast<long>(
      std::count_if(maxima.begin(), maxima.end(), [&](double x) { return x >= out.threshold; }));
  return out;
}

CalibrationResult calibrate_threshold(const MonitorTemplate& tmpl,
                                      const Eigen::MatrixXd& training_raw,
                                      const CalibrationConfig& cfg, Rng& rng) {
  const Index m = training_raw.rows();
  cfg.validate(m);
  const Index lag = tmpl.options.lag;
  const Index mon_len = cfg.n + lag;

  CalibrationResult result;
  result.config = cfg;
  result.replicate_maxima.assign(static_cast<std::size_t>(cfg.replicates), 0.0);

  const std::uint64_t seed = rng();
  if (cfg.mode == CalibrationMode::ParametricNormal) {
    const TrainingSummary summary = estimate_training(training_raw);
    const Eigen::MatrixXd cov =
        summary.sdev.asDiagonal() * summary.corr.matrix() * summary.sdev.asDiagonal();
    const Eigen::MatrixXd factor = covariance_factor(cov);
    parallel_for(static_cast<std::size_t>(cfg.replicates), [&](std::size_t i) {
      Rng local = make_rng(seed, i);
      const Eigen::MatrixXd train = sample_normal_rows(m, summary.mean, factor, local);
      const Eigen::MatrixXd mon = sample_normal_rows(mon_len, summary.mean, factor, local);
      result.replicate_maxima[i] = replicate_maximum(tmpl, train, mon);
    });
  } else {
    result.block_len = cfg.resolved_block_len(lag);
    if (result.block_len > m) throw Error(ErrorKind::InvalidArgument, "block_len exceeds m");
    parallel_for(static_cast<std::size_t>(cfg.replicates), [&](std::size_t i) {
      Rng local = make_rng(seed, i);
      const Eigen::MatrixXd train = block_bootstrap_sample(training_raw, result.block_len, m, local);
      const Eigen::MatrixXd mon =
          block_bootstrap_sample(training_raw, result.block_len, mon_len, local);
      result.replicate_maxima[i] = replicate_maximum(tmpl, train, mon);
    });
  }

  const ThresholdChoice choice =
      threshold_from_maxima(result.replicate_maxima, cfg.alpha, cfg.confidence);
  result.threshold = choice.threshold;
  result.allowed_exceedances = choice.allowed;
  result.exceedances = choice.exceedances;
  result.pfa_estimate = static_cast<double>(choice.exceedances) / cfg.replicates;
  result.pfa_ci = clopper_pearson(choice.exceedances, cfg.replicates, 0.95);
  return result;
}

}  // namespace tpca
