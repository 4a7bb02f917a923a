#pragma once

#include "tpca/corrcore.hpp"
#include "tpca/mixmonitor.hpp"
#include "tpca/random.hpp"
#include "tpca/stats.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace tpca {

enum class CalibrationMode { ParametricNormal, BlockBootstrap };
std::string to_string(CalibrationMode mode);
CalibrationMode calibration_mode_from_string(const std::string& name);

struct CalibrationConfig {
  double alpha = 0.01;
  Index n = 100;  // horizon, in monitored steps
  double confidence = 0.95;
  int replicates = 2000;
  CalibrationMode mode = CalibrationMode::ParametricNormal;
  std::optional<Index> block_len;

  /// Throws InvalidArgument unless 0 < alpha < 1, 0 < confidence < 1, n >= 2,
  /// alpha * replicates >= 5 and block_len (if used) lies in [1, m].
  void validate(Index m) const;
  /// block_len, or max(25, 2 lag + 2) when unset.
  Index resolved_block_len(Index lag) const;
};

/// How a monitor is rebuilt from a (synthetic) training set. Projection monitors
/// re-estimate the eigensystem but keep the original axis indices.
struct MonitorTemplate {
  enum class Kind { Projection, Raw };
  Kind kind = Kind::Projection;
  std::vector<Index> axes;
  MonitorOptions options;

  static MonitorTemplate projection(std::vector<Index> axes, const MonitorOptions& options);
  static MonitorTemplate raw(const MonitorOptions& options);
};

MonitorModel build_monitor(const MonitorTemplate& tmpl, const Eigen::MatrixXd& training_raw);

/// Max over t <= n and k in the window of the corrected statistic for one replicate.
/// `monitoring` must hold n + lag raw rows.
double replicate_maximum(const MonitorTemplate& tmpl, const Eigen::MatrixXd& training,
                         const Eigen::MatrixXd& monitoring);

/// Moving-block bootstrap: blocks of `block_len` consecutive rows with uniformly
/// drawn starts in [0, m - block_len], concatenated and truncated to out_len rows.
Eigen::MatrixXd block_bootstrap_sample(const Eigen::MatrixXd& training, Index block_len,
                                       Index out_len, Rng& rng);

struct ThresholdChoice {
  double threshold = 0.0;
  long allowed = 0;     // largest admissible exceedance count r
  long exceedances = 0;  // replicate maxima >= threshold
};

/// Smallest-risk threshold such that at most r of the maxima reach it, where r is
/// the largest count with P(Binomial(B, alpha) <= r) <= 1 - confidence. The
/// threshold sits halfway between the r-th and (r+1)-th largest maxima.
/// Throws InsufficientReplicates when r < 1.
ThresholdChoice threshold_from_maxima(const std::vector<double>& maxima, double alpha,
                                      double confidence);

struct CalibrationResult {
  double threshold = 0.0;
  double pfa_estimate = 0.0;
  ConfidenceInterval pfa_ci;
  long exceedances = 0;
  long allowed_exceedances = 0;
  std::vector<double> replicate_maxima;
  CalibrationConfig config;
  Index block_len = 0;  // resolved, 0 in parametric mode
};

/// Bootstrap calibration of the alarm threshold for `tmpl` trained on `training_raw`.
CalibrationResult calibrate_threshold(const MonitorTemplate& tmpl,
                                      const Eigen::MatrixXd& training_raw,
                                      const CalibrationConfig& cfg, Rng& rng);

}  // namespace tpca
