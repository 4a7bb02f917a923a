#pragma once

#include "tpca/calibrate.hpp"
#include "tpca/changemodel.hpp"
#include "tpca/corrcore.hpp"
#include "tpca/mixmonitor.hpp"
#include "tpca/stats.hpp"
#include "tpca/tailor.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace tpca {

// ---------------------------------------------------------------------------
// Detectors

enum class DetectorKind { TPCA, MinPCA, MaxPCA, RawMixture };
std::string to_string(DetectorKind kind);
DetectorKind detector_kind_from_string(const std::string& name);

struct DetectorSpec {
  DetectorKind kind = DetectorKind::TPCA;
  double cutoff = 0.9;    // TPCA
  Index count = 1;        // MinPCA / MaxPCA
  double p0 = 1.0;        // RawMixture (projection detectors use p0 = 1)
  ChangeDistributionSpec change_spec;  // TPCA
  int tailor_draws = 10000;            // TPCA

  static DetectorSpec tpca(double cutoff, const ChangeDistributionSpec& spec, int draws = 10000);
  static DetectorSpec min_pca(Index count);
  static DetectorSpec max_pca(Index count);
  static DetectorSpec raw_mixture(double p0);

  /// e.g. "TPCA(c=0.9)", "MaxPCA(J=2)", "Mixture(p0=0.1)".
  std::string label() const;
};

/// A detector fitted to one training set.
struct PreparedDetector {
  MonitorModel model;
  MonitorTemplate templ;  // for calibration replicates
  std::optional<ProjectionSelection> selection;
};

PreparedDetector prepare_detector(const DetectorSpec& spec, const Eigen::MatrixXd& training,
                                  Index window, Rng& rng);

// ---------------------------------------------------------------------------
// Trials

struct TrialSpec {
  CorrelationMatrix base = CorrelationMatrix::identity(2);
  Index m = 100;
  Index n = 100;
  Index horizon = 0;  // monitoring length; 0 means 10 n
  Index window = 200;
  Index kappa = 0;
  DetectorSpec detector;
  std::optional<ChangeScenario> scenario;  // nullopt: no change
  std::uint64_t seed = 0;

  Index resolved_horizon() const { return horizon > 0 ? horizon : 10 * n; }
};

struct TrialOutcome {
  std::optional<Index> stopping_time;  // raw time of the alarm
  Index horizon = 0;
  Index kappa = 0;

  bool censored() const { return !stopping_time.has_value(); }
  bool false_alarm() const { return stopping_time && *stopping_time <= kappa; }
  std::optional<Index> delay() const {
    if (!stopping_time || *stopping_time <= kappa) return std::nullopt;
    return *stopping_time - kappa;
  }
};

/// Runs `model` on a fresh monitoring stream of `horizon` raw rows drawn from
/// N(0, base) up to time kappa and from `post` afterwards (standardized scale).
TrialOutcome run_monitoring_trial(const MonitorModel& model, const CorrelationMatrix& base,
                                  const std::optional<PostChangeParams>& post, Index kappa,
                                  Index horizon, Rng& rng);

/// Full trial: fresh training set, detector fit, monitoring against threshold b.
TrialOutcome run_trial(const TrialSpec& spec, double threshold);

struct EddEstimate {
  MeanEstimate delay;
  long detections = 0;
  long censored = 0;
  long false_alarms = 0;
};

/// Conditional mean delay E[T - kappa | T > kappa]; censored runs contribute
/// horizon - kappa. Throws TooFewDetections with fewer than `min_detections`
/// uncensored detections.
EddEstimate estimate_edd(const std::vector<TrialOutcome>& outcomes, long min_detections = 30);

struct PfaEstimate {
  double pfa = 0.0;
  ConfidenceInterval ci;
  long alarms = 0;
  long trials = 0;
};

/// Fraction of runs with an alarm at raw time <= n. Needs >= 100 runs.
PfaEstimate estimate_pfa(const std::vector<TrialOutcome>& outcomes, Index n);

// ---------------------------------------------------------------------------
// Bivariate propositions

struct PropositionViolation {
  double rho = 0.0;
  double x = 0.0;  // size parameter (mu1, a, ...)
  double y = 0.0;  // second size parameter where applicable (mu2)
  double h1 = 0.0;
  double h2 = 0.0;
  std::string expected;
};

struct PropositionCheck {
  std::string name;
  long checked = 0;
  long excluded = 0;  // grid points within the boundary tolerance
  std::vector<PropositionViolation> violations;
};

struct PropositionReport {
  double resolution = 0.05;
  double boundary_tol = 1e-6;
  std::vector<PropositionCheck> checks;

  long total_violations() const;
};

/// H_1, H_2 of the two principal projections of [[1, rho], [rho, 1]] under a change
/// of the means to (mu1, mu2) and of the covariance to
/// [[a11^2, a11 a22 a12 rho], [., a22^2]].
Eigen::Vector2d bivariate_sensitivities(double rho, double mu1, double mu2, double a11,
                                        double a22, double a12);

/// Checks the predicted sign of H_2 - H_1 on grids rho in +-{r, 2r, ..., <1}.
PropositionReport verify_bivariate_propositions(double resolution = 0.05,
                                                double boundary_tol = 1e-6);

/// Number of random 0-mean variance quadruples whose Hellinger ordering disagrees
/// with the ordering of |log variance ratio|.
long hellinger_lemma_violations(long samples, Rng& rng);

}  // namespace tpca

namespace tpca {

// ---------------------------------------------------------------------------
// Scenario grids

/// One grid cell: a change of `type` on `sparsity` uniformly chosen streams, all
/// with the same size (mean shift, sdev factor or correlation factor). No type
/// means no change; such cells report PFA over the horizon n.
struct GridCell {
  std::optional<ChangeType> type;
  Index sparsity = 1;
  double size = 0.0;
};

struct GridConfig {
  Index dim = 20;
  double alpha_d = 0.1;
  Index m = 100;
  Index n = 100;
  Index horizon = 0;  // 0 means 10 n
  Index window = 200;
  Index kappa = 0;
  int replicates = 500;
  CalibrationConfig calibration;
  std::optional<double> threshold;  // fixed threshold instead of calibration
  std::vector<DetectorSpec> detectors;
  std::vector<GridCell> cells;
  std::uint64_t seed = 1;

  void validate() const;
};

struct GridRow {
  std::string detector;
  std::string kind;
  double parameter = 0.0;
  std::string change_type;  // "none" for no-change cells
  Index sparsity = 0;
  double size = 0.0;
  double threshold = 0.0;
  int replicates = 0;
  std::optional<EddEstimate> edd;
  PfaEstimate pfa;  // no-change cells: P(T <= n); change cells: P(T <= kappa)
};

struct GridFailure {
  std::string detector;
  long cell = -1;  // -1: detector preparation or calibration failed
  std::string reason;
};

struct GridResult {
  std::vector<GridRow> rows;
  std::vector<GridFailure> failures;
};

/// Runs every detector on every cell. One base correlation and training set are
/// shared by all detectors; each detector is calibrated once (unless a fixed
/// threshold is given) and replicate r of a cell uses the same monitoring seed for
/// every detector. `on_row` is called as soon as a row is complete.
GridResult run_grid(const GridConfig& cfg,
                    const std::function<void(const GridRow&)>& on_row = {});

/// Draws the cell's change on `dim` streams.
ChangeScenario sample_cell_scenario(const GridCell& cell, Index dim, Rng& rng);

}  // namespace tpca
