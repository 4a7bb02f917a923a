#include "tpca/evalharness.hpp"

#include "tpca/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace tpca {

namespace {

std::string format_number(double x) {
  std::ostringstream os;
  os << x;
  return os.str();
}

std::vector<Index> uniform_subset(Index dim, Index k, Rng& rng) {
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

// Grid of multiples of `step` in [lo, hi], built from integers to avoid drift.
std::vector<double> grid(double lo, double hi, double step) {
  std::vector<double> out;
  const long first = static_cast<long>(std::ceil(lo / step - 1e-9));
  const long last = static_cast<long>(std::floor(hi / step + 1e-9));
  for (long i = first; i <= last; ++i) out.push_back(static_cast<double>(i) * step);
  return out;
}

std::vector<double> rho_grid(double resolution) {
  std::vector<double> out;
  for (double r : grid(resolution, 1.0 - 1e-9, resolution)) {
    if (r >= 1.0 - 1e-9) continue;
    out.push_back(-r);
    out.push_back(r);
  }
  std::sort(out.begin(), out.end());
  return out;
}

enum class Order { Greater, Less, Equal };

void record(PropositionCheck& check, double rho, double x, double y, const Eigen::Vector2d& h,
            Order expected) {
  ++check.checked;
  bool ok = false;
  const char* label = "";
  switch (expected) {
    case Order::Greater:
      ok = h(1) > h(0);
      label = "H2 > H1";
      break;
    case Order::Less:
      ok = h(1) < h(0);
      label = "H2 < H1";
      break;
    case Order::Equal:
      ok = std::abs(h(1) - h(0)) < 1e-12;
      label = "H2 = H1";
      break;
  }
  if (!ok) check.violations.push_back(PropositionViolation{rho, x, y, h(0), h(1), label});
}

}  // namespace

// ---------------------------------------------------------------------------

std::string to_string(DetectorKind kind) {
  switch (kind) {
    case DetectorKind::TPCA: return "tpca";
    case DetectorKind::MinPCA: return "min_pca";
    case DetectorKind::MaxPCA: return "max_pca";
    case DetectorKind::RawMixture: return "mixture";
  }
  return "unknown";
}

DetectorKind detector_kind_from_string(const std::string& name) {
  if (name == "tpca") return DetectorKind::TPCA;
  if (name == "min_pca") return DetectorKind::MinPCA;
  if (name == "max_pca") return DetectorKind::MaxPCA;
  if (name == "mixture" || name == "raw") return DetectorKind::RawMixture;
  throw Error(ErrorKind::InvalidArgument, "unknown detector kind '" + name + "'");
}

DetectorSpec DetectorSpec::tpca(double cutoff, const ChangeDistributionSpec& spec, int draws) {
  DetectorSpec d;
  d.kind = DetectorKind::TPCA;
  d.cutoff = cutoff;
  d.change_spec = spec;
  d.tailor_draws = draws;
  return d;
}

DetectorSpec DetectorSpec::min_pca(Index count) {
  DetectorSpec d;
  d.kind = DetectorKind::MinPCA;
  d.count = count;
  return d;
}

DetectorSpec DetectorSpec::max_pca(Index count) {
  DetectorSpec d;
  d.kind = DetectorKind::MaxPCA;
  d.count = count;
  return d;
}

DetectorSpec DetectorSpec::raw_mixture(double p0) {
  DetectorSpec d;
  d.kind = DetectorKind::RawMixture;
  d.p0 = p0;
  return d;
}

std::string DetectorSpec::label() const {
  switch (kind) {
    case DetectorKind::TPCA: return "TPCA(c=" + format_number(cutoff) + ")";
    case DetectorKind::MinPCA: return "MinPCA(J=" + std::to_string(count) + ")";
    case DetectorKind::MaxPCA: return "MaxPCA(J=" + std::to_string(count) + ")";
    case DetectorKind::RawMixture: return "Mixture(p0=" + format_number(p0) + ")";
  }
  return "unknown";
}

PreparedDetector prepare_detector(const DetectorSpec& spec, const Eigen::MatrixXd& training,
                                  Index window, Rng& rng) {
  MonitorOptions opts;
  opts.window = window;
  PreparedDetector out;
  switch (spec.kind) {
    case DetectorKind::TPCA: {
      const TrainingSummary summary = estimate_training(training);
      ProjectionSelection sel =
          tailor(summary.corr, spec.change_spec, spec.cutoff, spec.tailor_draws, rng);
      out.model = make_selection_monitor(training, sel, opts);
      out.templ = MonitorTemplate::projection(sel.indices, opts);
      out.selection = std::move(sel);
      break;
    }
    case DetectorKind::MinPCA:
    case DetectorKind::MaxPCA: {
      const Index d = training.cols();
      if (spec.count < 1 || spec.count > d)
        throw Error(ErrorKind::InvalidArgument, "projection count must lie in [1, D]");
      const TrainingSummary summary = estimate_training(training);
      const EigenSystem es = eigensystem(summary.corr);
      ProjectionSelection sel = spec.kind == DetectorKind::MaxPCA
                                    ? max_pca_selection(es, spec.count)
                                    : min_pca_selection(es, spec.count);
      out.model = make_selection_monitor(training, sel, opts);
      out.templ = MonitorTemplate::projection(sel.indices, opts);
      out.selection = std::move(sel);
      break;
    }
    case DetectorKind::RawMixture:
      opts.p0 = spec.p0;
      out.model = make_raw_monitor(training, opts);
      out.templ = MonitorTemplate::raw(opts);
      break;
  }
  return out;
}

// ---------------------------------------------------------------------------

TrialOutcome run_monitoring_trial(const MonitorModel& model, const CorrelationMatrix& base,
                                  const std::optional<PostChangeParams>& post, Index kappa,
                                  Index horizon, Rng& rng) {
  const Index d = base.dim();
  if (model.raw_dim != d) throw Error(ErrorKind::DimensionMismatch, "model does not match base");
  if (kappa < 0) throw Error(ErrorKind::InvalidArgument, "kappa must be >= 0");
  const Eigen::MatrixXd pre_factor = covariance_factor(base.matrix());
  Eigen::MatrixXd post_factor;
  if (post) post_factor = covariance_factor(post->cov);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(d);

  Index t = 0;
  const StreamSource source = [&]() -> std::optional<Eigen::VectorXd> {
    if (t >= horizon) return std::nullopt;
    ++t;
    if (post && t > kappa)
      return Eigen::VectorXd(sample_normal_rows(1, post->mean, post_factor, rng).row(0).transpose());
    return Eigen::VectorXd(sample_normal_rows(1, zero, pre_factor, rng).row(0).transpose());
  };
  const RunResult run = run_monitor(model, source, true, false);

  TrialOutcome out;
  out.horizon = horizon;
  out.kappa = kappa;
  if (run.stopping_time) out.stopping_time = *run.stopping_time + model.options.lag;
  return out;
}

TrialOutcome run_trial(const TrialSpec& spec, double threshold) {
  Rng rng = make_rng(spec.seed);
  const Eigen::MatrixXd training = sample_normal_rows(
      spec.m, Eigen::VectorXd::Zero(spec.base.dim()), covariance_factor(spec.base.matrix()), rng);
  PreparedDetector det = prepare_detector(spec.detector, training, spec.window, rng);
  det.model.options.threshold = threshold;
  std::optional<PostChangeParams> post;
  if (spec.scenario) post = apply_change(spec.base, *spec.scenario);
  return run_monitoring_trial(det.model, spec.base, post, spec.kappa, spec.resolved_horizon(), rng);
}

EddEstimate estimate_edd(const std::vector<TrialOutcome>& outcomes, long min_detections) {
  EddEstimate out;
  std::vector<double> delays;
  for (const TrialOutcome& o : outcomes) {
    if (o.false_alarm()) {
      ++out.false_alarms;
    } else if (o.censored()) {
      ++out.censored;
      delays.push_back(static_cast<double>(o.horizon - o.kappa));
    } else {
      ++out.detections;
      delays.push_back(static_cast<double>(*o.delay()));
    }
  }
  if (out.detections < min_detections)
    throw Error(ErrorKind::TooFewDetections, std::to_string(out.detections) +
                                                 " detections, need " +
                                                 std::to_string(min_detections));
  out.delay = mean_with_ci(delays);
  return out;
}

PfaEstimate estimate_pfa(const std::vector<TrialOutcome>& outcomes, Index n) {
  if (outcomes.size() < 100)
    throw Error(ErrorKind::InvalidArgument, "PFA estimation needs at least 100 runs");
  PfaEstimate out;
  out.trials = static_cast<long>(outcomes.size());
  for (const TrialOutcome& o : outcomes)
    if (o.stopping_time && *o.stopping_time <= n) ++out.alarms;
  out.pfa = static_cast<double>(out.alarms) / static_cast<double>(out.trials);
  out.ci = clopper_pearson(out.alarms, out.trials, 0.95);
  return out;
}

// ---------------------------------------------------------------------------

long PropositionReport::total_violations() const {
  long n = 0;
  for (const PropositionCheck& c : checks) n += static_cast<long>(c.violations.size());
  return n;
}

Eigen::Vector2d bivariate_sensitivities(double rho, double mu1, double mu2, double a11,
                                        double a22, double a12) {
  Eigen::Matrix2d r;
  r << 1.0, rho, rho, 1.0;
  const EigenSystem es = eigensystem(CorrelationMatrix::from(r));
  PostChangeParams post;
  post.mean = Eigen::Vector2d(mu1, mu2);
  Eigen::Matrix2d cov;
  cov << a11 * a11, a11 * a22 * a12 * rho, a11 * a22 * a12 * rho, a22 * a22;
  post.cov = cov;
  return projection_sensitivities(es, post);
}

PropositionReport verify_bivariate_propositions(double resolution, double boundary_tol) {
  if (!(resolution > 0.0 && resolution < 1.0))
    throw Error(ErrorKind::InvalidArgument, "resolution must lie in (0, 1)");
  PropositionReport report;
  report.resolution = resolution;
  report.boundary_tol = boundary_tol;
  const std::vector<double> rhos = rho_grid(resolution);

  // Changes in the mean: H2 > H1 iff (1 + |rho|)(mu1 - mu2)^2 > (1 - |rho|)(mu1 + mu2)^2,
  // i.e. (mu1 - mu2)^2 > mu1 mu2 (2/|rho| - 2). The least varying axis is (-1, 1)/sqrt(2)
  // for rho > 0 but (1, 1)/sqrt(2) for rho < 0, so for negative rho mu2 -> -mu2.
  PropositionCheck mean{"mean", 0, 0, {}};
  PropositionCheck one{"mean_one_changes", 0, 0, {}};
  PropositionCheck opposite{"mean_equal_opposite", 0, 0, {}};
  PropositionCheck same{"mean_equal_same", 0, 0, {}};
  const std::vector<double> mus = grid(-2.0, 2.0, resolution * 5.0);
  for (double rho : rhos) {
    const double s = rho > 0 ? 1.0 : -1.0;
    const double ar = std::abs(rho);
    for (double mu1 : mus)
      for (double mu2 : mus) {
        if (mu1 == 0.0 && mu2 == 0.0) continue;
        const double m2 = s * mu2;
        const double g = (1.0 + ar) * (mu1 - m2) * (mu1 - m2) - (1.0 - ar) * (mu1 + m2) * (mu1 + m2);
        if (std::abs(g) < boundary_tol) {
          ++mean.excluded;
          continue;
        }
        record(mean, rho, mu1, mu2, bivariate_sensitivities(rho, mu1, mu2, 1, 1, 1),
               g > 0 ? Order::Greater : Order::Less);
      }
    for (double mu : mus) {
      if (mu == 0.0) continue;
      record(one, rho, mu, 0.0, bivariate_sensitivities(rho, mu, 0.0, 1, 1, 1), Order::Greater);
      record(one, rho, 0.0, mu, bivariate_sensitivities(rho, 0.0, mu, 1, 1, 1), Order::Greater);
      record(opposite, rho, mu, -s * mu, bivariate_sensitivities(rho, mu, -s * mu, 1, 1, 1),
             Order::Greater);
      record(same, rho, mu, s * mu, bivariate_sensitivities(rho, mu, s * mu, 1, 1, 1),
             Order::Less);
    }
  }

  // Both variances change equally.
  PropositionCheck two_var{"two_variances", 0, 0, {}};
  // One variance changes.
  PropositionCheck one_var{"one_variance", 0, 0, {}};
  const std::vector<double> sizes = grid(resolution, 3.0, resolution);
  const double root3 = std::sqrt(3.0) / 2.0;
  for (double rho : rhos) {
    const double ar = std::abs(rho);
    for (double a : sizes) {
      if (std::abs(a - 1.0) < boundary_tol) {
        two_var.excluded += 1;
        one_var.excluded += 2;
        continue;
      }
      record(two_var, rho, a, a, bivariate_sensitivities(rho, 0, 0, a, a, 1), Order::Equal);

      Order expected = Order::Greater;
      if (a < 1.0) {
        if (std::abs(ar - root3) < boundary_tol) {
          one_var.excluded += 2;
          continue;
        }
        if (ar > root3) {
          const double a0 = std::sqrt(4.0 * rho * rho - 3.0);
          if (std::abs(a - a0) < boundary_tol) {
            one_var.excluded += 2;
            continue;
          }
          expected = a < a0 ? Order::Greater : Order::Less;
        } else {
          expected = Order::Less;
        }
      }
      record(one_var, rho, a, 1.0, bivariate_sensitivities(rho, 0, 0, 1, a, 1), expected);
      record(one_var, rho, a, 0.0, bivariate_sensitivities(rho, 0, 0, a, 1, 1), expected);
    }
  }

  // Correlation changes by a factor a with |a rho| < 1.
  PropositionCheck cor{"correlation", 0, 0, {}};
  for (double rho : rhos) {
    const double ar = std::abs(rho);
    for (double a : grid(-1.0 / ar, 1.0 / ar, resolution)) {
      if (std::abs(a * ar) > 1.0 - boundary_tol) continue;  // outside the admissible domain
      if (std::abs(a - 1.0) < boundary_tol || std::abs(a + 1.0) < boundary_tol) {
        ++cor.excluded;
        continue;
      }
      record(cor, rho, a, 0.0, bivariate_sensitivities(rho, 0, 0, 1, 1, a),
             a > -1.0 ? Order::Greater : Order::Less);
    }
  }

  report.checks = {mean, one, opposite, same, two_var, one_var, cor};
  return report;
}

long hellinger_lemma_violations(long samples, Rng& rng) {
  std::uniform_real_distribution<double> log_var(-3.0, 3.0);
  long violations = 0;
  for (long i = 0; i < samples; ++i) {
    double v[4];
    for (double& x : v) x = std::exp(log_var(rng));
    const double h1 = hellinger_normal(0.0, std::sqrt(v[0]), 0.0, std::sqrt(v[1]));
    const double h2 = hellinger_normal(0.0, std::sqrt(v[2]), 0.0, std::sqrt(v[3]));
    const double r1 = std::abs(std::log(v[1] / v[0]));
    const double r2 = std::abs(std::log(v[3] / v[2]));
    if ((h2 > h1) != (r2 > r1)) ++violations;
  }
  return violations;
}

// ---------------------------------------------------------------------------

void GridConfig::validate() const {
  if (dim < 2) throw Error(ErrorKind::InvalidArgument, "grid dim must be >= 2");
  if (!(alpha_d > 0.0)) throw Error(ErrorKind::InvalidArgument, "alpha_d must be positive");
  if (m < 2) throw Error(ErrorKind::InvalidArgument, "m must be >= 2");
  if (n < 2) throw Error(ErrorKind::InvalidArgument, "n must be >= 2");
  if (window < 2) throw Error(ErrorKind::InvalidArgument, "window must be >= 2");
  if (kappa < 0) throw Error(ErrorKind::InvalidArgument, "kappa must be >= 0");
  if (replicates < 1) throw Error(ErrorKind::InvalidArgument, "replicates must be >= 1");
  if (detectors.empty()) throw Error(ErrorKind::InvalidArgument, "grid has no detectors");
  for (const GridCell& c : cells)
    if (c.type && (c.sparsity < 1 || c.sparsity > dim))
      throw Error(ErrorKind::InvalidArgument, "cell sparsity must lie in [1, dim]");
  const Index h = horizon > 0 ? horizon : 10 * n;
  if (kappa >= h) throw Error(ErrorKind::InvalidArgument, "kappa must be below the horizon");
  if (!threshold) calibration.validate(m);
}

ChangeScenario sample_cell_scenario(const GridCell& cell, Index dim, Rng& rng) {
  if (!cell.type) throw Error(ErrorKind::InvalidArgument, "no-change cell has no scenario");
  ChangeScenario sc;
  sc.type = *cell.type;
  sc.affected = uniform_subset(dim, cell.sparsity, rng);
  const Index k = cell.sparsity;
  switch (sc.type) {
    case ChangeType::Mean: sc.mean_sizes = Eigen::VectorXd::Constant(k, cell.size); break;
    case ChangeType::Variance: sc.sdev_factors = Eigen::VectorXd::Constant(k, cell.size); break;
    case ChangeType::Correlation:
      sc.corr_factors = Eigen::MatrixXd::Constant(k, k, cell.size);
      sc.corr_factors.diagonal().setOnes();
      break;
  }
  return sc;
}

GridResult run_grid(const GridConfig& cfg, const std::function<void(const GridRow&)>& on_row) {
  cfg.validate();
  GridResult result;
  Rng base_rng = make_rng(cfg.seed, 0);
  const CorrelationMatrix base = random_correlation(cfg.dim, cfg.alpha_d, base_rng);
  const Eigen::MatrixXd base_factor = covariance_factor(base.matrix());
  Rng train_rng = make_rng(cfg.seed, 1);
  const Eigen::MatrixXd training =
      sample_normal_rows(cfg.m, Eigen::VectorXd::Zero(cfg.dim), base_factor, train_rng);
  const Index horizon = cfg.horizon > 0 ? cfg.horizon : 10 * cfg.n;

  for (std::size_t di = 0; di < cfg.detectors.size(); ++di) {
    const DetectorSpec& spec = cfg.detectors[di];
    PreparedDetector det;
    try {
      Rng det_rng = make_rng(cfg.seed, 100 + di);
      det = prepare_detector(spec, training, cfg.window, det_rng);
      if (cfg.threshold) {
        det.model.options.threshold = *cfg.threshold;
      } else {
        const CalibrationResult cal =
            calibrate_threshold(det.templ, training, cfg.calibration, det_rng);
        det.model.options.threshold = cal.threshold;
      }
    } catch (const std::exception& e) {
      result.failures.push_back(GridFailure{spec.label(), -1, e.what()});
      continue;
    }

    for (std::size_t ci = 0; ci < cfg.cells.size(); ++ci) {
      const GridCell& cell = cfg.cells[ci];
      try {
        const std::uint64_t cell_seed = derive_seed(cfg.seed, 1000 + ci);
        const Index run_len = cell.type ? horizon : cfg.n;
        std::vector<TrialOutcome> outcomes(static_cast<std::size_t>(cfg.replicates));
        parallel_for(outcomes.size(), [&](std::size_t r) {
          Rng rng = make_rng(cell_seed, r);
          std::optional<PostChangeParams> post;
          if (cell.type) post = apply_change(base, sample_cell_scenario(cell, cfg.dim, rng));
          outcomes[r] = run_monitoring_trial(det.model, base, post, cell.type ? cfg.kappa : 0,
                                             run_len, rng);
        });

        GridRow row;
        row.detector = spec.label();
        row.kind = to_string(spec.kind);
        switch (spec.kind) {
          case DetectorKind::TPCA: row.parameter = spec.cutoff; break;
          case DetectorKind::MinPCA:
          case DetectorKind::MaxPCA: row.parameter = static_cast<double>(spec.count); break;
          case DetectorKind::RawMixture: row.parameter = spec.p0; break;
        }
        row.change_type = cell.type ? to_string(*cell.type) : "none";
        row.sparsity = cell.type ? cell.sparsity : 0;
        row.size = cell.size;
        row.threshold = det.model.options.threshold;
        row.replicates = cfg.replicates;
        if (cell.type) {
          PfaEstimate fa;
          fa.trials = cfg.replicates;
          for (const TrialOutcome& o : outcomes)
            if (o.false_alarm()) ++fa.alarms;
          fa.pfa = static_cast<double>(fa.alarms) / fa.trials;
          fa.ci = clopper_pearson(fa.alarms, fa.trials, 0.95);
          row.pfa = fa;
          row.edd = estimate_edd(outcomes, std::min<long>(30, cfg.replicates));
        } else {
          PfaEstimate pfa;
          pfa.trials = cfg.replicates;
          for (const TrialOutcome& o : outcomes)
            if (o.stopping_time && *o.stopping_time <= cfg.n) ++pfa.alarms;
          pfa.pfa = static_cast<double>(pfa.alarms) / pfa.trials;
          pfa.ci = clopper_pearson(pfa.alarms, pfa.trials, 0.95);
          row.pfa = pfa;
        }
        if (on_row) on_row(row);
        result.rows.push_back(std::move(row));
      } catch (const std::exception& e) {
        result.failures.push_back(GridFailure{spec.label(), static_cast<long>(ci), e.what()});
      }
    }
  }
  return result;
}

}  // namespace tpca
