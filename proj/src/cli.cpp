#include "tpca/cli.hpp"

#include "tpca/calibrate.hpp"
#include "tpca/error.hpp"
#include "tpca/evalharness.hpp"
#include "tpca/mixmonitor.hpp"
#include "tpca/serialization.hpp"
#include "tpca/tailor.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>

namespace tpca {

namespace {

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument:
    case ErrorKind::DimensionMismatch:
    case ErrorKind::ConstantColumn:
    case ErrorKind::InsufficientHistory:
    case ErrorKind::Io:
    case ErrorKind::Schema:
      return kExitInputError;
    case ErrorKind::InsufficientReplicates:
      return kExitInfeasible;
    default:
      return kExitNumerical;
  }
}

void report(std::ostream& err, const std::string& kind, const std::string& message) {
  err << Json{{"error", kind}, {"message", message}}.dump() << '\n';
}

// Opens `path` for writing, or returns `fallback` for "-".
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) {
    if (path == "-") {
      stream_ = &fallback;
      return;
    }
    file_ = std::make_unique<std::ofstream>(path);
    if (!*file_) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
    stream_ = file_.get();
  }
  std::ostream& operator*() { return *stream_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* stream_ = nullptr;
};

struct TailorArgs {
  std::string training, spec, out = "-";
  double cutoff = 0.9;
  int draws = 10000;
  Index lag = 0;
  std::uint64_t seed = 1;
};

struct CalibrateArgs {
  std::string training, selection, out = "-";
  double alpha = 0.01;
  Index n = 100;
  double confidence = 0.95;
  int replicates = 2000;
  std::string mode = "parametric";
  Index block_len = 0;
  Index window = 200;
  double p0 = 1.0;
  std::uint64_t seed = 1;
};

struct MonitorArgs {
  std::string stream = "-", selection, calibration, out = "-";
  double p0 = 1.0;
  Index window = 200;
  bool keep_going = false;
};

struct SimulateArgs {
  std::string grid, out = "-";
};

struct PropsArgs {
  double resolution = 0.05;
  std::string out = "-";
};

int cmd_tailor(const TailorArgs& a, std::ostream& out) {
  const Eigen::MatrixXd training = read_csv(a.training);
  if (training.rows() <= a.lag + 1)
    throw Error(ErrorKind::InsufficientHistory, "training needs more than lag + 1 rows");
  ChangeDistributionSpec spec;
  if (!a.spec.empty()) spec = change_spec_from_json(read_json(a.spec));
  const Eigen::MatrixXd ext = lag_extend_rows(training, a.lag);
  const TrainingSummary summary = estimate_training(ext);
  Rng rng = make_rng(a.seed);
  ProjectionSelection sel = tailor(summary.corr, spec, a.cutoff, a.draws, rng, a.lag);
  SelectionDocument doc = make_selection_document(training, std::move(sel));
  doc.config = Json{{"training", a.training}, {"change_spec", to_json(spec)}, {"cutoff", a.cutoff},
                    {"draws", a.draws}, {"lag", a.lag}, {"seed", a.seed}};
  Sink sink(a.out, out);
  *sink << to_json(doc).dump(2) << '\n';
  return kExitOk;
}

int cmd_calibrate(const CalibrateArgs& a, std::ostream& out) {
  const Eigen::MatrixXd training = read_csv(a.training);
  const SelectionDocument sel = selection_from_json(read_json(a.selection));
  if (training.cols() != sel.raw_dim)
    throw Error(ErrorKind::DimensionMismatch, "training has " + std::to_string(training.cols()) +
                                                  " columns, selection expects " +
                                                  std::to_string(sel.raw_dim));
  CalibrationConfig cfg;
  cfg.alpha = a.alpha;
  cfg.n = a.n;
  cfg.confidence = a.confidence;
  cfg.replicates = a.replicates;
  cfg.mode = calibration_mode_from_string(a.mode);
  if (a.block_len > 0) cfg.block_len = a.block_len;

  MonitorOptions opts;
  opts.window = a.window;
  opts.p0 = a.p0;
  opts.lag = sel.selection.lag;
  const MonitorTemplate tmpl = MonitorTemplate::projection(sel.selection.indices, opts);
  Rng rng = make_rng(a.seed);
  CalibrationDocument doc;
  doc.result = calibrate_threshold(tmpl, training, cfg, rng);
  doc.monitor = opts;
  doc.seed = a.seed;
  doc.config = Json{{"training", a.training}, {"selection", a.selection}};
  Sink sink(a.out, out);
  *sink << to_json(doc).dump(2) << '\n';
  return kExitOk;
}

int cmd_monitor(const MonitorArgs& a, const CLI::App& app, std::istream& in, std::ostream& out) {
  const SelectionDocument sel = selection_from_json(read_json(a.selection));
  const CalibrationDocument cal = calibration_from_json(read_json(a.calibration));
  if (cal.monitor.lag != sel.selection.lag)
    throw Error(ErrorKind::InvalidArgument, "calibration and selection use different lags");
  MonitorOptions opts = cal.monitor;
  if (app.count("--p0")) opts.p0 = a.p0;
  if (app.count("--window")) opts.window = a.window;
  Monitor monitor(monitor_from_selection(sel, opts));

  std::ifstream file;
  std::istream* src = &in;
  if (a.stream != "-") {
    file.open(a.stream);
    if (!file) throw Error(ErrorKind::Io, "cannot open '" + a.stream + "'");
    src = &file;
  }
  CsvRowReader reader(*src, a.stream == "-" ? "<stdin>" : a.stream);
  Sink sink(a.out, out);
  std::optional<Index> stopping;
  while (auto row = reader.next()) {
    const std::optional<StepResult> step = monitor.push(*row);
    if (!step) continue;
    *sink << to_json(*step).dump() << '\n' << std::flush;
    if (step->alarm && !stopping) {
      stopping = step->t;
      if (!a.keep_going) break;
    }
  }
  *sink << Json{{"T", stopping ? Json(*stopping) : Json(nullptr)}, {"censored", !stopping}}.dump()
        << '\n';
  return stopping ? kExitOk : kExitNoAlarm;
}

int cmd_simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
  const GridConfig cfg = grid_from_json(read_json(a.grid));
  cfg.validate();
  Sink sink(a.out, out);
  write_grid_header(*sink);
  const GridResult result = run_grid(cfg, [&](const GridRow& row) {
    write_grid_row(*sink, row);
    *sink << std::flush;
  });
  if (result.failures.empty()) return kExitOk;
  Json manifest;
  manifest["schema"] = "tpca.grid_failures/1";
  manifest["version"] = kToolVersion;
  manifest["config"] = to_json(cfg);
  Json failures = Json::array();
  for (const GridFailure& f : result.failures)
    failures.push_back(Json{{"detector", f.detector},
                            {"cell", f.cell >= 0 ? Json(f.cell) : Json(nullptr)},
                            {"reason", f.reason}});
  manifest["failures"] = std::move(failures);
  const std::string path = a.out == "-" ? "grid_failures.json" : a.out + ".failures.json";
  write_json(path, manifest);
  report(err, "GridFailures",
         std::to_string(result.failures.size()) + " grid cells failed, see " + path);
  return kExitNumerical;
}

int cmd_verify_props(const PropsArgs& a, std::ostream& out) {
  const PropositionReport report = verify_bivariate_propositions(a.resolution);
  Sink sink(a.out, out);
  *sink << to_json(report).dump(2) << '\n';
  return report.total_violations() == 0 ? kExitOk : kExitNumerical;
}

}  // namespace

int run_cli(int argc, char** argv, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Tailored principal-axis change detection"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);
  unsigned threads = 0;
  app.add_option("--threads", threads, "Worker threads (default: TPCA_THREADS or all cores)");

  TailorArgs ta;
  CLI::App* tailor_cmd = app.add_subcommand("tailor", "Select principal axes for a change distribution");
  tailor_cmd->add_option("--training", ta.training, "Training CSV")->required();
  tailor_cmd->add_option("--spec", ta.spec, "Change distribution JSON (default: uninformative)");
  tailor_cmd->add_option("--cutoff,-c", ta.cutoff, "Cumulative probability cutoff")
      ->check(CLI::Range(0.0, 1.0));
  tailor_cmd->add_option("--draws,-B", ta.draws, "Monte Carlo draws")->check(CLI::PositiveNumber);
  tailor_cmd->add_option("--lag,-l", ta.lag, "Lag extension")->check(CLI::NonNegativeNumber);
  tailor_cmd->add_option("--seed", ta.seed, "Random seed");
  tailor_cmd->add_option("--out,-o", ta.out, "Output selection JSON");

  CalibrateArgs ca;
  CLI::App* cal_cmd = app.add_subcommand("calibrate", "Bootstrap the alarm threshold");
  cal_cmd->add_option("--training", ca.training, "Training CSV")->required();
  cal_cmd->add_option("--selection", ca.selection, "Selection JSON")->required();
  cal_cmd->add_option("--alpha", ca.alpha, "Target false-alarm probability")->required();
  cal_cmd->add_option("--n", ca.n, "Monitoring horizon")->required();
  cal_cmd->add_option("--confidence", ca.confidence, "One-sided confidence")->required();
  cal_cmd->add_option("--replicates,-B", ca.replicates, "Bootstrap replicates");
  cal_cmd->add_option("--mode", ca.mode, "parametric | block")
      ->check(CLI::IsMember({"parametric", "block"}));
  cal_cmd->add_option("--block-len", ca.block_len, "Block length (block mode)")
      ->check(CLI::PositiveNumber);
  cal_cmd->add_option("--window,-w", ca.window, "Window size");
  cal_cmd->add_option("--p0", ca.p0, "Mixture prior");
  cal_cmd->add_option("--seed", ca.seed, "Random seed");
  cal_cmd->add_option("--out,-o", ca.out, "Output calibration JSON");

  MonitorArgs ma;
  CLI::App* mon_cmd = app.add_subcommand("monitor", "Monitor a stream, one JSON line per step");
  mon_cmd->add_option("--stream", ma.stream, "Stream CSV, '-' for stdin");
  mon_cmd->add_option("--selection", ma.selection, "Selection JSON")->required();
  mon_cmd->add_option("--calibration", ma.calibration, "Calibration JSON")->required();
  mon_cmd->add_option("--p0", ma.p0, "Override the mixture prior");
  mon_cmd->add_option("--window,-w", ma.window, "Override the window size");
  mon_cmd->add_flag("--continue", ma.keep_going, "Keep monitoring after the first alarm");
  mon_cmd->add_option("--out,-o", ma.out, "Output JSONL");

  SimulateArgs sa;
  CLI::App* sim_cmd = app.add_subcommand("simulate", "Run an EDD/PFA scenario grid");
  sim_cmd->add_option("--grid", sa.grid, "Grid JSON")->required();
  sim_cmd->add_option("--out,-o", sa.out, "Output CSV");

  PropsArgs pa;
  CLI::App* props_cmd =
      app.add_subcommand("verify-props", "Check the bivariate sensitivity propositions");
  props_cmd->add_option("--resolution", pa.resolution, "Grid step for rho and sizes");
  props_cmd->add_option("--out,-o", pa.out, "Output report JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    report(err, "Usage", e.what());
    return kExitInputError;
  }

  try {
    if (threads > 0) set_thread_limit(threads);
    if (tailor_cmd->parsed()) return cmd_tailor(ta, out);
    if (cal_cmd->parsed()) return cmd_calibrate(ca, out);
    if (mon_cmd->parsed()) return cmd_monitor(ma, *mon_cmd, in, out);
    if (sim_cmd->parsed()) return cmd_simulate(sa, out, err);
    if (props_cmd->parsed()) return cmd_verify_props(pa, out);
  } catch (const Error& e) {
    report(err, to_string(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const std::bad_alloc&) {
    report(err, "OutOfMemory", "allocation failed");
    return kExitNumerical;
  } catch (const std::exception& e) {
    report(err, "Internal", e.what());
    return kExitNumerical;
  }
  return kExitInputError;
}

}  // namespace tpca
