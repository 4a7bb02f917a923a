#include "tpca/serialization.hpp"

#include "tpca/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>

namespace tpca {

namespace {

[[noreturn]] void schema_error(const std::string& msg) { throw Error(ErrorKind::Schema, msg); }

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_number(const std::string& field, double& out) {
  const std::string f = trim(field);
  if (f.empty()) return false;
  const char* begin = f.data();
  const char* end = f.data() + f.size();
  if (*begin == '+') ++begin;
  const auto res = std::from_chars(begin, end, out);
  return res.ec == std::errc() && res.ptr == end && std::isfinite(out);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

const Json& field(const Json& j, const char* name) {
  if (!j.is_object() || !j.contains(name)) schema_error(std::string("missing field '") + name + "'");
  return j.at(name);
}

template <typename T>
T get(const Json& j, const char* name) {
  try {
    return field(j, name).get<T>();
  } catch (const nlohmann::json::exception& e) {
    schema_error(std::string("field '") + name + "': " + e.what());
  }
}

template <typename T>
T get_or(const Json& j, const char* name, T fallback) {
  if (!j.contains(name) || j.at(name).is_null()) return fallback;
  return get<T>(j, name);
}

void reject_unknown(const Json& j, const std::set<std::string>& known, const std::string& what) {
  if (!j.is_object()) schema_error(what + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) schema_error("unknown field '" + it.key() + "' in " + what);
}

Json range_json(const Range& r) { return Json::array({r.lo, r.hi}); }

Range range_from(const Json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    schema_error(what + " must be a [lo, hi] pair");
  return Range{j[0].get<double>(), j[1].get<double>()};
}

Json threshold_json(double b) {
  if (std::isinf(b)) return b > 0 ? "inf" : "-inf";
  return b;
}

double threshold_from(const Json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    schema_error("threshold must be a number or \"inf\"/\"-inf\"");
  }
  if (!j.is_number()) schema_error("threshold must be a number");
  return j.get<double>();
}

Json estimate_json(const ArgmaxEstimate& est) {
  Json contrib = Json::object();
  Json type_sens = Json::object();
  Json counts = Json::object();
  for (int c = 0; c < 3; ++c) {
    const std::string name = to_string(static_cast<ChangeType>(c));
    contrib[name] = to_json(Eigen::VectorXd(est.type_contrib.col(c)));
    type_sens[name] = to_json(Eigen::VectorXd(est.type_mean_sensitivity.col(c)));
    counts[name] = est.type_counts(c);
  }
  Json j;
  j["argmax_probs"] = to_json(est.probs);
  j["mean_sensitivity"] = to_json(est.mean_sensitivity);
  j["type_argmax_probs"] = std::move(contrib);
  j["type_mean_sensitivity"] = std::move(type_sens);
  j["type_counts"] = std::move(counts);
  j["draws"] = est.draws;
  return j;
}

ArgmaxEstimate estimate_from(const Json& j, Index dim) {
  ArgmaxEstimate est;
  est.probs = vector_from_json(field(j, "argmax_probs"), "argmax_probs");
  est.mean_sensitivity = vector_from_json(field(j, "mean_sensitivity"), "mean_sensitivity");
  est.draws = get<int>(j, "draws");
  est.type_contrib = Eigen::MatrixXd::Zero(dim, 3);
  est.type_mean_sensitivity = Eigen::MatrixXd::Zero(dim, 3);
  for (int c = 0; c < 3; ++c) {
    const std::string name = to_string(static_cast<ChangeType>(c));
    if (j.contains("type_argmax_probs") && j["type_argmax_probs"].contains(name))
      est.type_contrib.col(c) = vector_from_json(j["type_argmax_probs"][name], name);
    if (j.contains("type_mean_sensitivity") && j["type_mean_sensitivity"].contains(name))
      est.type_mean_sensitivity.col(c) = vector_from_json(j["type_mean_sensitivity"][name], name);
    if (j.contains("type_counts") && j["type_counts"].contains(name))
      est.type_counts(c) = j["type_counts"][name].get<int>();
  }
  if (est.probs.size() != dim || est.mean_sensitivity.size() != dim)
    schema_error("argmax estimate has the wrong dimension");
  return est;
}

}  // namespace

// ---------------------------------------------------------------------------

CsvRowReader::CsvRowReader(std::istream& in, std::string source)
    : in_(in), source_(std::move(source)) {}

std::optional<Eigen::VectorXd> CsvRowReader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_no_;
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split(line);
    Eigen::VectorXd values(static_cast<Index>(fields.size()));
    bool numeric = true;
    for (std::size_t i = 0; i < fields.size(); ++i)
      if (!parse_number(fields[i], values(static_cast<Index>(i)))) numeric = false;
    const bool first = first_;
    first_ = false;
    if (!numeric) {
      if (first) {  // header
        width_ = static_cast<Index>(fields.size());
        continue;
      }
      schema_error(source_ + ":" + std::to_string(line_no_) + ": missing or non-numeric value");
    }
    if (width_ == 0) width_ = values.size();
    if (values.size() != width_)
      schema_error(source_ + ":" + std::to_string(line_no_) + ": expected " +
                   std::to_string(width_) + " columns, found " + std::to_string(values.size()));
    return values;
  }
  return std::nullopt;
}

Eigen::MatrixXd parse_csv(std::istream& in, const std::string& source) {
  CsvRowReader reader(in, source);
  std::vector<Eigen::VectorXd> rows;
  while (auto row = reader.next()) rows.push_back(std::move(*row));
  Eigen::MatrixXd out(static_cast<Index>(rows.size()), reader.width());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Index>(r)) = rows[r].transpose();
  return out;
}

Eigen::MatrixXd read_csv(const std::string& path) {
  if (path == "-") return parse_csv(std::cin, "<stdin>");
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  return parse_csv(in, path);
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

void write_csv(std::ostream& out, const Eigen::MatrixXd& data,
               const std::vector<std::string>& header) {
  if (!header.empty()) {
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << '\n';
  }
  for (Index r = 0; r < data.rows(); ++r) {
    for (Index c = 0; c < data.cols(); ++c) out << (c ? "," : "") << format_double(data(r, c));
    out << '\n';
  }
}

// ---------------------------------------------------------------------------

Json to_json(const Eigen::VectorXd& v) {
  Json j = Json::array();
  for (Index i = 0; i < v.size(); ++i) j.push_back(v(i));
  return j;
}

Json to_json(const Eigen::MatrixXd& m) {
  Json j = Json::array();
  for (Index r = 0; r < m.rows(); ++r) j.push_back(to_json(Eigen::VectorXd(m.row(r).transpose())));
  return j;
}

Eigen::VectorXd vector_from_json(const Json& j, const std::string& what) {
  if (!j.is_array()) schema_error(what + " must be an array");
  Eigen::VectorXd v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) schema_error(what + " must hold numbers");
    v(static_cast<Index>(i)) = j[i].get<double>();
  }
  return v;
}

Eigen::MatrixXd matrix_from_json(const Json& j, const std::string& what) {
  if (!j.is_array()) schema_error(what + " must be an array of rows");
  if (j.empty()) return Eigen::MatrixXd(0, 0);
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  Eigen::MatrixXd m(static_cast<Index>(j.size()), static_cast<Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    const Eigen::VectorXd row = vector_from_json(j[r], what);
    if (static_cast<std::size_t>(row.size()) != cols) schema_error(what + " has ragged rows");
    m.row(static_cast<Index>(r)) = row.transpose();
  }
  return m;
}

Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    schema_error(path + ": " + e.what());
  }
}

void write_json(const std::string& path, const Json& doc) {
  if (path == "-") {
    std::cout << doc.dump(2) << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  out << doc.dump(2) << '\n';
}

void require_schema(const Json& doc, const std::string& expected) {
  if (!doc.is_object() || !doc.contains("schema") || !doc["schema"].is_string() ||
      doc["schema"].get<std::string>() != expected)
    schema_error("expected a document with schema \"" + expected + "\"");
}

Json to_json(const ChangeDistributionSpec& spec) {
  Json j;
  j["type_probs"] = Json::array({spec.type_probs[0], spec.type_probs[1], spec.type_probs[2]});
  j["sparsity_max"] = spec.sparsity_max ? Json(*spec.sparsity_max) : Json(nullptr);
  j["mean_range"] = range_json(spec.mean_range);
  j["sdev_ranges"] = Json::array({range_json(spec.sdev_ranges[0]), range_json(spec.sdev_ranges[1])});
  j["corr_factor_range"] = range_json(spec.corr_factor_range);
  j["equal_across_dims"] = spec.equal_across_dims;
  return j;
}

ChangeDistributionSpec change_spec_from_json(const Json& j) {
  reject_unknown(j,
                 {"schema", "type_probs", "sparsity_max", "mean_range", "sdev_ranges",
                  "corr_factor_range", "equal_across_dims"},
                 "change spec");
  if (j.contains("schema")) require_schema(j, kChangeSpecSchema);
  ChangeDistributionSpec spec;
  if (j.contains("type_probs")) {
    const Eigen::VectorXd p = vector_from_json(j["type_probs"], "type_probs");
    if (p.size() != 3) schema_error("type_probs must have 3 entries");
    spec.type_probs = {p(0), p(1), p(2)};
  }
  if (j.contains("sparsity_max") && !j["sparsity_max"].is_null()) {
    if (!j["sparsity_max"].is_number_integer()) schema_error("sparsity_max must be an integer");
    spec.sparsity_max = j["sparsity_max"].get<int>();
  }
  if (j.contains("mean_range")) spec.mean_range = range_from(j["mean_range"], "mean_range");
  if (j.contains("sdev_ranges")) {
    const Json& s = j["sdev_ranges"];
    if (!s.is_array() || s.size() != 2) schema_error("sdev_ranges must hold two intervals");
    spec.sdev_ranges = {range_from(s[0], "sdev_ranges[0]"), range_from(s[1], "sdev_ranges[1]")};
  }
  if (j.contains("corr_factor_range"))
    spec.corr_factor_range = range_from(j["corr_factor_range"], "corr_factor_range");
  if (j.contains("equal_across_dims")) {
    if (!j["equal_across_dims"].is_boolean()) schema_error("equal_across_dims must be a boolean");
    spec.equal_across_dims = j["equal_across_dims"].get<bool>();
  }
  return spec;
}

// ---------------------------------------------------------------------------

SelectionDocument make_selection_document(const Eigen::MatrixXd& training_raw,
                                          ProjectionSelection selection) {
  MonitorOptions opts;
  opts.lag = selection.lag;
  const MonitorModel model = make_selection_monitor(training_raw, selection, opts);
  SelectionDocument doc;
  doc.selection = std::move(selection);
  doc.raw_dim = model.raw_dim;
  doc.training_rows = model.training_count;
  doc.center = model.projection.center;
  doc.scale = model.projection.scale;
  doc.training = model.training;
  return doc;
}

MonitorModel monitor_from_selection(const SelectionDocument& doc, const MonitorOptions& options) {
  if (options.lag != doc.selection.lag)
    throw Error(ErrorKind::InvalidArgument, "monitor lag differs from the selection's lag");
  const ProjectionSelection& sel = doc.selection;
  MonitorModel model;
  Eigen::MatrixXd weights = sel.eigenvectors;
  for (Index i = 0; i < weights.cols(); ++i) {
    if (!(sel.eigenvalues(i) > kPdFloor))
      throw Error(ErrorKind::ZeroEigenvalue, "selected axis has zero variance");
    weights.col(i) /= std::sqrt(sel.eigenvalues(i));
  }
  model.projection = Projection{doc.center, doc.scale, std::move(weights)};
  model.axes = sel.indices;
  model.training = doc.training;
  model.training_count = doc.training_rows;
  model.raw_dim = doc.raw_dim;
  model.options = options;
  return model;
}

Json to_json(const SelectionDocument& doc) {
  const ProjectionSelection& sel = doc.selection;
  Json j;
  j["schema"] = kSelectionSchema;
  j["version"] = kToolVersion;
  j["config"] = doc.config;
  j["dim"] = doc.raw_dim;
  j["lag"] = sel.lag;
  j["extended_dim"] = sel.eigenvectors.rows();
  j["cutoff"] = sel.cutoff;
  j["indices"] = sel.indices;
  j["eigenvalues"] = to_json(sel.eigenvalues);
  Json vecs = Json::array();
  for (Index i = 0; i < sel.eigenvectors.cols(); ++i)
    vecs.push_back(to_json(Eigen::VectorXd(sel.eigenvectors.col(i))));
  j["eigenvectors"] = std::move(vecs);
  j["diagnostics"] = estimate_json(sel.estimate);
  Json training;
  training["m"] = doc.training_rows;
  training["mean"] = to_json(doc.center);
  training["sdev"] = to_json(doc.scale);
  Json sums = Json::array();
  for (const SegmentSums& s : doc.training)
    sums.push_back(Json{{"count", s.count}, {"sum", s.sum}, {"sumsq", s.sumsq}});
  training["projection_sums"] = std::move(sums);
  j["training"] = std::move(training);
  return j;
}

SelectionDocument selection_from_json(const Json& j) {
  require_schema(j, kSelectionSchema);
  SelectionDocument doc;
  doc.config = j.contains("config") ? j["config"] : Json::object();
  doc.raw_dim = get<Index>(j, "dim");
  ProjectionSelection& sel = doc.selection;
  sel.lag = get<Index>(j, "lag");
  sel.cutoff = get<double>(j, "cutoff");
  sel.indices = get<std::vector<Index>>(j, "indices");
  sel.eigenvalues = vector_from_json(field(j, "eigenvalues"), "eigenvalues");
  const Eigen::MatrixXd vecs = matrix_from_json(field(j, "eigenvectors"), "eigenvectors");
  sel.eigenvectors = vecs.transpose();
  const Index ext = doc.raw_dim * (sel.lag + 1);
  const Index k = static_cast<Index>(sel.indices.size());
  if (k == 0) schema_error("selection has no indices");
  if (sel.eigenvalues.size() != k || sel.eigenvectors.cols() != k || sel.eigenvectors.rows() != ext)
    schema_error("selection eigenpairs do not match dim * (lag + 1) and indices");
  for (Index idx : sel.indices)
    if (idx < 0 || idx >= ext) schema_error("selection index out of range");
  if (j.contains("diagnostics")) sel.estimate = estimate_from(j["diagnostics"], ext);

  const Json& training = field(j, "training");
  doc.training_rows = get<Index>(training, "m");
  doc.center = vector_from_json(field(training, "mean"), "training.mean");
  doc.scale = vector_from_json(field(training, "sdev"), "training.sdev");
  if (doc.center.size() != ext || doc.scale.size() != ext)
    schema_error("training summary does not match the selection dimension");
  if ((doc.scale.array() <= 0.0).any()) schema_error("training sdev must be positive");
  const Json& sums = field(training, "projection_sums");
  if (!sums.is_array() || static_cast<Index>(sums.size()) != k)
    schema_error("projection_sums must have one entry per index");
  for (const Json& s : sums)
    doc.training.push_back(
        SegmentSums{get<double>(s, "count"), get<double>(s, "sum"), get<double>(s, "sumsq")});
  return doc;
}

// ---------------------------------------------------------------------------

Json to_json(const CalibrationDocument& doc) {
  const CalibrationResult& r = doc.result;
  Json j;
  j["schema"] = kCalibrationSchema;
  j["version"] = kToolVersion;
  Json cfg = doc.config;
  cfg["alpha"] = r.config.alpha;
  cfg["n"] = r.config.n;
  cfg["confidence"] = r.config.confidence;
  cfg["replicates"] = r.config.replicates;
  cfg["mode"] = to_string(r.config.mode);
  cfg["block_len"] = r.config.mode == CalibrationMode::BlockBootstrap ? Json(r.block_len) : Json(nullptr);
  cfg["seed"] = doc.seed;
  cfg["window"] = doc.monitor.window;
  cfg["p0"] = doc.monitor.p0;
  cfg["lag"] = doc.monitor.lag;
  j["config"] = std::move(cfg);
  j["threshold"] = threshold_json(r.threshold);
  j["pfa_estimate"] = r.pfa_estimate;
  j["pfa_ci"] = Json::array({r.pfa_ci.lower, r.pfa_ci.upper});
  j["exceedances"] = r.exceedances;
  j["allowed_exceedances"] = r.allowed_exceedances;
  Json maxima = Json::array();
  for (double x : r.replicate_maxima) maxima.push_back(threshold_json(x));
  j["replicate_maxima"] = std::move(maxima);
  return j;
}

CalibrationDocument calibration_from_json(const Json& j) {
  require_schema(j, kCalibrationSchema);
  CalibrationDocument doc;
  const Json& cfg = field(j, "config");
  doc.config = cfg;
  CalibrationConfig& c = doc.result.config;
  c.alpha = get<double>(cfg, "alpha");
  c.n = get<Index>(cfg, "n");
  c.confidence = get<double>(cfg, "confidence");
  c.replicates = get<int>(cfg, "replicates");
  c.mode = calibration_mode_from_string(get<std::string>(cfg, "mode"));
  if (c.mode == CalibrationMode::BlockBootstrap) {
    c.block_len = get<Index>(cfg, "block_len");
    doc.result.block_len = *c.block_len;
  }
  doc.seed = get_or<std::uint64_t>(cfg, "seed", 0);
  doc.monitor.window = get<Index>(cfg, "window");
  doc.monitor.p0 = get<double>(cfg, "p0");
  doc.monitor.lag = get<Index>(cfg, "lag");
  doc.result.threshold = threshold_from(field(j, "threshold"));
  doc.monitor.threshold = doc.result.threshold;
  doc.result.pfa_estimate = get_or<double>(j, "pfa_estimate", 0.0);
  if (j.contains("pfa_ci")) {
    const Eigen::VectorXd ci = vector_from_json(j["pfa_ci"], "pfa_ci");
    if (ci.size() == 2) doc.result.pfa_ci = ConfidenceInterval{ci(0), ci(1)};
  }
  doc.result.exceedances = get_or<long>(j, "exceedances", 0);
  doc.result.allowed_exceedances = get_or<long>(j, "allowed_exceedances", 0);
  if (j.contains("replicate_maxima"))
    for (const Json& x : j["replicate_maxima"]) doc.result.replicate_maxima.push_back(threshold_from(x));
  return doc;
}

Json to_json(const StepResult& step) {
  Json j;
  j["t"] = step.t;
  j["stat"] = std::isfinite(step.stat) ? Json(step.stat) : Json(nullptr);
  j["argmax_k"] = step.argmax_k >= 0 ? Json(step.argmax_k) : Json(nullptr);
  j["alarm"] = step.alarm;
  j["warnings"] = step.warnings;
  return j;
}

// ---------------------------------------------------------------------------

GridConfig grid_from_json(const Json& j) {
  require_schema(j, kGridSchema);
  reject_unknown(j,
                 {"schema", "seed", "dim", "alpha_d", "m", "n", "horizon", "window", "kappa",
                  "replicates", "threshold", "calibration", "detectors", "cells"},
                 "grid");
  GridConfig cfg;
  cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed);
  cfg.dim = get_or<Index>(j, "dim", cfg.dim);
  cfg.alpha_d = get_or<double>(j, "alpha_d", cfg.alpha_d);
  cfg.m = get_or<Index>(j, "m", cfg.m);
  cfg.n = get_or<Index>(j, "n", cfg.n);
  cfg.horizon = get_or<Index>(j, "horizon", cfg.horizon);
  cfg.window = get_or<Index>(j, "window", cfg.window);
  cfg.kappa = get_or<Index>(j, "kappa", cfg.kappa);
  cfg.replicates = get_or<int>(j, "replicates", cfg.replicates);
  if (j.contains("threshold") && !j["threshold"].is_null()) cfg.threshold = threshold_from(j["threshold"]);
  cfg.calibration.n = cfg.n;
  if (j.contains("calibration")) {
    const Json& c = j["calibration"];
    reject_unknown(c, {"alpha", "confidence", "replicates", "mode", "block_len"}, "calibration");
    cfg.calibration.alpha = get_or<double>(c, "alpha", cfg.calibration.alpha);
    cfg.calibration.confidence = get<double>(c, "confidence");
    cfg.calibration.replicates = get_or<int>(c, "replicates", cfg.calibration.replicates);
    if (c.contains("mode"))
      cfg.calibration.mode = calibration_mode_from_string(get<std::string>(c, "mode"));
    if (c.contains("block_len") && !c["block_len"].is_null())
      cfg.calibration.block_len = get<Index>(c, "block_len");
  } else if (!cfg.threshold) {
    schema_error("grid needs either a threshold or a calibration block");
  }
  for (const Json& d : field(j, "detectors")) {
    reject_unknown(d, {"kind", "cutoff", "count", "p0", "draws", "change_spec"}, "detector");
    DetectorSpec spec;
    spec.kind = detector_kind_from_string(get<std::string>(d, "kind"));
    spec.cutoff = get_or<double>(d, "cutoff", spec.cutoff);
    spec.count = get_or<Index>(d, "count", spec.count);
    spec.p0 = get_or<double>(d, "p0", spec.p0);
    spec.tailor_draws = get_or<int>(d, "draws", spec.tailor_draws);
    if (d.contains("change_spec")) spec.change_spec = change_spec_from_json(d["change_spec"]);
    cfg.detectors.push_back(std::move(spec));
  }
  for (const Json& c : field(j, "cells")) {
    reject_unknown(c, {"type", "sparsity", "size"}, "cell");
    GridCell cell;
    const std::string type = get_or<std::string>(c, "type", "none");
    if (type != "none") cell.type = change_type_from_string(type);
    cell.sparsity = get_or<Index>(c, "sparsity", cell.sparsity);
    cell.size = get_or<double>(c, "size", cell.size);
    cfg.cells.push_back(cell);
  }
  return cfg;
}

Json to_json(const GridConfig& cfg) {
  Json j;
  j["schema"] = kGridSchema;
  j["seed"] = cfg.seed;
  j["dim"] = cfg.dim;
  j["alpha_d"] = cfg.alpha_d;
  j["m"] = cfg.m;
  j["n"] = cfg.n;
  j["horizon"] = cfg.horizon > 0 ? cfg.horizon : 10 * cfg.n;
  j["window"] = cfg.window;
  j["kappa"] = cfg.kappa;
  j["replicates"] = cfg.replicates;
  j["threshold"] = cfg.threshold ? threshold_json(*cfg.threshold) : Json(nullptr);
  Json cal;
  cal["alpha"] = cfg.calibration.alpha;
  cal["confidence"] = cfg.calibration.confidence;
  cal["replicates"] = cfg.calibration.replicates;
  cal["mode"] = to_string(cfg.calibration.mode);
  cal["block_len"] = cfg.calibration.block_len ? Json(*cfg.calibration.block_len) : Json(nullptr);
  j["calibration"] = std::move(cal);
  Json dets = Json::array();
  for (const DetectorSpec& d : cfg.detectors) {
    Json dj;
    dj["kind"] = to_string(d.kind);
    switch (d.kind) {
      case DetectorKind::TPCA:
        dj["cutoff"] = d.cutoff;
        dj["draws"] = d.tailor_draws;
        dj["change_spec"] = to_json(d.change_spec);
        break;
      case DetectorKind::MinPCA:
      case DetectorKind::MaxPCA: dj["count"] = d.count; break;
      case DetectorKind::RawMixture: dj["p0"] = d.p0; break;
    }
    dets.push_back(std::move(dj));
  }
  j["detectors"] = std::move(dets);
  Json cells = Json::array();
  for (const GridCell& c : cfg.cells) {
    if (c.type)
      cells.push_back(Json{{"type", to_string(*c.type)}, {"sparsity", c.sparsity}, {"size", c.size}});
    else
      cells.push_back(Json{{"type", "none"}});
  }
  j["cells"] = std::move(cells);
  return j;
}

void write_grid_header(std::ostream& out) {
  out << "detector,kind,parameter,change_type,sparsity,size,threshold,replicates,"
         "edd,edd_ci_lower,edd_ci_upper,detections,censored,false_alarms,"
         "pfa,pfa_ci_lower,pfa_ci_upper\n";
}

void write_grid_row(std::ostream& out, const GridRow& row) {
  out << '"' << row.detector << "\"," << row.kind << ',' << format_double(row.parameter) << ','
      << row.change_type << ',' << row.sparsity << ',' << format_double(row.size) << ','
      << format_double(row.threshold) << ',' << row.replicates << ',';
  if (row.edd) {
    out << format_double(row.edd->delay.mean) << ',' << format_double(row.edd->delay.ci.lower) << ','
        << format_double(row.edd->delay.ci.upper) << ',' << row.edd->detections << ','
        << row.edd->censored << ',' << row.edd->false_alarms << ',';
  } else {
    out << ",,,,,,";
  }
  out << format_double(row.pfa.pfa) << ',' << format_double(row.pfa.ci.lower) << ','
      << format_double(row.pfa.ci.upper) << '\n';
}

Json to_json(const PropositionReport& report) {
  Json j;
  j["schema"] = kPropsSchema;
  j["version"] = kToolVersion;
  j["config"] = Json{{"resolution", report.resolution}, {"boundary_tol", report.boundary_tol}};
  Json checks = Json::array();
  for (const PropositionCheck& c : report.checks) {
    Json cj;
    cj["name"] = c.name;
    cj["checked"] = c.checked;
    cj["excluded_boundary"] = c.excluded;
    cj["violations"] = static_cast<long>(c.violations.size());
    Json details = Json::array();
    for (const PropositionViolation& v : c.violations)
      details.push_back(Json{{"rho", v.rho}, {"x", v.x}, {"y", v.y}, {"h1", v.h1}, {"h2", v.h2},
                             {"expected", v.expected}});
    cj["details"] = std::move(details);
    checks.push_back(std::move(cj));
  }
  j["propositions"] = std::move(checks);
  j["total_violations"] = report.total_violations();
  return j;
}

}  // namespace tpca
