#pragma once

#include "tpca/calibrate.hpp"
#include "tpca/changemodel.hpp"
#include "tpca/evalharness.hpp"
#include "tpca/mixmonitor.hpp"
#include "tpca/tailor.hpp"

#include <json.hpp>

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace tpca {

using Json = nlohmann::ordered_json;

inline constexpr const char* kToolVersion = "0.3.1";

inline constexpr const char* kSelectionSchema = "tpca.selection/1";
inline constexpr const char* kCalibrationSchema = "tpca.calibration/1";
inline constexpr const char* kChangeSpecSchema = "tpca.change_spec/1";
inline constexpr const char* kGridSchema = "tpca.grid/1";
inline constexpr const char* kPropsSchema = "tpca.props_report/1";

// ---------------------------------------------------------------------------
// CSV

/// Incremental CSV reader: one numeric row per call, header detected on the first
/// non-empty line. Suitable for tailing a live stream.
class CsvRowReader {
 public:
  CsvRowReader(std::istream& in, std::string source);
  /// Next row, or nullopt at end of input. Throws Schema on malformed rows.
  std::optional<Eigen::VectorXd> next();
  Index width() const noexcept { return width_; }

 private:
  std::istream& in_;
  std::string source_;
  long line_no_ = 0;
  Index width_ = 0;
  bool first_ = true;
};

/// Rows = time steps, columns = streams. A first line with a non-numeric field is
/// taken as a header. Empty or non-numeric cells are an error (Schema).
Eigen::MatrixXd parse_csv(std::istream& in, const std::string& source = "<stream>");
/// "-" reads standard input.
Eigen::MatrixXd read_csv(const std::string& path);
void write_csv(std::ostream& out, const Eigen::MatrixXd& data,
               const std::vector<std::string>& header = {});

/// Shortest round-trip decimal form.
std::string format_double(double x);

// ---------------------------------------------------------------------------
// JSON helpers

Json to_json(const Eigen::VectorXd& v);
Json to_json(const Eigen::MatrixXd& m);  // array of rows
Eigen::VectorXd vector_from_json(const Json& j, const std::string& what);
Eigen::MatrixXd matrix_from_json(const Json& j, const std::string& what);

Json read_json(const std::string& path);
void write_json(const std::string& path, const Json& doc);  // "-" writes stdout
/// Throws Schema unless doc["schema"] == expected.
void require_schema(const Json& doc, const std::string& expected);

Json to_json(const ChangeDistributionSpec& spec);
/// Missing fields take their defaults; unknown fields are rejected.
ChangeDistributionSpec change_spec_from_json(const Json& j);

// ---------------------------------------------------------------------------
// Selection artifact: everything the monitor needs besides the threshold.

struct SelectionDocument {
  ProjectionSelection selection;
  Index raw_dim = 0;
  Index training_rows = 0;  // m after lag extension
  Eigen::VectorXd center;
  Eigen::VectorXd scale;
  std::vector<SegmentSums> training;  // per selected projection
  Json config = Json::object();
};

SelectionDocument make_selection_document(const Eigen::MatrixXd& training_raw,
                                          ProjectionSelection selection);
MonitorModel monitor_from_selection(const SelectionDocument& doc, const MonitorOptions& options);

Json to_json(const SelectionDocument& doc);
SelectionDocument selection_from_json(const Json& j);

// ---------------------------------------------------------------------------

struct CalibrationDocument {
  CalibrationResult result;
  MonitorOptions monitor;  // window, p0 and lag used for the replicates
  std::uint64_t seed = 0;
  Json config = Json::object();
};

Json to_json(const CalibrationDocument& doc);
CalibrationDocument calibration_from_json(const Json& j);

Json to_json(const StepResult& step);

GridConfig grid_from_json(const Json& j);
Json to_json(const GridConfig& cfg);
void write_grid_header(std::ostream& out);
void write_grid_row(std::ostream& out, const GridRow& row);

Json to_json(const PropositionReport& report);

}  // namespace tpca
