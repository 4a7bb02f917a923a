#include "tpca/cli.hpp"
#include "tpca/serialization.hpp"

#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

using namespace tpca;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun run(std::vector<std::string> args, const std::string& input = "") {
  args.insert(args.begin(), "tpca");
  std::vector<char*> argv;
  for (std::string& a : args) argv.push_back(a.data());
  std::istringstream in(input);
  std::ostringstream out, err;
  CliRun r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), in, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("tpca_cli_" + std::to_string(::getpid()));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

void write_file(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

std::string csv_of(const Eigen::MatrixXd& x) {
  std::ostringstream os;
  write_csv(os, x);
  return os.str();
}

std::vector<Json> jsonl(const std::string& text) {
  std::vector<Json> out;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) out.push_back(Json::parse(line));
  return out;
}

}  // namespace

TEST_CASE("cli pipeline") {
  TempDir dir;
  Rng rng = make_rng(1);
  Eigen::MatrixXd r = Eigen::MatrixXd::Constant(4, 4, 0.6);
  r.diagonal().setOnes();
  const Eigen::MatrixXd train = sample_normal_rows(120, Eigen::VectorXd::Zero(4), covariance_factor(r), rng);
  Eigen::MatrixXd stream = sample_normal_rows(150, Eigen::VectorXd::Zero(4), covariance_factor(r), rng);
  stream.bottomRows(100).col(0).array() += 3.0;
  stream.bottomRows(100).col(1).array() -= 3.0;
  write_file(dir.file("train.csv"), "a,b,c,d\n" + csv_of(train));
  write_file(dir.file("stream.csv"), csv_of(stream));
  write_file(dir.file("spec.json"), R"({"type_probs": [1, 0, 0]})");

  const CliRun t = run({"tailor", "--training", dir.file("train.csv"), "--spec", dir.file("spec.json"),
                        "-c", "0.9", "-B", "500", "--out", dir.file("sel.json")});
  REQUIRE(t.code == kExitOk);
  const Json sel = read_json(dir.file("sel.json"));
  CHECK(sel["schema"] == kSelectionSchema);
  CHECK(sel["dim"] == 4);

  const CliRun c = run({"calibrate", "--training", dir.file("train.csv"), "--selection",
                        dir.file("sel.json"), "--alpha", "0.05", "--n", "50", "--confidence", "0.5",
                        "-B", "200", "-w", "40", "--out", dir.file("cal.json")});
  REQUIRE(c.code == kExitOk);
  const Json cal = read_json(dir.file("cal.json"));
  CHECK(cal["schema"] == kCalibrationSchema);
  CHECK(cal["config"]["window"] == 40);
  CHECK(cal["replicate_maxima"].size() == 200);

  SECTION("monitor alarms after the change") {
    const CliRun m = run({"monitor", "--stream", dir.file("stream.csv"), "--selection",
                          dir.file("sel.json"), "--calibration", dir.file("cal.json")});
    REQUIRE(m.code == kExitOk);
    const std::vector<Json> lines = jsonl(m.out);
    REQUIRE(lines.size() >= 2);
    CHECK(lines.front()["t"] == 1);
    CHECK(lines.front()["stat"].is_null());
    const Json& last = lines.back();
    REQUIRE(!last["T"].is_null());
    CHECK(last["T"].get<long>() > 50);
    CHECK(last["censored"] == false);
    CHECK(lines[lines.size() - 2]["alarm"] == true);
  }
  SECTION("monitor reads stdin and reports censoring") {
    const CliRun m = run({"monitor", "--selection", dir.file("sel.json"), "--calibration",
                          dir.file("cal.json")},
                         csv_of(stream.topRows(30)));
    CHECK(m.code == kExitNoAlarm);
    const std::vector<Json> lines = jsonl(m.out);
    CHECK(lines.size() == 31);
    CHECK(lines.back()["T"].is_null());
    CHECK(lines.back()["censored"] == true);
  }
  SECTION("--continue keeps going after the alarm") {
    const CliRun m = run({"monitor", "--stream", dir.file("stream.csv"), "--selection",
                          dir.file("sel.json"), "--calibration", dir.file("cal.json"), "--continue"});
    CHECK(m.code == kExitOk);
    CHECK(jsonl(m.out).size() == 151);
  }
  SECTION("dimension mismatch is an input error") {
    const CliRun m = run({"monitor", "--selection", dir.file("sel.json"), "--calibration",
                          dir.file("cal.json")},
                         "1,2,3\n4,5,6\n");
    CHECK(m.code == kExitInputError);
    CHECK(Json::parse(m.err)["error"] == "DimensionMismatch");
  }
  SECTION("too few replicates is infeasible") {
    const CliRun bad = run({"calibrate", "--training", dir.file("train.csv"), "--selection",
                            dir.file("sel.json"), "--alpha", "0.05", "--n", "20", "--confidence",
                            "0.999", "-B", "100", "-w", "20"});
    CHECK(bad.code == kExitInfeasible);
    CHECK(Json::parse(bad.err)["error"] == "InsufficientReplicates");
  }
}

TEST_CASE("cli input errors") {
  TempDir dir;
  CHECK(run({}).code == kExitInputError);
  CHECK(run({"tailor"}).code == kExitInputError);
  CHECK(run({"tailor", "--training", dir.file("missing.csv")}).code == kExitInputError);
  write_file(dir.file("bad.csv"), "a,b\n1,2\n3,\n");
  const CliRun r = run({"tailor", "--training", dir.file("bad.csv")});
  CHECK(r.code == kExitInputError);
  CHECK(Json::parse(r.err)["error"] == "Schema");
  write_file(dir.file("const.csv"), "1,2\n1,3\n1,4\n");
  CHECK(run({"tailor", "--training", dir.file("const.csv")}).code == kExitInputError);
  CHECK(run({"tailor", "--training", dir.file("const.csv"), "-c", "2"}).code == kExitInputError);
  CHECK(run({"--version"}).out == std::string(kToolVersion) + "\n");
}

TEST_CASE("cli simulate and verify-props") {
  TempDir dir;
  write_file(dir.file("grid.json"), R"({
    "schema": "tpca.grid/1", "seed": 2, "dim": 4, "alpha_d": 1.0, "m": 60, "n": 20,
    "horizon": 60, "window": 20, "kappa": 5, "replicates": 40, "threshold": 15,
    "detectors": [{"kind": "max_pca", "count": 1}],
    "cells": [{"type": "none"}, {"type": "mean", "sparsity": 4, "size": 3}]
  })");
  const CliRun s = run({"simulate", "--grid", dir.file("grid.json")});
  REQUIRE(s.code == kExitOk);
  std::istringstream is(s.out);
  std::string line;
  int lines = 0;
  while (std::getline(is, line)) ++lines;
  CHECK(lines == 3);

  const CliRun p = run({"verify-props", "--resolution", "0.25"});
  CHECK(p.code == kExitOk);
  CHECK(Json::parse(p.out)["total_violations"] == 0);
}
