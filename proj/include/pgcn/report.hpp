#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "pgcn/growth.hpp"

namespace pgcn {

/// Outcome of one (grid point, seed) job.
struct RunResult {
  std::size_t grid_point = 0;
  std::uint64_t seed = 0;
  std::vector<Index> widths;
  Index parameter_count = 0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
  double test_accuracy = 0.0;
  int epochs_run = 0;
  std::string weights_digest;  // FNV-1a over the weights in row-major order
  GrowthTrace trace;           // empty for fixed-topology runs
};

/// Report for `train` and `baseline`. The headline numbers describe the run with
/// the best validation accuracy; mean/std are across the seeds of its grid point.
struct RunReport {
  std::string command;
  std::string dataset;
  nlohmann::json config;
  std::vector<nlohmann::json> grid;  // hyperparameters of each grid point
  std::size_t selected = 0;          // index into runs
  double test_accuracy_mean = 0.0;
  double test_accuracy_std = 0.0;
  std::vector<RunResult> runs;
  double wall_clock_seconds = 0.0;

  const RunResult& best() const { return runs.at(selected); }
};

struct SweepRow {
  Index d_prime = 0;
  std::string method;
  double test_acc = 0.0;
  double val_acc = 0.0;
  Index params = 0;
  std::uint64_t seed = 0;  // seed of the best-of-runs model
  double test_acc_mean = 0.0;
};

struct SweepReport {
  std::string dataset;
  nlohmann::json config;
  std::vector<SweepRow> rows;
  double wall_clock_seconds = 0.0;
};

/// FNV-1a 64-bit over the raw bytes of every weight, as 16 hex digits.
std::string weights_digest(const PgcnModel& model);

nlohmann::json to_json(const TraceRecord& rec);
TraceRecord trace_record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunResult& run);
RunResult run_result_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunReport& report);
RunReport run_report_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SweepRow& row);
SweepRow sweep_row_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SweepReport& report);
SweepReport sweep_report_from_json(const nlohmann::json& j);

/// Doubles go out as JSON numbers; ±inf and nan as the strings "inf", "-inf", "nan".
nlohmann::json encode_real(double v);
double decode_real(const nlohmann::json& j);

/// Writes via a temporary file and rename, so a failed run leaves nothing behind.
void write_json_file(const nlohmann::json& j, const std::filesystem::path& path);
nlohmann::json read_json_file(const std::filesystem::path& path);

/// Tab-separated export with a header line. Reals use shortest round-trip text.
std::string trace_to_tsv(const GrowthTrace& trace);
GrowthTrace trace_from_tsv(const std::string& text);
std::string sweep_to_tsv(const std::vector<SweepRow>& rows);
std::vector<SweepRow> sweep_from_tsv(const std::string& text);

}  // namespace pgcn
