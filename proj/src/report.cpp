#include "pgcn/report.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace pgcn {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

void fnv_bytes(std::uint64_t& h, const void* data, std::size_t size) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
}

void fnv_matrix(std::uint64_t& h, const DenseMat& m) {
  const std::int64_t shape[2] = {m.rows(), m.cols()};
  fnv_bytes(h, shape, sizeof(shape));
  fnv_bytes(h, m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
}

std::string real_text(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

double parse_real(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw InputError("bad real '" + s + "'");
  return v;
}

template <typename T>
T parse_int(const std::string& s) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw InputError("bad integer '" + s + "'");
  return v;
}

std::string widths_text(const std::vector<Index>& widths) {
  if (widths.empty()) return "-";
  std::string out;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(widths[i]);
  }
  return out;
}

std::vector<Index> parse_widths(const std::string& s) {
  std::vector<Index> out;
  if (s == "-") return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_int<Index>(item));
  return out;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string::size_type start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

std::vector<std::vector<std::string>> read_table(const std::string& text, const std::string& header) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != header) throw InputError("tsv: unexpected header");
  const std::size_t ncol = split_tabs(header).size();
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split_tabs(line);
    if (cells.size() != ncol) throw InputError("tsv: wrong column count");
    rows.push_back(std::move(cells));
  }
  return rows;
}

const char* const kTraceHeader =
    "scope\tlayer\tblock\taccuracy_before\taccuracy_after\trate\tdecision\tregularized_loss\t"
    "init_regularized_loss\tparameter_count\twidths";
const char* const kSweepHeader = "d_prime\tmethod\ttest_acc\tval_acc\tparams\tseed\ttest_acc_mean";

}  // namespace

std::string weights_digest(const PgcnModel& model) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& layer : model.layers) {
    for (const auto& w : layer) fnv_matrix(h, w);
  }
  fnv_matrix(h, model.output);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json encode_real(double v) {
  if (std::isfinite(v)) return v;
  return real_text(v);
}

double decode_real(const json& j) {
  if (j.is_string()) return parse_real(j.get<std::string>());
  if (j.is_number()) return j.get<double>();
  throw InputError("expected a real number");
}

json to_json(const TraceRecord& rec) {
  return json{{"scope", to_string(rec.scope)},
              {"layer", rec.layer},
              {"block", rec.block},
              {"accuracy_before", encode_real(rec.accuracy_before)},
              {"accuracy_after", encode_real(rec.accuracy_after)},
              {"rate", encode_real(rec.rate)},
              {"decision", to_string(rec.decision)},
              {"regularized_loss", encode_real(rec.regularized_loss)},
              {"init_regularized_loss", encode_real(rec.init_regularized_loss)},
              {"parameter_count", rec.parameter_count},
              {"widths", rec.widths}};
}

TraceRecord trace_record_from_json(const json& j) {
  TraceRecord rec;
  rec.scope = parse_scope(j.at("scope").get<std::string>());
  rec.layer = j.at("layer").get<Index>();
  rec.block = j.at("block").get<Index>();
  rec.accuracy_before = decode_real(j.at("accuracy_before"));
  rec.accuracy_after = decode_real(j.at("accuracy_after"));
  rec.rate = decode_real(j.at("rate"));
  rec.decision = parse_decision(j.at("decision").get<std::string>());
  rec.regularized_loss = decode_real(j.at("regularized_loss"));
  rec.init_regularized_loss = decode_real(j.at("init_regularized_loss"));
  rec.parameter_count = j.at("parameter_count").get<Index>();
  rec.widths = j.at("widths").get<std::vector<Index>>();
  return rec;
}

json to_json(const RunResult& run) {
  json trace = json::array();
  for (const auto& rec : run.trace) trace.push_back(to_json(rec));
  return json{{"grid_point", run.grid_point},
              {"seed", run.seed},
              {"widths", run.widths},
              {"parameter_count", run.parameter_count},
              {"train_accuracy", encode_real(run.train_accuracy)},
              {"val_accuracy", encode_real(run.val_accuracy)},
              {"test_accuracy", encode_real(run.test_accuracy)},
              {"epochs_run", run.epochs_run},
              {"weights_digest", run.weights_digest},
              {"trace", trace}};
}

RunResult run_result_from_json(const json& j) {
  RunResult run;
  run.grid_point = j.at("grid_point").get<std::size_t>();
  run.seed = j.at("seed").get<std::uint64_t>();
  run.widths = j.at("widths").get<std::vector<Index>>();
  run.parameter_count = j.at("parameter_count").get<Index>();
  run.train_accuracy = decode_real(j.at("train_accuracy"));
  run.val_accuracy = decode_real(j.at("val_accuracy"));
  run.test_accuracy = decode_real(j.at("test_accuracy"));
  run.epochs_run = j.at("epochs_run").get<int>();
  run.weights_digest = j.at("weights_digest").get<std::string>();
  for (const auto& rec : j.at("trace")) run.trace.push_back(trace_record_from_json(rec));
  return run;
}

json to_json(const RunReport& report) {
  json runs = json::array();
  for (const auto& run : report.runs) runs.push_back(to_json(run));
  json j{{"command", report.command},
         {"dataset", report.dataset},
         {"config", report.config},
         {"grid", report.grid},
         {"selected", report.selected},
         {"test_accuracy_mean", encode_real(report.test_accuracy_mean)},
         {"test_accuracy_std", encode_real(report.test_accuracy_std)},
         {"runs", runs},
         {"wall_clock_seconds", report.wall_clock_seconds}};
  if (!report.runs.empty()) {
    const RunResult& best = report.best();
    j["seed"] = best.seed;
    j["widths"] = best.widths;
    j["parameter_count"] = best.parameter_count;
    j["train_accuracy"] = encode_real(best.train_accuracy);
    j["val_accuracy"] = encode_real(best.val_accuracy);
    j["test_accuracy"] = encode_real(best.test_accuracy);
  }
  return j;
}

RunReport run_report_from_json(const json& j) {
  RunReport report;
  report.command = j.at("command").get<std::string>();
  report.dataset = j.at("dataset").get<std::string>();
  report.config = j.at("config");
  for (const auto& g : j.at("grid")) report.grid.push_back(g);
  report.selected = j.at("selected").get<std::size_t>();
  report.test_accuracy_mean = decode_real(j.at("test_accuracy_mean"));
  report.test_accuracy_std = decode_real(j.at("test_accuracy_std"));
  for (const auto& run : j.at("runs")) report.runs.push_back(run_result_from_json(run));
  report.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
  return report;
}

json to_json(const SweepRow& row) {
  return json{{"d_prime", row.d_prime},
              {"method", row.method},
              {"test_acc", encode_real(row.test_acc)},
              {"val_acc", encode_real(row.val_acc)},
              {"params", row.params},
              {"seed", row.seed},
              {"test_acc_mean", encode_real(row.test_acc_mean)}};
}

SweepRow sweep_row_from_json(const json& j) {
  SweepRow row;
  row.d_prime = j.at("d_prime").get<Index>();
  row.method = j.at("method").get<std::string>();
  row.test_acc = decode_real(j.at("test_acc"));
  row.val_acc = decode_real(j.at("val_acc"));
  row.params = j.at("params").get<Index>();
  row.seed = j.at("seed").get<std::uint64_t>();
  row.test_acc_mean = decode_real(j.at("test_acc_mean"));
  return row;
}

json to_json(const SweepReport& report) {
  json rows = json::array();
  for (const auto& row : report.rows) rows.push_back(to_json(row));
  return json{{"command", "sweep-dim"},
              {"dataset", report.dataset},
              {"config", report.config},
              {"rows", rows},
              {"wall_clock_seconds", report.wall_clock_seconds}};
}

SweepReport sweep_report_from_json(const json& j) {
  SweepReport report;
  report.dataset = j.at("dataset").get<std::string>();
  report.config = j.at("config");
  for (const auto& row : j.at("rows")) report.rows.push_back(sweep_row_from_json(row));
  report.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
  return report;
}

void write_json_file(const json& j, const fs::path& path) {
  fs::path tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return json::parse(in);
}

std::string trace_to_tsv(const GrowthTrace& trace) {
  std::string out = kTraceHeader;
  out += '\n';
  for (const auto& r : trace) {
    out += std::string(to_string(r.scope)) + '\t' + std::to_string(r.layer) + '\t' + std::to_string(r.block) + '\t' +
           real_text(r.accuracy_before) + '\t' + real_text(r.accuracy_after) + '\t' + real_text(r.rate) + '\t' +
           to_string(r.decision) + '\t' + real_text(r.regularized_loss) + '\t' + real_text(r.init_regularized_loss) +
           '\t' + std::to_string(r.parameter_count) + '\t' + widths_text(r.widths) + '\n';
  }
  return out;
}

GrowthTrace trace_from_tsv(const std::string& text) {
  GrowthTrace trace;
  for (const auto& c : read_table(text, kTraceHeader)) {
    TraceRecord r;
    r.scope = parse_scope(c[0]);
    r.layer = parse_int<Index>(c[1]);
    r.block = parse_int<Index>(c[2]);
    r.accuracy_before = parse_real(c[3]);
    r.accuracy_after = parse_real(c[4]);
    r.rate = parse_real(c[5]);
    r.decision = parse_decision(c[6]);
    r.regularized_loss = parse_real(c[7]);
    r.init_regularized_loss = parse_real(c[8]);
    r.parameter_count = parse_int<Index>(c[9]);
    r.widths = parse_widths(c[10]);
    trace.push_back(r);
  }
  return trace;
}

std::string sweep_to_tsv(const std::vector<SweepRow>& rows) {
  std::string out = kSweepHeader;
  out += '\n';
  for (const auto& r : rows) {
    out += std::to_string(r.d_prime) + '\t' + r.method + '\t' + real_text(r.test_acc) + '\t' + real_text(r.val_acc) +
           '\t' + std::to_string(r.params) + '\t' + std::to_string(r.seed) + '\t' + real_text(r.test_acc_mean) + '\n';
  }
  return out;
}

std::vector<SweepRow> sweep_from_tsv(const std::string& text) {
  std::vector<SweepRow> rows;
  for (const auto& c : read_table(text, kSweepHeader)) {
    SweepRow r;
    r.d_prime = parse_int<Index>(c[0]);
    r.method = c[1];
    r.test_acc = parse_real(c[2]);
    r.val_acc = parse_real(c[3]);
    r.params = parse_int<Index>(c[4]);
    r.seed = parse_int<std::uint64_t>(c[5]);
    r.test_acc_mean = parse_real(c[6]);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace pgcn
