#pragma once

// CSV batch formats, report documents and small file helpers.
//
// Trace CSV:      label,level,pdc_kPa,s0..s1099      one row per trial
// Feature CSV:    label,level,f10..f1038             515 dB magnitudes
// Projection CSV: label,f1,f2,f3
// Lines starting with '#' are provenance comments and skipped by readers.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "json.hpp"
#include "vibtac/eval.hpp"
#include "vibtac/errors.hpp"
#include "vibtac/signal.hpp"
#include "vibtac/simulator.hpp"

namespace vibtac {

// Shortest representation that round-trips.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

inline double parse_double(std::string_view s, std::size_t row, std::size_t col) {
  s = trim(s);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw IoError("row " + std::to_string(row) + ", column " + std::to_string(col + 1) + ": not a number '" +
                  std::string(s) + "'");
  }
  return v;
}

inline int parse_int(std::string_view s, std::size_t row, std::size_t col) {
  s = trim(s);
  int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw IoError("row " + std::to_string(row) + ", column " + std::to_string(col + 1) + ": not an integer '" +
                  std::string(s) + "'");
  }
  return v;
}

// Data rows (1-based row numbers counted after the header) with their fields.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::string> lines;
};

inline CsvTable read_csv_lines(std::istream& in, const std::string& what) {
  CsvTable t;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!have_header) {
      for (auto f : split_commas(line)) t.header.emplace_back(trim(f));
      have_header = true;
      continue;
    }
    t.lines.push_back(line);
  }
  if (!have_header) throw IoError(what + ": missing header row");
  return t;
}

inline std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open '" + p.string() + "' for reading");
  return in;
}

}  // namespace detail

inline void write_text_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + p.string() + "' for writing");
  out << content;
  if (!out) throw IoError("write failed for '" + p.string() + "'");
}

inline std::string read_text_file(const std::filesystem::path& p) {
  auto in = detail::open_in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---- trace CSV -------------------------------------------------------------------

inline std::string trace_csv_header(std::size_t samples = kTraceLength) {
  std::string h = "label,level,pdc_kPa";
  for (std::size_t i = 0; i < samples; ++i) h += ",s" + std::to_string(i);
  return h;
}

inline void write_trace_csv(std::ostream& out, const TraceDataset& data, const std::string& comment = {}) {
  if (!comment.empty()) out << "# " << comment << '\n';
  const std::size_t len = data.traces.empty() ? kTraceLength : data.traces.front().samples.size();
  out << trace_csv_header(len) << '\n';
  std::string line;
  for (const auto& t : data.traces) {
    line = std::to_string(t.label) + ',' + std::to_string(t.level) + ',' + format_double(t.pdc);
    for (double s : t.samples) {
      line += ',';
      line += format_double(s);
    }
    out << line << '\n';
  }
}

inline TraceDataset read_trace_csv(std::istream& in, std::size_t expected_samples = kTraceLength) {
  const auto table = detail::read_csv_lines(in, "trace CSV");
  if (table.header.size() < 3 || table.header[0] != "label" || table.header[1] != "level" ||
      table.header[2] != "pdc_kPa")
    throw IoError("trace CSV: header must start with label,level,pdc_kPa");
  TraceDataset out;
  for (std::size_t r = 0; r < table.lines.size(); ++r) {
    const std::size_t row = r + 1;
    const auto fields = detail::split_commas(table.lines[r]);
    if (fields.size() != 3 + expected_samples) {
      throw IoError("trace CSV row " + std::to_string(row) + ": expected " + std::to_string(expected_samples) +
                    " samples, found " + std::to_string(fields.size() < 3 ? 0 : fields.size() - 3));
    }
    SensorTrace t;
    t.label = detail::parse_int(fields[0], row, 0);
    t.level = detail::parse_int(fields[1], row, 1);
    t.pdc = detail::parse_double(fields[2], row, 2);
    t.samples.reserve(expected_samples);
    for (std::size_t c = 3; c < fields.size(); ++c) t.samples.push_back(detail::parse_double(fields[c], row, c));
    t.duration = static_cast<double>(expected_samples) / kSensorRate;
    out.traces.push_back(std::move(t));
  }
  return out;
}

// ---- feature CSV -----------------------------------------------------------------

inline std::string feature_csv_header() {
  std::string h = "label,level";
  for (std::size_t i = 0; i < kFeatureCount; ++i)
    h += ",f" + std::to_string(static_cast<long>(bin_frequency(kFeatureFirstBin + i)));
  return h;
}

inline void write_feature_csv(std::ostream& out, const std::vector<FeatureVector>& rows,
                              const std::string& comment = {}) {
  if (!comment.empty()) out << "# " << comment << '\n';
  out << feature_csv_header() << '\n';
  std::string line;
  for (const auto& f : rows) {
    line = std::to_string(f.label) + ',' + std::to_string(f.level);
    for (double v : f.values) {
      line += ',';
      line += format_double(v);
    }
    out << line << '\n';
  }
}

inline std::vector<FeatureVector> read_feature_csv(std::istream& in) {
  const auto table = detail::read_csv_lines(in, "feature CSV");
  if (table.header.size() != 2 + kFeatureCount || table.header[0] != "label" || table.header[1] != "level")
    throw IoError("feature CSV: header must be label,level followed by 515 feature columns");
  std::vector<FeatureVector> out;
  for (std::size_t r = 0; r < table.lines.size(); ++r) {
    const std::size_t row = r + 1;
    const auto fields = detail::split_commas(table.lines[r]);
    if (fields.size() != 2 + kFeatureCount)
      throw IoError("feature CSV row " + std::to_string(row) + ": expected " + std::to_string(2 + kFeatureCount) +
                    " columns, found " + std::to_string(fields.size()));
    FeatureVector f;
    f.label = detail::parse_int(fields[0], row, 0);
    f.level = detail::parse_int(fields[1], row, 1);
    f.values.reserve(kFeatureCount);
    for (std::size_t c = 2; c < fields.size(); ++c) f.values.push_back(detail::parse_double(fields[c], row, c));
    out.push_back(std::move(f));
  }
  return out;
}

// ---- plot data -------------------------------------------------------------------

inline void write_projection_csv(std::ostream& out, const Matrix& points, const std::vector<int>& labels,
                                 const std::string& comment = {}) {
  if (points.rows() != labels.size()) throw DimensionMismatch("projection CSV: label count differs from rows");
  if (!comment.empty()) out << "# " << comment << '\n';
  out << "label";
  for (std::size_t c = 0; c < points.cols(); ++c) out << ",f" << c + 1;
  out << '\n';
  for (std::size_t r = 0; r < points.rows(); ++r) {
    out << labels[r];
    for (std::size_t c = 0; c < points.cols(); ++c) out << ',' << format_double(points(r, c));
    out << '\n';
  }
}

inline void write_confusion_csv(std::ostream& out, const CrossValReport& cv, const std::string& comment = {}) {
  if (!comment.empty()) out << "# " << comment << '\n';
  out << "true\\predicted";
  for (int id : cv.class_ids) out << ',' << id;
  out << '\n';
  for (std::size_t i = 0; i < cv.class_ids.size(); ++i) {
    out << cv.class_ids[i];
    for (std::size_t j = 0; j < cv.class_ids.size(); ++j) out << ',' << cv.confusion[i][j];
    out << '\n';
  }
}

// ---- report document -------------------------------------------------------------

inline constexpr const char* kReportFormat = "vibtac-eval-report";
inline constexpr int kReportVersion = 1;

inline nlohmann::json to_json(const CrossValReport& cv) {
  return {{"mean_accuracy", cv.mean_accuracy},
          {"fold_accuracies", cv.fold_accuracies},
          {"class_ids", cv.class_ids},
          {"confusion", cv.confusion},
          {"non_converged", cv.non_converged}};
}

inline nlohmann::json to_json(const TTestResult& t) {
  return {{"t", t.t}, {"df", t.df}, {"p", t.p}, {"degenerate", t.degenerate}};
}

inline double trend_correlation(const EvalReport& report) {
  std::vector<double> j, acc;
  for (const auto& l : report.levels) {
    j.push_back(l.j_value);
    acc.push_back(l.cv.mean_accuracy);
  }
  return j.size() < 2 ? std::numeric_limits<double>::quiet_NaN() : spearman(j, acc);
}

inline nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json levels = nlohmann::json::array();
  for (const auto& l : report.levels) {
    nlohmann::json cv = to_json(l.cv);
    levels.push_back({{"level", l.level},
                      {"intensity_db", l.intensity_db},
                      {"j_value", l.j_value},
                      {"fisher_eigenvalues", l.fisher_eigenvalues},
                      {"ridge", l.ridge},
                      {"grid_best_accuracy", l.grid_accuracy},
                      {"best_c", l.best_c},
                      {"best_gamma", l.best_gamma},
                      {"mean_accuracy", l.cv.mean_accuracy},
                      {"fold_accuracies", l.cv.fold_accuracies},
                      {"class_ids", l.cv.class_ids},
                      {"confusion", l.cv.confusion},
                      {"non_converged", l.cv.non_converged},
                      {"pdc_mean_kpa", l.pdc_mean},
                      {"pdc_std_kpa", l.pdc_std}});
  }
  nlohmann::json tests = nlohmann::json::array();
  for (const auto& t : report.t_tests) {
    nlohmann::json e = to_json(t.result);
    e["a"] = t.a;
    e["b"] = t.b;
    e["significant_p01"] = t.result.p < 0.01;
    tests.push_back(e);
  }
  const LevelResult* best = report.best_level();
  const double rho = trend_correlation(report);
  nlohmann::json trend = {{"best_level", best ? nlohmann::json(best->level) : nlohmann::json()},
                          {"spearman_j_vs_accuracy", std::isfinite(rho) ? nlohmann::json(rho) : nlohmann::json()}};
  return {{"format", kReportFormat},
          {"version", kReportVersion},
          {"task", report.task},
          {"config_digest", report.config_digest},
          {"seeds", {{"rig", report.rig_seed}, {"folds", report.fold_seed}}},
          {"notes",
           {"Hyperparameters are chosen on the same folds that produce the reported accuracy (no nested "
            "cross-validation), so accuracies are optimistically biased.",
            "t-tests compare per-fold accuracies of level 0 and the best level (Welch, two-sided)."}},
          {"levels", levels},
          {"t_tests", tests},
          {"trend", trend}};
}

inline void write_accuracy_csv(std::ostream& out, const EvalReport& report, const std::string& comment = {}) {
  if (!comment.empty()) out << "# " << comment << '\n';
  out << "level,intensity_db,mean_accuracy";
  const std::size_t folds = report.levels.empty() ? 0 : report.levels.front().cv.fold_accuracies.size();
  for (std::size_t f = 0; f < folds; ++f) out << ",fold" << f;
  out << '\n';
  for (const auto& l : report.levels) {
    out << l.level << ',' << format_double(l.intensity_db) << ',' << format_double(l.cv.mean_accuracy);
    for (double a : l.cv.fold_accuracies) out << ',' << format_double(a);
    out << '\n';
  }
}

inline void write_j_csv(std::ostream& out, const EvalReport& report, const std::string& comment = {}) {
  if (!comment.empty()) out << "# " << comment << '\n';
  out << "level,intensity_db,j_value,lambda1,lambda2,lambda3\n";
  for (const auto& l : report.levels) {
    out << l.level << ',' << format_double(l.intensity_db) << ',' << format_double(l.j_value);
    for (double v : l.fisher_eigenvalues) out << ',' << format_double(v);
    out << '\n';
  }
}

}  // namespace vibtac
