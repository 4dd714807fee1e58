#pragma once

#include <cstdint>
#include <cstdlib>
#include <istream>
#include <locale>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "json.hpp"
#include "pointcache/error.hpp"
#include "pointcache/pipeline.hpp"

namespace pointcache::report {

using nlohmann::json;

inline constexpr const char* kCsvHeader =
    "sample_id,true_label,pred_zs,pred_final,h_zs,h_top5_final,admission,cumulative_accuracy,"
    "h_top5_zs,wall_ns";
inline constexpr std::size_t kCsvColumns = 10;

// One parsed CSV row. Doubles are written in shortest round-trip form, so a
// parsed row reproduces the run-time values exactly.
struct Row {
  std::uint64_t sample_id = 0;
  std::optional<ClassIndex> true_label;
  ClassIndex pred_zero_shot = 0;
  ClassIndex pred_final = 0;
  double entropy_zero_shot = 0.0;
  double top5_entropy_final = 0.0;
  AdmissionKind admission = AdmissionKind::Skipped;
  std::optional<std::uint64_t> evicted_id;
  std::optional<double> cumulative_accuracy;
  double top5_entropy_zero_shot = 0.0;
  std::int64_t wall_ns = 0;
};

inline std::string admission_field(AdmissionKind kind, std::optional<std::uint64_t> evicted) {
  if (kind == AdmissionKind::Replaced && evicted) return fmt::format("replaced:{}", *evicted);
  return std::string(to_string(kind));
}

inline void write_csv(std::ostream& out, const RunReport& report) {
  out << kCsvHeader << '\n';
  const auto& series = report.metrics.accuracy_series();
  for (std::size_t i = 0; i < report.steps.size(); ++i) {
    const StepRecord& s = report.steps[i];
    std::string acc;
    if (i >= kWarmupSamples)
      if (const auto v = series[i - kWarmupSamples].value()) acc = fmt::format("{}", *v);
    out << fmt::format("{},{},{},{},{},{},{},{},{},{}\n", s.sample_id,
                       s.true_label ? static_cast<std::int64_t>(*s.true_label) : -1,
                       s.pred_zero_shot, s.pred_final, s.entropy_zero_shot, s.top5_entropy_final,
                       admission_field(s.admission, s.evicted_id), acc, s.top5_entropy_zero_shot,
                       s.wall_time_ns);
  }
  if (!out) throw Error("write_csv: write failed");
}

namespace detail {

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

template <typename T>
T parse_number(const std::string& text, std::size_t line, const char* column) {
  std::istringstream in(text);
  in.imbue(std::locale::classic());
  T value{};
  if (!(in >> value) || !(in >> std::ws).eof())
    throw FormatError(fmt::format("csv: bad {} '{}' on line {}", column, text, line), 0,
                      static_cast<std::int64_t>(line));
  return value;
}

// Round-trip parse for doubles; stream extraction is not guaranteed exact.
inline double parse_double(const std::string& text, std::size_t line, const char* column) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size())
    throw FormatError(fmt::format("csv: bad {} '{}' on line {}", column, text, line), 0,
                      static_cast<std::int64_t>(line));
  return v;
}

}  // namespace detail

inline std::vector<Row> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader)
    throw FormatError("csv: missing or unexpected header", 0);
  std::vector<Row> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = detail::split(line);
    if (f.size() != kCsvColumns)
      throw FormatError(fmt::format("csv: expected {} fields on line {}, got {}", kCsvColumns,
                                    lineno, f.size()),
                        0, static_cast<std::int64_t>(lineno));
    Row r;
    r.sample_id = detail::parse_number<std::uint64_t>(f[0], lineno, "sample_id");
    const auto label = detail::parse_number<std::int64_t>(f[1], lineno, "true_label");
    if (label >= 0) r.true_label = static_cast<ClassIndex>(label);
    r.pred_zero_shot = detail::parse_number<std::size_t>(f[2], lineno, "pred_zs");
    r.pred_final = detail::parse_number<std::size_t>(f[3], lineno, "pred_final");
    r.entropy_zero_shot = detail::parse_double(f[4], lineno, "h_zs");
    r.top5_entropy_final = detail::parse_double(f[5], lineno, "h_top5_final");
    const std::string& adm = f[6];
    if (adm == "skipped") r.admission = AdmissionKind::Skipped;
    else if (adm == "inserted") r.admission = AdmissionKind::Inserted;
    else if (adm == "rejected") r.admission = AdmissionKind::Rejected;
    else if (adm.starts_with("replaced:")) {
      r.admission = AdmissionKind::Replaced;
      r.evicted_id = detail::parse_number<std::uint64_t>(adm.substr(9), lineno, "admission");
    } else {
      throw FormatError(fmt::format("csv: bad admission '{}' on line {}", adm, lineno), 0,
                        static_cast<std::int64_t>(lineno));
    }
    if (!f[7].empty()) r.cumulative_accuracy = detail::parse_double(f[7], lineno, "cumulative_accuracy");
    r.top5_entropy_zero_shot = detail::parse_double(f[8], lineno, "h_top5_zs");
    r.wall_ns = detail::parse_number<std::int64_t>(f[9], lineno, "wall_ns");
    rows.push_back(std::move(r));
  }
  return rows;
}

// Rebuilds the run metrics from parsed rows alone.
inline RunMetrics recompute(const std::vector<Row>& rows) {
  RunMetrics metrics;
  for (const Row& r : rows) {
    StepRecord s;
    s.sample_id = r.sample_id;
    s.true_label = r.true_label;
    s.pred_zero_shot = r.pred_zero_shot;
    s.pred_final = r.pred_final;
    s.entropy_zero_shot = r.entropy_zero_shot;
    s.top5_entropy_final = r.top5_entropy_final;
    s.top5_entropy_zero_shot = r.top5_entropy_zero_shot;
    s.admission = r.admission;
    s.evicted_id = r.evicted_id;
    metrics.add(s);
  }
  return metrics;
}

inline json to_json(const EngineConfig& config) {
  json j;
  j["k_shots"] = config.shots;
  j["parts"] = config.parts;
  j["alpha_g"] = config.params.alpha_global;
  j["alpha_l"] = config.params.alpha_local;
  j["beta_g"] = config.params.beta_global;
  j["beta_l"] = config.params.beta_local;
  j["tau"] = config.temperature ? json(*config.temperature) : json(nullptr);
  j["mode"] = std::string(to_string(config.mode));
  j["admit_before_compute"] = config.admit_before_compute;
  j["seed"] = config.seed;
  return j;
}

// Applies the keys present in `j` on top of `base`; unknown keys are errors.
inline EngineConfig config_from_json(const json& j, EngineConfig base = {}) {
  if (!j.is_object()) throw ParameterError("config: expected a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "k_shots") base.shots = value.get<std::size_t>();
      else if (key == "parts") base.parts = value.get<std::size_t>();
      else if (key == "alpha_g") base.params.alpha_global = value.get<double>();
      else if (key == "alpha_l") base.params.alpha_local = value.get<double>();
      else if (key == "beta_g") base.params.beta_global = value.get<double>();
      else if (key == "beta_l") base.params.beta_local = value.get<double>();
      else if (key == "tau") {
        if (value.is_null()) base.temperature.reset();
        else base.temperature = value.get<double>();
      } else if (key == "mode") base.mode = parse_mode(value.get<std::string>());
      else if (key == "admit_before_compute") base.admit_before_compute = value.get<bool>();
      else if (key == "seed") base.seed = value.get<std::uint64_t>();
      else throw ParameterError("config: unknown key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw ParameterError(std::string("config: ") + e.what());
  }
  base.validate();
  return base;
}

inline json summary_json(const RunSummary& s) {
  json j;
  j["samples"] = s.samples;
  j["labeled"] = s.labeled;
  j["correct"] = s.correct;
  j["correct_zero_shot"] = s.correct_zero_shot;
  j["accumulated_correct"] = s.accumulated.correct;
  j["accumulated_seen"] = s.accumulated.seen;
  j["accuracy"] = s.accuracy() ? json(*s.accuracy()) : json(nullptr);
  j["warmup_discarded"] = kWarmupSamples;
  j["mean_entropy_zero_shot"] = s.mean_entropy_zero_shot;
  j["mean_top5_entropy_zero_shot"] = s.mean_top5_entropy_zero_shot;
  j["mean_top5_entropy_final"] = s.mean_top5_entropy_final;
  j["admissions"] = {{"inserted", s.inserted},
                     {"replaced", s.replaced},
                     {"rejected", s.rejected},
                     {"skipped", s.skipped}};
  return j;
}

inline json run_json(const RunReport& report, const EngineConfig& config) {
  json j;
  j["config"] = to_json(config);
  j["summary"] = summary_json(report.summary());
  j["wall_seconds"] = report.wall_seconds;
  j["throughput_samples_per_second"] = report.throughput();
  return j;
}

// Plot-ready series: one row per post-warm-up sample.
inline void write_series_csv(std::ostream& out, const RunMetrics& metrics) {
  out << "index,cumulative_accuracy,mean_top5_entropy_final,mean_top5_entropy_zs\n";
  const auto& acc = metrics.accuracy_series();
  for (std::size_t i = 0; i < acc.size(); ++i) {
    const auto v = acc[i].value();
    out << fmt::format("{},{},{},{}\n", i + kWarmupSamples + 1, v ? fmt::format("{}", *v) : "",
                       metrics.entropy_series()[i], metrics.entropy_series_zero_shot()[i]);
  }
}

}  // namespace pointcache::report
