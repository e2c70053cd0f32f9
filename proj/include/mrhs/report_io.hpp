#pragma once

// CSV and JSON output for solve reports.
//
// CSV: header method,rhs_index,iterations,matvecs,gamma,wall_ms, one row per
// (method, record), then one aggregate row per method with rhs_index "all",
// total iterations and matvecs, the geometric-mean gamma and the total wall time.

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mrhs/report.hpp"

namespace mrhs::io {

struct CsvOptions {
  /// Write 0 for every timing field so that reruns produce identical bytes.
  bool zero_timings = false;
};

namespace detail {

inline std::string number(Real v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string millis(double v, bool zero) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3f", zero ? 0.0 : v);
  return buf;
}

}  // namespace detail

inline void write_csv(std::ostream& out, const std::vector<SolveReport>& reports, const CsvOptions& options = {}) {
  out << "method,rhs_index,iterations,matvecs,gamma,wall_ms\n";
  for (const auto& rep : reports)
    for (const auto& r : rep.records)
      out << rep.method << ',' << r.rhs_index << ',' << r.iterations << ',' << r.matvecs << ','
          << detail::number(r.gamma) << ',' << detail::millis(r.wall_ms, options.zero_timings) << '\n';
  for (const auto& rep : reports)
    out << rep.method << ",all," << rep.total_iterations << ',' << rep.total_matvecs << ','
        << detail::number(rep.geom_mean_gamma) << ',' << detail::millis(rep.wall_ms, options.zero_timings) << '\n';
}

inline std::string to_csv(const std::vector<SolveReport>& reports, const CsvOptions& options = {}) {
  std::ostringstream os;
  write_csv(os, reports, options);
  return os.str();
}

using json = nlohmann::ordered_json;

inline json to_json(const SolveReport& rep, bool zero_timings = false) {
  json records = json::array();
  for (const auto& r : rep.records) {
    records.push_back({
        {"rhs_index", r.rhs_index},
        {"iterations", r.iterations},
        {"matvecs", r.matvecs},
        {"rhs_norm", r.rhs_norm},
        {"eps", r.eps},
        {"true_residual", r.true_residual},
        {"gamma", r.gamma},
        {"converged", r.converged},
        {"breakdown", r.breakdown},
        {"wall_ms", zero_timings ? 0.0 : r.wall_ms},
        {"residual_history", r.residual_history},
    });
  }
  return {
      {"method", rep.method},
      {"total_iterations", rep.total_iterations},
      {"total_matvecs", rep.total_matvecs},
      {"geom_mean_gamma", rep.geom_mean_gamma},
      {"max_gamma", rep.max_gamma},
      {"wall_ms", zero_timings ? 0.0 : rep.wall_ms},
      {"matvec_ms", zero_timings ? 0.0 : rep.matvec_ms},
      {"all_converged", rep.all_converged()},
      {"records", records},
  };
}

inline json to_json(const std::vector<SolveReport>& reports, bool zero_timings = false) {
  json list = json::array();
  for (const auto& rep : reports) list.push_back(to_json(rep, zero_timings));
  return {{"reports", list}};
}

inline SolveReport report_from_json(const json& j) {
  SolveReport rep;
  rep.method = j.at("method").get<std::string>();
  rep.total_iterations = j.at("total_iterations").get<Index>();
  rep.total_matvecs = j.at("total_matvecs").get<long long>();
  rep.geom_mean_gamma = j.at("geom_mean_gamma").get<Real>();
  rep.max_gamma = j.at("max_gamma").get<Real>();
  rep.wall_ms = j.at("wall_ms").get<double>();
  rep.matvec_ms = j.at("matvec_ms").get<double>();
  for (const auto& jr : j.at("records")) {
    RecordReport r;
    r.rhs_index = jr.at("rhs_index").get<Index>();
    r.iterations = jr.at("iterations").get<Index>();
    r.matvecs = jr.at("matvecs").get<long long>();
    r.rhs_norm = jr.at("rhs_norm").get<Real>();
    r.eps = jr.at("eps").get<Real>();
    r.true_residual = jr.at("true_residual").get<Real>();
    r.gamma = jr.at("gamma").get<Real>();
    r.converged = jr.at("converged").get<bool>();
    r.breakdown = jr.at("breakdown").get<bool>();
    r.wall_ms = jr.at("wall_ms").get<double>();
    r.residual_history = jr.at("residual_history").get<std::vector<Real>>();
    rep.records.push_back(std::move(r));
  }
  return rep;
}

inline std::vector<SolveReport> reports_from_json(const json& j) {
  std::vector<SolveReport> out;
  for (const auto& jr : j.at("reports")) out.push_back(report_from_json(jr));
  return out;
}

enum class Format { csv, json };

inline Format parse_format(const std::string& name) {
  if (name == "csv") return Format::csv;
  if (name == "json") return Format::json;
  throw std::invalid_argument("unknown report format '" + name + "' (expected csv or json)");
}

/// Writes the reports to path ("-" for stdout is handled by the caller).
inline void emit_report(const std::vector<SolveReport>& reports, Format format, const std::string& path,
                        bool zero_timings = false) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write report " + path);
  if (format == Format::csv) write_csv(out, reports, {zero_timings});
  else out << to_json(reports, zero_timings).dump(2) << '\n';
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace mrhs::io
