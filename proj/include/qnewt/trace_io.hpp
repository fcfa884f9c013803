#pragma once

#include <cstdio>
#include <cstdlib>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "qnewt/error.hpp"
#include "qnewt/kantorovich.hpp"
#include "qnewt/qspace.hpp"
#include "qnewt/solver.hpp"

namespace qnewt {

inline constexpr const char* kTraceCsvHeader =
    "k,residual_norm,step_dist,dist_to_ref,t_k,f_t_over_B,selection_index";

/// One serialized trace row. Row k describes iterate k plus the step leaving
/// it, so step_dist and selection_index are absent on the final row; t_k and
/// f_t_over_B are present only for certified runs.
struct TraceRow {
  std::size_t k = 0;
  double residual_norm = 0.0;
  std::optional<double> step_dist;
  std::optional<double> dist_to_ref;
  std::optional<double> t_k;
  std::optional<double> f_t_over_B;
  std::optional<std::size_t> selection_index;
};

struct TraceTable {
  std::vector<TraceRow> rows;

  std::vector<double> residual_norms() const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.residual_norm);
    return out;
  }

  /// Reference distances, if every row carries one.
  std::optional<std::vector<double>> dists_to_ref() const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) {
      if (!r.dist_to_ref) return std::nullopt;
      out.push_back(*r.dist_to_ref);
    }
    if (out.empty()) return std::nullopt;
    return out;
  }

  std::vector<double> step_dists() const {
    std::vector<double> out;
    for (const auto& r : rows)
      if (r.step_dist) out.push_back(*r.step_dist);
    return out;
  }
};

/// Flattens a run into rows; pass the certificate to populate the t_k and
/// f_t_over_B columns of a certified run.
template <QuasiMetricSpace S>
TraceTable make_trace_table(const IterationTrace<S>& trace,
                            const MajorantCertificate* cert = nullptr) {
  TraceTable table;
  const std::size_t n = trace.points.size();
  table.rows.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    TraceRow row;
    row.k = k;
    row.residual_norm = trace.residual_norms[k];
    if (k < trace.step_dists.size()) row.step_dist = trace.step_dists[k];
    if (trace.dists_to_ref) row.dist_to_ref = (*trace.dists_to_ref)[k];
    if (k < trace.selection_indices.size()) row.selection_index = trace.selection_indices[k];
    if (cert) {
      if (k < cert->t_sequence.size()) row.t_k = cert->t_sequence[k];
      if (k < cert->residual_bounds.size()) row.f_t_over_B = cert->residual_bounds[k].bound;
    }
    table.rows.push_back(row);
  }
  return table;
}

namespace detail {

/// Shortest-round-trip rendering: 17 significant digits recover the exact
/// double on re-read.
inline std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

inline double parse_real(const std::string& s, std::size_t line_no) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0')
    fail(ErrorCode::io_error,
         "line " + std::to_string(line_no) + ": bad numeric field '" + s + "'");
  return v;
}

}  // namespace detail

inline void write_trace_csv(std::ostream& out, const TraceTable& table) {
  out << kTraceCsvHeader << '\n';
  for (const auto& r : table.rows) {
    out << r.k << ',' << detail::format_real(r.residual_norm) << ',';
    if (r.step_dist) out << detail::format_real(*r.step_dist);
    out << ',';
    if (r.dist_to_ref) out << detail::format_real(*r.dist_to_ref);
    out << ',';
    if (r.t_k) out << detail::format_real(*r.t_k);
    out << ',';
    if (r.f_t_over_B) out << detail::format_real(*r.f_t_over_B);
    out << ',';
    if (r.selection_index) out << *r.selection_index;
    out << '\n';
  }
}

inline TraceTable read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::io_error, "empty trace file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTraceCsvHeader)
    fail(ErrorCode::io_error, "unexpected trace header: '" + line + "'");
  TraceTable table;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != 7)
      fail(ErrorCode::io_error, "line " + std::to_string(line_no) + ": expected 7 fields, got " +
                                    std::to_string(fields.size()));
    TraceRow row;
    row.k = static_cast<std::size_t>(detail::parse_real(fields[0], line_no));
    row.residual_norm = detail::parse_real(fields[1], line_no);
    if (!fields[2].empty()) row.step_dist = detail::parse_real(fields[2], line_no);
    if (!fields[3].empty()) row.dist_to_ref = detail::parse_real(fields[3], line_no);
    if (!fields[4].empty()) row.t_k = detail::parse_real(fields[4], line_no);
    if (!fields[5].empty()) row.f_t_over_B = detail::parse_real(fields[5], line_no);
    if (!fields[6].empty())
      row.selection_index = static_cast<std::size_t>(detail::parse_real(fields[6], line_no));
    table.rows.push_back(row);
  }
  return table;
}

/// Rate analysis of a reloaded trace: prefers the dist_to_ref column, falls
/// back to step distances (flagged), mirroring in-process analyze_trace.
inline TraceAnalysis analyze_table(const TraceTable& table, double tol = 0.15) {
  TraceAnalysis analysis;
  std::vector<double> seq;
  if (auto refs = table.dists_to_ref()) {
    seq = *refs;
  } else {
    seq = table.step_dists();
    analysis.used_step_proxy = true;
  }
  try {
    analysis.report = classify_rate(seq, tol);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::insufficient_data) throw;
    analysis.insufficient = true;
    analysis.report.classification = RateClass::inconclusive;
    analysis.report.note = "trace too short to classify";
  }
  return analysis;
}

}  // namespace qnewt
