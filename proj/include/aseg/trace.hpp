#pragma once

// Tidy CSV for run traces and their per-iteration aggregates.

#include <iosfwd>
#include <string>
#include <vector>

#include "aseg/aseg.hpp"

namespace aseg {

inline constexpr const char* kTraceHeader =
    "k,phi,gap,dist_sq,contacts,normalized_rounds,grad_norm_sq,wall_ms";

/// Doubles use the shortest round-trip representation; NaN is written "nan".
void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows);
void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows);

/// Inverse of write_trace_csv; throws ParseError on a schema mismatch.
std::vector<TraceRow> read_trace_csv(std::istream& in);
std::vector<TraceRow> read_trace_csv(const std::string& path);

struct AggregateRow {
  std::size_t k = 0;
  double contacts_mean = 0.0;
  double normalized_rounds_mean = 0.0;
  double gap_mean = 0.0;
  double gap_std = 0.0;
  double phi_mean = 0.0;
  double phi_std = 0.0;
};

inline constexpr const char* kAggregateHeader =
    "k,contacts_mean,normalized_rounds_mean,gap_mean,gap_std,phi_mean,phi_std";

/// Mean and sample standard deviation across traces of equal length.
std::vector<AggregateRow> aggregate_traces(const std::vector<std::vector<TraceRow>>& traces);
void write_aggregate_csv(const std::string& path, const std::vector<AggregateRow>& rows);
std::vector<AggregateRow> read_aggregate_csv(const std::string& path);

/// Shortest decimal string that parses back to exactly v.
std::string format_double(double v);

}  // namespace aseg
