#include "aseg/trace.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "aseg/dataio.hpp"

namespace aseg {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, std::size_t line) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ParseError(line, "not a number: '" + s + "'");
  return v;
}

template <class Int>
Int parse_int(const std::string& s, std::size_t line) {
  Int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ParseError(line, "not an integer: '" + s + "'");
  return v;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  return f;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  return f;
}

}  // namespace

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows) {
  out << kTraceHeader << '\n';
  for (const auto& r : rows) {
    out << r.k << ',' << format_double(r.phi) << ',' << format_double(r.gap) << ','
        << format_double(r.dist_sq) << ',' << r.contacts << ','
        << format_double(r.normalized_rounds) << ',' << format_double(r.grad_norm_sq) << ','
        << format_double(r.wall_ms) << '\n';
  }
}

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows) {
  auto f = open_out(path);
  write_trace_csv(f, rows);
}

std::vector<TraceRow> read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader)
    throw ParseError(1, "trace header mismatch");
  std::vector<TraceRow> rows;
  std::size_t ln = 1;
  while (std::getline(in, line)) {
    ++ln;
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != 8) throw ParseError(ln, "expected 8 columns, got " + std::to_string(c.size()));
    TraceRow r;
    r.k = parse_int<std::size_t>(c[0], ln);
    r.phi = parse_double(c[1], ln);
    r.gap = parse_double(c[2], ln);
    r.dist_sq = parse_double(c[3], ln);
    r.contacts = parse_int<std::int64_t>(c[4], ln);
    r.normalized_rounds = parse_double(c[5], ln);
    r.grad_norm_sq = parse_double(c[6], ln);
    r.wall_ms = parse_double(c[7], ln);
    rows.push_back(r);
  }
  return rows;
}

std::vector<TraceRow> read_trace_csv(const std::string& path) {
  auto f = open_in(path);
  return read_trace_csv(f);
}

std::vector<AggregateRow> aggregate_traces(const std::vector<std::vector<TraceRow>>& traces) {
  if (traces.empty()) return {};
  const std::size_t len = traces.front().size();
  for (const auto& t : traces)
    if (t.size() != len) throw std::invalid_argument("aggregate_traces: traces differ in length");
  const double n = static_cast<double>(traces.size());
  std::vector<AggregateRow> out(len);
  for (std::size_t i = 0; i < len; ++i) {
    AggregateRow& a = out[i];
    a.k = traces.front()[i].k;
    for (const auto& t : traces) {
      a.contacts_mean += static_cast<double>(t[i].contacts);
      a.normalized_rounds_mean += t[i].normalized_rounds;
      a.gap_mean += t[i].gap;
      a.phi_mean += t[i].phi;
    }
    a.contacts_mean /= n;
    a.normalized_rounds_mean /= n;
    a.gap_mean /= n;
    a.phi_mean /= n;
    if (traces.size() > 1) {
      for (const auto& t : traces) {
        a.gap_std += (t[i].gap - a.gap_mean) * (t[i].gap - a.gap_mean);
        a.phi_std += (t[i].phi - a.phi_mean) * (t[i].phi - a.phi_mean);
      }
      a.gap_std = std::sqrt(a.gap_std / (n - 1.0));
      a.phi_std = std::sqrt(a.phi_std / (n - 1.0));
    }
  }
  return out;
}

void write_aggregate_csv(const std::string& path, const std::vector<AggregateRow>& rows) {
  auto f = open_out(path);
  f << kAggregateHeader << '\n';
  for (const auto& a : rows) {
    f << a.k << ',' << format_double(a.contacts_mean) << ','
      << format_double(a.normalized_rounds_mean) << ',' << format_double(a.gap_mean) << ','
      << format_double(a.gap_std) << ',' << format_double(a.phi_mean) << ','
      << format_double(a.phi_std) << '\n';
  }
}

std::vector<AggregateRow> read_aggregate_csv(const std::string& path) {
  auto f = open_in(path);
  std::string line;
  if (!std::getline(f, line) || line != kAggregateHeader)
    throw ParseError(1, "aggregate header mismatch");
  std::vector<AggregateRow> rows;
  std::size_t ln = 1;
  while (std::getline(f, line)) {
    ++ln;
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != 7) throw ParseError(ln, "expected 7 columns");
    AggregateRow a;
    a.k = parse_int<std::size_t>(c[0], ln);
    a.contacts_mean = parse_double(c[1], ln);
    a.normalized_rounds_mean = parse_double(c[2], ln);
    a.gap_mean = parse_double(c[3], ln);
    a.gap_std = parse_double(c[4], ln);
    a.phi_mean = parse_double(c[5], ln);
    a.phi_std = parse_double(c[6], ln);
    rows.push_back(a);
  }
  return rows;
}

}  // namespace aseg
