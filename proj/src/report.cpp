#include "lrq/report.hpp"

#include <charconv>

namespace lrq {

ReportRow row_from(const std::string& experiment, double t_or_k, const EstimateSummary& s, const std::string& method) {
  ReportRow r;
  r.experiment = experiment;
  r.t_or_k = t_or_k;
  r.method = method.empty() ? s.method : method;
  r.mean = s.mean;
  r.var = s.var;
  r.se = s.se;
  r.n = static_cast<double>(s.n);
  return r;
}

std::string format_number(double x) {
  if (std::isnan(x)) return "na";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (x == 0.0) return "0";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

namespace {

// Experiment ids and method names are quoted only when they need it.
std::string field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

void write_csv(std::ostream& out, const std::vector<ReportRow>& rows) {
  out << kCsvHeader << '\n';
  for (const auto& r : rows)
    out << field(r.experiment) << ',' << format_number(r.t_or_k) << ',' << field(r.method) << ','
        << format_number(r.mean) << ',' << format_number(r.var) << ',' << format_number(r.se) << ','
        << format_number(r.n) << ',' << format_number(r.wall_ms) << '\n';
}

}  // namespace lrq
