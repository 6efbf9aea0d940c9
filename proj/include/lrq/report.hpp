#pragma once

#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "lrq/stats.hpp"

namespace lrq {

inline constexpr double kNa = std::numeric_limits<double>::quiet_NaN();

/// One line of the flat result table. NaN fields print as "na", infinite
/// ones as "inf" / "-inf".
struct ReportRow {
  std::string experiment;
  double t_or_k = kNa;
  std::string method;
  double mean = kNa;
  double var = kNa;
  double se = kNa;
  double n = kNa;
  double wall_ms = kNa;
};

ReportRow row_from(const std::string& experiment, double t_or_k, const EstimateSummary& s,
                   const std::string& method = {});

/// Shortest text that parses back to the same double, or a sentinel.
std::string format_number(double x);

inline constexpr const char* kCsvHeader = "experiment,t_or_K,method,mean,var,se,n,wall_ms";

void write_csv(std::ostream& out, const std::vector<ReportRow>& rows);

}  // namespace lrq
