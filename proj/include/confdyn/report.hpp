#pragma once

#include "confdyn/flow.hpp"
#include "confdyn/models.hpp"

#include <map>
#include <string>
#include <vector>

namespace confdyn {

enum class Verdict { Pass, Fail, NegativeControl };

/// "PASS", "FAIL", "PASS-as-negative-control".
const char* to_string(Verdict v);

/// One certificate. `tolerance` is what `residual` is compared with; a
/// negative control passes when the defect it is built to show is present.
struct CheckEntry {
  std::string check;
  std::string model;
  std::map<std::string, std::vector<double>> params;
  double residual = 0.0;
  double tolerance = 0.0;
  Verdict verdict = Verdict::Fail;
  /// Kind of reference value: closed-form, published-constant, construction,
  /// reference-integration, sampling.
  std::string provenance;
  std::string detail;
  /// Extra measured quantities (ratio, escape time, counts, ...).
  std::map<std::string, double> values;
  double seconds = 0.0;

  bool passed() const { return verdict != Verdict::Fail; }
};

/// residual <= tolerance decides the verdict; NaN fails.
CheckEntry make_check(std::string check, const ModelSpec* model, double residual, double tolerance,
                      std::string provenance);

struct DiagnosticsReport {
  std::vector<CheckEntry> entries;

  bool all_passed() const;
  std::size_t passed_count() const;

  /// {"schema": 1, "checks": [...], "all_passed": ...}; generated_at and
  /// per-check seconds only when `timestamp` is set.
  std::string to_json(bool timestamp = true) const;
  /// Fixed-width table: check, model, residual, tolerance, verdict.
  std::string table() const;
};

std::string json_for(const CheckEntry& e);

/// 17 significant digits, enough to round-trip a double.
std::string format_double(double v);

/// Header `t,x0,...,x{n-1}[,r_accum]`; one row per sample.
std::string trajectory_csv(const Trajectory& tr);
/// Times, states, frames (row-major), r_accum, status.
std::string trajectory_json(const Trajectory& tr, const std::string& model, bool timestamp = true);
/// Header `x0,...,x{n-1}`.
std::string points_csv(const std::vector<State>& points);

/// Writes through a temporary file in the same directory and renames it.
void write_atomic(const std::string& path, const std::string& content);

/// "# generated <UTC time>\n".
std::string timestamp_line();

}  // namespace confdyn
