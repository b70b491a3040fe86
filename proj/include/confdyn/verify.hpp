#pragma once

#include "confdyn/report.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace confdyn {

struct VerifyContext {
  std::uint64_t seed = 7;
  unsigned jobs = 1;
};

struct VerifyCheck {
  std::string name;
  /// geometry, models, flow-engine, diagnostics or diagnostics-negative-controls.
  std::string scope;
  std::function<CheckEntry(const VerifyContext&)> run;
};

/// The certificate battery in execution order.
const std::vector<VerifyCheck>& verify_checks();

/// "all" followed by the individual scopes.
const std::vector<std::string>& verify_scopes();

/// Runs every check of `scope` ("all" runs everything). A check that throws
/// is recorded as a FAIL carrying the message; the others still run. Unknown
/// scopes raise Error(Config).
DiagnosticsReport verify_suite(const std::string& scope, const VerifyContext& ctx = {});

}  // namespace confdyn
