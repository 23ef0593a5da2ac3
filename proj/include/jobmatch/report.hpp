#pragma once

#include "jobmatch/estimator.hpp"

#include <string>

namespace jobmatch {

// Coefficient table: one row per basis with A, Gamma and Phi, then the scale parameters,
// standard errors in parentheses.
std::string format_table(const EstimationReport& report, const BasisSpec& spec);

// Structured report. `config_json` is echoed verbatim under "config" (must be JSON text).
// NaN values are written as null.
std::string report_to_json(const EstimationReport& report, const BasisSpec& spec,
                           const std::string& config_json = "{}");

std::string library_version();

}  // namespace jobmatch
