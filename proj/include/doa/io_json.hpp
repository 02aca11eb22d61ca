#pragma once

#include <string>

#include "doa/bench.hpp"
#include "doa/estimators.hpp"

namespace doa {

/// Snapshot wire format: {"m": int, "x": [[re, im], ...]}.
std::string snapshot_to_json(const Snapshot& x);
Snapshot snapshot_from_json(const std::string& text);

/// Scenario wire format mirrors the type's fields; DOA angles travel under
/// the key "dogs" and complex values as [re, im] pairs.
std::string scenario_to_json(const Scenario& sc);
Scenario scenario_from_json(const std::string& text);

/// Estimate report, same conventions. Wall time is zeroed unless with_timing;
/// when opts is given the effective estimator options are recorded alongside.
std::string report_to_json(const EstimateReport& rep, bool with_timing = false,
                           const EstimatorOptions* opts = nullptr);
EstimateReport report_from_json(const std::string& text);

/// Sweep spec for `bench --spec-file`.
SweepSpec sweep_from_json(const std::string& text);

std::string read_file(const std::string& path);
/// Write via a temp file in the same directory plus rename.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace doa
