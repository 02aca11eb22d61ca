#pragma once

#include <string>
#include <vector>

#include "doa/bench.hpp"

namespace doa {

/// Static SVG of MSE (log scale, shown in dB) versus the sweep axis, one
/// polyline per method. Rows with no converged trials are skipped.
std::string rows_to_svg(const std::vector<BenchRow>& rows, const std::string& axis_label);

}  // namespace doa
