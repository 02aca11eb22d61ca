#pragma once

#include <optional>
#include <vector>

#include "doa/array_model.hpp"

namespace doa {

/// A refined local maximum of the correlation spectrum f(phi) = |a(phi)^H nhat|.
struct PeakResult {
    double phi = 0.0;
    double p = 0.0;  // |a(phi)^H nhat|
    bool is_local_max = false;
};

/// a(phi)^H nhat.
cplx correlation(const SteeringModel& model, const CVector& nhat, double phi);

struct SpectrumOptions {
    int scan_density = 16;        // scan grid has ceil(scan_density * m) points
    int max_refine_iter = 80;
    double interval_tol = 1e-13;  // refinement stops when the bracket shrinks below this
};

/// All local maxima of f on [-pi, pi) (circular), refined by safeguarded
/// Newton on g = f^2, sorted by descending height. Exclusion zones are
/// applied after refinement.
std::vector<PeakResult> local_maxima(const SteeringModel& model, const CVector& nhat,
                                     const std::vector<double>& exclusions, double guard,
                                     const SpectrumOptions& opts = {});

/// Highest local maximum of f(phi) whose circular distance to every exclusion
/// exceeds guard. nullopt when no admissible local maximum exists (degenerate
/// residual; callers treat this as path termination).
std::optional<PeakResult> global_peak(const SteeringModel& model, const CVector& nhat,
                                      const std::vector<double>& exclusions, double guard,
                                      const SpectrumOptions& opts = {});

/// Grid variant used by SPS-LASSO: argmax of f over the given grid values,
/// skipping indices in `exclude`. Returns (index, value).
std::pair<int, double> grid_peak(const SteeringModel& model, const CVector& nhat,
                                 const std::vector<double>& grid,
                                 const std::vector<int>& exclude);

}  // namespace doa
