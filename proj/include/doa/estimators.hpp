#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "doa/newton.hpp"
#include "doa/spectrum.hpp"

namespace doa {

enum class Method { CLasso, CLassoH, SpsLasso, Ml, Relax };

const char* method_name(Method m);
std::optional<Method> method_from_name(const std::string& name);

enum class EstStatus { Converged, Undefined, Failed };
const char* status_name(EstStatus s);

/// Estimator output. `iterations` counts the method's outer steps: homotopy
/// steps (births + H moves) for the LASSO family, Newton iterations for ML,
/// refinement cycles for RELAX.
struct EstimateReport {
    Method method = Method::CLasso;
    std::vector<double> doas;
    std::vector<cplx> amplitudes;
    std::vector<std::pair<double, int>> lambda_path;  // (lambda, support size)
    std::vector<std::pair<double, double>> births;    // (lambda, angle at birth)
    int iterations = 0;
    EstStatus status = EstStatus::Failed;
    double wall_time_ms = 0.0;
    std::string message;
};

struct EstimatorOptions {
    int n = 1;                          // requested model order
    double mu = 0.8;                    // C-LASSO_h lambda relaxation
    double report_lambda_factor = 0.5;  // final continuation target vs birth lambda
    NewtonOptions newton;
    int grid_size = 1024;               // SPS-LASSO
    double guard = -1.0;                // <0 selects the default 0.05 * 2pi/m
    std::optional<double> stop_lambda;  // C-LASSO only: read the path at this lambda
    long ml_budget = 2'000'000;         // max tuples in the ML exhaustive stage
    double birth_tol = 1e-6;            // birth when lambda - p <= birth_tol * lambda
    double lambda_floor_rel = 1e-12;    // path termination vs lambda_0
    int max_path_steps = 4000;

    double guard_for(int m) const;
};

EstimateReport classo(const SteeringModel& model, const Snapshot& x, const EstimatorOptions& opts);
EstimateReport classo_h(const SteeringModel& model, const Snapshot& x, const EstimatorOptions& opts);
EstimateReport sps_lasso(const SteeringModel& model, const Snapshot& x, const EstimatorOptions& opts);
EstimateReport ml_estimate(const SteeringModel& model, const Snapshot& x, const EstimatorOptions& opts);
EstimateReport relax(const SteeringModel& model, const Snapshot& x, const EstimatorOptions& opts);

EstimateReport run_estimator(Method method, const SteeringModel& model, const Snapshot& x,
                             const EstimatorOptions& opts);

/// Continue lambda downward from a converged state without allowing further
/// births. Stops when the off-support peak reaches lambda or when lambda
/// falls to report_lambda_factor times the entry lambda, whichever is first.
SupportState final_polish(const SteeringModel& model, const Snapshot& x, const SupportState& state,
                          const EstimatorOptions& opts);

/// Independent re-check of the continuous LASSO optimality certificate for a
/// reported estimate: the off-support spectrum stays below lambda and each
/// support atom satisfies a^H nhat = lambda s/|s|.
struct Certificate {
    double off_support_excess = 0.0;   // max f(phi)/lambda - 1 off support
    double support_residual = 0.0;     // max |a_i^H nhat - lambda s_i/|s_i||
    double lambda = 0.0;
    bool pass = false;
};

Certificate certificate_check(const SteeringModel& model, const Snapshot& x,
                              const std::vector<double>& doas, const std::vector<cplx>& amplitudes,
                              double lambda, double guard, double off_tol = 1e-6,
                              double support_tol = 1e-8);

}  // namespace doa
