#pragma once

#include <string>
#include <vector>

#include "doa/estimators.hpp"

namespace doa {

enum class SweepAxis { SnrDb, Separation };

struct SweepSpec {
    std::string name;
    Scenario base;
    SweepAxis axis = SweepAxis::SnrDb;
    std::vector<double> values;  // sorted ascending
    int trials = 100;
    std::vector<Method> methods;
    std::uint64_t master_seed = 1;
    EstimatorOptions estimator;

    void validate() const;
};

struct BenchRow {
    double axis_value = 0.0;
    Method method = Method::CLasso;
    double mse = 0.0;  // rad^2, NaN when no trial converged
    double undefined_rate = 0.0;
    double mean_wall_time_ms = 0.0;
    int trials_used = 0;
};

/// Permutation-matched mean squared DOA error with circular wrapping.
double matched_mse(const std::vector<double>& estimated, const std::vector<double>& truth);

/// Scenario for one (axis value, trial) cell: noise level or second DOA set
/// from the axis, seed derived from (master seed, value index, trial).
Scenario derive_scenario(const SweepSpec& spec, int value_index, int trial);

struct TrialOutcome {
    EstimateReport report;
    double mse = 0.0;  // valid when report.status == Converged
};

TrialOutcome run_single_trial(const SweepSpec& spec, int value_index, int trial, Method method);

/// Monte Carlo sweep. Trials are independent; the OpenMP variant distributes
/// them across threads (capped by the DOA_THREADS environment variable) and
/// reduces in fixed trial order, so its rows match the serial reference
/// exactly.
std::vector<BenchRow> run_sweep(const SweepSpec& spec);
std::vector<BenchRow> run_sweep_serial(const SweepSpec& spec);

/// The experiment presets: "fig1" (two equal sources, SNR sweep), "fig2"
/// (separation sweep at 10 dB), "fig3" (three sources with a weak third,
/// SNR sweep).
std::vector<SweepSpec> builtin_scenarios();
const SweepSpec* find_scenario(const std::vector<SweepSpec>& specs, const std::string& name);

/// CSV with header axis,method,mse,undefined_rate,mean_wall_time_ms,trials_used.
/// Wall time is emitted as 0 unless with_timing is set: measured durations are
/// not run-to-run reproducible and the CSV is contractually byte-stable.
std::string rows_to_csv(const std::vector<BenchRow>& rows, bool with_timing = false);

}  // namespace doa
