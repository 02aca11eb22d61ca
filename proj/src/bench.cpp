#include "doa/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <numbers>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace doa {

namespace {

constexpr double kPi = std::numbers::pi;

std::uint64_t double_bits(double v) {
    std::uint64_t b;
    std::memcpy(&b, &v, sizeof(b));
    return b;
}

int env_thread_cap() {
    const char* v = std::getenv("DOA_THREADS");
    if (!v) return 0;
    const int n = std::atoi(v);
    return n > 0 ? n : 0;
}

}  // namespace

void SweepSpec::validate() const {
    if (trials < 1) throw std::invalid_argument("SweepSpec: trials must be >= 1");
    if (values.empty()) throw std::invalid_argument("SweepSpec: values must be nonempty");
    if (!std::is_sorted(values.begin(), values.end()))
        throw std::invalid_argument("SweepSpec: values must be sorted");
    if (methods.empty()) throw std::invalid_argument("SweepSpec: no methods selected");
    base.validate();
}

double matched_mse(const std::vector<double>& estimated, const std::vector<double>& truth) {
    if (estimated.size() != truth.size())
        throw std::invalid_argument("matched_mse: length mismatch");
    const int n = static_cast<int>(truth.size());
    if (n == 0) return 0.0;
    if (n > 6) throw std::invalid_argument("matched_mse: n must be <= 6");
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    double best = std::numeric_limits<double>::infinity();
    do {
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            const double d = std::remainder(estimated[perm[i]] - truth[i], 2.0 * kPi);
            acc += d * d;
        }
        best = std::min(best, acc / double(n));
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

Scenario derive_scenario(const SweepSpec& spec, int value_index, int trial) {
    Scenario sc = spec.base;
    const double v = spec.values.at(value_index);
    if (spec.axis == SweepAxis::SnrDb) {
        const double p1 = std::norm(sc.amplitudes.at(0));
        sc.noise_std = std::sqrt(p1 / std::pow(10.0, v / 10.0));
    } else {
        if (sc.doas.size() < 2)
            throw std::invalid_argument("separation sweep needs at least two sources");
        sc.doas[1] = wrap_angle(sc.doas[0] + v);
    }
    sc.seed = spec.master_seed ^ mix64(double_bits(v) + 0x517cc1b727220a95ULL * std::uint64_t(trial + 1));
    return sc;
}

TrialOutcome run_single_trial(const SweepSpec& spec, int value_index, int trial, Method method) {
    const Scenario sc = derive_scenario(spec, value_index, trial);
    const SteeringModel model(sc.m);
    const Snapshot x = synthesize(sc);
    EstimatorOptions opts = spec.estimator;
    opts.n = static_cast<int>(sc.doas.size());
    TrialOutcome out;
    out.report = run_estimator(method, model, x, opts);
    if (out.report.status == EstStatus::Converged) {
        out.mse = matched_mse(out.report.doas, sc.doas);
    }
    return out;
}

namespace {

std::vector<BenchRow> reduce_rows(const SweepSpec& spec,
                                  const std::vector<TrialOutcome>& cells) {
    // cells layout: [value][method][trial]
    const int nv = static_cast<int>(spec.values.size());
    const int nm = static_cast<int>(spec.methods.size());
    const int nt = spec.trials;
    std::vector<BenchRow> rows;
    rows.reserve(nv * nm);
    for (int vi = 0; vi < nv; ++vi) {
        for (int mi = 0; mi < nm; ++mi) {
            BenchRow row;
            row.axis_value = spec.values[vi];
            row.method = spec.methods[mi];
            double acc = 0.0, tacc = 0.0;
            int used = 0;
            for (int t = 0; t < nt; ++t) {
                const TrialOutcome& cell = cells[(vi * nm + mi) * nt + t];
                tacc += cell.report.wall_time_ms;
                if (cell.report.status == EstStatus::Converged) {
                    acc += cell.mse;
                    ++used;
                }
            }
            row.trials_used = used;
            row.mse = used > 0 ? acc / used : std::numeric_limits<double>::quiet_NaN();
            row.undefined_rate = 1.0 - double(used) / double(nt);
            row.mean_wall_time_ms = tacc / nt;
            rows.push_back(row);
        }
    }
    return rows;
}

}  // namespace

std::vector<BenchRow> run_sweep_serial(const SweepSpec& spec) {
    spec.validate();
    const int nv = static_cast<int>(spec.values.size());
    const int nm = static_cast<int>(spec.methods.size());
    const int nt = spec.trials;
    std::vector<TrialOutcome> cells(std::size_t(nv) * nm * nt);
    for (int vi = 0; vi < nv; ++vi)
        for (int mi = 0; mi < nm; ++mi)
            for (int t = 0; t < nt; ++t)
                cells[(vi * nm + mi) * std::size_t(nt) + t] =
                    run_single_trial(spec, vi, t, spec.methods[mi]);
    return reduce_rows(spec, cells);
}

std::vector<BenchRow> run_sweep(const SweepSpec& spec) {
    spec.validate();
    const int nv = static_cast<int>(spec.values.size());
    const int nm = static_cast<int>(spec.methods.size());
    const int nt = spec.trials;
    const long total = long(nv) * nm * nt;
    std::vector<TrialOutcome> cells(total);
#ifdef _OPENMP
    const int cap = env_thread_cap();
    const int threads = cap > 0 ? std::min(cap, omp_get_max_threads()) : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (long idx = 0; idx < total; ++idx) {
        const int vi = int(idx / (long(nm) * nt));
        const int mi = int((idx / nt) % nm);
        const int t = int(idx % nt);
        cells[idx] = run_single_trial(spec, vi, t, spec.methods[mi]);
    }
#else
    for (long idx = 0; idx < total; ++idx) {
        const int vi = int(idx / (long(nm) * nt));
        const int mi = int((idx / nt) % nm);
        const int t = int(idx % nt);
        cells[idx] = run_single_trial(spec, vi, t, spec.methods[mi]);
    }
#endif
    return reduce_rows(spec, cells);
}

std::vector<SweepSpec> builtin_scenarios() {
    std::vector<SweepSpec> out;

    {
        SweepSpec s;
        s.name = "fig1";
        s.base.m = 15;
        s.base.doas = {-2.0 * kPi / 15.0, 2.0 * kPi / 15.0};  // separation 4*pi/m
        s.base.amplitudes = {cplx(1.0, 0.0), cplx(1.0, 0.0)};
        s.axis = SweepAxis::SnrDb;
        for (int v = 0; v <= 30; v += 2) s.values.push_back(v);
        s.trials = 100;
        s.methods = {Method::CLasso, Method::CLassoH, Method::Ml, Method::Relax};
        out.push_back(std::move(s));
    }
    {
        SweepSpec s;
        s.name = "fig2";
        s.base.m = 15;
        s.base.doas = {0.0, 0.0};  // second DOA comes from the axis
        s.base.amplitudes = {cplx(1.0, 0.0), cplx(1.0, 0.0)};
        s.base.noise_std = std::sqrt(1.0 / std::pow(10.0, 1.0));  // SNR = 10 dB
        s.axis = SweepAxis::Separation;
        const double hi = 8.0 * kPi / 15.0;
        const int steps = 16;
        for (int i = 1; i <= steps; ++i) s.values.push_back(hi * double(i) / double(steps));
        s.trials = 100;
        s.methods = {Method::CLasso, Method::Relax};
        out.push_back(std::move(s));
    }
    {
        SweepSpec s;
        s.name = "fig3";
        s.base.m = 15;
        s.base.doas = {-5.0 * kPi / 15.0, 0.0, 3.5 * kPi / 15.0};
        s.base.amplitudes = {cplx(1.0, 0.0), cplx(1.0, 0.0), cplx(0.0, 0.1)};
        s.axis = SweepAxis::SnrDb;
        for (int v = 0; v <= 30; v += 5) s.values.push_back(v);
        s.trials = 100;
        s.methods = {Method::CLassoH, Method::Relax};
        s.estimator.mu = 0.8;
        out.push_back(std::move(s));
    }
    return out;
}

const SweepSpec* find_scenario(const std::vector<SweepSpec>& specs, const std::string& name) {
    for (const auto& s : specs) {
        if (s.name == name) return &s;
    }
    return nullptr;
}

std::string rows_to_csv(const std::vector<BenchRow>& rows, bool with_timing) {
    std::string out = "axis,method,mse,undefined_rate,mean_wall_time_ms,trials_used\n";
    char buf[192];
    for (const BenchRow& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.12g,%s,%.12g,%.12g,%.3f,%d\n", r.axis_value,
                      method_name(r.method), r.mse, r.undefined_rate,
                      with_timing ? r.mean_wall_time_ms : 0.0, r.trials_used);
        out += buf;
    }
    return out;
}

}  // namespace doa
