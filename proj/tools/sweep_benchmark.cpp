// Timing comparison between the serial reference sweep runner and the
// OpenMP one, on a reduced fig1 sweep. Also cross-checks that both produce
// identical rows.

#include <chrono>
#include <cstdio>

#include "doa/bench.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace doa;

int main(int argc, char** argv) {
    int trials = 20;
    if (argc > 1) trials = std::atoi(argv[1]);

    auto specs = builtin_scenarios();
    SweepSpec spec = *find_scenario(specs, "fig1");
    spec.trials = trials;
    spec.values = {0, 6, 12, 18, 24, 30};
    spec.methods = {Method::CLasso, Method::CLassoH, Method::Relax};

    const auto t0 = std::chrono::steady_clock::now();
    const auto rows_serial = run_sweep_serial(spec);
    const auto t1 = std::chrono::steady_clock::now();
    const auto rows_par = run_sweep(spec);
    const auto t2 = std::chrono::steady_clock::now();

    const double ser_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    const double par_ms = std::chrono::duration<double, std::milli>(t2 - t1).count();

    const std::string a = rows_to_csv(rows_serial);
    const std::string b = rows_to_csv(rows_par);

    int threads = 1;
#ifdef _OPENMP
    threads = omp_get_max_threads();
#endif
    std::printf("trials/value       : %d\n", trials);
    std::printf("serial reference   : %.1f ms\n", ser_ms);
    std::printf("openmp (%2d threads): %.1f ms\n", threads, par_ms);
    std::printf("speedup            : %.2fx\n", ser_ms / par_ms);
    std::printf("rows identical     : %s\n", a == b ? "yes" : "NO");
    return a == b ? 0 : 1;
}
