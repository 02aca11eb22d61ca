#include <cmath>
#include <cstdio>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "doa/bench.hpp"
#include "doa/estimators.hpp"
#include "doa/io_json.hpp"
#include "doa/svg_plot.hpp"

namespace {

using namespace doa;

double physical_degrees(double electrical) {
    // phi = pi cos(theta) for a half-wavelength ULA
    const double c = std::clamp(electrical / std::numbers::pi, -1.0, 1.0);
    return std::acos(c) * 180.0 / std::numbers::pi;
}

std::vector<Method> parse_methods(const std::string& csv) {
    std::vector<Method> out;
    std::size_t start = 0;
    while (start <= csv.size()) {
        const std::size_t comma = csv.find(',', start);
        const std::string tok = csv.substr(start, comma == std::string::npos ? std::string::npos
                                                                             : comma - start);
        if (!tok.empty()) {
            const auto m = method_from_name(tok);
            if (!m) throw std::runtime_error("unknown method: " + tok);
            out.push_back(*m);
        }
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

struct CommonFlags {
    std::string method = "classo";
    int n = 1;
    double mu = 0.8;
    double report_lambda_factor = 0.5;
    int grid_size = 1024;
    bool timing = false;
    bool degrees_physical = false;
};

EstimatorOptions options_from(const CommonFlags& f) {
    EstimatorOptions opts;
    opts.n = f.n;
    opts.mu = f.mu;
    opts.report_lambda_factor = f.report_lambda_factor;
    opts.grid_size = f.grid_size;
    return opts;
}

int cmd_estimate(const std::string& in_path, const std::string& out_path, const CommonFlags& f) {
    const auto method = method_from_name(f.method);
    if (!method) {
        std::cerr << "error: unknown method '" << f.method << "'\n";
        return 1;
    }
    const Snapshot x = snapshot_from_json(read_file(in_path));
    const SteeringModel model(x.m());
    const EstimatorOptions opts = options_from(f);
    const EstimateReport rep = run_estimator(*method, model, x, opts);
    const std::string text = report_to_json(rep, f.timing, &opts);
    if (out_path.empty()) {
        std::cout << text;
    } else {
        write_file_atomic(out_path, text);
    }
    if (f.degrees_physical) {
        std::cerr << "physical angles (deg):";
        for (double phi : rep.doas) std::cerr << " " << physical_degrees(phi);
        std::cerr << "\n";
    }
    if (rep.status == EstStatus::Converged) return 0;
    if (rep.status == EstStatus::Undefined) return 2;
    std::cerr << "estimation failed: " << rep.message << "\n";
    return 1;
}

int cmd_synth(const std::string& scenario_path, const std::string& out_path, int m,
              std::vector<double> doas, std::vector<double> amps_flat, double noise_std,
              std::uint64_t seed) {
    Scenario sc;
    if (!scenario_path.empty()) {
        sc = scenario_from_json(read_file(scenario_path));
        if (seed != 0) sc.seed = seed;
    } else {
        sc.m = m;
        sc.doas = std::move(doas);
        if (amps_flat.size() == sc.doas.size()) {
            for (double a : amps_flat) sc.amplitudes.emplace_back(a, 0.0);
        } else if (amps_flat.size() == 2 * sc.doas.size()) {
            for (std::size_t i = 0; i < sc.doas.size(); ++i)
                sc.amplitudes.emplace_back(amps_flat[2 * i], amps_flat[2 * i + 1]);
        } else if (amps_flat.empty()) {
            sc.amplitudes.assign(sc.doas.size(), cplx(1.0, 0.0));
        } else {
            std::cerr << "error: --amps needs one (real) or two (re im) values per source\n";
            return 1;
        }
        sc.noise_std = noise_std;
        sc.seed = seed;
    }
    const Snapshot x = synthesize(sc);
    const std::string text = snapshot_to_json(x);
    if (out_path.empty()) std::cout << text;
    else write_file_atomic(out_path, text);
    return 0;
}

int cmd_bench(const std::string& scenario_name, const std::string& spec_path,
              const std::string& out_path, const std::string& plot_path, int trials,
              std::uint64_t seed, const std::string& methods_csv, const CommonFlags& f,
              bool serial) {
    SweepSpec spec;
    if (!spec_path.empty()) {
        spec = sweep_from_json(read_file(spec_path));
    } else {
        const auto all = builtin_scenarios();
        const SweepSpec* found = find_scenario(all, scenario_name);
        if (!found) {
            std::cerr << "error: unknown scenario '" << scenario_name
                      << "' (builtins: fig1, fig2, fig3)\n";
            return 1;
        }
        spec = *found;
    }
    if (trials > 0) spec.trials = trials;
    if (seed != 0) spec.master_seed = seed;
    if (!methods_csv.empty()) spec.methods = parse_methods(methods_csv);
    spec.estimator.mu = f.mu;
    spec.estimator.grid_size = f.grid_size;
    spec.estimator.report_lambda_factor = f.report_lambda_factor;

    const std::vector<BenchRow> rows = serial ? run_sweep_serial(spec) : run_sweep(spec);
    const std::string csv = rows_to_csv(rows, f.timing);
    if (out_path.empty()) std::cout << csv;
    else write_file_atomic(out_path, csv);
    if (!plot_path.empty()) {
        const std::string label =
            spec.axis == SweepAxis::SnrDb ? "SNR (dB)" : "separation (electrical rad)";
        write_file_atomic(plot_path, rows_to_svg(rows, label));
    }
    return 0;
}

int cmd_audit(const std::string& report_path, const std::string& in_path, double off_tol,
              double support_tol) {
    const EstimateReport rep = report_from_json(read_file(report_path));
    if (rep.method != Method::CLasso && rep.method != Method::CLassoH &&
        rep.method != Method::SpsLasso) {
        std::cerr << "audit: method '" << method_name(rep.method)
                  << "' carries no lambda certificate; only the LASSO family can be audited\n";
        return 1;
    }
    if (rep.status != EstStatus::Converged) {
        std::cerr << "audit: report status is " << status_name(rep.status)
                  << ", nothing to certify\n";
        return 1;
    }
    if (rep.lambda_path.empty()) {
        std::cerr << "audit: report has no lambda path\n";
        return 1;
    }
    const Snapshot x = snapshot_from_json(read_file(in_path));
    const SteeringModel model(x.m());
    const double lambda = rep.lambda_path.back().first;
    EstimatorOptions defaults;
    const Certificate cert = certificate_check(model, x, rep.doas, rep.amplitudes, lambda,
                                               defaults.guard_for(x.m()), off_tol, support_tol);
    std::printf("lambda                  : %.12g\n", cert.lambda);
    std::printf("max off-support excess  : %.3e (tol %.1e)\n", cert.off_support_excess, off_tol);
    std::printf("max support residual    : %.3e (tol %.1e * ||x||)\n", cert.support_residual,
                support_tol);
    std::printf("certificate             : %s\n", cert.pass ? "PASS" : "FAIL");
    return cert.pass ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gridless single-snapshot DOA estimation via continuous-parameter "
                 "l1 homotopy, with ML / grid-LASSO / RELAX baselines"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string in_path, out_path, plot_path, report_path;
    std::string scenario_name, spec_path, scenario_file, methods_csv;
    int trials = 0;
    std::uint64_t seed = 0;
    bool serial = false;
    int synth_m = 15;
    std::vector<double> synth_doas, synth_amps;
    double synth_noise = 0.0;
    double off_tol = 1e-6, support_tol = 1e-8;

    CLI::App* est = app.add_subcommand("estimate", "run one estimator on a snapshot file");
    est->add_option("--in", in_path, "snapshot JSON")->required();
    est->add_option("--out", out_path, "report JSON (stdout when omitted)");
    est->add_option("--method", flags.method, "classo|classo_h|sps|ml|relax");
    est->add_option("--n", flags.n, "model order");
    est->add_option("--mu", flags.mu, "classo_h lambda relaxation in (0,1)");
    est->add_option("--report-lambda-factor", flags.report_lambda_factor,
                    "final continuation target as a fraction of the n-th birth lambda");
    est->add_option("--grid-size", flags.grid_size, "sps grid size");
    est->add_flag("--timing", flags.timing, "emit measured wall time (breaks byte determinism)");
    est->add_flag("--degrees-physical", flags.degrees_physical,
                  "also print DOAs as physical angles in degrees");

    CLI::App* syn = app.add_subcommand("synth", "synthesize a snapshot");
    syn->add_option("--scenario-file", scenario_file, "scenario JSON");
    syn->add_option("--m", synth_m, "sensor count");
    syn->add_option("--doas", synth_doas, "electrical angles (rad)");
    syn->add_option("--amps", synth_amps, "amplitudes, real or interleaved re/im");
    syn->add_option("--noise-std", synth_noise, "complex noise std (sigma)");
    syn->add_option("--seed", seed, "noise seed");
    syn->add_option("--out", out_path, "snapshot JSON (stdout when omitted)");

    CLI::App* ben = app.add_subcommand("bench", "run a Monte Carlo sweep");
    ben->add_option("--scenario", scenario_name, "builtin scenario: fig1|fig2|fig3");
    ben->add_option("--spec-file", spec_path, "sweep spec JSON");
    ben->add_option("--trials", trials, "trials per axis value (override)");
    ben->add_option("--seed", seed, "master seed (override)");
    ben->add_option("--methods", methods_csv, "comma-separated method subset");
    ben->add_option("--mu", flags.mu, "classo_h lambda relaxation");
    ben->add_option("--grid-size", flags.grid_size, "sps grid size");
    ben->add_option("--report-lambda-factor", flags.report_lambda_factor,
                    "final continuation target");
    ben->add_option("--out", out_path, "CSV output path (stdout when omitted)");
    ben->add_option("--plot", plot_path, "also write an SVG plot");
    ben->add_flag("--timing", flags.timing, "emit measured wall times (breaks byte determinism)");
    ben->add_flag("--serial", serial, "use the serial reference runner");

    CLI::App* aud = app.add_subcommand("audit", "re-verify a LASSO optimality certificate");
    aud->add_option("--report", report_path, "estimate report JSON")->required();
    aud->add_option("--in", in_path, "snapshot JSON the report was computed from")->required();
    aud->add_option("--off-tol", off_tol, "relative off-support excess tolerance");
    aud->add_option("--support-tol", support_tol, "support residual tolerance (times ||x||)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (est->parsed()) return cmd_estimate(in_path, out_path, flags);
        if (syn->parsed())
            return cmd_synth(scenario_file, out_path, synth_m, synth_doas, synth_amps, synth_noise,
                             seed);
        if (ben->parsed())
            return cmd_bench(scenario_name, spec_path, out_path, plot_path, trials, seed,
                             methods_csv, flags, serial);
        if (aud->parsed()) return cmd_audit(report_path, in_path, off_tol, support_tol);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
