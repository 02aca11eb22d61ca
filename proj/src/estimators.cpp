#include "doa/estimators.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace doa {

namespace {

constexpr double kPi = std::numbers::pi;

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

struct PathContext {
    const SteeringModel& model;
    Snapshot xn;  // normalized snapshot, ||xn|| = 1
    double nu;    // original ||x||
    const EstimatorOptions& opts;
    double guard;
    double lambda0 = 0.0;

    std::vector<std::pair<double, int>> path;
    std::vector<std::pair<double, double>> births;
    int outer_steps = 0;

    double floor() const { return opts.lambda_floor_rel * lambda0; }

    void record(double lambda, int size) {
        if (!path.empty() && !(lambda < path.back().first)) {
            path.back().second = size;  // tied birth levels share one entry
            return;
        }
        path.emplace_back(lambda, size);
    }
};

// Sort (doas, amplitudes) ascending by angle and scale amplitudes back to the
// data's magnitude.
void finalize_report(EstimateReport& rep, const SupportState& state, double nu) {
    const int k = state.size();
    std::vector<int> idx(k);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](int a, int b) { return state.support[a] < state.support[b]; });
    rep.doas.clear();
    rep.amplitudes.clear();
    for (int i : idx) {
        rep.doas.push_back(state.support[i]);
        rep.amplitudes.push_back(nu * state.amplitude(i));
    }
}

void scale_path(EstimateReport& rep, const PathContext& ctx) {
    rep.lambda_path.clear();
    for (auto [lam, sz] : ctx.path) rep.lambda_path.emplace_back(ctx.nu * lam, sz);
    rep.births.clear();
    for (auto [lam, phi] : ctx.births) rep.births.emplace_back(ctx.nu * lam, phi);
    rep.iterations = ctx.outer_steps;
}

// Remove converged-negative atoms (deaths along the path). Returns the number
// removed.
int remove_dead_atoms(SupportState& state) {
    int removed = 0;
    for (int i = state.size() - 1; i >= 0; --i) {
        if (state.r[i] < 0.0) {
            state.erase_atom(i);
            ++removed;
        }
    }
    return removed;
}

// Re-converge at fixed lambda right after a birth. The birth test fires when
// the off-support peak is within birth_tol of lambda, so the newborn's exact
// modulus at this level can be a small negative number; it is parked at zero
// (the atom grows as lambda keeps falling). Genuine deaths of older atoms
// shrink the support and the reduced system is re-converged.
bool birth_polish(PathContext& ctx, SupportState& state, double lambda, int newborn) {
    for (int attempt = 0; attempt < 4; ++attempt) {
        NewtonResult res = attractor_H(ctx.model, ctx.xn, state, lambda, ctx.opts.newton);
        if (res.status == NewtonStatus::Converged) {
            state = std::move(res.state);
            state.lambda = lambda;
            return true;
        }
        if (res.status == NewtonStatus::NegativeAmplitude) {
            if (newborn >= 0 && newborn < res.state.size() && res.state.r[newborn] < 0.0)
                res.state.r[newborn] = 0.0;
            const int removed = remove_dead_atoms(res.state);
            state = std::move(res.state);
            state.lambda = lambda;
            if (removed == 0) return true;
            if (state.size() == 0) return false;
            newborn = -1;
            continue;
        }
        return false;
    }
    return true;
}

std::optional<PeakResult> off_support_peak(const PathContext& ctx, const SupportState& state) {
    const CVector nhat = residual_vector(ctx.model, ctx.xn, state);
    return global_peak(ctx.model, nhat, state.support, ctx.guard);
}

// Lower lambda to lambda_next by the equilevel attractor, handling deaths.
// Returns false when the step cannot be completed even after shrinking.
bool h_step(PathContext& ctx, SupportState& state, double& lambda, double lambda_next) {
    double target = lambda_next;
    for (int attempt = 0; attempt < 60; ++attempt) {
        NewtonResult res = attractor_H(ctx.model, ctx.xn, state, target, ctx.opts.newton);
        if (res.status == NewtonStatus::Converged) {
            state = std::move(res.state);
            lambda = target;
            return true;
        }
        if (res.status == NewtonStatus::NegativeAmplitude) {
            remove_dead_atoms(res.state);
            if (res.state.size() == 0) return false;
            NewtonResult re = attractor_H(ctx.model, ctx.xn, res.state, target, ctx.opts.newton);
            if (re.status == NewtonStatus::Converged) {
                state = std::move(re.state);
                lambda = target;
                return true;
            }
        }
        // shrink toward the last safe level
        target = 0.5 * (lambda + target);
        if (lambda - target < 1e-13 * ctx.lambda0) return false;
    }
    return false;
}

// After an overshooting step (off-support peak above lambda), bisect between
// the safe level and the overshooting one until the peak meets lambda within
// the birth tolerance. `state` enters converged at `lambda` (safe side).
bool bisect_to_birth(PathContext& ctx, SupportState& state, double& lambda, double lambda_over) {
    double hi = lambda;  // safe: p(hi) < hi
    double lo = lambda_over;
    SupportState safe = state;
    for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (hi + lo);
        SupportState trial = safe;
        double lam_trial = hi;
        if (!h_step(ctx, trial, lam_trial, mid)) {
            lo = mid;
            continue;
        }
        auto pk = off_support_peak(ctx, trial);
        const double p = pk ? pk->p : 0.0;
        if (p > mid * (1.0 + ctx.opts.birth_tol)) {
            lo = mid;
        } else {
            hi = mid;
            safe = std::move(trial);
            if (mid - p <= ctx.opts.birth_tol * mid) break;  // reached the birth point
        }
        if (hi - lo <= 1e-15 * ctx.lambda0) break;
    }
    state = std::move(safe);
    lambda = hi;
    state.lambda = hi;
    return true;
}

// Continuous global-peak initialization shared by both homotopy estimators:
// one atom at the spectrum argmax of x, r = 0, phase from the correlation.
bool init_path(PathContext& ctx, SupportState& state, EstimateReport& rep) {
    auto pk = global_peak(ctx.model, ctx.xn.x, {}, 0.0);
    if (!pk || pk->p <= 0.0) {
        rep.status = EstStatus::Undefined;
        rep.message = "degenerate snapshot: empty spectrum";
        return false;
    }
    const cplx w = correlation(ctx.model, ctx.xn.x, pk->phi);
    state = SupportState{};
    state.push_atom(pk->phi, 0.0, w);
    state.lambda = pk->p;
    ctx.lambda0 = pk->p;
    ctx.record(pk->p, 1);
    ctx.births.emplace_back(pk->p, pk->phi);
    // settle the derivative line exactly (the scan refinement is close but
    // not at Newton tolerance)
    birth_polish(ctx, state, pk->p, -1);
    return true;
}

struct FCandidate {
    double lambda = -1.0;
    double probe = 0.0;
    SupportState state;
    bool valid = false;
};

// Evaluate the marginalized attractor on every admissible local maximum and
// keep the one with the largest singular level.
FCandidate best_birth_candidate(PathContext& ctx, const SupportState& state) {
    FCandidate best;
    const CVector nhat = residual_vector(ctx.model, ctx.xn, state);
    const auto cands = local_maxima(ctx.model, nhat, state.support, ctx.guard);
    for (const PeakResult& cand : cands) {
        NewtonResult res = attractor_F(ctx.model, ctx.xn, state, cand.phi, ctx.opts.newton);
        if (res.status != NewtonStatus::Converged &&
            res.status != NewtonStatus::NegativeAmplitude)
            continue;
        const double lam = res.state.lambda;
        if (!(lam > ctx.floor()) || lam > state.lambda * (1.0 + 1e-9)) continue;
        if (!best.valid || lam > best.lambda) {
            best.valid = true;
            best.lambda = lam;
            best.probe = cand.phi;
            best.state = std::move(res.state);
        }
    }
    return best;
}

void append_newborn(PathContext& ctx, SupportState& state, double probe) {
    const CVector nhat = residual_vector(ctx.model, ctx.xn, state);
    const cplx w = correlation(ctx.model, nhat, probe);
    state.push_atom(probe, 0.0, w);  // phase from the residual, not from x
}

SupportState polish_core(PathContext& ctx, SupportState state) {
    const double lambda_n = state.lambda;
    const double target = ctx.opts.report_lambda_factor * lambda_n;
    double lambda = lambda_n;
    if (ctx.opts.report_lambda_factor >= 1.0) return state;
    for (int step = 0; step < ctx.opts.max_path_steps; ++step) {
        auto pk = off_support_peak(ctx, state);
        const double p = pk ? pk->p : 0.0;
        if (lambda - p <= ctx.opts.birth_tol * lambda) break;  // next birth is due
        const double lambda_next = std::max(target, ctx.opts.mu * lambda + (1.0 - ctx.opts.mu) * p);
        SupportState trial = state;
        double lam_cur = lambda;
        if (!h_step(ctx, trial, lam_cur, lambda_next)) break;
        ++ctx.outer_steps;
        auto pk2 = off_support_peak(ctx, trial);
        const double p2 = pk2 ? pk2->p : 0.0;
        if (p2 > lambda_next * (1.0 + ctx.opts.birth_tol)) {
            bisect_to_birth(ctx, state, lambda, lambda_next);
            break;
        }
        state = std::move(trial);
        lambda = lambda_next;
        state.lambda = lambda;
        if (lambda <= target * (1.0 + 1e-12)) break;
    }
    return state;
}

EstimateReport classo_impl(const SteeringModel& model, const Snapshot& x,
                           const EstimatorOptions& opts) {
    const auto t0 = Clock::now();
    EstimateReport rep;
    rep.method = Method::CLasso;

    const double nu = x.x.norm();
    if (!(nu > 0.0)) {
        rep.status = EstStatus::Undefined;
        rep.message = "zero snapshot";
        return rep;
    }
    PathContext ctx{model, Snapshot{x.x / nu}, nu, opts, opts.guard_for(model.m())};
    const std::optional<double> stop_lambda =
        opts.stop_lambda ? std::optional<double>(*opts.stop_lambda / nu) : std::nullopt;

    SupportState state;
    if (!init_path(ctx, state, rep)) {
        rep.wall_time_ms = elapsed_ms(t0);
        return rep;
    }

    const int want = stop_lambda ? model.m() - 1 : opts.n;
    bool stopped_at_lambda = false;
    while (state.size() < want) {
        if (state.size() == 0) {
            rep.status = EstStatus::Failed;
            rep.message = "path death: support emptied";
            scale_path(rep, ctx);
            rep.wall_time_ms = elapsed_ms(t0);
            return rep;
        }
        FCandidate best = best_birth_candidate(ctx, state);
        if (!best.valid) {
            if (stop_lambda) break;  // no further births above the floor
            rep.status = EstStatus::Undefined;
            rep.message = "no singular point before the lambda floor (absorbed sources)";
            scale_path(rep, ctx);
            finalize_report(rep, state, nu);
            rep.wall_time_ms = elapsed_ms(t0);
            return rep;
        }
        if (stop_lambda && best.lambda <= *stop_lambda) {
            // requested read level sits before the next birth
            if (*stop_lambda < state.lambda) {
                double lam = state.lambda;
                if (h_step(ctx, state, lam, *stop_lambda)) {
                    state.lambda = lam;
                    ctx.record(lam, state.size());
                }
            }
            stopped_at_lambda = true;
            break;
        }
        ++ctx.outer_steps;
        state = std::move(best.state);
        remove_dead_atoms(state);
        append_newborn(ctx, state, best.probe);
        birth_polish(ctx, state, best.lambda, state.size() - 1);
        state.lambda = best.lambda;
        ctx.record(best.lambda, state.size());
        ctx.births.emplace_back(best.lambda, best.probe);
    }

    if (!stop_lambda) {
        state = polish_core(ctx, state);
        ctx.record(state.lambda, state.size());
        if (state.size() != opts.n) {
            rep.status = EstStatus::Failed;
            rep.message = "path death during the reporting continuation";
            scale_path(rep, ctx);
            finalize_report(rep, state, nu);
            rep.wall_time_ms = elapsed_ms(t0);
            return rep;
        }
    } else if (!stopped_at_lambda && *stop_lambda < state.lambda) {
        double lam = state.lambda;
        if (h_step(ctx, state, lam, *stop_lambda)) {
            state.lambda = lam;
            ctx.record(lam, state.size());
        }
    }

    rep.status = EstStatus::Converged;
    scale_path(rep, ctx);
    finalize_report(rep, state, nu);
    rep.wall_time_ms = elapsed_ms(t0);
    return rep;
}

EstimateReport classo_h_impl(const SteeringModel& model, const Snapshot& x,
                             const EstimatorOptions& opts) {
    const auto t0 = Clock::now();
    EstimateReport rep;
    rep.method = Method::CLassoH;
    if (!(opts.mu > 0.0 && opts.mu < 1.0))
        throw std::invalid_argument("classo_h: mu must lie in (0, 1)");

    const double nu = x.x.norm();
    if (!(nu > 0.0)) {
        rep.status = EstStatus::Undefined;
        rep.message = "zero snapshot";
        return rep;
    }
    PathContext ctx{model, Snapshot{x.x / nu}, nu, opts, opts.guard_for(model.m())};

    SupportState state;
    if (!init_path(ctx, state, rep)) {
        rep.wall_time_ms = elapsed_ms(t0);
        return rep;
    }

    double lambda = state.lambda;
    int stall_count = 0;
    for (int step = 0; state.size() < opts.n; ++step) {
        if (step >= opts.max_path_steps) {
            rep.status = EstStatus::Failed;
            rep.message = "path step budget exhausted";
            scale_path(rep, ctx);
            finalize_report(rep, state, nu);
            rep.wall_time_ms = elapsed_ms(t0);
            return rep;
        }
        if (state.size() == 0) {
            rep.status = EstStatus::Failed;
            rep.message = "path death: support emptied";
            scale_path(rep, ctx);
            rep.wall_time_ms = elapsed_ms(t0);
            return rep;
        }
        auto pk = off_support_peak(ctx, state);
        const double p = pk ? pk->p : 0.0;
        if (pk && lambda - p <= opts.birth_tol * lambda) {
            append_newborn(ctx, state, pk->phi);
            birth_polish(ctx, state, lambda, state.size() - 1);
            state.lambda = lambda;
            ctx.record(lambda, state.size());
            ctx.births.emplace_back(lambda, pk->phi);
            ++ctx.outer_steps;
            continue;
        }
        if (lambda <= ctx.floor()) {
            rep.status = EstStatus::Undefined;
            rep.message = "lambda reached the numerical floor before all births (absorbed)";
            scale_path(rep, ctx);
            finalize_report(rep, state, nu);
            rep.wall_time_ms = elapsed_ms(t0);
            return rep;
        }
        const double lambda_next = opts.mu * lambda + (1.0 - opts.mu) * p;
        const double lambda_prev = lambda;
        SupportState trial = state;
        double lam_cur = lambda;
        if (!h_step(ctx, trial, lam_cur, lambda_next)) {
            rep.status = EstStatus::Failed;
            rep.message = "equilevel step failed";
            scale_path(rep, ctx);
            finalize_report(rep, state, nu);
            rep.wall_time_ms = elapsed_ms(t0);
            return rep;
        }
        ++ctx.outer_steps;
        auto pk2 = off_support_peak(ctx, trial);
        const double p2 = pk2 ? pk2->p : 0.0;
        if (p2 > lam_cur * (1.0 + opts.birth_tol)) {
            bisect_to_birth(ctx, state, lambda, lam_cur);
        } else {
            state = std::move(trial);
            lambda = lam_cur;
            state.lambda = lambda;
        }
        if (lambda_prev - lambda < 1e-14 * ctx.lambda0) {
            if (++stall_count >= 10) {
                rep.status = EstStatus::Failed;
                rep.message = "stall detected: lambda stopped decreasing";
                scale_path(rep, ctx);
                finalize_report(rep, state, nu);
                rep.wall_time_ms = elapsed_ms(t0);
                return rep;
            }
        } else {
            stall_count = 0;
        }
    }

    state = polish_core(ctx, state);
    ctx.record(state.lambda, state.size());
    if (state.size() != opts.n) {
        rep.status = EstStatus::Failed;
        rep.message = "path death during the reporting continuation";
        scale_path(rep, ctx);
        finalize_report(rep, state, nu);
        rep.wall_time_ms = elapsed_ms(t0);
        return rep;
    }
    rep.status = EstStatus::Converged;
    scale_path(rep, ctx);
    finalize_report(rep, state, nu);
    rep.wall_time_ms = elapsed_ms(t0);
    return rep;
}

EstimateReport sps_impl(const SteeringModel& model, const Snapshot& x,
                        const EstimatorOptions& opts) {
    const auto t0 = Clock::now();
    EstimateReport rep;
    rep.method = Method::SpsLasso;
    if (opts.grid_size < 2 * model.m())
        throw std::invalid_argument("sps_lasso: grid_size must be >= 2m");

    const double nu = x.x.norm();
    if (!(nu > 0.0)) {
        rep.status = EstStatus::Undefined;
        rep.message = "zero snapshot";
        return rep;
    }
    PathContext ctx{model, Snapshot{x.x / nu}, nu, opts, opts.guard_for(model.m())};

    const int N = opts.grid_size;
    std::vector<double> grid(N);
    for (int j = 0; j < N; ++j) grid[j] = -kPi + 2.0 * kPi * double(j) / double(N);

    std::vector<int> support_idx;
    auto [j0, v0] = grid_peak(ctx.model, ctx.xn.x, grid, {});
    if (j0 < 0 || v0 <= 0.0) {
        rep.status = EstStatus::Undefined;
        rep.message = "degenerate snapshot: empty spectrum";
        rep.wall_time_ms = elapsed_ms(t0);
        return rep;
    }
    SupportState state;
    state.push_atom(grid[j0], 0.0, correlation(ctx.model, ctx.xn.x, grid[j0]));
    state.lambda = v0;
    ctx.lambda0 = v0;
    support_idx.push_back(j0);
    ctx.record(v0, 1);
    ctx.births.emplace_back(v0, grid[j0]);

    // G evaluated over the whole grid; the largest resulting level is the next
    // grid singular point.
    auto grid_candidate = [&](const SupportState& cur, int& best_j, double& best_lambda,
                              SupportState& best_state) {
        best_j = -1;
        best_lambda = -1.0;
        for (int j = 0; j < N; ++j) {
            if (std::find(support_idx.begin(), support_idx.end(), j) != support_idx.end())
                continue;
            NewtonResult res = attractor_G(ctx.model, ctx.xn, cur, grid[j], ctx.opts.newton);
            if (res.status != NewtonStatus::Converged &&
                res.status != NewtonStatus::NegativeAmplitude)
                continue;
            const double lam = res.state.lambda;
            if (!(lam > ctx.floor()) || lam > cur.lambda * (1.0 + 1e-9)) continue;
            if (lam > best_lambda) {
                best_lambda = lam;
                best_j = j;
                best_state = std::move(res.state);
            }
        }
    };

    while (state.size() < opts.n) {
        int best_j = -1;
        double best_lambda = -1.0;
        SupportState best_state;
        grid_candidate(state, best_j, best_lambda, best_state);
        if (best_j < 0) {
            rep.status = EstStatus::Undefined;
            rep.message = "no grid singular point before the lambda floor";
            scale_path(rep, ctx);
            finalize_report(rep, state, nu);
            rep.wall_time_ms = elapsed_ms(t0);
            return rep;
        }
        ++ctx.outer_steps;
        state = std::move(best_state);
        // deaths: drop grid indices along with atoms
        for (int i = state.size() - 1; i >= 0; --i) {
            if (state.r[i] < 0.0) {
                state.erase_atom(i);
                support_idx.erase(support_idx.begin() + i);
            }
        }
        const CVector nhat = residual_vector(ctx.model, ctx.xn, state);
        state.push_atom(grid[best_j], 0.0, correlation(ctx.model, nhat, grid[best_j]));
        support_idx.push_back(best_j);
        state.lambda = best_lambda;
        ctx.record(best_lambda, state.size());
        ctx.births.emplace_back(best_lambda, grid[best_j]);
    }

    // Grid-confined reporting continuation. Between grid singular points the
    // support is constant, so the stopping level is known up front: the next
    // birth level from a G sweep, or the requested fraction, whichever is met
    // first. One frozen-support descent lands there directly.
    if (opts.report_lambda_factor < 1.0) {
        const double target = opts.report_lambda_factor * state.lambda;
        int next_j = -1;
        double next_lambda = -1.0;
        SupportState next_state;
        grid_candidate(state, next_j, next_lambda, next_state);
        const double stop = std::max(target, next_j >= 0 ? next_lambda : 0.0);
        if (stop < state.lambda) {
            double lam = state.lambda;
            for (double tgt = stop; lam - tgt > 1e-13 * ctx.lambda0;) {
                NewtonResult res = attractor_H_frozen(ctx.model, ctx.xn, state, tgt, opts.newton);
                ++ctx.outer_steps;
                if (res.status == NewtonStatus::Converged) {
                    state = std::move(res.state);
                    lam = tgt;
                    state.lambda = lam;
                    if (tgt == stop) break;
                    tgt = stop;
                } else if (res.status == NewtonStatus::NegativeAmplitude) {
                    for (int i = res.state.size() - 1; i >= 0; --i) {
                        if (res.state.r[i] < 0.0) {
                            res.state.erase_atom(i);
                            support_idx.erase(support_idx.begin() + i);
                        }
                    }
                    state = std::move(res.state);
                    lam = tgt;
                    state.lambda = lam;
                    if (tgt == stop) break;
                    tgt = stop;
                } else {
                    tgt = 0.5 * (lam + tgt);  // shrink toward the safe level
                }
            }
        }
        ctx.record(state.lambda, state.size());
    }

    if (state.size() != opts.n) {
        rep.status = EstStatus::Failed;
        rep.message = "grid path death";
        scale_path(rep, ctx);
        finalize_report(rep, state, nu);
        rep.wall_time_ms = elapsed_ms(t0);
        return rep;
    }
    rep.status = EstStatus::Converged;
    scale_path(rep, ctx);
    finalize_report(rep, state, nu);
    rep.wall_time_ms = elapsed_ms(t0);
    return rep;
}

EstimateReport ml_impl(const SteeringModel& model, const Snapshot& x,
                       const EstimatorOptions& opts) {
    const auto t0 = Clock::now();
    EstimateReport rep;
    rep.method = Method::Ml;
    if (opts.n < 1 || opts.n > 3)
        throw std::invalid_argument("ml_estimate: model order limited to 1..3");

    const double nu = x.x.norm();
    if (!(nu > 0.0)) {
        rep.status = EstStatus::Failed;
        rep.message = "zero snapshot";
        return rep;
    }
    const Snapshot xn{x.x / nu};

    const int m = model.m();
    const int G = 4 * m;
    const int n = opts.n;
    long tuples = 1;
    for (int i = 0; i < n; ++i) tuples = tuples * (G - i) / (i + 1);
    if (tuples > opts.ml_budget) {
        rep.status = EstStatus::Failed;
        rep.message = "initialization budget exceeded";
        return rep;
    }

    std::vector<double> grid(G);
    for (int j = 0; j < G; ++j) grid[j] = -kPi + 2.0 * kPi * double(j) / double(G);
    std::vector<CVector> steer(G);
    for (int j = 0; j < G; ++j) steer[j] = model.steering(grid[j]);

    double best_cost = std::numeric_limits<double>::infinity();
    std::vector<int> best_combo;
    Eigen::VectorXcd best_s;

    std::vector<int> combo(n);
    for (int i = 0; i < n; ++i) combo[i] = i;
    CMatrix A(m, n);
    while (true) {
        for (int i = 0; i < n; ++i) A.col(i) = steer[combo[i]];
        Eigen::VectorXcd s = A.colPivHouseholderQr().solve(xn.x);
        const double cost = (xn.x - A * s).squaredNorm();
        if (cost < best_cost) {
            best_cost = cost;
            best_combo = combo;
            best_s = s;
        }
        int i = n - 1;
        while (i >= 0 && combo[i] == G - n + i) --i;
        if (i < 0) break;
        ++combo[i];
        for (int l = i + 1; l < n; ++l) combo[l] = combo[l - 1] + 1;
    }

    SupportState state;
    for (int i = 0; i < n; ++i) {
        const cplx s = best_s[i];
        state.push_atom(grid[best_combo[i]], std::abs(s), s == cplx(0.0) ? cplx(1.0) : s);
    }
    state.lambda = 0.0;
    NewtonResult res = damped_newton(SystemKind::ML, model, xn, state, std::nullopt, opts.newton);
    if (res.status == NewtonStatus::NegativeAmplitude) {
        // a negative modulus is the same stationary point with the phase flipped
        for (int i = 0; i < res.state.size(); ++i) {
            if (res.state.r[i] < 0.0) {
                res.state.r[i] = -res.state.r[i];
                res.state.phasor[i] = -res.state.phasor[i];
            }
        }
        res.status = NewtonStatus::Converged;
    }
    if (res.status != NewtonStatus::Converged) {
        rep.status = EstStatus::Failed;
        rep.message = "Newton refinement did not converge";
        rep.iterations = res.iterations;
        rep.wall_time_ms = elapsed_ms(t0);
        return rep;
    }
    rep.status = EstStatus::Converged;
    rep.iterations = res.iterations;
    finalize_report(rep, res.state, nu);
    rep.wall_time_ms = elapsed_ms(t0);
    return rep;
}

EstimateReport relax_impl(const SteeringModel& model, const Snapshot& x,
                          const EstimatorOptions& opts) {
    const auto t0 = Clock::now();
    EstimateReport rep;
    rep.method = Method::Relax;
    if (opts.n < 1) throw std::invalid_argument("relax: n must be >= 1");

    const double nu = x.x.norm();
    if (!(nu > 0.0)) {
        rep.status = EstStatus::Failed;
        rep.message = "zero snapshot";
        return rep;
    }
    const Snapshot xn{x.x / nu};
    const double guard = opts.guard_for(model.m());
    const int m = model.m();
    const int n = opts.n;

    std::vector<double> phi;
    std::vector<cplx> s;
    auto residual_without = [&](int skip) {
        CVector r = xn.x;
        for (int l = 0; l < static_cast<int>(phi.size()); ++l) {
            if (l == skip) continue;
            r -= model.steering(phi[l]) * s[l];
        }
        return r;
    };

    // sequential initialization: peak-pick on the running residual
    for (int i = 0; i < n; ++i) {
        const CVector r = residual_without(-1);
        auto pk = global_peak(model, r, phi, guard);
        if (!pk) {
            rep.status = EstStatus::Undefined;
            rep.message = "residual exhausted before reaching the requested order";
            rep.wall_time_ms = elapsed_ms(t0);
            return rep;
        }
        phi.push_back(pk->phi);
        s.push_back(correlation(model, r, pk->phi) / double(m));
    }

    auto total_cost = [&]() { return residual_without(-1).squaredNorm(); };

    double cost = total_cost();
    int cycles = 0;
    const int max_cycles = 200;
    for (; cycles < max_cycles; ++cycles) {
        const double cost_before = cost;
        for (int i = 0; i < n; ++i) {
            const CVector ri = residual_without(i);
            std::vector<double> others;
            for (int l = 0; l < n; ++l)
                if (l != i) others.push_back(phi[l]);
            auto pk = global_peak(model, ri, others, guard);
            if (!pk) continue;
            const cplx s_new = correlation(model, ri, pk->phi) / double(m);
            const double c_old = (ri - model.steering(phi[i]) * s[i]).squaredNorm();
            const double c_new = (ri - model.steering(pk->phi) * s_new).squaredNorm();
            if (c_new < c_old) {
                phi[i] = pk->phi;
                s[i] = s_new;
            }
        }
        cost = total_cost();
        if (cost_before - cost < 1e-12) break;  // ||xn||^2 = 1
    }
    if (cycles >= max_cycles) {
        rep.status = EstStatus::Failed;
        rep.message = "cycle budget exceeded";
        rep.iterations = cycles;
        rep.wall_time_ms = elapsed_ms(t0);
        return rep;
    }

    SupportState state;
    for (int i = 0; i < n; ++i) state.push_atom(phi[i], std::abs(s[i]), s[i] == cplx(0.0) ? cplx(1.0) : s[i]);
    rep.status = EstStatus::Converged;
    rep.iterations = cycles + 1;
    finalize_report(rep, state, nu);
    rep.wall_time_ms = elapsed_ms(t0);
    return rep;
}

}  // namespace

const char* method_name(Method m) {
    switch (m) {
        case Method::CLasso: return "classo";
        case Method::CLassoH: return "classo_h";
        case Method::SpsLasso: return "sps";
        case Method::Ml: return "ml";
        case Method::Relax: return "relax";
    }
    return "?";
}

std::optional<Method> method_from_name(const std::string& name) {
    if (name == "classo") return Method::CLasso;
    if (name == "classo_h") return Method::CLassoH;
    if (name == "sps") return Method::SpsLasso;
    if (name == "ml") return Method::Ml;
    if (name == "relax") return Method::Relax;
    return std::nullopt;
}

const char* status_name(EstStatus s) {
    switch (s) {
        case EstStatus::Converged: return "Converged";
        case EstStatus::Undefined: return "Undefined";
        case EstStatus::Failed: return "Failed";
    }
    return "?";
}

double EstimatorOptions::guard_for(int m) const {
    return guard >= 0.0 ? guard : 0.05 * 2.0 * kPi / double(m);
}

EstimateReport classo(const SteeringModel& model, const Snapshot& x, const EstimatorOptions& opts) {
    if (opts.n < 1) throw std::invalid_argument("classo: n must be >= 1");
    return classo_impl(model, x, opts);
}

EstimateReport classo_h(const SteeringModel& model, const Snapshot& x,
                        const EstimatorOptions& opts) {
    if (opts.n < 1) throw std::invalid_argument("classo_h: n must be >= 1");
    return classo_h_impl(model, x, opts);
}

EstimateReport sps_lasso(const SteeringModel& model, const Snapshot& x,
                         const EstimatorOptions& opts) {
    if (opts.n < 1) throw std::invalid_argument("sps_lasso: n must be >= 1");
    return sps_impl(model, x, opts);
}

EstimateReport ml_estimate(const SteeringModel& model, const Snapshot& x,
                           const EstimatorOptions& opts) {
    return ml_impl(model, x, opts);
}

EstimateReport relax(const SteeringModel& model, const Snapshot& x, const EstimatorOptions& opts) {
    return relax_impl(model, x, opts);
}

EstimateReport run_estimator(Method method, const SteeringModel& model, const Snapshot& x,
                             const EstimatorOptions& opts) {
    switch (method) {
        case Method::CLasso: return classo(model, x, opts);
        case Method::CLassoH: return classo_h(model, x, opts);
        case Method::SpsLasso: return sps_lasso(model, x, opts);
        case Method::Ml: return ml_estimate(model, x, opts);
        case Method::Relax: return relax(model, x, opts);
    }
    throw std::logic_error("unknown method");
}

SupportState final_polish(const SteeringModel& model, const Snapshot& x, const SupportState& state,
                          const EstimatorOptions& opts) {
    const double nu = x.x.norm();
    if (!(nu > 0.0)) return state;
    PathContext ctx{model, Snapshot{x.x / nu}, nu, opts, opts.guard_for(model.m())};
    ctx.lambda0 = state.lambda / nu;
    SupportState sn = state;
    sn.lambda /= nu;
    for (double& rr : sn.r) rr /= nu;
    SupportState out = polish_core(ctx, std::move(sn));
    out.lambda *= nu;
    for (double& rr : out.r) rr *= nu;
    return out;
}

Certificate certificate_check(const SteeringModel& model, const Snapshot& x,
                              const std::vector<double>& doas, const std::vector<cplx>& amplitudes,
                              double lambda, double guard, double off_tol, double support_tol) {
    if (doas.size() != amplitudes.size())
        throw std::invalid_argument("certificate_check: length mismatch");
    Certificate cert;
    cert.lambda = lambda;
    CVector nhat = x.x;
    for (std::size_t i = 0; i < doas.size(); ++i) {
        nhat -= model.steering(doas[i]) * amplitudes[i];
    }
    auto pk = global_peak(model, nhat, doas, guard);
    cert.off_support_excess = pk ? pk->p / lambda - 1.0 : -1.0;
    double worst = 0.0;
    for (std::size_t i = 0; i < doas.size(); ++i) {
        const cplx w = correlation(model, nhat, doas[i]);
        const double mag = std::abs(amplitudes[i]);
        const cplx u = mag > 0.0 ? amplitudes[i] / mag : cplx(1.0);
        worst = std::max(worst, std::abs(w - lambda * u));
    }
    cert.support_residual = worst;
    const double scale = x.x.norm();
    cert.pass = cert.off_support_excess <= off_tol && cert.support_residual <= support_tol * scale;
    return cert;
}

}  // namespace doa
