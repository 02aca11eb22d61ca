#include "doa/newton.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace doa {

namespace {

// Which rows/columns of the full touching system participate.
struct SystemShape {
    bool deriv_rows = true;   // Re(e^{-j alpha} d^H nhat) stationarity rows
    bool touch_row = false;   // |a(probe)^H nhat|^2 - lambda^2
    bool theta_free = true;
    bool lambda_free = false;
};

SystemShape shape_for(SystemKind kind) {
    switch (kind) {
        case SystemKind::ML:  return {true, false, true, false};
        case SystemKind::LEA: return {true, false, true, false};
        case SystemKind::LMA: return {true, true, true, true};
    }
    return {};
}

struct Assembled {
    RVector eta;
    RMatrix J;
};

// eta and J for the system selected by `shape`. Row order: R block, I block,
// [D block], [touch]. Column order: [theta], r, alpha, [lambda].
Assembled build(const SystemShape& shape, const SteeringModel& model, const CVector& x,
                const std::vector<double>& theta, const std::vector<double>& r,
                const std::vector<cplx>& u, double lambda, bool use_lambda_in_eta,
                const CVector* a_probe) {
    const int k = static_cast<int>(theta.size());
    const int m = model.m();

    std::vector<CVector> a(k), d(k), c(k);
    CVector nhat = x;
    for (int i = 0; i < k; ++i) {
        a[i] = model.steering(theta[i]);
        model.steering_derivs(theta[i], d[i], c[i]);
        nhat -= a[i] * (r[i] * u[i]);
    }

    CVector acorr(k), dcorr(k), ccorr(k);
    for (int i = 0; i < k; ++i) {
        acorr[i] = a[i].dot(nhat);  // Eigen dot conjugates the left argument
        dcorr[i] = d[i].dot(nhat);
        ccorr[i] = c[i].dot(nhat);
    }
    CMatrix gaa(k, k), gad(k, k), gda(k, k), gdd(k, k);
    for (int i = 0; i < k; ++i) {
        for (int l = 0; l < k; ++l) {
            gaa(i, l) = a[i].dot(a[l]);
            gad(i, l) = a[i].dot(d[l]);
            gda(i, l) = d[i].dot(a[l]);
            gdd(i, l) = d[i].dot(d[l]);
        }
    }

    std::vector<cplx> p(k), q(k), s(k);
    for (int i = 0; i < k; ++i) {
        s[i] = r[i] * u[i];
        p[i] = std::conj(u[i]) * acorr[i];
        q[i] = std::conj(u[i]) * dcorr[i];
    }

    const int n_rows = 2 * k + (shape.deriv_rows ? k : 0) + (shape.touch_row ? 1 : 0);
    const int n_cols = (shape.theta_free ? k : 0) + 2 * k + (shape.lambda_free ? 1 : 0);

    Assembled out;
    out.eta.resize(n_rows);
    out.J.setZero(n_rows, n_cols);

    const int row_R = 0, row_I = k;
    const int row_D = shape.deriv_rows ? 2 * k : -1;
    const int row_T = shape.touch_row ? (shape.deriv_rows ? 3 * k : 2 * k) : -1;
    const int col_th = shape.theta_free ? 0 : -1;
    const int col_r = shape.theta_free ? k : 0;
    const int col_al = col_r + k;
    const int col_lm = shape.lambda_free ? col_al + k : -1;

    const double lam_eff = use_lambda_in_eta ? lambda : 0.0;
    for (int i = 0; i < k; ++i) {
        out.eta[row_R + i] = p[i].real() - lam_eff;
        out.eta[row_I + i] = p[i].imag();
        if (shape.deriv_rows) out.eta[row_D + i] = q[i].real();
    }

    cplx wp = 0.0;
    if (shape.touch_row) {
        wp = a_probe->dot(nhat);
        out.eta[row_T] = std::norm(wp) - lambda * lambda;
    }

    for (int i = 0; i < k; ++i) {
        const cplx cu = std::conj(u[i]);
        for (int l = 0; l < k; ++l) {
            const cplx dp_dth = (i == l ? q[i] : cplx(0.0)) - cu * s[l] * gad(i, l);
            const cplx dp_dr = -cu * u[l] * gaa(i, l);
            const cplx dp_da = cplx(0.0, -1.0) * (cu * s[l] * gaa(i, l) + (i == l ? p[i] : cplx(0.0)));
            if (shape.theta_free) out.J(row_R + i, col_th + l) = dp_dth.real();
            out.J(row_R + i, col_r + l) = dp_dr.real();
            out.J(row_R + i, col_al + l) = dp_da.real();
            if (shape.theta_free) out.J(row_I + i, col_th + l) = dp_dth.imag();
            out.J(row_I + i, col_r + l) = dp_dr.imag();
            out.J(row_I + i, col_al + l) = dp_da.imag();
            if (shape.deriv_rows) {
                const cplx dq_dth =
                    (i == l ? cu * ccorr[i] : cplx(0.0)) - cu * s[l] * gdd(i, l);
                const cplx dq_dr = -cu * u[l] * gda(i, l);
                const cplx dq_da =
                    cplx(0.0, -1.0) * (cu * s[l] * gda(i, l) + (i == l ? q[i] : cplx(0.0)));
                if (shape.theta_free) out.J(row_D + i, col_th + l) = dq_dth.real();
                out.J(row_D + i, col_r + l) = dq_dr.real();
                out.J(row_D + i, col_al + l) = dq_da.real();
            }
        }
        if (use_lambda_in_eta && shape.lambda_free) out.J(row_R + i, col_lm) = -1.0;
    }

    if (shape.touch_row) {
        const cplx cwp = std::conj(wp);
        for (int l = 0; l < k; ++l) {
            const cplx apd = a_probe->dot(d[l]);
            const cplx apa = a_probe->dot(a[l]);
            if (shape.theta_free)
                out.J(row_T, col_th + l) = -2.0 * (cwp * s[l] * apd).real();
            out.J(row_T, col_r + l) = -2.0 * (cwp * u[l] * apa).real();
            out.J(row_T, col_al + l) = -2.0 * (cwp * cplx(0.0, 1.0) * s[l] * apa).real();
        }
        if (shape.lambda_free) out.J(row_T, col_lm) = -2.0 * lambda;
    }
    (void)m;
    return out;
}

struct ZPoint {
    std::vector<double> theta;
    std::vector<double> r;
    std::vector<cplx> u;
    double lambda;
};

ZPoint apply_step(const ZPoint& z, const SystemShape& shape, const RVector& delta, double scale) {
    const int k = static_cast<int>(z.theta.size());
    ZPoint out = z;
    int at = 0;
    if (shape.theta_free) {
        for (int i = 0; i < k; ++i) out.theta[i] += scale * delta[at++];
    }
    for (int i = 0; i < k; ++i) out.r[i] += scale * delta[at++];
    for (int i = 0; i < k; ++i) {
        out.u[i] *= std::polar(1.0, scale * delta[at++]);
        out.u[i] /= std::abs(out.u[i]);
    }
    if (shape.lambda_free) out.lambda += scale * delta[at++];
    return out;
}

NewtonResult run_newton(const SystemShape& shape, const SteeringModel& model, const Snapshot& x,
                        const SupportState& state, bool use_lambda_in_eta,
                        std::optional<double> probe, const NewtonOptions& opts) {
    const int k = state.size();
    if (k == 0) throw std::invalid_argument("newton: empty support");
    if (shape.touch_row && !probe)
        throw std::invalid_argument("newton: touching system requires a probe angle");

    CVector a_probe;
    if (shape.touch_row) a_probe = model.steering(*probe);

    const double nu = x.x.norm();
    const double tol = opts.tol * nu;

    ZPoint z{state.support, state.r, state.phasor, state.lambda};

    auto finish = [&](NewtonStatus st, int iters, double rn) {
        SupportState out;
        out.support.resize(k);
        for (int i = 0; i < k; ++i) out.support[i] = wrap_angle(z.theta[i]);
        out.r = z.r;
        out.phasor = z.u;
        out.lambda = z.lambda;
        if (st == NewtonStatus::Converged) {
            for (double rr : z.r) {
                if (rr < 0.0) {
                    st = NewtonStatus::NegativeAmplitude;
                    break;
                }
            }
        }
        return NewtonResult{std::move(out), st, iters, rn};
    };

    auto eval = [&](const ZPoint& zz) {
        return build(shape, model, x.x, zz.theta, zz.r, zz.u, zz.lambda, use_lambda_in_eta,
                     shape.touch_row ? &a_probe : nullptr);
    };

    // Column scales for the solve: r and lambda carry the data's magnitude,
    // theta and alpha are O(1) angles. Equilibrating keeps the condition
    // estimate meaningful and the iterate path invariant under x -> c x.
    const int n_cols = (shape.theta_free ? k : 0) + 2 * k + (shape.lambda_free ? 1 : 0);
    RVector col_scale(n_cols);
    {
        int at = 0;
        if (shape.theta_free)
            for (int i = 0; i < k; ++i) col_scale[at++] = 1.0;
        for (int i = 0; i < k; ++i) col_scale[at++] = nu;
        for (int i = 0; i < k; ++i) col_scale[at++] = 1.0;
        if (shape.lambda_free) col_scale[at++] = nu;
    }

    int sign = 0;  // 0 until the first accepted step decides it
    Assembled sys = eval(z);
    double norm_cur = sys.eta.lpNorm<Eigen::Infinity>();

    for (int it = 0; it < opts.max_iter; ++it) {
        if (norm_cur < tol) return finish(NewtonStatus::Converged, it, norm_cur);

        RMatrix M = sys.J;
        for (int cidx = 0; cidx < n_cols; ++cidx) M.col(cidx) *= col_scale[cidx] / nu;
        Eigen::JacobiSVD<RMatrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const double smax = svd.singularValues()(0);
        const double smin = svd.singularValues()(svd.singularValues().size() - 1);
        if (!(smin > 0.0) || smax / smin > opts.cond_limit)
            return finish(NewtonStatus::IllConditioned, it, norm_cur);
        RVector dhat = svd.solve(sys.eta / nu);
        RVector delta = dhat.cwiseProduct(col_scale);  // = J^{-1} eta

        bool accepted = false;
        if (sign == 0) {
            // Probe the paper's "+" update at full step once; fall back to the
            // conventional "-" direction if it does not descend.
            ZPoint zp = apply_step(z, shape, delta, 1.0);
            Assembled sp = eval(zp);
            const double np = sp.eta.lpNorm<Eigen::Infinity>();
            if (np < norm_cur) {
                sign = +1;
                z = std::move(zp);
                sys = std::move(sp);
                norm_cur = np;
                accepted = true;
            } else {
                sign = -1;
            }
        }
        if (!accepted) {
            double t = 1.0;
            while (t >= opts.min_step) {
                ZPoint zp = apply_step(z, shape, delta, sign * t);
                Assembled sp = eval(zp);
                const double np = sp.eta.lpNorm<Eigen::Infinity>();
                if (np < norm_cur) {
                    z = std::move(zp);
                    sys = std::move(sp);
                    norm_cur = np;
                    accepted = true;
                    break;
                }
                t *= opts.backtrack_ratio;
            }
            if (!accepted) return finish(NewtonStatus::NonConvergence, it, norm_cur);
        }
    }
    if (norm_cur < tol) return finish(NewtonStatus::Converged, opts.max_iter, norm_cur);
    return finish(NewtonStatus::NonConvergence, opts.max_iter, norm_cur);
}

}  // namespace

void SupportState::push_atom(double phi, double rr, cplx u) {
    support.push_back(wrap_angle(phi));
    r.push_back(rr);
    const double mag = std::abs(u);
    phasor.push_back(mag > 0.0 ? u / mag : cplx(1.0, 0.0));
}

void SupportState::erase_atom(int i) {
    support.erase(support.begin() + i);
    r.erase(r.begin() + i);
    phasor.erase(phasor.begin() + i);
}

void SupportState::validate() const {
    if (support.size() != r.size() || support.size() != phasor.size())
        throw std::invalid_argument("SupportState: field length mismatch");
    for (std::size_t i = 0; i < support.size(); ++i) {
        for (std::size_t l = i + 1; l < support.size(); ++l) {
            if (circ_dist(support[i], support[l]) <= 0.0)
                throw std::invalid_argument("SupportState: duplicate support angles");
        }
    }
}

CVector residual_vector(const SteeringModel& model, const Snapshot& x, const SupportState& state) {
    CVector nhat = x.x;
    for (int i = 0; i < state.size(); ++i) {
        nhat -= model.steering(state.support[i]) * state.amplitude(i);
    }
    return nhat;
}

NewtonSystem assemble(SystemKind kind, const SteeringModel& model, const Snapshot& x,
                      const SupportState& state, std::optional<double> probe) {
    if (state.size() == 0) throw std::invalid_argument("assemble: empty support");
    if (state.support.size() != state.r.size() || state.support.size() != state.phasor.size())
        throw std::invalid_argument("assemble: state dimension mismatch");
    if (x.m() != model.m()) throw std::invalid_argument("assemble: snapshot/model m mismatch");
    if (kind == SystemKind::LMA && !probe)
        throw std::invalid_argument("assemble: LMA requires a probe angle");

    const SystemShape shape = shape_for(kind);
    CVector a_probe;
    if (kind == SystemKind::LMA) a_probe = model.steering(*probe);
    Assembled sys = build(shape, model, x.x, state.support, state.r, state.phasor, state.lambda,
                          kind != SystemKind::ML, kind == SystemKind::LMA ? &a_probe : nullptr);
    return NewtonSystem{std::move(sys.eta), std::move(sys.J), kind};
}

NewtonResult damped_newton(SystemKind kind, const SteeringModel& model, const Snapshot& x,
                           const SupportState& state, std::optional<double> probe,
                           const NewtonOptions& opts) {
    return run_newton(shape_for(kind), model, x, state, kind != SystemKind::ML, probe, opts);
}

NewtonResult attractor_H(const SteeringModel& model, const Snapshot& x, const SupportState& state,
                         double lambda_target, const NewtonOptions& opts) {
    SupportState start = state;
    start.lambda = lambda_target;
    return run_newton(shape_for(SystemKind::LEA), model, x, start, true, std::nullopt, opts);
}

NewtonResult attractor_F(const SteeringModel& model, const Snapshot& x, const SupportState& state,
                         double probe, const NewtonOptions& opts) {
    NewtonResult res = run_newton(shape_for(SystemKind::LMA), model, x, state, true, probe, opts);
    if (res.status == NewtonStatus::Converged) {
        if (res.state.lambda < 0.0) {
            res.status = NewtonStatus::NonConvergence;
        } else if (res.state.lambda > state.lambda * (1.0 + 1e-9)) {
            res.status = NewtonStatus::RisingLambda;
        }
    }
    return res;
}

NewtonResult attractor_G(const SteeringModel& model, const Snapshot& x, const SupportState& state,
                         double probe, const NewtonOptions& opts) {
    SystemShape shape;
    shape.deriv_rows = false;
    shape.touch_row = true;
    shape.theta_free = false;
    shape.lambda_free = true;
    NewtonResult res = run_newton(shape, model, x, state, true, probe, opts);
    if (res.status == NewtonStatus::Converged) {
        if (res.state.lambda < 0.0) {
            res.status = NewtonStatus::NonConvergence;
        } else if (res.state.lambda > state.lambda * (1.0 + 1e-9)) {
            res.status = NewtonStatus::RisingLambda;
        }
    }
    return res;
}

NewtonResult attractor_H_frozen(const SteeringModel& model, const Snapshot& x,
                                const SupportState& state, double lambda_target,
                                const NewtonOptions& opts) {
    SystemShape shape;
    shape.deriv_rows = false;
    shape.touch_row = false;
    shape.theta_free = false;
    shape.lambda_free = false;
    SupportState start = state;
    start.lambda = lambda_target;
    return run_newton(shape, model, x, start, true, std::nullopt, opts);
}

}  // namespace doa
