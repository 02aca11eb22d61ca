#include <doctest.h>

#include <random>

#include "doa/newton.hpp"
#include "doa/spectrum.hpp"
#include "oracles.hpp"

using namespace doa;
using oracles::kPi;

namespace {

// Random feasible state with comfortably separated atoms.
SupportState random_state(int k, std::mt19937_64& eng, double lambda) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    SupportState st;
    for (int i = 0; i < k; ++i) {
        st.push_atom(-2.0 + 4.0 * double(i) / double(k) + 0.3 * (u01(eng) - 0.5),
                     0.3 + 1.5 * u01(eng), std::polar(1.0, 2.0 * kPi * (u01(eng) - 0.5)));
    }
    st.lambda = lambda;
    return st;
}

// Residual of the assembled system as a function of the raw unknown vector
// (theta, r, alpha-offset[, lambda]); alpha offsets perturb the phasors.
RVector eta_of(SystemKind kind, const SteeringModel& model, const Snapshot& x,
               const SupportState& base, std::optional<double> probe, const RVector& z) {
    const int k = base.size();
    SupportState st = base;
    for (int i = 0; i < k; ++i) {
        st.support[i] = z[i];
        st.r[i] = z[k + i];
        st.phasor[i] = base.phasor[i] * std::polar(1.0, z[2 * k + i]);
    }
    if (kind == SystemKind::LMA) st.lambda = z[3 * k];
    return assemble(kind, model, x, st, probe).eta;
}

RVector pack(const SupportState& st, SystemKind kind) {
    const int k = st.size();
    RVector z(3 * k + (kind == SystemKind::LMA ? 1 : 0));
    for (int i = 0; i < k; ++i) {
        z[i] = st.support[i];
        z[k + i] = st.r[i];
        z[2 * k + i] = 0.0;  // phase offsets around the stored phasor
    }
    if (kind == SystemKind::LMA) z[3 * k] = st.lambda;
    return z;
}

double column_relerr(const RMatrix& J, const RMatrix& Jfd) {
    double worst = 0.0;
    const double ref = J.cwiseAbs().maxCoeff();
    for (int c = 0; c < J.cols(); ++c) {
        const double err = (J.col(c) - Jfd.col(c)).cwiseAbs().maxCoeff();
        worst = std::max(worst, err / std::max(ref, 1e-12));
    }
    return worst;
}

}  // namespace

TEST_CASE("assembled Jacobians match finite differences") {
    std::mt19937_64 eng(21);
    for (SystemKind kind : {SystemKind::ML, SystemKind::LEA, SystemKind::LMA}) {
        for (int k : {1, 2, 3}) {
            for (int m : {8, 15}) {
                SteeringModel model(m);
                const Snapshot x{oracles::random_complex_vector(m, eng) * 2.0};
                SupportState st = random_state(k, eng, 0.5 + k * 0.2);
                const double probe_angle = 2.7;
                const std::optional<double> probe =
                    kind == SystemKind::LMA ? std::optional<double>(probe_angle) : std::nullopt;
                const NewtonSystem sys = assemble(kind, model, x, st, probe);
                const RMatrix Jfd = oracles::fd_jacobian(
                    [&](const RVector& z) { return eta_of(kind, model, x, st, probe, z); },
                    pack(st, kind));
                CHECK(column_relerr(sys.J, Jfd) < 1e-5);
            }
        }
    }
}

TEST_CASE("LEA at lambda = 0 reduces exactly to ML") {
    std::mt19937_64 eng(22);
    SteeringModel model(8);
    const Snapshot x{oracles::random_complex_vector(8, eng)};
    SupportState st = random_state(2, eng, 0.0);
    const NewtonSystem ml = assemble(SystemKind::ML, model, x, st);
    const NewtonSystem lea = assemble(SystemKind::LEA, model, x, st);
    CHECK((ml.eta - lea.eta).cwiseAbs().maxCoeff() == 0.0);
    CHECK((ml.J - lea.J).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single-atom closed form is a stationary point of the LEA system") {
    // noiseless x = a(phi0) s; at r = |s| - lambda/m, alpha = arg(s), the
    // residual is a(phi0) e^{j alpha} lambda / m and every equation vanishes
    SteeringModel model(15);
    const double phi0 = 0.7;
    const cplx s = std::polar(0.8, 2.2);
    const Snapshot x{model.steering(phi0) * s};
    const double lambda = 0.1 * 15.0 * 0.8;
    SupportState st;
    st.push_atom(phi0, std::abs(s) - lambda / 15.0, s);
    st.lambda = lambda;
    const NewtonSystem sys = assemble(SystemKind::LEA, model, x, st);
    CHECK(sys.eta.cwiseAbs().maxCoeff() < 1e-12);

    // damped_newton returns immediately
    NewtonOptions opts;
    const NewtonResult res = damped_newton(SystemKind::LEA, model, x, st, std::nullopt, opts);
    CHECK(res.status == NewtonStatus::Converged);
    CHECK(res.iterations == 0);
    CHECK(res.state.support[0] == st.support[0]);
    CHECK(res.state.r[0] == st.r[0]);
}

TEST_CASE("damped Newton converges to the single-atom closed form") {
    SteeringModel model(15);
    const double phi0 = 0.7;
    const cplx s = cplx(1.0, 0.0);
    const Snapshot x{model.steering(phi0) * s};
    const double lambda = 0.1 * 15.0;
    SupportState st;
    st.push_atom(phi0 + 0.01, 0.8 * (1.0 - lambda / 15.0), std::polar(1.0, 0.05));
    st.lambda = lambda;
    NewtonOptions opts;
    const NewtonResult res = damped_newton(SystemKind::LEA, model, x, st, std::nullopt, opts);
    REQUIRE(res.status == NewtonStatus::Converged);
    CHECK(std::abs(res.state.support[0] - phi0) < 1e-9);
    CHECK(std::abs(res.state.r[0] - (1.0 - lambda / 15.0)) < 1e-9);
}

TEST_CASE("duplicate atoms make the Jacobian rank-deficient") {
    SteeringModel model(8);
    std::mt19937_64 eng(23);
    const Snapshot x{oracles::random_complex_vector(8, eng)};
    SupportState st;
    st.push_atom(0.5, 1.0, cplx(1.0, 0.0));
    st.push_atom(0.5, 0.7, cplx(1.0, 0.0));  // same angle, same phase
    st.lambda = 0.3;
    NewtonOptions opts;
    const NewtonResult res = damped_newton(SystemKind::LEA, model, x, st, std::nullopt, opts);
    CHECK(res.status == NewtonStatus::IllConditioned);
}

TEST_CASE("attractor H: fixed point, amplitude jump, scale equivariance") {
    SteeringModel model(15);
    const double phi0 = -0.9;
    const Snapshot x{model.steering(phi0) * cplx(2.0, 1.0)};
    const double s_abs = std::abs(cplx(2.0, 1.0));
    const double l1 = 0.2 * 15.0, l2 = 0.08 * 15.0;
    SupportState st;
    st.push_atom(phi0, s_abs - l1 / 15.0, cplx(2.0, 1.0));
    st.lambda = l1;
    NewtonOptions opts;

    SUBCASE("same lambda leaves the state unchanged") {
        const NewtonResult res = attractor_H(model, x, st, l1, opts);
        CHECK(res.status == NewtonStatus::Converged);
        CHECK(res.iterations == 0);
        CHECK(res.state.support[0] == st.support[0]);
    }
    SUBCASE("r jumps by (l1 - l2)/m, angle unchanged") {
        const NewtonResult res = attractor_H(model, x, st, l2, opts);
        REQUIRE(res.status == NewtonStatus::Converged);
        CHECK(std::abs(res.state.support[0] - phi0) < 1e-10);
        CHECK(std::abs(res.state.r[0] - (st.r[0] + (l1 - l2) / 15.0)) < 1e-10);
    }
    SUBCASE("power-of-two scaling maps converged states bitwise") {
        const double c = 2.0;
        SupportState st2 = st;
        st2.r[0] *= c;
        st2.lambda *= c;
        const Snapshot x2{x.x * c};
        const NewtonResult r1 = attractor_H(model, x, st, l2, opts);
        const NewtonResult r2 = attractor_H(model, x2, st2, l2 * c, opts);
        REQUIRE(r1.status == NewtonStatus::Converged);
        REQUIRE(r2.status == NewtonStatus::Converged);
        CHECK(r2.state.support[0] == r1.state.support[0]);
        CHECK(r2.state.r[0] == c * r1.state.r[0]);
        CHECK(r2.state.phasor[0] == r1.state.phasor[0]);
    }
}

TEST_CASE("attractor F: touch equation, birth level vs H-continuation oracle") {
    // two well-separated equal sources; path currently holds one atom
    SteeringModel model(15);
    const double d = 4.0 * kPi / 15.0;
    const double phi1 = -d / 2.0, phi2 = d / 2.0;
    const Snapshot x{model.steering(phi1) * cplx(1.0, 0.0) + model.steering(phi2) * cplx(1.0, 0.0)};
    NewtonOptions opts;

    // initialize exactly as the path does
    const auto pk = global_peak(model, x.x, {}, 0.0);
    REQUIRE(pk.has_value());
    SupportState st;
    st.push_atom(pk->phi, 0.0, correlation(model, x.x, pk->phi));
    st.lambda = pk->p;
    // settle
    st = attractor_H(model, x, st, pk->p, opts).state;
    st.lambda = pk->p;

    // probe at the highest off-support local maximum
    const CVector nh0 = residual_vector(model, x, st);
    const auto probe = global_peak(model, nh0, st.support, 0.05 * 2.0 * kPi / 15.0);
    REQUIRE(probe.has_value());

    const NewtonResult res = attractor_F(model, x, st, probe->phi, opts);
    REQUIRE(res.status == NewtonStatus::Converged);
    const double lam_f = res.state.lambda;
    CHECK(lam_f < st.lambda);

    // third residual line holds at convergence
    const CVector nh = residual_vector(model, x, res.state);
    CHECK(std::abs(std::abs(correlation(model, nh, probe->phi)) - lam_f) < 1e-9 * x.x.norm());

    // oracle: dense lambda continuation with H, step 1e-4 * lambda, watching
    // for the off-support spectrum to reach lambda
    SupportState cur = st;
    double lam = st.lambda;
    double birth_lo = 0.0;
    const double guard = 0.05 * 2.0 * kPi / 15.0;
    for (int it = 0; it < 20000; ++it) {
        const double lam_next = lam * (1.0 - 1e-4);
        const NewtonResult step = attractor_H(model, x, cur, lam_next, opts);
        REQUIRE(step.status == NewtonStatus::Converged);
        cur = step.state;
        lam = lam_next;
        const CVector nhc = residual_vector(model, x, cur);
        const auto pc = global_peak(model, nhc, cur.support, guard);
        if (pc && pc->p >= lam) {
            birth_lo = lam;
            break;
        }
    }
    REQUIRE(birth_lo > 0.0);
    // lam_f must sit within one continuation step of the bracketing level
    CHECK(lam_f >= birth_lo * (1.0 - 1e-9));
    CHECK(lam_f <= birth_lo / (1.0 - 1e-4) * (1.0 + 1e-9));
}

TEST_CASE("attractor F rejects a probe at an existing support angle") {
    SteeringModel model(15);
    const Snapshot x{model.steering(0.4) * cplx(1.0, 0.2)};
    NewtonOptions opts;
    SupportState st;
    st.push_atom(0.4, 0.5, cplx(1.0, 0.2));
    st.lambda = 0.3 * 15.0;
    const NewtonResult res = attractor_F(model, x, st, 0.4, opts);
    CHECK(res.status != NewtonStatus::Converged);
}

TEST_CASE("attractor G agrees with F when the support angle is already stationary") {
    SteeringModel model(15);
    const double phi0 = 0.25;
    const Snapshot x{model.steering(phi0) * cplx(1.3, -0.4)};
    NewtonOptions opts;
    const double lam0 = 15.0 * std::abs(cplx(1.3, -0.4));
    SupportState st;
    st.push_atom(phi0, std::abs(cplx(1.3, -0.4)) - 0.4 * lam0 / 15.0, cplx(1.3, -0.4));
    st.lambda = 0.4 * lam0;

    const CVector nh = residual_vector(model, x, st);
    const auto probe = global_peak(model, nh, st.support, 0.05 * 2.0 * kPi / 15.0);
    REQUIRE(probe.has_value());

    const NewtonResult rf = attractor_F(model, x, st, probe->phi, opts);
    const NewtonResult rg = attractor_G(model, x, st, probe->phi, opts);
    REQUIRE(rf.status == NewtonStatus::Converged);
    REQUIRE(rg.status == NewtonStatus::Converged);
    CHECK(std::abs(rf.state.lambda - rg.state.lambda) < 1e-8 * st.lambda);
    CHECK(std::abs(rf.state.r[0] - rg.state.r[0]) < 1e-8);
    // G froze the angle
    CHECK(rg.state.support[0] == st.support[0]);
}

TEST_CASE("frozen-support singular states fit no better than free ones") {
    // run G and F from the same warm state on noisy instances; continue the F
    // state to G's level and compare data fits
    std::mt19937_64 eng(31);
    NewtonOptions opts;
    int compared = 0;
    for (int seed = 0; seed < 20; ++seed) {
        Scenario sc;
        sc.m = 15;
        sc.doas = {-0.8 + 0.05 * seed, 0.6};
        sc.amplitudes = {cplx(1.0, 0.3), cplx(0.8, -0.5)};
        sc.noise_std = 0.15;
        sc.seed = 500 + seed;
        const SteeringModel model(15);
        const Snapshot x = synthesize(sc);

        const auto pk = global_peak(model, x.x, {}, 0.0);
        REQUIRE(pk.has_value());
        SupportState st;
        st.push_atom(pk->phi, 0.0, correlation(model, x.x, pk->phi));
        st.lambda = pk->p;
        st = attractor_H(model, x, st, pk->p, opts).state;
        st.lambda = pk->p;
        // walk a little down the path so the atom carries weight
        const double lam_mid = 0.8 * pk->p;
        st = attractor_H(model, x, st, lam_mid, opts).state;
        st.lambda = lam_mid;

        const CVector nh = residual_vector(model, x, st);
        const auto probe = global_peak(model, nh, st.support, 0.05 * 2.0 * kPi / 15.0);
        REQUIRE(probe.has_value());

        const NewtonResult rg = attractor_G(model, x, st, probe->phi, opts);
        const NewtonResult rf = attractor_F(model, x, st, probe->phi, opts);
        if (rg.status != NewtonStatus::Converged || rf.status != NewtonStatus::Converged) continue;

        SupportState f_at_g = rf.state;
        const NewtonResult cont = attractor_H(model, x, f_at_g, rg.state.lambda, opts);
        if (cont.status != NewtonStatus::Converged) continue;
        const double res_f = residual_vector(model, x, cont.state).norm();
        const double res_g = residual_vector(model, x, rg.state).norm();
        CHECK(res_g >= res_f * (1.0 - 1e-9));
        ++compared;
    }
    CHECK(compared >= 15);
}

TEST_CASE("LEA residual is the penalized-cost gradient up to the polar scaling") {
    // L(theta, r, alpha) = 0.5||x - A s||^2 + lambda sum r_i with s = r e^{j a}:
    // dL/dr_i = -eta_R_i, dL/dtheta_i = -r_i eta_D_i, dL/dalpha_i = -r_i eta_I_i
    std::mt19937_64 eng(33);
    SteeringModel model(8);
    const Snapshot x{oracles::random_complex_vector(8, eng)};
    SupportState st = random_state(2, eng, 0.7);
    const int k = 2;

    auto L = [&](const RVector& z) {
        CVector nhat = x.x;
        for (int i = 0; i < k; ++i) {
            nhat -= model.steering(z[i]) * (z[k + i] * st.phasor[i] * std::polar(1.0, z[2 * k + i]));
        }
        double pen = 0.0;
        for (int i = 0; i < k; ++i) pen += z[k + i];
        return 0.5 * nhat.squaredNorm() + st.lambda * pen;
    };

    const NewtonSystem sys = assemble(SystemKind::LEA, model, x, st);
    RVector z0 = pack(st, SystemKind::LEA);
    for (int i = 0; i < k; ++i) {
        const double g_th = oracles::fd_derivative([&](double v) { RVector z = z0; z[i] = v; return L(z); }, z0[i]);
        const double g_r = oracles::fd_derivative([&](double v) { RVector z = z0; z[k + i] = v; return L(z); }, z0[k + i]);
        const double g_al = oracles::fd_derivative([&](double v) { RVector z = z0; z[2 * k + i] = v; return L(z); }, z0[2 * k + i]);
        CHECK(g_r == doctest::Approx(-sys.eta[i]).epsilon(1e-6));
        CHECK(g_al == doctest::Approx(-st.r[i] * sys.eta[k + i]).epsilon(1e-6));
        CHECK(g_th == doctest::Approx(-st.r[i] * sys.eta[2 * k + i]).epsilon(1e-6));
    }
}

TEST_CASE("global phase rotation shifts phases only") {
    SteeringModel model(15);
    Scenario sc;
    sc.m = 15;
    sc.doas = {-0.5, 0.9};
    sc.amplitudes = {cplx(1.0, 0.0), cplx(0.6, 0.6)};
    sc.noise_std = 0.05;
    sc.seed = 77;
    const Snapshot x = synthesize(sc);
    NewtonOptions opts;

    const auto pk = global_peak(model, x.x, {}, 0.0);
    SupportState st;
    st.push_atom(pk->phi, 0.0, correlation(model, x.x, pk->phi));
    st.lambda = pk->p;
    const NewtonResult r1 = attractor_H(model, x, st, 0.75 * pk->p, opts);
    REQUIRE(r1.status == NewtonStatus::Converged);

    // exact quarter-turn: x -> j x, phasor -> j phasor
    const Snapshot xr{x.x * cplx(0.0, 1.0)};
    SupportState str = st;
    str.phasor[0] *= cplx(0.0, 1.0);
    const NewtonResult r2 = attractor_H(model, xr, str, 0.75 * pk->p, opts);
    REQUIRE(r2.status == NewtonStatus::Converged);
    CHECK(r2.state.support[0] == r1.state.support[0]);
    CHECK(r2.state.r[0] == r1.state.r[0]);
    CHECK(r2.state.phasor[0] == r1.state.phasor[0] * cplx(0.0, 1.0));

    // generic rotation at tolerance
    const cplx ph = std::polar(1.0, 1.234);
    const Snapshot xg{x.x * ph};
    SupportState stg = st;
    stg.phasor[0] *= ph;
    const NewtonResult r3 = attractor_H(model, xg, stg, 0.75 * pk->p, opts);
    REQUIRE(r3.status == NewtonStatus::Converged);
    CHECK(std::abs(r3.state.support[0] - r1.state.support[0]) < 1e-10);
    CHECK(std::abs(r3.state.r[0] - r1.state.r[0]) < 1e-10);
}

TEST_CASE("converged states satisfy the continuous optimality conditions") {
    SteeringModel model(15);
    Scenario sc;
    sc.m = 15;
    sc.doas = {-1.2, 0.3};
    sc.amplitudes = {cplx(0.9, 0.1), cplx(0.0, 1.1)};
    sc.noise_std = 0.1;
    sc.seed = 123;
    const Snapshot x = synthesize(sc);
    NewtonOptions opts;
    const double guard = 0.05 * 2.0 * kPi / 15.0;

    const auto pk = global_peak(model, x.x, {}, 0.0);
    SupportState st;
    st.push_atom(pk->phi, 0.0, correlation(model, x.x, pk->phi));
    st.lambda = pk->p;
    const double lam = 0.85 * pk->p;
    const NewtonResult res = attractor_H(model, x, st, lam, opts);
    REQUIRE(res.status == NewtonStatus::Converged);

    const CVector nh = residual_vector(model, x, res.state);
    for (int i = 0; i < res.state.size(); ++i) {
        const cplx w = correlation(model, nh, res.state.support[i]);
        CHECK(std::abs(w - lam * res.state.phasor[i]) < 1e-9 * x.x.norm());
    }
    const auto off = global_peak(model, nh, res.state.support, guard);
    if (off) CHECK(off->p <= lam * (1.0 + 1e-6));
}
