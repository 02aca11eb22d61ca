#pragma once

#include <optional>
#include <vector>

#include "doa/array_model.hpp"

namespace doa {

/// Active support of the sparse representation: atom angles with polar
/// amplitudes s_i = r_i e^{j alpha_i}, plus the current regularization level.
/// Phases are stored as unit phasors u_i = e^{j alpha_i}; all residual and
/// Jacobian formulas consume the phasor directly, so no trigonometric
/// round-trip enters the Newton loop.
struct SupportState {
    std::vector<double> support;  // angles, pairwise distinct
    std::vector<double> r;        // amplitude moduli
    std::vector<cplx> phasor;     // unit phasors e^{j alpha_i}
    double lambda = 0.0;

    int size() const { return static_cast<int>(support.size()); }
    cplx amplitude(int i) const { return r[i] * phasor[i]; }
    double alpha(int i) const { return std::arg(phasor[i]); }

    void push_atom(double phi, double rr, cplx u);
    void erase_atom(int i);
    void validate() const;  // throws on length mismatch / duplicate angles
};

enum class SystemKind { ML, LEA, LMA };

/// Assembled real residual and Jacobian for one Newton system.
/// Equation rows: [per-atom real part of e^{-j alpha_i} a_i^H nhat (- lambda);
/// per-atom imaginary part; per-atom Re(e^{-j alpha_i} d_i^H nhat); LMA only:
/// |a(probe)^H nhat|^2 - lambda^2]. Unknown columns: theta_1..k, r_1..k,
/// alpha_1..k and, for LMA, lambda.
struct NewtonSystem {
    RVector eta;
    RMatrix J;
    SystemKind kind = SystemKind::ML;
};

struct NewtonOptions {
    double tol = 1e-10;          // on ||eta||_inf, scaled by ||x||_2
    int max_iter = 100;
    double backtrack_ratio = 0.5;
    double min_step = 1e-12;
    double cond_limit = 1e12;
};

enum class NewtonStatus {
    Converged,
    NonConvergence,
    IllConditioned,
    NegativeAmplitude,  // converged, but some r_i < 0
    RisingLambda,       // attractor_F: probe's singular point lies above lambda
};

struct NewtonResult {
    SupportState state;
    NewtonStatus status = NewtonStatus::NonConvergence;
    int iterations = 0;
    double residual_norm = 0.0;
};

/// Build eta and J for the given system at the given state. For LMA the
/// probe angle (the prospective touching point) must be supplied.
NewtonSystem assemble(SystemKind kind, const SteeringModel& model, const Snapshot& x,
                      const SupportState& state, std::optional<double> probe = std::nullopt);

/// Damped Newton on the chosen system. The paper-style "+J^{-1}eta" update is
/// probed once on the first step and the sign is locked to whichever descends;
/// backtracking halves the step until the infinity norm of the residual
/// decreases. Linear solves go through an SVD of the column-equilibrated
/// Jacobian with an explicit condition check.
NewtonResult damped_newton(SystemKind kind, const SteeringModel& model, const Snapshot& x,
                           const SupportState& state, std::optional<double> probe,
                           const NewtonOptions& opts);

/// Local Equilevel Attractor H: fix lambda = lambda_target and re-converge the
/// fixed-support stationarity system.
NewtonResult attractor_H(const SteeringModel& model, const Snapshot& x, const SupportState& state,
                         double lambda_target, const NewtonOptions& opts);

/// Local Marginalized Attractor F: free lambda and converge to the level at
/// which the spectrum touches lambda at the probe while the support stays
/// stationary. The converged state's lambda is the probe's candidate birth
/// level.
NewtonResult attractor_F(const SteeringModel& model, const Snapshot& x, const SupportState& state,
                         double probe, const NewtonOptions& opts);

/// Marginalized Source Attractor G: as F but with the support angles frozen
/// (theta rows and columns dropped). Used by the grid baseline.
NewtonResult attractor_G(const SteeringModel& model, const Snapshot& x, const SupportState& state,
                         double probe, const NewtonOptions& opts);

/// H with the support angles frozen; keeps SPS-LASSO's support on its grid
/// while lambda decreases.
NewtonResult attractor_H_frozen(const SteeringModel& model, const Snapshot& x,
                                const SupportState& state, double lambda_target,
                                const NewtonOptions& opts);

/// x - A(support) s for the state's current amplitudes.
CVector residual_vector(const SteeringModel& model, const Snapshot& x, const SupportState& state);

}  // namespace doa
