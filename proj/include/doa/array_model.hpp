#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>

namespace doa {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

/// Wrap an angle to [-pi, pi).
double wrap_angle(double phi);

/// Circular distance between two angles, in [0, pi].
double circ_dist(double a, double b);

/// Uniform linear array with half-wavelength spacing, parameterized by the
/// electrical angle phi (inter-sensor phase increment). Sensor k sees phase
/// k*phi with the reference at sensor 0.
class SteeringModel {
public:
    explicit SteeringModel(int m);

    int m() const { return m_; }

    /// a(phi), entry k = e^{j k phi}; ||a||^2 = m exactly.
    CVector steering(double phi) const;

    /// First and second derivatives of the steering vector:
    /// d_k = j k e^{j k phi}, c_k = -k^2 e^{j k phi}.
    void steering_derivs(double phi, CVector& d, CVector& c) const;

private:
    int m_;
};

/// Ground truth for one synthetic snapshot. noise_std is sigma, the total
/// per-component complex standard deviation (real and imaginary parts each
/// N(0, sigma^2/2)); SNR convention is |s_1|^2 / sigma^2.
struct Scenario {
    int m = 15;
    std::vector<double> doas;      // electrical angles in [-pi, pi)
    std::vector<cplx> amplitudes;  // same length as doas
    double noise_std = 0.0;
    std::uint64_t seed = 0;

    void validate() const;  // throws std::invalid_argument on bad fields
};

struct Snapshot {
    CVector x;
    int m() const { return static_cast<int>(x.size()); }
};

/// x = sum_i a(phi_i) s_i + n. Bit-identical output for identical inputs:
/// the noise stream is a pure function of the seed (mt19937_64 driving an
/// explicit Box-Muller transform, independent of libstdc++ distributions).
Snapshot synthesize(const Scenario& scenario);

/// Standard normal deviates from a seeded mt19937_64. std::normal_distribution
/// is avoided because its algorithm is implementation-defined; Box-Muller over
/// the engine's raw output keeps the stream bit-stable.
class GaussianStream {
public:
    explicit GaussianStream(std::uint64_t seed);
    double next();        // N(0, 1)
    cplx next_complex();  // circular, total variance 1 (re/im each 1/2)

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Deterministic 64-bit mix (splitmix64 finalizer); the harness combines
/// master seed, axis value bits and trial index through this.
std::uint64_t mix64(std::uint64_t v);

}  // namespace doa
