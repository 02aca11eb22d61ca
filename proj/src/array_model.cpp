#include "doa/array_model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace doa {

namespace {
constexpr double kPi = std::numbers::pi;
}

double wrap_angle(double phi) {
    double w = std::remainder(phi, 2.0 * kPi);  // (-pi, pi]
    if (w == kPi) w = -kPi;
    return w;
}

double circ_dist(double a, double b) {
    return std::abs(std::remainder(a - b, 2.0 * kPi));
}

SteeringModel::SteeringModel(int m) : m_(m) {
    if (m < 2) throw std::invalid_argument("SteeringModel: m must be >= 2");
}

CVector SteeringModel::steering(double phi) const {
    CVector a(m_);
    for (int k = 0; k < m_; ++k) {
        a[k] = std::polar(1.0, k * phi);
    }
    return a;
}

void SteeringModel::steering_derivs(double phi, CVector& d, CVector& c) const {
    d.resize(m_);
    c.resize(m_);
    for (int k = 0; k < m_; ++k) {
        const cplx e = std::polar(1.0, k * phi);
        d[k] = cplx(0.0, double(k)) * e;
        c[k] = -double(k) * double(k) * e;
    }
}

void Scenario::validate() const {
    if (m < 2) throw std::invalid_argument("Scenario: m must be >= 2");
    if (doas.size() != amplitudes.size())
        throw std::invalid_argument("Scenario: doas/amplitudes length mismatch");
    if (static_cast<int>(doas.size()) >= m)
        throw std::invalid_argument("Scenario: source count must be < m");
    if (!(noise_std >= 0.0))
        throw std::invalid_argument("Scenario: noise_std must be >= 0");
    for (double phi : doas) {
        if (!std::isfinite(phi))
            throw std::invalid_argument("Scenario: non-finite DOA");
    }
}

std::uint64_t mix64(std::uint64_t v) {
    v += 0x9e3779b97f4a7c15ULL;
    v = (v ^ (v >> 30)) * 0xbf58476d1ce4e5b9ULL;
    v = (v ^ (v >> 27)) * 0x94d049bb133111ebULL;
    return v ^ (v >> 31);
}

GaussianStream::GaussianStream(std::uint64_t seed) : engine_(mix64(seed)) {}

double GaussianStream::next() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // u1 in (0, 1], u2 in [0, 1). 2^-64 scaling keeps the full engine word.
    const double inv = 0x1.0p-64;
    double u1 = 1.0 - double(engine_()) * inv;
    if (u1 <= 0.0) u1 = inv;
    const double u2 = double(engine_()) * inv;
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double ang = 2.0 * kPi * u2;
    spare_ = rad * std::sin(ang);
    has_spare_ = true;
    return rad * std::cos(ang);
}

cplx GaussianStream::next_complex() {
    const double k = std::sqrt(0.5);
    const double re = next();
    const double im = next();
    return cplx(k * re, k * im);
}

Snapshot synthesize(const Scenario& scenario) {
    scenario.validate();
    const SteeringModel model(scenario.m);
    CVector x = CVector::Zero(scenario.m);
    for (std::size_t i = 0; i < scenario.doas.size(); ++i) {
        x += model.steering(scenario.doas[i]) * scenario.amplitudes[i];
    }
    if (scenario.noise_std > 0.0) {
        GaussianStream g(scenario.seed);
        for (int k = 0; k < scenario.m; ++k) {
            x[k] += scenario.noise_std * g.next_complex();
        }
    }
    return Snapshot{std::move(x)};
}

}  // namespace doa
