#include <doctest.h>

#include <random>

#include "doa/spectrum.hpp"
#include "oracles.hpp"

using namespace doa;
using oracles::kPi;

TEST_CASE("correlation basics") {
    SteeringModel model(9);
    const CVector a = model.steering(0.33);
    CHECK(std::abs(correlation(model, a, 0.33) - cplx(9.0, 0.0)) < 1e-12);
    const CVector zero = CVector::Zero(9);
    CHECK(std::abs(correlation(model, zero, 1.0)) == 0.0);
}

TEST_CASE("correlation magnitude matches the Dirichlet closed form") {
    SteeringModel model(15);
    const CVector nhat = model.steering(0.0);
    for (int i = 0; i < 400; ++i) {
        const double phi = -kPi + 2.0 * kPi * i / 400.0 + 1e-4;
        const double lhs = std::abs(correlation(model, nhat, phi));
        const double rhs = std::abs(std::sin(15.0 * phi / 2.0) / std::sin(phi / 2.0));
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
    }
}

TEST_CASE("global peak of a noiseless single source") {
    SteeringModel model(15);
    const CVector x = model.steering(0.7);
    const auto pk = global_peak(model, x, {}, 0.0);
    REQUIRE(pk.has_value());
    CHECK(std::abs(pk->phi - 0.7) < 1e-8);
    CHECK(std::abs(pk->p - 15.0) < 1e-8);
}

TEST_CASE("guarded peak finds the largest admissible sidelobe") {
    SteeringModel model(15);
    const CVector x = model.steering(0.7);
    const auto pk = global_peak(model, x, {0.7}, 0.3);
    REQUIRE(pk.has_value());
    // oracle on a fine grid restricted to admissible local maxima
    const auto brute = oracles::brute_force_peak(model, x, {0.7}, 0.3);
    CHECK(std::abs(pk->phi - brute.phi) < 2.0 * kPi * 1e-6 + 1e-9);
    CHECK(std::abs(pk->p - brute.p) / brute.p < 1e-8);
}

TEST_CASE("zero residual yields no peak") {
    SteeringModel model(8);
    const CVector zero = CVector::Zero(8);
    CHECK(!global_peak(model, zero, {}, 0.0).has_value());
}

TEST_CASE("peak height obeys Cauchy-Schwarz") {
    SteeringModel model(12);
    std::mt19937_64 eng(5);
    for (int t = 0; t < 30; ++t) {
        const CVector nhat = oracles::random_complex_vector(12, eng);
        const auto pk = global_peak(model, nhat, {}, 0.0);
        REQUIRE(pk.has_value());
        CHECK(pk->p <= nhat.norm() * std::sqrt(12.0) * (1.0 + 1e-12));
    }
}

TEST_CASE("refinement never loses to the scan grid") {
    SteeringModel model(10);
    std::mt19937_64 eng(6);
    for (int t = 0; t < 20; ++t) {
        const CVector nhat = oracles::random_complex_vector(10, eng);
        const auto pk = global_peak(model, nhat, {}, 0.0);
        REQUIRE(pk.has_value());
        double scan_best = 0.0;
        const int n = 16 * 10;
        for (int i = 0; i < n; ++i) {
            const double phi = -kPi + 2.0 * kPi * i / double(n);
            scan_best = std::max(scan_best, std::abs(correlation(model, nhat, phi)));
        }
        CHECK(pk->p >= scan_best * (1.0 - 1e-14));
    }
}

TEST_CASE("global peak agrees with a brute-force grid") {
    SteeringModel model(15);
    std::mt19937_64 eng(7);
    for (int t = 0; t < 5; ++t) {
        const CVector nhat = oracles::random_complex_vector(15, eng);
        const auto pk = global_peak(model, nhat, {}, 0.0);
        REQUIRE(pk.has_value());
        const auto brute = oracles::brute_force_argmax(model, nhat);
        CHECK(circ_dist(pk->phi, brute.phi) < 2.0 * kPi * 1e-6);
        CHECK(std::abs(pk->p - brute.p) / brute.p < 1e-8);
    }
}

TEST_CASE("peak result is self-consistent") {
    SteeringModel model(11);
    std::mt19937_64 eng(8);
    const CVector nhat = oracles::random_complex_vector(11, eng);
    const auto pk = global_peak(model, nhat, {}, 0.0);
    REQUIRE(pk.has_value());
    CHECK(std::abs(pk->p - std::abs(correlation(model, nhat, pk->phi))) <=
          1e-12 * std::max(1.0, pk->p));
}
