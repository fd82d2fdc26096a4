#include <doctest.h>

#include <cmath>

#include "capgate/asymptotics.hpp"
#include "capgate/errors.hpp"
#include "oracles.hpp"

using namespace capgate;

TEST_CASE("sigma_c closed form examples") {
    CHECK(sigma_c_closed_form(0.0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(std::fabs(sigma_c_closed_form(1.0) - 0.78174) < 5e-6);
    CHECK(std::fabs(sigma_c_closed_form(1.33) - 0.99778) < 5e-6);
    CHECK_THROWS_AS(sigma_c_closed_form(-0.1), ValidationError);
}

TEST_CASE("sigma_c_for refuses tied sides") {
    CapabilityEstimate tied{2.0, 2.0, 2.0, ActiveSide::tied};
    CHECK_THROWS_AS(sigma_c_for(tied), ValidationError);
    CapabilityEstimate upper{1.33, 5.0, 1.33, ActiveSide::upper};
    CHECK(sigma_c_for(upper) == sigma_c_closed_form(1.33));
}

TEST_CASE("acceptance_prob_asymptotic examples") {
    for (std::size_t n : {1u, 32u, 5000u}) CHECK(acceptance_prob_asymptotic(1.33, 1.33, n, 0.7) == 0.5);
    CHECK(std::fabs(acceptance_prob_asymptotic(1.33 + 0.2908, 1.33, 32, 1.00) - 0.95) < 5e-4);
    CHECK(acceptance_prob_asymptotic(1.40, 1.33, 1'000'000, 1.0) >= 1.0 - 1e-9);
    CHECK_THROWS_AS(acceptance_prob_asymptotic(1.4, 1.33, 0, 1.0), ValidationError);
    CHECK_THROWS_AS(acceptance_prob_asymptotic(1.4, 1.33, 10, 0.0), ValidationError);
}

TEST_CASE("local_limit examples") {
    CHECK(local_limit(0.0, 0.3) == 0.5);
    CHECK(std::fabs(local_limit(1.645, 1.0) - 0.95) < 5e-4);
    for (double h : {0.1, 0.7, 2.3}) {
        CHECK(local_limit(-h, 0.9) == doctest::Approx(1.0 - local_limit(h, 0.9)).epsilon(1e-14));
    }
}

TEST_CASE("acceptance probability is monotone in capability and in n") {
    const double sc = 1.0;
    double prev = 0.0;
    for (double c = 1.0; c <= 1.7; c += 0.01) {
        const double p = acceptance_prob_asymptotic(c, 1.33, 32, sc);
        CHECK(p > prev);
        prev = p;
    }
    for (std::size_t n = 8; n < 4096; n *= 2) {
        CHECK(acceptance_prob_asymptotic(1.40, 1.33, 2 * n, sc) > acceptance_prob_asymptotic(1.40, 1.33, n, sc));
        CHECK(acceptance_prob_asymptotic(1.26, 1.33, 2 * n, sc) < acceptance_prob_asymptotic(1.26, 1.33, n, sc));
    }
}

TEST_CASE("complement symmetry around the threshold") {
    for (double d : {0.001, 0.05, 0.3}) {
        for (std::size_t n : {4u, 64u, 1000u}) {
            const double up = acceptance_prob_asymptotic(1.33 + d, 1.33, n, 0.9);
            const double down = acceptance_prob_asymptotic(1.33 - d, 1.33, n, 0.9);
            CHECK(std::fabs(up + down - 1.0) < 1e-14);
        }
    }
}

TEST_CASE("instability band examples") {
    const auto band = instability_band(1.33, 32, 1.00, 0.45);
    CHECK(std::fabs((band.upper - band.lower) / 2.0 - 0.2908) < 1e-4);
    CHECK(std::fabs(band.lower - 1.0392) < 1e-4);
    CHECK(std::fabs(band.upper - 1.6208) < 1e-4);
    CHECK(band.width == doctest::Approx(band.upper - band.lower).epsilon(1e-15));

    CHECK(instability_band(1.33, 32, 1.0, 1e-9).width < 1e-8);
    const auto quad = instability_band(1.33, 128, 1.00, 0.45);
    CHECK(quad.width == doctest::Approx(band.width / 2.0).epsilon(1e-14));

    CHECK_THROWS_AS(instability_band(1.33, 32, 1.0, 0.0), ValidationError);
    CHECK_THROWS_AS(instability_band(1.33, 32, 1.0, 0.5), ValidationError);
}

TEST_CASE("band endpoints sit exactly epsilon from one half") {
    for (double eps : {0.1, 0.25, 0.45}) {
        const auto band = instability_band(1.33, 50, 0.8, eps);
        const double h_upper = std::sqrt(50.0) * (band.upper - 1.33);
        const double h_lower = std::sqrt(50.0) * (band.lower - 1.33);
        CHECK(std::fabs(local_limit(h_upper, 0.8) - 0.5 - eps) < 1e-12);
        CHECK(std::fabs(0.5 - local_limit(h_lower, 0.8) - eps) < 1e-12);
    }
}

TEST_CASE("margin calibration examples") {
    const auto cal = calibrate_margin(1.33, 32, 1.00, 0.05);
    CHECK(std::fabs(cal.kappa - 1.6449) < 5e-4);
    CHECK(std::fabs(cal.margin - 0.29078) < 1e-4);
    CHECK(std::fabs(cal.adjusted_threshold - 1.6208) < 1e-4);
    CHECK(cal.adjusted_threshold == cal.c0 + cal.margin);

    const auto half = calibrate_margin(1.33, 32, 1.00, 0.5);
    CHECK(std::fabs(half.kappa) < 1e-15);
    CHECK(half.adjusted_threshold == doctest::Approx(1.33).epsilon(1e-15));

    const auto quad = calibrate_margin(1.33, 128, 1.00, 0.05);
    CHECK(quad.margin == doctest::Approx(cal.margin / 2.0).epsilon(1e-14));

    // The calibrated threshold lands the asymptotic boundary acceptance on alpha.
    CHECK(std::fabs(acceptance_prob_asymptotic(1.33, cal.adjusted_threshold, 32, 1.0) - 0.05) < 1e-9);
    CHECK_THROWS_AS(calibrate_margin(1.33, 32, 1.0, 0.0), ValidationError);
    CHECK_THROWS_AS(calibrate_margin(1.33, 32, 1.0, 1.0), ValidationError);
}

TEST_CASE("estimator_sd_approx examples") {
    CHECK(std::fabs(estimator_sd_approx(1.33, 32) - 0.1764) < 1e-4);
    CHECK(estimator_sd_approx(0.0, 9) == doctest::Approx(1.0 / 9.0).epsilon(1e-15));
    CHECK(estimator_sd_approx(1.33, 100'000'000) < 1e-4);
}

TEST_CASE("Φ-based probabilities agree with quadrature") {
    for (double z : {-2.5, -0.3, 0.0, 1.1, 2.9}) {
        CHECK(std::fabs(local_limit(z, 1.0) - oracle::phi(z)) < 1e-12);
    }
}
