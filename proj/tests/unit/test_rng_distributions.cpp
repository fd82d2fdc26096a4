#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "capgate/distributions.hpp"
#include "capgate/errors.hpp"
#include "capgate/rng.hpp"
#include "oracles.hpp"

using namespace capgate;

TEST_CASE("normal_cdf reference points") {
    CHECK(normal_cdf(0.0) == 0.5);
    CHECK(std::fabs(normal_cdf(1.645) - 0.95) < 5e-4);
    CHECK(std::fabs(normal_cdf(-1.645) - 0.05) < 5e-4);
    CHECK(std::fabs(normal_cdf(-1.645) - (1.0 - normal_cdf(1.645))) < 1e-15);
}

TEST_CASE("normal_cdf agrees with quadrature to 1e-12") {
    for (double x = -8.0; x <= 8.0; x += 0.37) {
        CHECK(std::fabs(normal_cdf(x) - oracle::phi(x)) < 1e-12);
    }
}

TEST_CASE("normal_quantile examples") {
    CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(std::fabs(normal_quantile(0.95) - 1.6449) < 5e-4);
    // Frozen from oracle::quantile(0.975) (bisection on quadrature Φ).
    const double frozen = 1.959963984540054;
    CHECK(std::fabs(oracle::quantile(0.975) - frozen) < 1e-10);
    CHECK(std::fabs(normal_quantile(0.975) - frozen) < 1e-9);
}

TEST_CASE("normal_quantile matches the bisection oracle across the range") {
    for (double p : {1e-10, 1e-6, 0.00135, 0.01, 0.2, 0.4999, 0.6, 0.9, 0.99865, 0.999999}) {
        CHECK(std::fabs(normal_quantile(p) - oracle::quantile(p)) < 1e-9);
    }
}

TEST_CASE("normal_quantile rejects p outside (0, 1)") {
    CHECK_THROWS_AS(normal_quantile(0.0), ValidationError);
    CHECK_THROWS_AS(normal_quantile(1.0), ValidationError);
    CHECK_THROWS_AS(normal_quantile(-0.1), ValidationError);
    CHECK_THROWS_AS(normal_quantile(std::numeric_limits<double>::quiet_NaN()), ValidationError);
}

TEST_CASE("Φ/Φ⁻¹ round trip on a 0.001 grid") {
    double worst = 0.0;
    for (int k = 1; k <= 999; ++k) {
        const double p = k / 1000.0;
        worst = std::max(worst, std::fabs(normal_cdf(normal_quantile(p)) - p));
    }
    CHECK(worst <= 1e-8);
}

TEST_CASE("raw AS241 kernel is already accurate") {
    for (double p : {1e-300, 1e-20, 1e-5, 0.3, 0.5, 0.7, 1.0 - 1e-12}) {
        const double x = detail::ppnd16(p);
        CHECK(std::fabs(x - normal_quantile(p)) <= 1e-12 * std::max(1.0, std::fabs(x)));
    }
}

TEST_CASE("normal sample mean converges") {
    const auto xs = sample(NormalModel{0.0, 1.0}, 1'000'000, SeedPath(11));
    CHECK(std::fabs(oracle::mean(xs)) < 4e-3);
}

TEST_CASE("invalid model parameters are rejected") {
    CHECK_THROWS_AS(sample(NormalModel{5.0, 0.0}, 10, SeedPath(1)), ValidationError);
    CHECK_THROWS_AS(sample(NormalModel{5.0, -1.0}, 10, SeedPath(1)), ValidationError);
    CHECK_THROWS_AS(sample(ShiftedLognormalModel{0.0, 0.0, 0.0}, 10, SeedPath(1)), ValidationError);
    CHECK_THROWS_AS(sample(NormalModel{0.0, 1.0}, 1, SeedPath(1)), ValidationError);
}

TEST_CASE("lognormal sample median is exp(log_mu)") {
    auto xs = sample(ShiftedLognormalModel{0.0, 0.0, 1.0}, 1'000'000, SeedPath(12));
    std::nth_element(xs.begin(), xs.begin() + xs.size() / 2, xs.end());
    CHECK(std::fabs(xs[xs.size() / 2] - 1.0) < 0.01);
    CHECK(*std::min_element(xs.begin(), xs.end()) > 0.0);
}

TEST_CASE("shifted lognormal support starts at the shift") {
    const auto xs = sample(ShiftedLognormalModel{-3.0, 0.5, 0.25}, 10000, SeedPath(5));
    CHECK(*std::min_element(xs.begin(), xs.end()) > -3.0);
    CHECK(model_quantile(ShiftedLognormalModel{-3.0, 0.5, 0.25}, 0.5) ==
          doctest::Approx(-3.0 + std::exp(0.5)).epsilon(1e-14));
}

TEST_CASE("identical seed paths give byte-identical streams") {
    const SeedPath seed(42, {7, 3, 9});
    const auto a = sample(NormalModel{1.0, 2.0}, 4096, seed);
    const auto b = sample(NormalModel{1.0, 2.0}, 4096, SeedPath(42, {7, 3, 9}));
    REQUIRE(a.size() == b.size());
    CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

TEST_CASE("distinct paths are uncorrelated") {
    const SeedPath root(2024);
    const auto a = sample(NormalModel{0.0, 1.0}, 100000, root.child(0));
    const auto b = sample(NormalModel{0.0, 1.0}, 100000, root.child(1));
    const auto c = sample(NormalModel{0.0, 1.0}, 100000, root.child(0).child(0));
    CHECK(std::fabs(oracle::correlation(a, b)) < 0.01);
    CHECK(std::fabs(oracle::correlation(a, c)) < 0.01);
}

TEST_CASE("seed keys depend on label order and depth") {
    CHECK(SeedPath(1, {2, 3}).key() != SeedPath(1, {3, 2}).key());
    CHECK(SeedPath(1, {2}).key() != SeedPath(1, {2, 0}).key());
    CHECK(SeedPath(1).key() != SeedPath(2).key());
    CHECK(SeedPath(1).child(4).child(5) == SeedPath(1, {4, 5}));
    CHECK(SeedPath(9, {1, 2}).to_string() == "9/1/2");
}

TEST_CASE("uniform draws stay in the open unit interval; bounded ints are in range") {
    Rng rng(77);
    double lo = 1.0, hi = 0.0;
    std::vector<std::size_t> hist(7, 0);
    for (int i = 0; i < 700000; ++i) {
        const double u = rng.uniform_open();
        lo = std::min(lo, u);
        hi = std::max(hi, u);
        ++hist[rng.below(7)];
    }
    CHECK(lo > 0.0);
    CHECK(hi < 1.0);
    for (std::size_t count : hist) CHECK(std::fabs(static_cast<double>(count) - 100000.0) < 1500.0);
}

TEST_CASE("generators are copyable values") {
    Rng a(5);
    a.next();
    Rng b = a;
    CHECK(a.next() == b.next());
    CHECK(a == b);
}
