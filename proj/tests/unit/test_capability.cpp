#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "capgate/capability.hpp"
#include "capgate/distributions.hpp"
#include "capgate/errors.hpp"
#include "capgate/rng.hpp"
#include "oracles.hpp"

using namespace capgate;

TEST_CASE("cpk_point examples") {
    auto centered = cpk_point(10.0, 1.0, SpecLimits::make(4.0, 16.0));
    CHECK(centered.cpk == 2.0);
    CHECK(centered.active_side == ActiveSide::tied);

    auto shifted = cpk_point(12.0, 1.0, SpecLimits::make(4.0, 16.0));
    CHECK(shifted.cpk == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
    CHECK(shifted.active_side == ActiveSide::upper);

    auto one_sided = cpk_point(0.0, 1.0, SpecLimits::make(-kInf, 3.99));
    CHECK(one_sided.cpk == doctest::Approx(1.33).epsilon(1e-15));
    CHECK(one_sided.cpl == kInf);
    CHECK(one_sided.active_side == ActiveSide::upper);
}

TEST_CASE("cpk_point rejects non-positive sigma and bad limits") {
    CHECK_THROWS_AS(cpk_point(0.0, 0.0, SpecLimits{-1.0, 1.0}), ValidationError);
    CHECK_THROWS_AS(cpk_point(0.0, -2.0, SpecLimits{-1.0, 1.0}), ValidationError);
    CHECK_THROWS_AS(SpecLimits::make(2.0, 1.0), ValidationError);
    CHECK_THROWS_AS(SpecLimits::make(1.0, 1.0), ValidationError);
    CHECK_THROWS_AS(SpecLimits::make(-kInf, kInf), ValidationError);
}

TEST_CASE("estimate_cpk hand example is exact") {
    const std::vector<double> xs{9.0, 10.0, 11.0};
    const auto r = estimate_cpk(xs, SpecLimits::make(4.0, 16.0));
    CHECK(r.summary.n == 3);
    CHECK(r.summary.mean == 10.0);
    CHECK(r.summary.sd == 1.0);
    CHECK(r.estimate.cpk == 2.0);
}

TEST_CASE("estimate_cpk errors") {
    const std::vector<double> flat{5.0, 5.0, 5.0};
    CHECK_THROWS_AS(estimate_cpk(flat, SpecLimits::make(0.0, 10.0)), DegenerateSampleError);
    const std::vector<double> single{5.0};
    CHECK_THROWS_AS(estimate_cpk(single, SpecLimits::make(0.0, 10.0)), ValidationError);
}

TEST_CASE("estimate_cpk converges to the population value") {
    const auto xs = sample(NormalModel{12.0, 1.0}, 1'000'000, SeedPath(3));
    const auto r = estimate_cpk(xs, SpecLimits::make(4.0, 16.0));
    CHECK(std::fabs(r.estimate.cpk - 4.0 / 3.0) < 0.01);
}

TEST_CASE("estimate_cpk is affine invariant") {
    const auto xs = sample(NormalModel{1.0, 0.3}, 50, SeedPath(8));
    const SpecLimits spec = SpecLimits::make(0.0, 2.5);
    const double base = estimate_cpk(xs, spec).estimate.cpk;
    for (auto [c, d] : {std::pair{2.0, 0.0}, std::pair{0.5, -7.0}, std::pair{13.0, 100.0}}) {
        std::vector<double> ys;
        for (double x : xs) ys.push_back(c * x + d);
        const double t = estimate_cpk(ys, SpecLimits::make(c * spec.lsl + d, c * spec.usl + d)).estimate.cpk;
        CHECK(t == doctest::Approx(base).epsilon(1e-12));
    }
}

TEST_CASE("cpk never exceeds either one-sided index") {
    Rng rng(91);
    for (int i = 0; i < 500; ++i) {
        const double mu = 10.0 * (rng.uniform_open() - 0.5);
        const double sigma = 0.05 + 3.0 * rng.uniform_open();
        const double lsl = -10.0 + 5.0 * rng.uniform_open();
        const double usl = lsl + 0.1 + 15.0 * rng.uniform_open();
        const auto e = cpk_point(mu, sigma, SpecLimits::make(lsl, usl));
        CHECK(e.cpk <= e.cpu);
        CHECK(e.cpk <= e.cpl);
        CHECK((e.cpk == e.cpu || e.cpk == e.cpl));
    }
}

TEST_CASE("cnpk_point examples") {
    const QuantileTriple std_normal{-3.0, 0.0, 3.0};
    CHECK(cnpk_point(std_normal, SpecLimits::make(-4.0, 4.0)) == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
    CHECK(cnpk_point(std_normal, SpecLimits::make(-4.0, 2.0)) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

    // Exact lognormal quantiles; value frozen from the bisection oracle.
    const double lo = oracle::lognormal_quantile(0.0, 0.0, 0.25, oracle::phi(-3.0));
    const double hi = oracle::lognormal_quantile(0.0, 0.0, 0.25, oracle::phi(3.0));
    const double oracle_value = std::min((3.0 - 1.0) / (hi - 1.0), (1.0 - 0.2) / (1.0 - lo));
    const double frozen = 1.5162041075218748;
    CHECK(std::fabs(oracle_value - frozen) < 1e-9);
    const auto q = exact_quantiles(ShiftedLognormalModel{0.0, 0.0, 0.25});
    CHECK(q.p50 == 1.0);
    CHECK(std::fabs(cnpk_point(q, SpecLimits::make(0.2, 3.0)) - frozen) < 1e-9);
}

TEST_CASE("cnpk_point errors") {
    CHECK_THROWS_AS(cnpk_point({0.0, 0.0, 1.0}, SpecLimits::make(-1.0, 2.0)), DegenerateSampleError);
    CHECK_THROWS_AS(cnpk_point({1.0, 0.0, 2.0}, SpecLimits::make(-1.0, 2.0)), ValidationError);
}

TEST_CASE("cnpk on exact normal quantiles equals cpk") {
    Rng rng(2718);
    for (int i = 0; i < 100; ++i) {
        const double mu = 20.0 * (rng.uniform_open() - 0.5);
        const double sigma = 0.01 + 5.0 * rng.uniform_open();
        const double lsl = mu - sigma * (0.5 + 6.0 * rng.uniform_open());
        const double usl = mu + sigma * (0.5 + 6.0 * rng.uniform_open());
        const SpecLimits spec = SpecLimits::make(lsl, usl);
        const double cnpk = cnpk_point(exact_quantiles(NormalModel{mu, sigma}), spec);
        CHECK(std::fabs(cnpk - cpk_point(mu, sigma, spec).cpk) <= 1e-12);
    }
}

TEST_CASE("estimate_cnpk converges") {
    const auto xs = sample(NormalModel{0.0, 1.0}, 1'000'000, SeedPath(21));
    CHECK(std::fabs(estimate_cnpk(xs, SpecLimits::make(-4.0, 4.0)) - 4.0 / 3.0) < 0.02);

    const ProcessModel ln = ShiftedLognormalModel{0.0, 0.0, 0.25};
    const auto ys = sample(ln, 1'000'000, SeedPath(22));
    const SpecLimits spec = SpecLimits::make(0.2, 3.0);
    CHECK(std::fabs(estimate_cnpk(ys, spec) - cnpk_point(exact_quantiles(ln), spec)) < 0.03);
}

TEST_CASE("estimate_cnpk errors") {
    const std::vector<double> flat(40, 2.0);
    CHECK_THROWS_AS(estimate_cnpk(flat, SpecLimits::make(0.0, 4.0)), DegenerateSampleError);
    const std::vector<double> small{1.0, 2.0, 3.0};
    CHECK_THROWS_AS(estimate_cnpk(small, SpecLimits::make(0.0, 4.0)), ValidationError);
}

TEST_CASE("type-8 empirical quantiles") {
    const std::vector<double> xs{1.0, 2.0, 3.0, 4.0, 5.0};
    CHECK(empirical_quantile(xs, 0.5) == doctest::Approx(3.0));
    CHECK(empirical_quantile(xs, 0.0001) == 1.0);
    CHECK(empirical_quantile(xs, 0.9999) == 5.0);
    // position (5 + 1/3) 0.25 + 1/3 = 5/3
    CHECK(empirical_quantile(xs, 0.25) == doctest::Approx(1.0 + 2.0 / 3.0));
    CHECK(cnpk_tail_extrapolated(32));
    CHECK_FALSE(cnpk_tail_extrapolated(1000));
}

TEST_CASE("calibrate_model examples") {
    const auto a = calibrate_model(1.33, CalibrationMode::one_sided, Family::normal);
    const auto& na = std::get<NormalModel>(a.model);
    CHECK(na.mu == 0.0);
    CHECK(na.sigma == 1.0);
    CHECK(a.spec.usl == doctest::Approx(3.99).epsilon(1e-15));
    CHECK(a.spec.lsl == -kInf);

    const auto b = calibrate_model(1.0, CalibrationMode::centered, Family::normal);
    CHECK(b.spec.usl == 3.0);
    CHECK(b.spec.lsl == -3.0);
    CHECK(cpk_point(0.0, 1.0, b.spec).active_side == ActiveSide::tied);

    const auto c = calibrate_model(1.33, CalibrationMode::one_sided, Family::shifted_lognormal, 0.25);
    const double q50 = 1.0;
    const double q99865 = oracle::lognormal_quantile(0.0, 0.0, 0.25, oracle::phi(3.0));
    CHECK(std::fabs((c.spec.usl - q50) / (q99865 - q50) - 1.33) < 1e-9);
    const double true_cnpk = cnpk_point(exact_quantiles(c.model), c.spec);
    CHECK(std::fabs(true_cnpk - 1.33) < 1e-12);
}

TEST_CASE("calibrate_model keeps a unique active side in one-sided mode") {
    for (double t : {0.3, 1.0, 1.33, 2.5}) {
        for (Family f : {Family::normal, Family::shifted_lognormal}) {
            const auto cal = calibrate_model(t, CalibrationMode::one_sided, f);
            const auto q = exact_quantiles(cal.model);
            const double upper = (cal.spec.usl - q.p50) / (q.p99865 - q.p50);
            const double lower = std::isfinite(cal.spec.lsl) ? (q.p50 - cal.spec.lsl) / (q.p50 - q.p00135) : kInf;
            CHECK(upper == doctest::Approx(t).epsilon(1e-12));
            CHECK(lower > upper + 0.1);
        }
    }
    CHECK_THROWS_AS(calibrate_model(0.0, CalibrationMode::one_sided, Family::normal), ValidationError);
    CHECK_THROWS_AS(calibrate_model(-1.0, CalibrationMode::centered, Family::normal), ValidationError);
}
