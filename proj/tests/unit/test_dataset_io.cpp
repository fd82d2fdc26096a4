#include <doctest.h>

#include <cmath>
#include <sstream>

#include "capgate/dataset_io.hpp"
#include "capgate/errors.hpp"

using namespace capgate;

namespace {

std::vector<DimensionRecord> parse(const std::string& text) {
    std::istringstream in(text);
    return parse_dimensions(in);
}

std::string error_of(const std::string& text) {
    try {
        parse(text);
    } catch (const ValidationError& e) {
        return e.what();
    }
    return {};
}

const char* kThree =
    "dimension_id,lsl,usl,nominal,value\n"
    "bore,9.9,10.1,10.0,10.01\n"
    "bore,9.9,10.1,10.0,9.98\n"
    "bore,9.9,10.1,10.0,10.02\n"
    "flatness,-inf,0.05,,0.010\n"
    "flatness,-inf,0.05,,0.012\n"
    "\"slot, wide\",4,6,5,5.1\n"
    "\"slot, wide\",4,6,5,4.9\n"
    "\"slot, wide\",4,6,5,5.0\n"
    "\"slot, wide\",4,6,5,5.2\n";

}  // namespace

TEST_CASE("well-formed file parses into records") {
    const auto recs = parse(kThree);
    REQUIRE(recs.size() == 3);
    CHECK(recs[0].dimension_id == "bore");
    CHECK(recs[0].measurements.size() == 3);
    CHECK(recs[0].nominal == 10.0);
    CHECK(recs[1].spec.lsl == -kInf);
    CHECK_FALSE(recs[1].nominal.has_value());
    CHECK(recs[2].dimension_id == "slot, wide");
    CHECK(recs[2].measurements.size() == 4);
}

TEST_CASE("schema errors carry dimension and line") {
    const std::string bad_spec =
        "dimension_id,lsl,usl,nominal,value\n"
        "a,0,1,,0.5\n"
        "a,0,1,,0.6\n"
        "b,2,1,,1.5\n";
    const auto msg = error_of(bad_spec);
    CHECK(msg.find("line 4") != std::string::npos);
    CHECK(msg.find("'b'") != std::string::npos);

    CHECK(error_of("id,lsl,usl,nominal,value\n").find("header") != std::string::npos);
    CHECK(error_of("dimension_id,lsl,usl,nominal,value\na,0,1,,nan\na,0,1,,1\n").find("line 2") !=
          std::string::npos);
    CHECK(error_of("dimension_id,lsl,usl,nominal,value\na,0,1,,0.1\na,0,2,,0.2\n").find("differ") !=
          std::string::npos);
    CHECK(error_of("dimension_id,lsl,usl,nominal,value\na,0,1,,0.1\nb,0,1,,0.2\nb,0,1,,0.3\na,0,1,,0.4\n")
              .find("duplicate") != std::string::npos);
    CHECK(error_of("dimension_id,lsl,usl,nominal,value\na,0,1,,0.1\n").find("two") != std::string::npos);
    CHECK(error_of("dimension_id,lsl,usl,nominal,value\na,0,1,0.1\n").find("5 fields") != std::string::npos);
    CHECK(error_of("dimension_id,lsl,usl,nominal,value\na,0,1,,1e3x\na,0,1,,1\n").find("invalid") !=
          std::string::npos);
}

TEST_CASE("missing file is a validation error") {
    CHECK_THROWS_AS(parse_dimensions(std::filesystem::path("/nonexistent/capgate.csv")), ValidationError);
}

TEST_CASE("write then parse round-trips exactly") {
    const auto recs = generate_synthetic_dataset({{1.33, 12, 3}, {2.0, 5, 2, Family::shifted_lognormal}},
                                                 SeedPath(5));
    std::ostringstream out;
    write_dimensions(out, recs);
    CHECK(parse(out.str()) == recs);
    const auto recs3 = parse(kThree);
    std::ostringstream out3;
    write_dimensions(out3, recs3);
    CHECK(parse(out3.str()) == recs3);
}

TEST_CASE("normality test size and power") {
    std::size_t pass = 0;
    const std::size_t trials = 2000;
    for (std::size_t t = 0; t < trials; ++t) {
        const auto xs = sample(NormalModel{0.0, 1.0}, 32, SeedPath(100, {t}));
        pass += normality_test(xs, 0.05).pass;
    }
    const double rate = static_cast<double>(pass) / trials;
    CHECK(rate > 0.93);
    CHECK(rate < 0.97);

    std::size_t rejected = 0;
    for (std::size_t t = 0; t < 500; ++t) {
        const auto xs = sample(ShiftedLognormalModel{0.0, 0.0, 1.0}, 32, SeedPath(200, {t}));
        rejected += !normality_test(xs, 0.05).pass;
    }
    CHECK(static_cast<double>(rejected) / 500.0 > 0.8);
}

TEST_CASE("normality test errors") {
    CHECK_THROWS_AS(normality_test(std::vector<double>(10, 3.0)), DegenerateSampleError);
    CHECK_THROWS_AS(normality_test({1, 2, 3, 4, 5, 6, 7}), ValidationError);
    CHECK_THROWS_AS(normality_test({1, 2, 3, 4, 5, 6, 7, 8}, 0.07), ValidationError);
}

TEST_CASE("normality statistic agrees with a reference value") {
    // A^2 for 1..10 frozen from scipy.stats.anderson, times 1 + 0.75/10 + 2.25/100.
    std::vector<double> xs{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    const auto r = normality_test(xs);
    CHECK(r.statistic == doctest::Approx(0.14110924785979329 * 1.0975).epsilon(1e-9));
    CHECK(r.pass);
}

TEST_CASE("concentration table examples") {
    const std::vector<NamedEstimate> est{{"a", 1.33}, {"b", 1.35}, {"c", 2.0}};
    const auto t = concentration_table(est, 1.33, {0.01, 0.10});
    CHECK(t.total == 3);
    CHECK(t.bands[0].count == 1);
    CHECK(t.bands[1].count == 2);
    CHECK(t.bands[1].share == doctest::Approx(2.0 / 3.0));

    CHECK(std::fabs(scaled_boundary_half_width(1.00, 32) - 0.2908) < 1e-4);

    const std::vector<NamedEstimate> far{{"x", 5.0}, {"y", -2.0}};
    for (const auto& b : concentration_table(far, 1.33, default_half_widths(1.0, 32)).bands) CHECK(b.count == 0);
    CHECK_THROWS_AS(concentration_table({}, 1.33, {0.1}), ValidationError);
    CHECK_THROWS_AS(concentration_table(est, 1.33, {0.2, 0.1}), ValidationError);
}

TEST_CASE("concentration counts are monotone and shift invariant") {
    const auto recs = generate_synthetic_dataset({{1.2, 32, 30}, {1.4, 32, 30}}, SeedPath(6));
    std::vector<NamedEstimate> est, shifted;
    for (const auto& r : recs) {
        est.push_back({r.dimension_id, estimate_cpk(r.measurements, r.spec).estimate.cpk});
        std::vector<double> ys;
        for (double x : r.measurements) ys.push_back(x + 250.0);
        const SpecLimits s{r.spec.lsl + 250.0, r.spec.usl + 250.0};
        shifted.push_back({r.dimension_id, estimate_cpk(ys, s).estimate.cpk});
    }
    const auto bands = default_half_widths(1.0, 32);
    const auto a = concentration_table(est, 1.33, bands);
    const auto b = concentration_table(shifted, 1.33, bands);
    for (std::size_t i = 0; i < a.bands.size(); ++i) {
        CHECK(a.bands[i].count == b.bands[i].count);
        if (i > 0) CHECK(a.bands[i].count >= a.bands[i - 1].count);
    }
}

TEST_CASE("synthetic generator") {
    const auto recs = generate_synthetic_dataset({{1.33, 32, 100}}, SeedPath(7));
    REQUIRE(recs.size() == 100);
    double sum = 0.0;
    for (const auto& r : recs) sum += estimate_cpk(r.measurements, r.spec).estimate.cpk;
    CHECK(std::fabs(sum / 100.0 - 1.33) < 0.05);
    CHECK(synthetic_true_cpk(recs[0].dimension_id) == 1.33);
    CHECK(recs[0].dimension_id == "g0-normal-one_sided-cpk1.33-n32-0000");
    CHECK(generate_synthetic_dataset({{1.33, 32, 100}}, SeedPath(7)) == recs);

    SyntheticGroup zero;
    zero.count = 0;
    CHECK_THROWS_AS(generate_synthetic_dataset({zero}, SeedPath(1)), ValidationError);
    CHECK_THROWS_AS(parse_synthetic_group("1.33:32:0"), ValidationError);
    const auto g = parse_synthetic_group("2:16:5:shifted_lognormal:centered");
    CHECK(g.true_cpk == 2.0);
    CHECK(g.n == 16);
    CHECK(g.family == Family::shifted_lognormal);
    CHECK(g.calibration_mode == CalibrationMode::centered);
}
