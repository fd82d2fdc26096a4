#include <doctest.h>

#include <cmath>

#include "capgate/decision_rules.hpp"
#include "capgate/errors.hpp"

using namespace capgate;

namespace {

CapabilityEstimate upper_active(double cpk) { return {cpk, cpk + 5.0, cpk, ActiveSide::upper}; }

SampleSummary summary_of(std::size_t n) { return {n, 0.0, 1.0}; }

}  // namespace

TEST_CASE("deterministic rule is inclusive at the threshold") {
    CHECK(decide_deterministic(upper_active(1.34), 1.33).accept);
    CHECK(decide_deterministic(upper_active(1.33), 1.33).accept);
    CHECK_FALSE(decide_deterministic(upper_active(1.32), 1.33).accept);
    const auto d = decide_deterministic(upper_active(1.5), 1.33);
    CHECK(d.statistic == 1.5);
    CHECK(d.cutoff == 1.33);
}

TEST_CASE("margin rule examples") {
    const auto cal = calibrate_margin(1.33, 32, 1.00, 0.05);
    CHECK(decide_margin(upper_active(1.65), cal).accept);
    CHECK_FALSE(decide_margin(upper_active(1.33), cal).accept);

    const auto zero = calibrate_margin(1.33, 32, 1.00, 0.5);
    for (double c = 1.0; c < 1.7; c += 0.0137) {
        CHECK(decide_margin(upper_active(c), zero).accept == decide_deterministic(upper_active(c), 1.33).accept);
    }
}

TEST_CASE("lcb rule example") {
    const auto d = decide_lcb(summary_of(32), upper_active(1.6208), 1.33, 0.05);
    const double expected = 1.6208 - normal_quantile(0.95) * std::sqrt(1.0 / 9.0 + 1.6208 * 1.6208 / 2.0) / std::sqrt(32.0);
    CHECK(d.statistic == doctest::Approx(expected).epsilon(1e-14));
    CHECK(std::fabs(d.statistic - 1.2736) < 1e-3);
    CHECK_FALSE(d.accept);

    CHECK(decide_lcb(summary_of(10'000'000), upper_active(1.35), 1.33, 0.05).accept);
    CapabilityEstimate tied{1.5, 1.5, 1.5, ActiveSide::tied};
    CHECK_THROWS_AS(decide_lcb(summary_of(32), tied, 1.33, 0.05), ValidationError);
}

TEST_CASE("lcb at alpha near one half matches the deterministic rule") {
    for (double c = 1.0; c < 1.7; c += 0.0113) {
        const auto lcb = decide_lcb(summary_of(32), upper_active(c), 1.33, 0.5 - 1e-15);
        CHECK(lcb.accept == decide_deterministic(upper_active(c), 1.33).accept);
    }
}

TEST_CASE("probability rule examples") {
    DecisionRuleSpec rule;
    rule.kind = RuleKind::probability;
    const auto at = decide_probability(summary_of(32), upper_active(1.33), rule, SeedPath(1));
    CHECK(at.statistic == 0.5);
    CHECK_FALSE(at.accept);

    // Solve c = c0 + z sigma_C(c)/sqrt(n) for c by fixed point.
    const double z = normal_quantile(0.95);
    double c = 1.6;
    for (int i = 0; i < 200; ++i) c = 1.33 + z * sigma_c_closed_form(c) / std::sqrt(32.0);
    const auto above = decide_probability(summary_of(32), upper_active(c + 1e-12), rule, SeedPath(1));
    CHECK(std::fabs(above.statistic - 0.95) < 1e-9);
    CHECK(above.accept);

    CapabilityEstimate tied{1.5, 1.5, 1.5, ActiveSide::tied};
    CHECK_THROWS_AS(decide_probability(summary_of(32), tied, rule, SeedPath(1)), ValidationError);
    rule.prob_method = ProbabilityMethod::nested_monte_carlo;
    rule.inner_reps = 50;
    CHECK_THROWS_AS(decide_probability(summary_of(32), upper_active(1.4), rule, SeedPath(1)), ValidationError);
}

TEST_CASE("plug-in probability rule at p_min = 1 - alpha coincides with lcb") {
    DecisionRuleSpec rule;
    rule.kind = RuleKind::probability;
    rule.p_min = 0.95;
    std::size_t disagreements = 0;
    for (double c = 1.2; c < 1.9; c += 0.0007) {
        const bool p = decide_probability(summary_of(32), upper_active(c), rule, SeedPath(1)).accept;
        const bool l = decide_lcb(summary_of(32), upper_active(c), 1.33, 0.05).accept;
        if (p != l) ++disagreements;
    }
    CHECK(disagreements == 0);
}

TEST_CASE("nested and plug-in probability rules mostly agree near the boundary") {
    DecisionRuleSpec plug;
    plug.kind = RuleKind::probability;
    DecisionRuleSpec nested = plug;
    nested.prob_method = ProbabilityMethod::nested_monte_carlo;
    nested.inner_reps = 5000;

    const std::size_t n = 64;
    const double boundary = 1.33 + normal_quantile(0.95) * sigma_c_closed_form(1.6) / std::sqrt(64.0);
    Rng rng(404);
    int agree = 0;
    for (int i = 0; i < 50; ++i) {
        const double c = boundary + 0.4 * (rng.uniform_open() - 0.5);
        const auto est = upper_active(c);
        const SampleSummary s{n, 0.0, 1.0};
        agree += decide_probability(s, est, plug, SeedPath(1)).accept ==
                 decide_probability(s, est, nested, SeedPath(77, {static_cast<std::uint64_t>(i)})).accept;
    }
    CHECK(agree >= 45);
}

TEST_CASE("every rule is monotone in the estimate") {
    for (RuleKind kind : {RuleKind::deterministic, RuleKind::margin, RuleKind::lcb, RuleKind::probability}) {
        DecisionRuleSpec rule;
        rule.kind = kind;
        const auto cal = margin_for(rule, 32);
        bool seen_accept = false;
        for (double c = 0.8; c < 2.2; c += 0.003) {
            const bool a = decide(rule, summary_of(32), upper_active(c), cal, SeedPath(0)).accept;
            if (seen_accept) CHECK(a);
            seen_accept = seen_accept || a;
        }
        CHECK(seen_accept);
    }
}

TEST_CASE("conservative rules imply deterministic acceptance") {
    DecisionRuleSpec margin_rule;
    margin_rule.kind = RuleKind::margin;
    Rng rng(5);
    for (int i = 0; i < 300; ++i) {
        const double c = 0.8 + 1.2 * rng.uniform_open();
        const double alpha = 0.01 + 0.48 * rng.uniform_open();
        const std::size_t n = 2 + rng.below(500);
        const auto est = upper_active(c);
        const bool det = decide_deterministic(est, 1.33).accept;
        if (decide_lcb(summary_of(n), est, 1.33, alpha).accept) CHECK(det);
        margin_rule.alpha = alpha;
        if (decide_margin(est, margin_for(margin_rule, n)).accept) CHECK(det);
    }
}

TEST_CASE("rule spec validation and parsing") {
    DecisionRuleSpec rule;
    rule.c0 = 0.0;
    CHECK_THROWS_AS(validate(rule), ValidationError);
    rule.c0 = 1.33;
    rule.alpha = 1.0;
    CHECK_THROWS_AS(validate(rule), ValidationError);
    rule.alpha = 0.05;
    rule.p_min = 0.0;
    CHECK_THROWS_AS(validate(rule), ValidationError);
    CHECK(parse_rule_kind("lcb") == RuleKind::lcb);
    CHECK(parse_probability_method("nested") == ProbabilityMethod::nested_monte_carlo);
    CHECK_THROWS_AS(parse_rule_kind("bayes"), ValidationError);
}

TEST_CASE("margin_for uses the closed form at c0 unless overridden") {
    DecisionRuleSpec rule;
    rule.kind = RuleKind::margin;
    CHECK(margin_for(rule, 32).sigma_c == sigma_c_closed_form(1.33));
    rule.margin_sigma_c = 1.0;
    CHECK(std::fabs(margin_for(rule, 32).adjusted_threshold - 1.6208) < 1e-4);
}
