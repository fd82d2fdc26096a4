#include "capgate/decision_rules.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace capgate {

std::string_view to_string(RuleKind kind) noexcept {
    switch (kind) {
        case RuleKind::deterministic: return "deterministic";
        case RuleKind::margin: return "margin";
        case RuleKind::lcb: return "lcb";
        case RuleKind::probability: return "probability";
    }
    return "unknown";
}

RuleKind parse_rule_kind(std::string_view s) {
    if (s == "deterministic") return RuleKind::deterministic;
    if (s == "margin") return RuleKind::margin;
    if (s == "lcb") return RuleKind::lcb;
    if (s == "probability") return RuleKind::probability;
    throw ValidationError("unknown decision rule '" + std::string(s) + "'");
}

std::string_view to_string(ProbabilityMethod method) noexcept {
    return method == ProbabilityMethod::plug_in_asymptotic ? "plug_in_asymptotic"
                                                           : "nested_monte_carlo";
}

ProbabilityMethod parse_probability_method(std::string_view s) {
    if (s == "plug_in_asymptotic" || s == "plug-in") return ProbabilityMethod::plug_in_asymptotic;
    if (s == "nested_monte_carlo" || s == "nested") return ProbabilityMethod::nested_monte_carlo;
    throw ValidationError("unknown probability method '" + std::string(s) + "'");
}

void validate(const DecisionRuleSpec& rule) {
    if (!(rule.c0 > 0.0) || !std::isfinite(rule.c0)) throw ValidationError("rule: c0 must be > 0");
    if (!(rule.alpha > 0.0 && rule.alpha < 1.0)) throw ValidationError("rule: alpha must lie in (0, 1)");
    if (!(rule.p_min > 0.0 && rule.p_min < 1.0)) throw ValidationError("rule: p_min must lie in (0, 1)");
    if (rule.kind == RuleKind::probability &&
        rule.prob_method == ProbabilityMethod::nested_monte_carlo &&
        rule.inner_reps < kMinInnerReps) {
        throw ValidationError("rule: nested Monte Carlo needs inner_reps >= " +
                              std::to_string(kMinInnerReps));
    }
}

Decision decide_deterministic(const CapabilityEstimate& est, double c0) noexcept {
    return {est.cpk >= c0, est.cpk, c0};
}

Decision decide_margin(const CapabilityEstimate& est, const MarginCalibration& cal) noexcept {
    return {est.cpk >= cal.adjusted_threshold, est.cpk, cal.adjusted_threshold};
}

Decision decide_lcb(const SampleSummary& summary, const CapabilityEstimate& est, double c0,
                    double alpha) {
    if (summary.n < 2) throw ValidationError("decide_lcb: n must be >= 2");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("decide_lcb: alpha must lie in (0, 1)");
    const double half_width = normal_quantile(1.0 - alpha) * sigma_c_for(est) /
                              std::sqrt(static_cast<double>(summary.n));
    const double lcb = est.cpk - half_width;
    return {lcb >= c0, lcb, c0};
}

namespace {

// Fraction of `reps` standard-normal samples of size n whose plug-in index,
// against limits rescaled to the unit model, reaches c0. C^pk is affine
// invariant, so N(mean, sd) with the original limits is equivalent.
double nested_acceptance(const CapabilityEstimate& est, std::size_t n, double c0,
                         std::size_t reps, const SeedPath& seed) {
    const SpecLimits unit{std::isfinite(est.cpl) ? -3.0 * est.cpl : -kInf,
                          std::isfinite(est.cpu) ? 3.0 * est.cpu : kInf};
    const ProcessModel model = NormalModel{0.0, 1.0};
    std::vector<double> buf(n);
    const std::uint64_t key = seed.key();
    std::size_t accepted = 0;
    for (std::size_t b = 0; b < reps; ++b) {
        Rng rng(derive_key(key, b));
        SampleSummary s;
        do {
            sample_into(model, buf, rng);
            s = summarize(buf);
        } while (!(s.sd > 0.0));
        if (cpk_from_summary(s, unit).cpk >= c0) ++accepted;
    }
    return static_cast<double>(accepted) / static_cast<double>(reps);
}

}  // namespace

Decision decide_probability(const SampleSummary& summary, const CapabilityEstimate& est,
                            const DecisionRuleSpec& rule, const SeedPath& seed) {
    if (rule.kind != RuleKind::probability) {
        throw ValidationError("decide_probability: rule kind must be 'probability'");
    }
    validate(rule);
    if (summary.n < 2) throw ValidationError("decide_probability: n must be >= 2");
    double prob;
    if (rule.prob_method == ProbabilityMethod::plug_in_asymptotic) {
        prob = acceptance_prob_asymptotic(est.cpk, rule.c0, summary.n, sigma_c_for(est));
    } else {
        prob = nested_acceptance(est, summary.n, rule.c0, rule.inner_reps, seed);
    }
    return {prob >= rule.p_min, prob, rule.p_min};
}

MarginCalibration margin_for(const DecisionRuleSpec& rule, std::size_t n) {
    const double sigma_c =
        rule.margin_sigma_c > 0.0 ? rule.margin_sigma_c : sigma_c_closed_form(rule.c0);
    return calibrate_margin(rule.c0, n, sigma_c, rule.alpha);
}

Decision decide(const DecisionRuleSpec& rule, const SampleSummary& summary,
                const CapabilityEstimate& est, const MarginCalibration& margin,
                const SeedPath& seed) {
    switch (rule.kind) {
        case RuleKind::deterministic: return decide_deterministic(est, rule.c0);
        case RuleKind::margin: return decide_margin(est, margin);
        case RuleKind::lcb: return decide_lcb(summary, est, rule.c0, rule.alpha);
        case RuleKind::probability: return decide_probability(summary, est, rule, seed);
    }
    throw ValidationError("decide: unknown rule kind");
}

}  // namespace capgate
