#pragma once
// Approval rules applied to one sample's capability estimate.
//
//   deterministic  accept iff C^pk >= c0
//   margin         accept iff C^pk >= c0 + kappa / sqrt(n)
//   lcb            accept iff C^pk - z_{1-alpha} sigma_C(C^pk) / sqrt(n) >= c0
//   probability    accept iff Pr(C^pk >= c0 | plug-in model) >= p_min
//
// All comparisons are ">=" with no epsilon: an estimate exactly on the
// cutoff is accepted.

#include <cstddef>
#include <string_view>

#include "capgate/asymptotics.hpp"
#include "capgate/capability.hpp"
#include "capgate/rng.hpp"

namespace capgate {

enum class RuleKind { deterministic, margin, lcb, probability };
enum class ProbabilityMethod { plug_in_asymptotic, nested_monte_carlo };

std::string_view to_string(RuleKind kind) noexcept;
RuleKind parse_rule_kind(std::string_view s);
std::string_view to_string(ProbabilityMethod method) noexcept;
ProbabilityMethod parse_probability_method(std::string_view s);

inline constexpr std::size_t kMinInnerReps = 100;

struct DecisionRuleSpec {
    RuleKind kind = RuleKind::deterministic;
    double c0 = 1.33;
    double alpha = 0.05;  // margin and lcb
    double p_min = 0.95;  // probability
    ProbabilityMethod prob_method = ProbabilityMethod::plug_in_asymptotic;
    std::size_t inner_reps = 2000;  // nested_monte_carlo only
    // sigma_C used to size the margin rule's guard band; <= 0 selects the
    // closed form evaluated at c0.
    double margin_sigma_c = 0.0;
};

void validate(const DecisionRuleSpec& rule);

struct Decision {
    bool accept = false;
    double statistic = 0.0;
    double cutoff = 0.0;
};

Decision decide_deterministic(const CapabilityEstimate& est, double c0) noexcept;

Decision decide_margin(const CapabilityEstimate& est, const MarginCalibration& cal) noexcept;

// Delta-method normal-approximation lower confidence bound. Throws on tied sides.
Decision decide_lcb(const SampleSummary& summary, const CapabilityEstimate& est, double c0,
                    double alpha);

// Estimated probability that a fresh sample of the same size, drawn from the
// plug-in normal model N(mean, sd), clears c0. The plug-in method uses the
// asymptotic formula (throws on tied sides); the nested method simulates
// rule.inner_reps samples from a stream derived from `seed`.
Decision decide_probability(const SampleSummary& summary, const CapabilityEstimate& est,
                            const DecisionRuleSpec& rule, const SeedPath& seed);

// Guard band the margin rule uses at sample size n.
MarginCalibration margin_for(const DecisionRuleSpec& rule, std::size_t n);

// Dispatches on rule.kind. `margin` must come from margin_for(rule, summary.n)
// when rule.kind == margin and is ignored otherwise.
Decision decide(const DecisionRuleSpec& rule, const SampleSummary& summary,
                const CapabilityEstimate& est, const MarginCalibration& margin,
                const SeedPath& seed);

}  // namespace capgate
