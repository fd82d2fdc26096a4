#pragma once
// Standard normal Φ / Φ⁻¹ and the two process families used for simulation.

#include <cstddef>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "capgate/rng.hpp"

namespace capgate {

// Φ(x). Absolute error well below 1e-12 on finite inputs.
double normal_cdf(double x) noexcept;

// 1 - Φ(x), accurate in the upper tail.
double normal_sf(double x) noexcept;

// Standard normal density.
double normal_pdf(double x) noexcept;

// Φ⁻¹(p) for 0 < p < 1. Wichura's AS241 rational approximation followed by
// one Newton step on Φ. Throws ValidationError outside (0, 1).
double normal_quantile(double p);

namespace detail {
// Raw AS241 (PPND16) without refinement; relative accuracy about 1e-16.
// Used by the sampling kernels. p must lie in (0, 1).
double ppnd16(double p) noexcept;
}  // namespace detail

enum class Family { normal, shifted_lognormal };

std::string_view to_string(Family f) noexcept;
Family parse_family(std::string_view s);

struct NormalModel {
    double mu = 0.0;
    double sigma = 1.0;
};

// X = shift + exp(log_mu + log_sigma * Z), support (shift, inf).
struct ShiftedLognormalModel {
    double shift = 0.0;
    double log_mu = 0.0;
    double log_sigma = 1.0;
};

using ProcessModel = std::variant<NormalModel, ShiftedLognormalModel>;

Family family_of(const ProcessModel& model) noexcept;

// Throws ValidationError on sigma <= 0, log_sigma <= 0 or non-finite parameters.
void validate(const ProcessModel& model);

// Exact population quantile of the model at probability p.
double model_quantile(const ProcessModel& model, double p);

// Median of the model (exact).
double model_median(const ProcessModel& model);

// Fills `out` with i.i.d. draws using one uniform per variate (inverse CDF).
// Model must already be validated.
void sample_into(const ProcessModel& model, std::span<double> out, Rng& rng) noexcept;

// n i.i.d. draws; bit-identical for identical (model, n, seed). n >= 2.
std::vector<double> sample(const ProcessModel& model, std::size_t n, const SeedPath& seed);

}  // namespace capgate
