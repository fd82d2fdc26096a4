#pragma once
// Capability indices: the classical C_pk, the percentile-based C_Npk, their
// plug-in estimators, and calibration of process models to a target index.

#include <cstddef>
#include <limits>
#include <span>
#include <string_view>

#include "capgate/distributions.hpp"
#include "capgate/errors.hpp"

namespace capgate {

// Thrown when a sample carries no spread information (zero variance, or a
// collapsed quantile spread). Simulation and bootstrap code retry on it.
class DegenerateSampleError : public ComputationError {
public:
    using ComputationError::ComputationError;
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// |cpu - cpl| at or below this flags the non-differentiable (tied) case.
inline constexpr double kTieTolerance = 1e-9;

// Unilateral specifications use an infinite limit on the open side.
struct SpecLimits {
    double lsl = -kInf;
    double usl = kInf;

    // Validating constructor: lsl < usl, at least one finite, no NaN.
    static SpecLimits make(double lsl, double usl);

    [[nodiscard]] bool bilateral() const noexcept;
    bool operator==(const SpecLimits&) const = default;
};

void validate(const SpecLimits& spec);

struct SampleSummary {
    std::size_t n = 0;
    double mean = 0.0;
    double sd = 0.0;  // n - 1 denominator
};

enum class ActiveSide { upper, lower, tied };

std::string_view to_string(ActiveSide side) noexcept;

struct CapabilityEstimate {
    double cpu = 0.0;
    double cpl = 0.0;
    double cpk = 0.0;
    ActiveSide active_side = ActiveSide::tied;
};

struct QuantileTriple {
    double p00135 = 0.0;
    double p50 = 0.0;
    double p99865 = 0.0;
};

// Tail probabilities of the percentile index: Φ(-3) and Φ(3), conventionally
// rounded to 0.135% and 99.865%. Using the exact three-sigma masses makes
// C_Npk on exact normal quantiles coincide with C_pk.
inline constexpr double kLowerTailProb = 0.0013498980316300946;
inline constexpr double kUpperTailProb = 0.9986501019683699;

// Population index from (mu, sigma). Throws ValidationError on sigma <= 0.
CapabilityEstimate cpk_point(double mu, double sigma, const SpecLimits& spec);

// Mean and overall sample sd (two-pass). Throws ValidationError for n < 2.
SampleSummary summarize(std::span<const double> xs);

// Index from a summary; the summary must have sd > 0.
CapabilityEstimate cpk_from_summary(const SampleSummary& s, const SpecLimits& spec) noexcept;

struct CpkEstimate {
    SampleSummary summary;
    CapabilityEstimate estimate;
};

// Plug-in estimate. Throws ValidationError for n < 2 and DegenerateSampleError
// for zero sample variance.
CpkEstimate estimate_cpk(std::span<const double> measurements, const SpecLimits& spec);

// Percentile-based index. Infinite limits contribute +inf to the minimum,
// as for cpk_point. Throws DegenerateSampleError on a non-positive spread and
// ValidationError when the quantiles are out of order.
double cnpk_point(const QuantileTriple& q, const SpecLimits& spec);

inline constexpr std::size_t kMinCnpkSampleSize = 20;

// True when the 0.135% / 99.865% quantiles fall outside the observed order
// statistics, i.e. the tail quantile estimates are clamped to the extremes.
bool cnpk_tail_extrapolated(std::size_t n) noexcept;

// Hyndman-Fan type 8 (approximately median-unbiased) sample quantile: linear
// interpolation between order statistics at position (n + 1/3) p + 1/3,
// clamped to [x(1), x(n)]. `sorted` must be ascending and nonempty.
double empirical_quantile(std::span<const double> sorted, double p) noexcept;

QuantileTriple empirical_quantiles(std::span<const double> sorted) noexcept;

// C_Npk from an ascending sample (no size check).
double cnpk_from_sorted(std::span<const double> sorted, const SpecLimits& spec);

// Plug-in C_Npk. Requires n >= kMinCnpkSampleSize.
double estimate_cnpk(std::span<const double> measurements, const SpecLimits& spec);

QuantileTriple exact_quantiles(const ProcessModel& model);

enum class CalibrationMode { one_sided, centered };

std::string_view to_string(CalibrationMode mode) noexcept;
CalibrationMode parse_calibration_mode(std::string_view s);

struct CalibratedProcess {
    ProcessModel model;
    SpecLimits spec;
};

inline constexpr double kDefaultLogSigma = 0.25;

// Builds a (model, spec) pair whose true index equals target_cpk: C_pk for the
// normal family, C_Npk on exact quantiles for the shifted lognormal family.
//
// one_sided: upper side uniquely active. Normal uses mu = 0, sigma = 1,
//   USL = 3 target, LSL = -inf. Lognormal (shift 0, log_mu 0) places the
//   lower limit so the lower ratio is three times the target.
// centered: both sides tie (the non-regular case).
//
// Throws ValidationError for target <= 0 and ComputationError if the result
// does not reproduce the target to 1e-12.
CalibratedProcess calibrate_model(double target_cpk, CalibrationMode mode, Family family,
                                  double log_sigma = kDefaultLogSigma);

}  // namespace capgate
