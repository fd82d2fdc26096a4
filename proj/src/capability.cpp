#include "capgate/capability.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace capgate {

namespace {

ActiveSide classify(double cpu, double cpl) noexcept {
    if (std::fabs(cpu - cpl) <= kTieTolerance) return ActiveSide::tied;
    return cpu < cpl ? ActiveSide::upper : ActiveSide::lower;
}

CapabilityEstimate make_estimate(double cpu, double cpl) noexcept {
    return {cpu, cpl, std::min(cpu, cpl), classify(cpu, cpl)};
}

}  // namespace

SpecLimits SpecLimits::make(double lsl, double usl) {
    SpecLimits spec{lsl, usl};
    validate(spec);
    return spec;
}

bool SpecLimits::bilateral() const noexcept { return std::isfinite(lsl) && std::isfinite(usl); }

void validate(const SpecLimits& spec) {
    if (std::isnan(spec.lsl) || std::isnan(spec.usl)) {
        throw ValidationError("spec limits must not be NaN");
    }
    if (!(spec.lsl < spec.usl)) {
        throw ValidationError("spec limits require lsl < usl (lsl=" + std::to_string(spec.lsl) +
                              ", usl=" + std::to_string(spec.usl) + ")");
    }
    if (!std::isfinite(spec.lsl) && !std::isfinite(spec.usl)) {
        throw ValidationError("at least one spec limit must be finite");
    }
    if (spec.lsl == kInf || spec.usl == -kInf) {
        throw ValidationError("spec limits point the wrong way");
    }
}

std::string_view to_string(ActiveSide side) noexcept {
    switch (side) {
        case ActiveSide::upper: return "upper";
        case ActiveSide::lower: return "lower";
        case ActiveSide::tied: return "tied";
    }
    return "unknown";
}

CapabilityEstimate cpk_point(double mu, double sigma, const SpecLimits& spec) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw ValidationError("cpk_point: sigma must be finite and > 0");
    }
    if (!std::isfinite(mu)) throw ValidationError("cpk_point: mu must be finite");
    validate(spec);
    const double cpu = std::isfinite(spec.usl) ? (spec.usl - mu) / (3.0 * sigma) : kInf;
    const double cpl = std::isfinite(spec.lsl) ? (mu - spec.lsl) / (3.0 * sigma) : kInf;
    return make_estimate(cpu, cpl);
}

SampleSummary summarize(std::span<const double> xs) {
    if (xs.size() < 2) throw ValidationError("at least two measurements are required");
    double sum = 0.0;
    for (double x : xs) sum += x;
    const double n = static_cast<double>(xs.size());
    const double mean = sum / n;
    double ss = 0.0;
    for (double x : xs) {
        const double d = x - mean;
        ss += d * d;
    }
    return {xs.size(), mean, std::sqrt(ss / (n - 1.0))};
}

CapabilityEstimate cpk_from_summary(const SampleSummary& s, const SpecLimits& spec) noexcept {
    const double denom = 3.0 * s.sd;
    const double cpu = std::isfinite(spec.usl) ? (spec.usl - s.mean) / denom : kInf;
    const double cpl = std::isfinite(spec.lsl) ? (s.mean - spec.lsl) / denom : kInf;
    return make_estimate(cpu, cpl);
}

CpkEstimate estimate_cpk(std::span<const double> measurements, const SpecLimits& spec) {
    validate(spec);
    const SampleSummary s = summarize(measurements);
    if (!(s.sd > 0.0)) throw DegenerateSampleError("zero sample variance: all measurements identical");
    return {s, cpk_from_summary(s, spec)};
}

double cnpk_point(const QuantileTriple& q, const SpecLimits& spec) {
    validate(spec);
    if (!(q.p00135 <= q.p50 && q.p50 <= q.p99865)) {
        throw ValidationError("cnpk_point: quantiles must satisfy p00135 < p50 < p99865");
    }
    const double upper_spread = q.p99865 - q.p50;
    const double lower_spread = q.p50 - q.p00135;
    if (!(upper_spread > 0.0) || !(lower_spread > 0.0)) {
        throw DegenerateSampleError("cnpk: degenerate quantile spread");
    }
    const double upper = std::isfinite(spec.usl) ? (spec.usl - q.p50) / upper_spread : kInf;
    const double lower = std::isfinite(spec.lsl) ? (q.p50 - spec.lsl) / lower_spread : kInf;
    return std::min(upper, lower);
}

bool cnpk_tail_extrapolated(std::size_t n) noexcept {
    return static_cast<double>(n) * kLowerTailProb < 1.0;
}

double empirical_quantile(std::span<const double> sorted, double p) noexcept {
    const auto n = static_cast<double>(sorted.size());
    const double h = (n + 1.0 / 3.0) * p + 1.0 / 3.0;  // 1-based position
    if (h <= 1.0) return sorted.front();
    if (h >= n) return sorted.back();
    const double lo = std::floor(h);
    const auto i = static_cast<std::size_t>(lo) - 1;
    return sorted[i] + (h - lo) * (sorted[i + 1] - sorted[i]);
}

QuantileTriple empirical_quantiles(std::span<const double> sorted) noexcept {
    return {empirical_quantile(sorted, kLowerTailProb), empirical_quantile(sorted, 0.5),
            empirical_quantile(sorted, kUpperTailProb)};
}

double cnpk_from_sorted(std::span<const double> sorted, const SpecLimits& spec) {
    return cnpk_point(empirical_quantiles(sorted), spec);
}

double estimate_cnpk(std::span<const double> measurements, const SpecLimits& spec) {
    if (measurements.size() < kMinCnpkSampleSize) {
        throw ValidationError("estimate_cnpk: at least " + std::to_string(kMinCnpkSampleSize) +
                              " measurements are required");
    }
    std::vector<double> sorted(measurements.begin(), measurements.end());
    std::sort(sorted.begin(), sorted.end());
    return cnpk_from_sorted(sorted, spec);
}

QuantileTriple exact_quantiles(const ProcessModel& model) {
    validate(model);
    return {model_quantile(model, kLowerTailProb), model_median(model),
            model_quantile(model, kUpperTailProb)};
}

std::string_view to_string(CalibrationMode mode) noexcept {
    return mode == CalibrationMode::one_sided ? "one_sided" : "centered";
}

CalibrationMode parse_calibration_mode(std::string_view s) {
    if (s == "one_sided") return CalibrationMode::one_sided;
    if (s == "centered") return CalibrationMode::centered;
    throw ValidationError("unknown calibration mode '" + std::string(s) + "'");
}

CalibratedProcess calibrate_model(double target_cpk, CalibrationMode mode, Family family,
                                  double log_sigma) {
    if (!(target_cpk > 0.0) || !std::isfinite(target_cpk)) {
        throw ValidationError("calibrate_model: target capability must be finite and > 0");
    }
    const bool one_sided = mode == CalibrationMode::one_sided;

    if (family == Family::normal) {
        CalibratedProcess out{NormalModel{0.0, 1.0},
                              SpecLimits{one_sided ? -kInf : -3.0 * target_cpk, 3.0 * target_cpk}};
        const double achieved = cpk_point(0.0, 1.0, out.spec).cpk;
        if (std::fabs(achieved - target_cpk) > 1e-12 * std::max(1.0, target_cpk)) {
            throw ComputationError("calibrate_model: normal calibration missed its target");
        }
        return out;
    }

    if (!(log_sigma > 0.0) || !std::isfinite(log_sigma)) {
        throw ValidationError("calibrate_model: log_sigma must be finite and > 0");
    }
    const ProcessModel model = ShiftedLognormalModel{0.0, 0.0, log_sigma};
    const QuantileTriple q = exact_quantiles(model);
    const double usl = q.p50 + target_cpk * (q.p99865 - q.p50);
    const double lower_ratio = one_sided ? 3.0 * target_cpk : target_cpk;
    const double lsl = q.p50 - lower_ratio * (q.p50 - q.p00135);
    CalibratedProcess out{model, SpecLimits{lsl, usl}};
    validate(out.spec);
    const double achieved = cnpk_point(q, out.spec);
    if (!std::isfinite(achieved) ||
        std::fabs(achieved - target_cpk) > 1e-12 * std::max(1.0, target_cpk)) {
        throw ComputationError("calibrate_model: lognormal calibration missed its target");
    }
    return out;
}

}  // namespace capgate
