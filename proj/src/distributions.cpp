#include "capgate/distributions.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "capgate/errors.hpp"

namespace capgate {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

template <std::size_t N>
double horner(const double (&c)[N], double x) noexcept {
    double acc = c[N - 1];
    for (std::size_t i = N - 1; i-- > 0;) acc = acc * x + c[i];
    return acc;
}

// Wichura (1988), Algorithm AS241, PPND16. Coefficients in ascending order.
constexpr double kA[] = {3.3871328727963666080e0,  1.3314166789178437745e+2,
                         1.9715909503065514427e+3, 1.3731693765509461125e+4,
                         4.5921953931549871457e+4, 6.7265770927008700853e+4,
                         3.3430575583588128105e+4, 2.5090809287301226727e+3};
constexpr double kB[] = {1.0,
                         4.2313330701600911252e+1, 6.8718700749205790830e+2,
                         5.3941960214247511077e+3, 2.1213794301586595867e+4,
                         3.9307895800092710610e+4, 2.8729085735721942674e+4,
                         5.2264952788528545610e+3};
constexpr double kC[] = {1.42343711074968357734e0,  4.63033784615654529590e0,
                         5.76949722146069140550e0,  3.64784832476320460504e0,
                         1.27045825245236838258e0,  2.41780725177450611770e-1,
                         2.27238449892691845833e-2, 7.74545014278341407640e-4};
constexpr double kD[] = {1.0,
                         2.05319162663775882187e0,  1.67638483018380384940e0,
                         6.89767334985100004550e-1, 1.48103976427480074590e-1,
                         1.51986665636164571966e-2, 5.47593808499534494600e-4,
                         1.05075007164441684324e-9};
constexpr double kE[] = {6.65790464350110377720e0,  5.46378491116411436990e0,
                         1.78482653991729133580e0,  2.96560571828504891230e-1,
                         2.65321895265761230930e-2, 1.24266094738807843860e-3,
                         2.71155556874348757815e-5, 2.01033439929228813265e-7};
constexpr double kF[] = {1.0,
                         5.99832206555887937690e-1, 1.36929880922735805310e-1,
                         1.48753612908506148525e-2, 7.86869131145613259100e-4,
                         1.84631831751005468180e-5, 1.42151175831644588870e-7,
                         2.04426310338993978564e-15};

}  // namespace

double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x * kInvSqrt2); }

double normal_sf(double x) noexcept { return 0.5 * std::erfc(x * kInvSqrt2); }

double normal_pdf(double x) noexcept { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double detail::ppnd16(double p) noexcept {
    const double q = p - 0.5;
    if (std::fabs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q * horner(kA, r) / horner(kB, r);
    }
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = horner(kC, r) / horner(kD, r);
    } else {
        r -= 5.0;
        val = horner(kE, r) / horner(kF, r);
    }
    return q < 0.0 ? -val : val;
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw ValidationError("normal_quantile: p must lie in (0, 1), got " + std::to_string(p));
    }
    double x = detail::ppnd16(p);
    // Newton on whichever tail keeps the residual well conditioned.
    const double dens = normal_pdf(x);
    if (dens > 0.0) {
        const double resid = p < 0.5 ? normal_cdf(x) - p : (1.0 - p) - normal_sf(x);
        x -= resid / dens;
    }
    return x;
}

std::string_view to_string(Family f) noexcept {
    switch (f) {
        case Family::normal: return "normal";
        case Family::shifted_lognormal: return "shifted_lognormal";
    }
    return "unknown";
}

Family parse_family(std::string_view s) {
    if (s == "normal") return Family::normal;
    if (s == "shifted_lognormal" || s == "lognormal") return Family::shifted_lognormal;
    throw ValidationError("unknown process family '" + std::string(s) + "'");
}

Family family_of(const ProcessModel& model) noexcept {
    return std::holds_alternative<NormalModel>(model) ? Family::normal
                                                      : Family::shifted_lognormal;
}

void validate(const ProcessModel& model) {
    if (const auto* m = std::get_if<NormalModel>(&model)) {
        if (!std::isfinite(m->mu) || !std::isfinite(m->sigma)) {
            throw ValidationError("normal model: parameters must be finite");
        }
        if (!(m->sigma > 0.0)) throw ValidationError("normal model: sigma must be > 0");
        return;
    }
    const auto& m = std::get<ShiftedLognormalModel>(model);
    if (!std::isfinite(m.shift) || !std::isfinite(m.log_mu) || !std::isfinite(m.log_sigma)) {
        throw ValidationError("shifted lognormal model: parameters must be finite");
    }
    if (!(m.log_sigma > 0.0)) {
        throw ValidationError("shifted lognormal model: log_sigma must be > 0");
    }
}

double model_quantile(const ProcessModel& model, double p) {
    const double z = normal_quantile(p);
    if (const auto* m = std::get_if<NormalModel>(&model)) return m->mu + m->sigma * z;
    const auto& m = std::get<ShiftedLognormalModel>(model);
    return m.shift + std::exp(m.log_mu + m.log_sigma * z);
}

double model_median(const ProcessModel& model) {
    if (const auto* m = std::get_if<NormalModel>(&model)) return m->mu;
    const auto& m = std::get<ShiftedLognormalModel>(model);
    return m.shift + std::exp(m.log_mu);
}

void sample_into(const ProcessModel& model, std::span<double> out, Rng& rng) noexcept {
    if (const auto* m = std::get_if<NormalModel>(&model)) {
        for (double& x : out) x = m->mu + m->sigma * detail::ppnd16(rng.uniform_open());
        return;
    }
    const auto& m = std::get<ShiftedLognormalModel>(model);
    for (double& x : out) {
        x = m.shift + std::exp(m.log_mu + m.log_sigma * detail::ppnd16(rng.uniform_open()));
    }
}

std::vector<double> sample(const ProcessModel& model, std::size_t n, const SeedPath& seed) {
    if (n < 2) throw ValidationError("sample: n must be >= 2");
    validate(model);
    std::vector<double> out(n);
    Rng rng = seed.generator();
    sample_into(model, out, rng);
    return out;
}

}  // namespace capgate
