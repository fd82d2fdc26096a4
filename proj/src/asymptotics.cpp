#include "capgate/asymptotics.hpp"

#include <cmath>
#include <string>

namespace capgate {

namespace {

void require_n(std::size_t n, const char* where) {
    if (n < 1) throw ValidationError(std::string(where) + ": n must be >= 1");
}

void require_sigma_c(double sigma_c, const char* where) {
    if (!(sigma_c > 0.0) || !std::isfinite(sigma_c)) {
        throw ValidationError(std::string(where) + ": sigma_c must be finite and > 0");
    }
}

}  // namespace

double sigma_c_closed_form(double cpk_true) {
    if (!(cpk_true >= 0.0) || !std::isfinite(cpk_true)) {
        throw ValidationError("sigma_c_closed_form: capability must be finite and >= 0");
    }
    return std::sqrt(1.0 / 9.0 + 0.5 * cpk_true * cpk_true);
}

double sigma_c_for(const CapabilityEstimate& est) {
    if (est.active_side == ActiveSide::tied) {
        throw ValidationError(
            "tied specification sides (cpu == cpl): closed-form sigma_C requires a uniquely "
            "active side");
    }
    // The delta-method derivation holds for either sign of the index.
    return std::sqrt(1.0 / 9.0 + 0.5 * est.cpk * est.cpk);
}

double signal_to_noise(double cpk_true, double c0, std::size_t n, double sigma_c) {
    require_n(n, "signal_to_noise");
    require_sigma_c(sigma_c, "signal_to_noise");
    return std::sqrt(static_cast<double>(n)) * (cpk_true - c0) / sigma_c;
}

double acceptance_prob_asymptotic(double cpk_true, double c0, std::size_t n, double sigma_c) {
    return normal_cdf(signal_to_noise(cpk_true, c0, n, sigma_c));
}

double local_limit(double h, double sigma_c) {
    require_sigma_c(sigma_c, "local_limit");
    return normal_cdf(h / sigma_c);
}

InstabilityBand instability_band(double c0, std::size_t n, double sigma_c, double epsilon) {
    require_n(n, "instability_band");
    require_sigma_c(sigma_c, "instability_band");
    if (!(epsilon > 0.0 && epsilon < 0.5)) {
        throw ValidationError("instability_band: epsilon must lie in (0, 0.5)");
    }
    const double half = sigma_c * normal_quantile(0.5 + epsilon) / std::sqrt(static_cast<double>(n));
    return {epsilon, c0 - half, c0 + half, 2.0 * half};
}

MarginCalibration calibrate_margin(double c0, std::size_t n, double sigma_c, double alpha) {
    require_n(n, "calibrate_margin");
    require_sigma_c(sigma_c, "calibrate_margin");
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw ValidationError("calibrate_margin: alpha must lie in (0, 1)");
    }
    MarginCalibration cal;
    cal.c0 = c0;
    cal.alpha = alpha;
    cal.sigma_c = sigma_c;
    cal.n = n;
    cal.kappa = sigma_c * normal_quantile(1.0 - alpha);
    cal.margin = cal.kappa / std::sqrt(static_cast<double>(n));
    cal.adjusted_threshold = c0 + cal.margin;
    return cal;
}

double estimator_sd_approx(double cpk_true, std::size_t n) {
    require_n(n, "estimator_sd_approx");
    return sigma_c_closed_form(cpk_true) / std::sqrt(static_cast<double>(n));
}

}  // namespace capgate
