#pragma once
// Normal-theory asymptotics of the plug-in C_pk under a uniquely active
// specification side: the sqrt(n)-scale dispersion sigma_C, limiting
// acceptance probabilities, instability bands and guard-band calibration.
//
// Every function that needs sigma_C takes it as an argument, so the closed
// form and a Monte Carlo estimate (simulation.hpp) are interchangeable.

#include <cstddef>

#include "capgate/capability.hpp"

namespace capgate {

// sqrt(1/9 + cpk^2 / 2). Caller asserts a uniquely active side.
double sigma_c_closed_form(double cpk_true);

// Closed-form sigma_C at an estimate; throws ValidationError on tied sides,
// where the delta method does not apply.
double sigma_c_for(const CapabilityEstimate& est);

// Phi(sqrt(n) (cpk_true - c0) / sigma_c).
double acceptance_prob_asymptotic(double cpk_true, double c0, std::size_t n, double sigma_c);

// Limit of the acceptance probability when cpk_true = c0 + h / sqrt(n).
double local_limit(double h, double sigma_c);

// sqrt(n) (cpk_true - c0) / sigma_c.
double signal_to_noise(double cpk_true, double c0, std::size_t n, double sigma_c);

struct InstabilityBand {
    double epsilon = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double width = 0.0;
};

// True capabilities whose limiting acceptance probability is within epsilon of 1/2.
InstabilityBand instability_band(double c0, std::size_t n, double sigma_c, double epsilon);

struct MarginCalibration {
    double c0 = 0.0;
    double alpha = 0.0;
    double sigma_c = 0.0;
    std::size_t n = 0;
    double kappa = 0.0;   // sigma_c * Phi^-1(1 - alpha)
    double margin = 0.0;  // kappa / sqrt(n)
    double adjusted_threshold = 0.0;
};

// Guard band making the asymptotic boundary acceptance probability alpha.
MarginCalibration calibrate_margin(double c0, std::size_t n, double sigma_c, double alpha);

// sigma_C(cpk_true) / sqrt(n): approximate standard deviation of the estimator.
double estimator_sd_approx(double cpk_true, std::size_t n);

}  // namespace capgate
