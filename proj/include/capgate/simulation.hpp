#pragma once
// Monte Carlo engine for threshold decisions on estimated capability.
//
// Each experiment draws `reps` independent samples of size n from a process
// calibrated to a true capability, computes the estimator on each and counts
// how often the threshold rule accepts. Replicate b of an experiment seeded
// with path P draws from the stream derive_key(P.key(), b); grid cell
// (row, col) of a surface uses P.child(row).child(col). Results therefore
// depend only on inputs and seed, never on the thread count.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "capgate/capability.hpp"
#include "capgate/decision_rules.hpp"
#include "capgate/rng.hpp"

namespace capgate {

enum class EstimatorKind { cpk, cnpk };

std::string_view to_string(EstimatorKind kind) noexcept;
EstimatorKind parse_estimator(std::string_view s);

struct SimulationConfig {
    Family family = Family::normal;
    CalibrationMode calibration_mode = CalibrationMode::one_sided;
    EstimatorKind estimator = EstimatorKind::cpk;
    double log_sigma = kDefaultLogSigma;  // shifted lognormal only
};

inline constexpr std::size_t kMinMisclassReps = 1000;
inline constexpr std::size_t kMinMisclassSampleSize = 4;
inline constexpr std::size_t kMinDistributionReps = 10000;
inline constexpr std::size_t kMaxDegenerateRetries = 100;
inline constexpr std::size_t kDefaultPointReps = 100000;
inline constexpr std::size_t kDefaultCellReps = 20000;

enum class MisclassType { type1, type2 };

std::string_view to_string(MisclassType t) noexcept;

struct MisclassEstimate {
    double cpk_true = 0.0;
    std::size_t n = 0;
    std::size_t reps = 0;
    double p_accept = 0.0;
    double misclass = 0.0;  // p_accept below c0 (false accept), 1 - p_accept otherwise
    MisclassType misclass_type = MisclassType::type1;
    double mc_se = 0.0;  // sqrt(misclass (1 - misclass) / reps)
    std::size_t accepted = 0;
    std::size_t degenerate_retries = 0;
};

// Relabels an acceptance fraction as a misclassification probability.
MisclassEstimate make_misclass(double cpk_true, std::size_t n, double c0, std::size_t reps,
                               std::size_t accepted, std::size_t retries) noexcept;

MisclassEstimate estimate_misclass(double cpk_true, std::size_t n, double c0, std::size_t reps,
                                   const SimulationConfig& config, const SeedPath& seed,
                                   unsigned threads = 1);

// Estimator values for `reps` replicates (replicate order). Degenerate samples
// are redrawn from derived sub-streams; `retries` receives the count.
std::vector<double> simulate_estimates(double cpk_true, std::size_t n, std::size_t reps,
                                       const SimulationConfig& config, const SeedPath& seed,
                                       unsigned threads, std::size_t* retries = nullptr);

struct RiskSurface {
    double c0 = 0.0;
    std::vector<double> cpk_grid;
    std::vector<std::size_t> n_grid;
    std::vector<MisclassEstimate> cells;  // row-major: row = cpk index, column = n index
    SimulationConfig config;
    std::size_t reps = 0;
    SeedPath base_seed;

    [[nodiscard]] const MisclassEstimate& at(std::size_t row, std::size_t col) const {
        return cells.at(row * n_grid.size() + col);
    }
};

RiskSurface risk_surface(const std::vector<double>& cpk_grid, const std::vector<std::size_t>& n_grid,
                         double c0, std::size_t reps, const SimulationConfig& config,
                         const SeedPath& base_seed, unsigned threads = 1);

// Row index of the largest misclassification in each column (ties: first).
std::vector<std::size_t> ridge_rows(const RiskSurface& surface);

// Evenly spaced grid lo, lo + step, ..., up to hi (inclusive within step/1e6).
std::vector<double> linear_grid(double lo, double hi, double step);
std::vector<double> linspace(double lo, double hi, std::size_t points);

enum class SigmaCSource { closed_form, empirical };

std::string_view to_string(SigmaCSource s) noexcept;
SigmaCSource parse_sigma_c_source(std::string_view s);

// sd of sqrt(n) (C^ - cpk_true) over reps replicates.
double sigma_c_empirical(double cpk_true, std::size_t n, const SimulationConfig& config,
                         std::size_t reps, const SeedPath& seed, unsigned threads = 1);

struct CollapsePoint {
    double z = 0.0;
    std::size_t n = 0;
    double cpk_true = 0.0;
    double sigma_c = 0.0;
    double p_mc = 0.0;
    double phi_z = 0.0;
    double residual = 0.0;  // p_mc - phi_z
    double mc_se = 0.0;
};

struct CollapseSkip {
    double z = 0.0;
    std::size_t n = 0;
    double cpk_true = 0.0;
    std::string reason;
};

struct CollapseResult {
    std::vector<CollapsePoint> points;  // ordered by n, then z
    std::vector<CollapseSkip> skipped;
};

// For every (z, n): cpk_true = c0 + z sigma_C / sqrt(n), then Monte Carlo
// acceptance. The closed-form source is only valid for the one-sided normal
// C_pk configuration; the empirical source estimates sigma_C at c0 per n with
// `sigma_reps` replicates.
CollapseResult scaling_collapse(const std::vector<double>& z_grid,
                                const std::vector<std::size_t>& n_list, double c0,
                                std::size_t reps, SigmaCSource source,
                                const SimulationConfig& config, const SeedPath& base_seed,
                                unsigned threads = 1, std::size_t sigma_reps = kDefaultCellReps);

// max |residual| among points with the given n.
double max_abs_residual(const CollapseResult& result, std::size_t n);

struct SamplingDistribution {
    std::size_t n = 0;
    std::size_t reps = 0;
    std::vector<std::size_t> counts;  // shared binning, see SamplingDistributions
    double tail_below_c0 = 0.0;       // fraction of replicates with C^ < c0
    double mean = 0.0;
    double sd = 0.0;
    std::size_t degenerate_retries = 0;

    [[nodiscard]] double mass(std::size_t bin) const {
        return static_cast<double>(counts.at(bin)) / static_cast<double>(reps);
    }
};

struct SamplingDistributions {
    double cpk_true = 0.0;
    double c0 = 0.0;
    double bin_origin = 0.0;
    double bin_width = 0.0;
    std::vector<SamplingDistribution> per_n;

    [[nodiscard]] std::size_t bin_count() const {
        return per_n.empty() ? 0 : per_n.front().counts.size();
    }
};

inline constexpr std::size_t kMaxHistogramBins = 4096;

// Histograms share a Freedman-Diaconis width computed from the first n.
SamplingDistributions sampling_distribution(double cpk_true, const std::vector<std::size_t>& n_list,
                                            double c0, std::size_t reps,
                                            const SimulationConfig& config,
                                            const SeedPath& base_seed, unsigned threads = 1);

struct AcceptanceCell {
    double cpk_true = 0.0;
    std::size_t n = 0;
    std::size_t reps = 0;
    std::size_t accepted = 0;
    double p_accept = 0.0;
    double mc_se = 0.0;
    std::size_t degenerate_retries = 0;
};

struct AcceptanceSurface {
    DecisionRuleSpec rule;
    std::vector<double> cpk_grid;
    std::vector<std::size_t> n_grid;
    std::vector<AcceptanceCell> cells;  // row-major like RiskSurface
    SimulationConfig config;
    std::size_t reps = 0;
    SeedPath base_seed;

    [[nodiscard]] const AcceptanceCell& at(std::size_t row, std::size_t col) const {
        return cells.at(row * n_grid.size() + col);
    }
};

// Fraction of replicates each rule accepts, per (cpk_true, n). C_pk estimator only.
AcceptanceSurface rule_acceptance_surface(const DecisionRuleSpec& rule,
                                          const std::vector<double>& cpk_grid,
                                          const std::vector<std::size_t>& n_grid,
                                          std::size_t reps, const SimulationConfig& config,
                                          const SeedPath& base_seed, unsigned threads = 1);

// Smallest cpk_true where column `col` first rises through `level`, by linear
// interpolation between grid rows. Empty when the column never crosses.
std::optional<double> acceptance_crossing(const AcceptanceSurface& surface, std::size_t col,
                                          double level = 0.5);

}  // namespace capgate
