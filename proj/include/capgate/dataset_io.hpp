#pragma once
// Measurement datasets: long-format CSV ingestion, normality screening,
// threshold-concentration tables and synthetic dataset generation.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "capgate/capability.hpp"
#include "capgate/rng.hpp"

namespace capgate {

struct DimensionRecord {
    std::string dimension_id;
    SpecLimits spec;
    std::optional<double> nominal;  // metadata only, never used in computation
    std::vector<double> measurements;

    bool operator==(const DimensionRecord&) const = default;
};

// Throws ValidationError unless n >= 2, all values finite and spec valid.
void validate(const DimensionRecord& record);

// Long CSV with header `dimension_id,lsl,usl,nominal,value`, one row per
// measurement. Rows of a dimension must be contiguous and repeat the same
// lsl/usl/nominal. `inf` / `-inf` mark unilateral limits; nominal may be empty.
// Errors carry the 1-based line number and dimension id.
std::vector<DimensionRecord> parse_dimensions(std::istream& in);
std::vector<DimensionRecord> parse_dimensions(const std::filesystem::path& path);

// Shortest round-trip formatting; parse_dimensions(write_dimensions(x)) == x.
void write_dimensions(std::ostream& out, const std::vector<DimensionRecord>& records);
void write_dimensions(const std::filesystem::path& path, const std::vector<DimensionRecord>& records);

struct NormalityResult {
    double statistic = 0.0;  // A*^2 = A^2 (1 + 0.75/n + 2.25/n^2)
    double critical_value = 0.0;
    double p_value = 0.0;  // D'Agostino-Stephens approximation, informational
    double alpha = 0.05;
    bool pass = false;  // statistic < critical_value
};

inline constexpr std::size_t kMinNormalitySampleSize = 8;

// Anderson-Darling test with mean and variance estimated from the data.
// Supported alpha: 0.10, 0.05, 0.025, 0.01, 0.005.
NormalityResult normality_test(const std::vector<double>& measurements, double alpha = 0.05);

struct ConcentrationBand {
    double half_width = 0.0;
    std::size_t count = 0;
    double share = 0.0;
};

struct ConcentrationTable {
    double c0 = 0.0;
    std::size_t total = 0;
    std::vector<ConcentrationBand> bands;
};

struct NamedEstimate {
    std::string dimension_id;
    double cpk_hat = 0.0;
};

// Cumulative counts of |cpk_hat - c0| <= half_width. half_widths ascending.
ConcentrationTable concentration_table(const std::vector<NamedEstimate>& estimates, double c0,
                                       const std::vector<double>& half_widths);

// 1.645 sigma_C / sqrt(n): where the one-sided asymptotic acceptance
// probability reaches 95%.
double scaled_boundary_half_width(double sigma_c, std::size_t n);

// {0.01, 0.02, 0.05, 0.10, 0.15, 0.20} plus the scaled boundary band,
// sorted ascending.
std::vector<double> default_half_widths(double sigma_c, std::size_t n);

struct SyntheticGroup {
    double true_cpk = 1.33;
    std::size_t n = 32;
    std::size_t count = 1;
    Family family = Family::normal;
    CalibrationMode calibration_mode = CalibrationMode::one_sided;
    double log_sigma = kDefaultLogSigma;
};

// Record i of group g is drawn with seed base_seed.child(g).child(i). Ids
// encode the ground truth: "g<g>-<family>-<mode>-cpk<true>-n<n>-<i>".
std::vector<DimensionRecord> generate_synthetic_dataset(const std::vector<SyntheticGroup>& groups,
                                                        const SeedPath& base_seed);

// Parses "true_cpk:n:count[:family[:mode]]".
SyntheticGroup parse_synthetic_group(const std::string& text);

// Extracts the true capability encoded in a synthetic id, if any.
std::optional<double> synthetic_true_cpk(const std::string& dimension_id);

}  // namespace capgate
