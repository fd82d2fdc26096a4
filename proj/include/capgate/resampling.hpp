#pragma once
// Bootstrap decision instability of observed datasets.
//
// For each dimension the raw measurements are resampled with replacement,
// C^pk is recomputed on every resample, and the approval frequency p^ at c0
// gives the flip rate q^ = min(p^, 1 - p^). This is conditional instability
// given the observed data, not the population misclassification probability
// the simulation module estimates.

#include <cstddef>
#include <string>
#include <vector>

#include "capgate/dataset_io.hpp"
#include "capgate/rng.hpp"

namespace capgate {

inline constexpr std::size_t kDefaultBootstrapReps = 5000;
inline constexpr std::size_t kMinBootstrapReps = 1000;

struct BootstrapSummary {
    std::string dimension_id;
    std::size_t n = 0;
    std::size_t reps = 0;        // B requested
    std::size_t valid_reps = 0;  // B minus skipped zero-variance resamples
    std::size_t retried = 0;     // zero-variance resamples redrawn once
    std::size_t skipped = 0;     // still zero-variance after the redraw
    double cpk_hat = 0.0;        // on the original measurements
    double p_hat = 0.0;
    double flip_rate = 0.0;
    SeedPath seed;
};

double flip_rate(double p_hat) noexcept;

// Resample b uses stream derive_key(seed.key(), b). A zero-variance resample
// is redrawn once from a derived sub-stream and skipped if still degenerate.
// Throws DegenerateSampleError when every measurement is identical.
BootstrapSummary bootstrap_dimension(const DimensionRecord& record, double c0, std::size_t reps,
                                     const SeedPath& seed);

struct RecordError {
    std::size_t index = 0;
    std::string dimension_id;
    std::string message;
};

struct DatasetAnalysis {
    std::vector<BootstrapSummary> summaries;  // input order, failed records omitted
    std::vector<RecordError> errors;
    double median_flip = 0.0;
    double share_above_020 = 0.0;
    double share_above_030 = 0.0;
    double percentile_90 = 0.0;
};

// Fraction of summaries with flip_rate strictly above `threshold`.
double share_above(const std::vector<BootstrapSummary>& summaries, double threshold);

// Record i uses seed base_seed.child(i). Per-record failures are collected in
// `errors`; the rest of the dataset is still analysed.
DatasetAnalysis analyze_dataset(const std::vector<DimensionRecord>& records, double c0,
                                std::size_t reps, const SeedPath& base_seed, unsigned threads = 1);

struct InstabilityBin {
    double distance_lo = 0.0;
    double distance_hi = 0.0;
    double mean_flip = 0.0;
    double q25_flip = 0.0;
    double q75_flip = 0.0;
    std::size_t count = 0;
};

struct InstabilityCurve {
    double c0 = 0.0;
    double max_distance = 0.0;
    std::string binning = "quantile";
    std::vector<InstabilityBin> bins;
};

// Equal-frequency bins over d = |cpk_hat - c0| for d <= max_distance. Bin
// edges sit midway between neighbouring distances, so the bins partition the
// observed range.
InstabilityCurve instability_curve(const std::vector<BootstrapSummary>& summaries, double c0,
                                   std::size_t n_bins, double max_distance = 2.0);

// Linear-interpolation (Hyndman-Fan type 7) quantile of an ascending sample.
double quantile_linear(const std::vector<double>& sorted, double p);

}  // namespace capgate
