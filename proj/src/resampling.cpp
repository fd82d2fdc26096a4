#include "capgate/resampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "capgate/parallel.hpp"

namespace capgate {

namespace {
constexpr std::uint64_t kRedrawTag = 0xB007'0000'0000'0001ULL;
}

double flip_rate(double p_hat) noexcept { return std::min(p_hat, 1.0 - p_hat); }

double quantile_linear(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw ValidationError("quantile of an empty sample");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(p, 0.0, 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

BootstrapSummary bootstrap_dimension(const DimensionRecord& record, double c0, std::size_t reps,
                                     const SeedPath& seed) {
    if (reps < kMinBootstrapReps) {
        throw ValidationError("bootstrap: reps must be >= " + std::to_string(kMinBootstrapReps));
    }
    validate(record);
    const CpkEstimate original = estimate_cpk(record.measurements, record.spec);

    const std::vector<double>& xs = record.measurements;
    const std::size_t n = xs.size();
    std::vector<double> buf(n);
    const std::uint64_t key = seed.key();

    auto draw = [&](std::uint64_t stream) {
        Rng rng(stream);
        for (double& v : buf) v = xs[rng.below(n)];
        return summarize(buf);
    };

    BootstrapSummary out;
    out.dimension_id = record.dimension_id;
    out.n = n;
    out.reps = reps;
    out.cpk_hat = original.estimate.cpk;
    out.seed = seed;
    std::size_t accepted = 0;
    for (std::size_t b = 0; b < reps; ++b) {
        const std::uint64_t stream = derive_key(key, b);
        SampleSummary s = draw(stream);
        if (!(s.sd > 0.0)) {
            ++out.retried;
            s = draw(derive_key(stream, kRedrawTag));
            if (!(s.sd > 0.0)) {
                ++out.skipped;
                continue;
            }
        }
        if (cpk_from_summary(s, record.spec).cpk >= c0) ++accepted;
    }
    out.valid_reps = reps - out.skipped;
    if (out.valid_reps == 0) {
        throw DegenerateSampleError("dimension '" + record.dimension_id +
                                    "': every bootstrap resample had zero variance");
    }
    out.p_hat = static_cast<double>(accepted) / static_cast<double>(out.valid_reps);
    out.flip_rate = flip_rate(out.p_hat);
    return out;
}

double share_above(const std::vector<BootstrapSummary>& summaries, double threshold) {
    if (summaries.empty()) return 0.0;
    const auto count = std::count_if(summaries.begin(), summaries.end(),
                                     [threshold](const BootstrapSummary& s) { return s.flip_rate > threshold; });
    return static_cast<double>(count) / static_cast<double>(summaries.size());
}

DatasetAnalysis analyze_dataset(const std::vector<DimensionRecord>& records, double c0,
                                std::size_t reps, const SeedPath& base_seed, unsigned threads) {
    if (records.empty()) throw ValidationError("analyze_dataset: no records");
    if (reps < kMinBootstrapReps) {
        throw ValidationError("bootstrap: reps must be >= " + std::to_string(kMinBootstrapReps));
    }
    std::vector<std::optional<BootstrapSummary>> slots(records.size());
    std::vector<std::string> failures(records.size());
    parallel_for(records.size(), threads, [&](std::size_t i) {
        try {
            slots[i] = bootstrap_dimension(records[i], c0, reps, base_seed.child(i));
        } catch (const std::exception& e) {
            failures[i] = e.what();
        }
    });

    DatasetAnalysis out;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (slots[i]) {
            out.summaries.push_back(std::move(*slots[i]));
        } else {
            out.errors.push_back({i, records[i].dimension_id, failures[i]});
        }
    }
    if (!out.summaries.empty()) {
        std::vector<double> flips;
        flips.reserve(out.summaries.size());
        for (const auto& s : out.summaries) flips.push_back(s.flip_rate);
        std::sort(flips.begin(), flips.end());
        out.median_flip = quantile_linear(flips, 0.5);
        out.percentile_90 = quantile_linear(flips, 0.9);
        out.share_above_020 = share_above(out.summaries, 0.20);
        out.share_above_030 = share_above(out.summaries, 0.30);
    }
    return out;
}

InstabilityCurve instability_curve(const std::vector<BootstrapSummary>& summaries, double c0,
                                   std::size_t n_bins, double max_distance) {
    if (n_bins < 2) throw ValidationError("instability_curve: need at least 2 bins");
    if (!(max_distance > 0.0)) throw ValidationError("instability_curve: max_distance must be > 0");

    struct Point {
        double distance;
        double flip;
    };
    std::vector<Point> pts;
    for (const auto& s : summaries) {
        const double d = std::fabs(s.cpk_hat - c0);
        if (std::isfinite(d) && d <= max_distance) pts.push_back({d, s.flip_rate});
    }
    if (pts.size() < n_bins) {
        throw ValidationError("instability_curve: " + std::to_string(pts.size()) +
                              " dimensions within distance " + std::to_string(max_distance) +
                              ", need at least " + std::to_string(n_bins));
    }
    std::stable_sort(pts.begin(), pts.end(),
                     [](const Point& a, const Point& b) { return a.distance < b.distance; });

    InstabilityCurve curve;
    curve.c0 = c0;
    curve.max_distance = max_distance;
    const std::size_t m = pts.size();
    for (std::size_t g = 0; g < n_bins; ++g) {
        const std::size_t begin = g * m / n_bins;
        const std::size_t end = (g + 1) * m / n_bins;
        InstabilityBin bin;
        bin.count = end - begin;
        bin.distance_lo = g == 0 ? pts.front().distance
                                 : 0.5 * (pts[begin - 1].distance + pts[begin].distance);
        bin.distance_hi = g + 1 == n_bins ? pts.back().distance
                                          : 0.5 * (pts[end - 1].distance + pts[end].distance);
        std::vector<double> flips;
        for (std::size_t i = begin; i < end; ++i) flips.push_back(pts[i].flip);
        bin.mean_flip = std::accumulate(flips.begin(), flips.end(), 0.0) / static_cast<double>(flips.size());
        std::sort(flips.begin(), flips.end());
        bin.q25_flip = quantile_linear(flips, 0.25);
        bin.q75_flip = quantile_linear(flips, 0.75);
        curve.bins.push_back(bin);
    }
    return curve;
}

}  // namespace capgate
