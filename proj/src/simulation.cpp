#include "capgate/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "capgate/asymptotics.hpp"
#include "capgate/parallel.hpp"

namespace capgate {

namespace {

constexpr std::size_t kChunk = 2048;
constexpr std::uint64_t kRetryTag = 0xDE6E'0000'0000'0000ULL;
constexpr std::uint64_t kSigmaTag = 0x516A'0000'0000'0000ULL;

// Draws replicate samples and evaluates the estimator on them. One instance
// per worker chunk; owns its scratch buffer.
class ReplicateKernel {
public:
    ReplicateKernel(const CalibratedProcess& process, std::size_t n, EstimatorKind estimator)
        : process_(process), estimator_(estimator), buf_(n) {}

    // Estimator value for the replicate whose stream key is rep_key.
    double draw(std::uint64_t rep_key, std::size_t& retries) {
        for (std::size_t attempt = 0; attempt <= kMaxDegenerateRetries; ++attempt) {
            fill(rep_key, attempt);
            if (estimator_ == EstimatorKind::cpk) {
                const SampleSummary s = summarize(buf_);
                if (s.sd > 0.0) return cpk_from_summary(s, process_.spec).cpk;
            } else {
                std::sort(buf_.begin(), buf_.end());
                const QuantileTriple q = empirical_quantiles(buf_);
                if (q.p99865 > q.p50 && q.p50 > q.p00135) return cnpk_point(q, process_.spec);
            }
            ++retries;
        }
        throw ComputationError("degenerate replicate sample after " +
                               std::to_string(kMaxDegenerateRetries) + " retries");
    }

    CpkEstimate draw_cpk(std::uint64_t rep_key, std::size_t& retries) {
        for (std::size_t attempt = 0; attempt <= kMaxDegenerateRetries; ++attempt) {
            fill(rep_key, attempt);
            const SampleSummary s = summarize(buf_);
            if (s.sd > 0.0) return {s, cpk_from_summary(s, process_.spec)};
            ++retries;
        }
        throw ComputationError("degenerate replicate sample after " +
                               std::to_string(kMaxDegenerateRetries) + " retries");
    }

private:
    void fill(std::uint64_t rep_key, std::size_t attempt) {
        Rng rng(attempt == 0 ? rep_key : derive_key(rep_key, kRetryTag + attempt));
        sample_into(process_.model, buf_, rng);
    }

    const CalibratedProcess& process_;
    EstimatorKind estimator_;
    std::vector<double> buf_;
};

void require_sorted_grid(const std::vector<double>& grid, const char* name) {
    if (grid.empty()) throw ValidationError(std::string(name) + " must not be empty");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!std::isfinite(grid[i])) throw ValidationError(std::string(name) + " must be finite");
        if (i > 0 && !(grid[i] > grid[i - 1])) {
            throw ValidationError(std::string(name) + " must be strictly increasing");
        }
    }
}

void require_sorted_grid(const std::vector<std::size_t>& grid, const char* name) {
    if (grid.empty()) throw ValidationError(std::string(name) + " must not be empty");
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (!(grid[i] > grid[i - 1])) {
            throw ValidationError(std::string(name) + " must be strictly increasing");
        }
    }
}

void require_experiment(std::size_t n, double c0, const SimulationConfig& config) {
    if (n < kMinMisclassSampleSize) {
        throw ValidationError("sample size n must be >= " + std::to_string(kMinMisclassSampleSize));
    }
    if (config.estimator == EstimatorKind::cnpk && n < kMinCnpkSampleSize) {
        throw ValidationError("C_Npk estimator needs n >= " + std::to_string(kMinCnpkSampleSize));
    }
    if (!std::isfinite(c0)) throw ValidationError("threshold c0 must be finite");
}

CalibratedProcess calibrate(double cpk_true, const SimulationConfig& config) {
    return calibrate_model(cpk_true, config.calibration_mode, config.family, config.log_sigma);
}

template <class Fn>
auto annotate_cell(std::size_t row, std::size_t col, double cpk, std::size_t n, Fn&& fn) {
    const auto where = [&] {
        return "cell (" + std::to_string(row) + ", " + std::to_string(col) +
               ") [cpk_true=" + std::to_string(cpk) + ", n=" + std::to_string(n) + "]: ";
    };
    try {
        return fn();
    } catch (const ValidationError& e) {
        throw ValidationError(where() + e.what());
    } catch (const ComputationError& e) {
        throw ComputationError(where() + e.what());
    }
}

double sample_sd(const std::vector<double>& xs, double center_shift, double scale) {
    double sum = 0.0;
    for (double x : xs) sum += scale * (x - center_shift);
    const double mean = sum / static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) {
        const double d = scale * (x - center_shift) - mean;
        ss += d * d;
    }
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace

std::string_view to_string(EstimatorKind kind) noexcept {
    return kind == EstimatorKind::cpk ? "cpk" : "cnpk";
}

EstimatorKind parse_estimator(std::string_view s) {
    if (s == "cpk") return EstimatorKind::cpk;
    if (s == "cnpk") return EstimatorKind::cnpk;
    throw ValidationError("unknown estimator '" + std::string(s) + "'");
}

std::string_view to_string(MisclassType t) noexcept { return t == MisclassType::type1 ? "type1" : "type2"; }

std::string_view to_string(SigmaCSource s) noexcept {
    return s == SigmaCSource::closed_form ? "closed_form" : "empirical";
}

SigmaCSource parse_sigma_c_source(std::string_view s) {
    if (s == "closed_form" || s == "closed-form" || s == "closed") return SigmaCSource::closed_form;
    if (s == "empirical") return SigmaCSource::empirical;
    throw ValidationError("unknown sigma_C source '" + std::string(s) + "'");
}

MisclassEstimate make_misclass(double cpk_true, std::size_t n, double c0, std::size_t reps,
                               std::size_t accepted, std::size_t retries) noexcept {
    MisclassEstimate m;
    m.cpk_true = cpk_true;
    m.n = n;
    m.reps = reps;
    m.accepted = accepted;
    m.degenerate_retries = retries;
    m.p_accept = static_cast<double>(accepted) / static_cast<double>(reps);
    if (cpk_true < c0) {
        m.misclass_type = MisclassType::type1;
        m.misclass = m.p_accept;
    } else {
        m.misclass_type = MisclassType::type2;
        m.misclass = 1.0 - m.p_accept;
    }
    m.mc_se = std::sqrt(m.misclass * (1.0 - m.misclass) / static_cast<double>(reps));
    return m;
}

std::vector<double> simulate_estimates(double cpk_true, std::size_t n, std::size_t reps,
                                       const SimulationConfig& config, const SeedPath& seed,
                                       unsigned threads, std::size_t* retries) {
    if (reps == 0) throw ValidationError("reps must be > 0");
    require_experiment(n, 1.0, config);
    const CalibratedProcess process = calibrate(cpk_true, config);
    const std::uint64_t key = seed.key();
    const std::size_t chunks = (reps + kChunk - 1) / kChunk;
    std::vector<double> values(reps);
    std::vector<std::size_t> chunk_retries(chunks, 0);
    parallel_for(chunks, threads, [&](std::size_t c) {
        ReplicateKernel kernel(process, n, config.estimator);
        const std::size_t end = std::min(reps, (c + 1) * kChunk);
        for (std::size_t b = c * kChunk; b < end; ++b) {
            values[b] = kernel.draw(derive_key(key, b), chunk_retries[c]);
        }
    });
    if (retries) {
        *retries = 0;
        for (std::size_t r : chunk_retries) *retries += r;
    }
    return values;
}

MisclassEstimate estimate_misclass(double cpk_true, std::size_t n, double c0, std::size_t reps,
                                   const SimulationConfig& config, const SeedPath& seed,
                                   unsigned threads) {
    if (reps < kMinMisclassReps) {
        throw ValidationError("estimate_misclass: reps must be >= " + std::to_string(kMinMisclassReps));
    }
    require_experiment(n, c0, config);
    std::size_t retries = 0;
    const std::vector<double> values = simulate_estimates(cpk_true, n, reps, config, seed, threads, &retries);
    const auto accepted = static_cast<std::size_t>(
        std::count_if(values.begin(), values.end(), [c0](double v) { return v >= c0; }));
    return make_misclass(cpk_true, n, c0, reps, accepted, retries);
}

RiskSurface risk_surface(const std::vector<double>& cpk_grid, const std::vector<std::size_t>& n_grid,
                         double c0, std::size_t reps, const SimulationConfig& config,
                         const SeedPath& base_seed, unsigned threads) {
    require_sorted_grid(cpk_grid, "cpk grid");
    require_sorted_grid(n_grid, "n grid");
    RiskSurface out;
    out.c0 = c0;
    out.cpk_grid = cpk_grid;
    out.n_grid = n_grid;
    out.config = config;
    out.reps = reps;
    out.base_seed = base_seed;
    out.cells.reserve(cpk_grid.size() * n_grid.size());
    for (std::size_t row = 0; row < cpk_grid.size(); ++row) {
        for (std::size_t col = 0; col < n_grid.size(); ++col) {
            out.cells.push_back(annotate_cell(row, col, cpk_grid[row], n_grid[col], [&] {
                return estimate_misclass(cpk_grid[row], n_grid[col], c0, reps, config,
                                         base_seed.child(row).child(col), threads);
            }));
        }
    }
    return out;
}

std::vector<std::size_t> ridge_rows(const RiskSurface& surface) {
    std::vector<std::size_t> rows(surface.n_grid.size(), 0);
    for (std::size_t col = 0; col < surface.n_grid.size(); ++col) {
        double best = -1.0;
        for (std::size_t row = 0; row < surface.cpk_grid.size(); ++row) {
            const double m = surface.at(row, col).misclass;
            if (m > best) {
                best = m;
                rows[col] = row;
            }
        }
    }
    return rows;
}

std::vector<double> linear_grid(double lo, double hi, double step) {
    if (!(step > 0.0) || !std::isfinite(lo) || !std::isfinite(hi) || hi < lo) {
        throw ValidationError("linear_grid: need finite lo <= hi and step > 0");
    }
    const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-6)) + 1;
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = lo + static_cast<double>(i) * step;
    return out;
}

std::vector<double> linspace(double lo, double hi, std::size_t points) {
    if (points < 2 || !(hi > lo)) throw ValidationError("linspace: need points >= 2 and hi > lo");
    std::vector<double> out(points);
    const double step = (hi - lo) / static_cast<double>(points - 1);
    for (std::size_t i = 0; i < points; ++i) out[i] = lo + static_cast<double>(i) * step;
    out.back() = hi;
    return out;
}

double sigma_c_empirical(double cpk_true, std::size_t n, const SimulationConfig& config,
                         std::size_t reps, const SeedPath& seed, unsigned threads) {
    if (reps < kMinDistributionReps) {
        throw ValidationError("sigma_c_empirical: reps must be >= " +
                              std::to_string(kMinDistributionReps));
    }
    const std::vector<double> values = simulate_estimates(cpk_true, n, reps, config, seed, threads);
    return sample_sd(values, cpk_true, std::sqrt(static_cast<double>(n)));
}

CollapseResult scaling_collapse(const std::vector<double>& z_grid,
                                const std::vector<std::size_t>& n_list, double c0,
                                std::size_t reps, SigmaCSource source,
                                const SimulationConfig& config, const SeedPath& base_seed,
                                unsigned threads, std::size_t sigma_reps) {
    if (z_grid.empty() || n_list.empty()) throw ValidationError("collapse: empty z grid or n list");
    for (double z : z_grid) {
        if (!std::isfinite(z)) throw ValidationError("collapse: z values must be finite");
    }
    if (reps < kMinDistributionReps) {
        throw ValidationError("collapse: reps must be >= " + std::to_string(kMinDistributionReps));
    }
    const bool closed_form_valid = config.family == Family::normal &&
                                   config.calibration_mode == CalibrationMode::one_sided &&
                                   config.estimator == EstimatorKind::cpk;
    if (source == SigmaCSource::closed_form && !closed_form_valid) {
        throw ValidationError(
            "collapse: closed-form sigma_C only applies to the one-sided normal C_pk "
            "configuration; use the empirical source");
    }

    CollapseResult out;
    for (std::size_t in = 0; in < n_list.size(); ++in) {
        const std::size_t n = n_list[in];
        const double sigma_c =
            source == SigmaCSource::closed_form
                ? sigma_c_closed_form(c0)
                : sigma_c_empirical(c0, n, config, sigma_reps, base_seed.child(kSigmaTag).child(in),
                                    threads);
        const double root_n = std::sqrt(static_cast<double>(n));
        for (std::size_t iz = 0; iz < z_grid.size(); ++iz) {
            const double z = z_grid[iz];
            const double cpk_true = c0 + z * sigma_c / root_n;
            if (!(cpk_true > 0.0)) {
                out.skipped.push_back({z, n, cpk_true, "true capability <= 0"});
                continue;
            }
            const MisclassEstimate m = annotate_cell(iz, in, cpk_true, n, [&] {
                return estimate_misclass(cpk_true, n, c0, reps, config,
                                         base_seed.child(iz).child(in), threads);
            });
            CollapsePoint p;
            p.z = z;
            p.n = n;
            p.cpk_true = cpk_true;
            p.sigma_c = sigma_c;
            p.p_mc = m.p_accept;
            p.phi_z = normal_cdf(z);
            p.residual = p.p_mc - p.phi_z;
            p.mc_se = std::sqrt(m.p_accept * (1.0 - m.p_accept) / static_cast<double>(reps));
            out.points.push_back(p);
        }
    }
    return out;
}

double max_abs_residual(const CollapseResult& result, std::size_t n) {
    double worst = 0.0;
    for (const CollapsePoint& p : result.points) {
        if (p.n == n) worst = std::max(worst, std::fabs(p.residual));
    }
    return worst;
}

SamplingDistributions sampling_distribution(double cpk_true, const std::vector<std::size_t>& n_list,
                                            double c0, std::size_t reps,
                                            const SimulationConfig& config,
                                            const SeedPath& base_seed, unsigned threads) {
    if (n_list.empty()) throw ValidationError("sampling_distribution: empty n list");
    if (reps < kMinDistributionReps) {
        throw ValidationError("sampling_distribution: reps must be >= " +
                              std::to_string(kMinDistributionReps));
    }
    std::vector<std::vector<double>> values(n_list.size());
    std::vector<std::size_t> retries(n_list.size(), 0);
    for (std::size_t i = 0; i < n_list.size(); ++i) {
        require_experiment(n_list[i], c0, config);
        values[i] = simulate_estimates(cpk_true, n_list[i], reps, config, base_seed.child(i),
                                       threads, &retries[i]);
    }

    std::vector<double> first = values.front();
    std::sort(first.begin(), first.end());
    const double iqr = empirical_quantile(first, 0.75) - empirical_quantile(first, 0.25);
    double lo = first.front();
    double hi = first.back();
    for (const auto& v : values) {
        const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
        lo = std::min(lo, *mn);
        hi = std::max(hi, *mx);
    }
    double width = 2.0 * iqr / std::cbrt(static_cast<double>(reps));
    const double range = hi - lo;
    if (!(width > 0.0)) width = range > 0.0 ? range / 64.0 : 1.0;
    if (range / width + 1.0 > static_cast<double>(kMaxHistogramBins)) {
        width = range / static_cast<double>(kMaxHistogramBins - 1);
    }

    SamplingDistributions out;
    out.cpk_true = cpk_true;
    out.c0 = c0;
    out.bin_width = width;
    out.bin_origin = std::floor(lo / width) * width;
    const auto bins = static_cast<std::size_t>(std::floor((hi - out.bin_origin) / width)) + 1;
    for (std::size_t i = 0; i < n_list.size(); ++i) {
        SamplingDistribution d;
        d.n = n_list[i];
        d.reps = reps;
        d.degenerate_retries = retries[i];
        d.counts.assign(bins, 0);
        std::size_t below = 0;
        double sum = 0.0;
        for (double v : values[i]) {
            auto bin = static_cast<std::size_t>(std::floor((v - out.bin_origin) / width));
            d.counts[std::min(bin, bins - 1)] += 1;
            if (v < c0) ++below;
            sum += v;
        }
        d.tail_below_c0 = static_cast<double>(below) / static_cast<double>(reps);
        d.mean = sum / static_cast<double>(reps);
        d.sd = sample_sd(values[i], 0.0, 1.0);
        out.per_n.push_back(std::move(d));
    }
    return out;
}

AcceptanceSurface rule_acceptance_surface(const DecisionRuleSpec& rule,
                                          const std::vector<double>& cpk_grid,
                                          const std::vector<std::size_t>& n_grid,
                                          std::size_t reps, const SimulationConfig& config,
                                          const SeedPath& base_seed, unsigned threads) {
    validate(rule);
    require_sorted_grid(cpk_grid, "cpk grid");
    require_sorted_grid(n_grid, "n grid");
    if (config.estimator != EstimatorKind::cpk) {
        throw ValidationError("rule surfaces are defined for the C_pk estimator only");
    }
    if (reps < kMinMisclassReps) {
        throw ValidationError("rule surface: reps must be >= " + std::to_string(kMinMisclassReps));
    }
    AcceptanceSurface out;
    out.rule = rule;
    out.cpk_grid = cpk_grid;
    out.n_grid = n_grid;
    out.config = config;
    out.reps = reps;
    out.base_seed = base_seed;
    out.cells.reserve(cpk_grid.size() * n_grid.size());

    for (std::size_t row = 0; row < cpk_grid.size(); ++row) {
        for (std::size_t col = 0; col < n_grid.size(); ++col) {
            const double cpk_true = cpk_grid[row];
            const std::size_t n = n_grid[col];
            out.cells.push_back(annotate_cell(row, col, cpk_true, n, [&] {
                require_experiment(n, rule.c0, config);
                const CalibratedProcess process = calibrate(cpk_true, config);
                const MarginCalibration margin =
                    rule.kind == RuleKind::margin ? margin_for(rule, n) : MarginCalibration{};
                const std::uint64_t key = base_seed.child(row).child(col).key();
                const std::size_t chunks = (reps + kChunk - 1) / kChunk;
                std::vector<std::size_t> accepted(chunks, 0), retries(chunks, 0);
                parallel_for(chunks, threads, [&](std::size_t c) {
                    ReplicateKernel kernel(process, n, EstimatorKind::cpk);
                    const std::size_t end = std::min(reps, (c + 1) * kChunk);
                    for (std::size_t b = c * kChunk; b < end; ++b) {
                        const std::uint64_t rep_key = derive_key(key, b);
                        const CpkEstimate e = kernel.draw_cpk(rep_key, retries[c]);
                        if (decide(rule, e.summary, e.estimate, margin, SeedPath(rep_key)).accept) {
                            ++accepted[c];
                        }
                    }
                });
                AcceptanceCell cell;
                cell.cpk_true = cpk_true;
                cell.n = n;
                cell.reps = reps;
                for (std::size_t c = 0; c < chunks; ++c) {
                    cell.accepted += accepted[c];
                    cell.degenerate_retries += retries[c];
                }
                cell.p_accept = static_cast<double>(cell.accepted) / static_cast<double>(reps);
                cell.mc_se = std::sqrt(cell.p_accept * (1.0 - cell.p_accept) / static_cast<double>(reps));
                return cell;
            }));
        }
    }
    return out;
}

std::optional<double> acceptance_crossing(const AcceptanceSurface& surface, std::size_t col,
                                          double level) {
    const std::size_t rows = surface.cpk_grid.size();
    if (col >= surface.n_grid.size()) throw ValidationError("acceptance_crossing: column out of range");
    if (rows == 0) return std::nullopt;
    if (surface.at(0, col).p_accept >= level) return surface.cpk_grid.front();
    for (std::size_t row = 1; row < rows; ++row) {
        const double p0 = surface.at(row - 1, col).p_accept;
        const double p1 = surface.at(row, col).p_accept;
        if (p0 < level && p1 >= level) {
            const double x0 = surface.cpk_grid[row - 1];
            const double x1 = surface.cpk_grid[row];
            return x0 + (level - p0) / (p1 - p0) * (x1 - x0);
        }
    }
    return std::nullopt;
}

}  // namespace capgate
