#include "capgate/dataset_io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string_view>
#include <unordered_set>

#include "capgate/asymptotics.hpp"

namespace capgate {

namespace {

constexpr std::string_view kHeader = "dimension_id,lsl,usl,nominal,value";

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

[[noreturn]] void fail(std::size_t line, const std::string& dimension, const std::string& what) {
    std::string msg = "line " + std::to_string(line);
    if (!dimension.empty()) msg += " (dimension '" + dimension + "')";
    throw ValidationError(msg + ": " + what);
}

// Splits one CSV line; supports double-quoted fields with "" escapes.
std::vector<std::string> split_csv(std::string_view line, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    bool was_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += ch;
            }
        } else if (ch == '"' && trim(cur).empty()) {
            cur.clear();
            quoted = true;
            was_quoted = true;
        } else if (ch == ',') {
            fields.push_back(was_quoted ? cur : std::string(trim(cur)));
            cur.clear();
            was_quoted = false;
        } else {
            cur += ch;
        }
    }
    if (quoted) fail(line_no, "", "unterminated quoted field");
    fields.push_back(was_quoted ? cur : std::string(trim(cur)));
    return fields;
}

std::optional<double> parse_number(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) return std::nullopt;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    if (std::isnan(value)) return std::nullopt;
    return value;
}

std::string format_number(double v) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

std::string quote_if_needed(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos && trim(s) == s) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + '"';
}

}  // namespace

void validate(const DimensionRecord& record) {
    if (record.measurements.size() < 2) {
        throw ValidationError("dimension '" + record.dimension_id + "': at least two measurements required");
    }
    for (double x : record.measurements) {
        if (!std::isfinite(x)) {
            throw ValidationError("dimension '" + record.dimension_id + "': non-finite measurement");
        }
    }
    try {
        validate(record.spec);
    } catch (const ValidationError& e) {
        throw ValidationError("dimension '" + record.dimension_id + "': " + e.what());
    }
}

std::vector<DimensionRecord> parse_dimensions(std::istream& in) {
    std::vector<DimensionRecord> records;
    std::unordered_set<std::string> seen;
    std::vector<std::size_t> first_line;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;

    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view = trim(line);
        if (line_no == 1 && view.starts_with("\xEF\xBB\xBF")) view.remove_prefix(3);
        if (view.empty()) continue;
        if (!header_seen) {
            std::string compact;
            for (char ch : view) {
                if (ch != ' ' && ch != '\t') compact += ch;
            }
            if (compact != kHeader) fail(line_no, "", "expected header '" + std::string(kHeader) + "'");
            header_seen = true;
            continue;
        }
        const auto fields = split_csv(view, line_no);
        if (fields.size() != 5) {
            fail(line_no, "", "expected 5 fields, found " + std::to_string(fields.size()));
        }
        const std::string& id = fields[0];
        if (id.empty()) fail(line_no, "", "empty dimension_id");
        const auto lsl = parse_number(fields[1]);
        const auto usl = parse_number(fields[2]);
        if (!lsl) fail(line_no, id, "invalid lsl '" + fields[1] + "'");
        if (!usl) fail(line_no, id, "invalid usl '" + fields[2] + "'");
        std::optional<double> nominal;
        if (!fields[3].empty()) {
            nominal = parse_number(fields[3]);
            if (!nominal || !std::isfinite(*nominal)) fail(line_no, id, "invalid nominal '" + fields[3] + "'");
        }
        const auto value = parse_number(fields[4]);
        if (!value || !std::isfinite(*value)) fail(line_no, id, "non-finite or invalid value '" + fields[4] + "'");

        const SpecLimits spec{*lsl, *usl};
        try {
            validate(spec);
        } catch (const ValidationError& e) {
            fail(line_no, id, e.what());
        }

        if (records.empty() || records.back().dimension_id != id) {
            if (!seen.insert(id).second) {
                fail(line_no, id, "duplicate dimension: rows of a dimension must be contiguous");
            }
            records.push_back({id, spec, nominal, {}});
            first_line.push_back(line_no);
        } else {
            const DimensionRecord& cur = records.back();
            if (!(cur.spec == spec) || cur.nominal != nominal) {
                fail(line_no, id,
                     "spec limits or nominal differ from line " + std::to_string(first_line.back()));
            }
        }
        records.back().measurements.push_back(*value);
    }
    if (in.bad()) throw IoError("read error while parsing dimensions");
    if (!header_seen) throw ValidationError("input is empty: missing header");
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].measurements.size() < 2) {
            fail(first_line[i], records[i].dimension_id, "at least two measurements required");
        }
    }
    return records;
}

std::vector<DimensionRecord> parse_dimensions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open input file '" + path.string() + "'");
    try {
        return parse_dimensions(in);
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

void write_dimensions(std::ostream& out, const std::vector<DimensionRecord>& records) {
    out << kHeader << '\n';
    for (const DimensionRecord& r : records) {
        const std::string prefix = quote_if_needed(r.dimension_id) + ',' + format_number(r.spec.lsl) +
                                   ',' + format_number(r.spec.usl) + ',' +
                                   (r.nominal ? format_number(*r.nominal) : std::string()) + ',';
        for (double x : r.measurements) out << prefix << format_number(x) << '\n';
    }
}

void write_dimensions(const std::filesystem::path& path, const std::vector<DimensionRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    write_dimensions(out, records);
    out.flush();
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

NormalityResult normality_test(const std::vector<double>& measurements, double alpha) {
    static constexpr std::array<std::pair<double, double>, 5> kCritical{
        {{0.10, 0.631}, {0.05, 0.752}, {0.025, 0.873}, {0.01, 1.035}, {0.005, 1.159}}};
    const auto it = std::find_if(kCritical.begin(), kCritical.end(), [alpha](const auto& e) {
        return std::fabs(e.first - alpha) < 1e-12;
    });
    if (it == kCritical.end()) {
        throw ValidationError("normality_test: alpha must be one of 0.10, 0.05, 0.025, 0.01, 0.005");
    }
    const std::size_t n = measurements.size();
    if (n < kMinNormalitySampleSize) {
        throw ValidationError("normality_test: at least " + std::to_string(kMinNormalitySampleSize) +
                              " measurements required");
    }
    const SampleSummary s = summarize(measurements);
    if (!(s.sd > 0.0)) throw DegenerateSampleError("normality_test: zero sample variance");

    std::vector<double> z(measurements);
    std::sort(z.begin(), z.end());
    for (double& v : z) v = (v - s.mean) / s.sd;

    const auto nd = static_cast<double>(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        // log Φ(z_i) + log(1 - Φ(z_{n+1-i})), each tail computed directly.
        const double lower = std::log(normal_cdf(z[i]));
        const double upper = std::log(normal_sf(z[n - 1 - i]));
        acc += (2.0 * static_cast<double>(i) + 1.0) * (lower + upper);
    }
    const double a2 = -nd - acc / nd;
    const double a2_star = a2 * (1.0 + 0.75 / nd + 2.25 / (nd * nd));

    double p;
    if (a2_star >= 0.6) {
        p = std::exp(1.2937 - 5.709 * a2_star + 0.0186 * a2_star * a2_star);
    } else if (a2_star >= 0.34) {
        p = std::exp(0.9177 - 4.279 * a2_star - 1.38 * a2_star * a2_star);
    } else if (a2_star >= 0.2) {
        p = 1.0 - std::exp(-8.318 + 42.796 * a2_star - 59.938 * a2_star * a2_star);
    } else {
        p = 1.0 - std::exp(-13.436 + 101.14 * a2_star - 223.73 * a2_star * a2_star);
    }

    NormalityResult r;
    r.statistic = a2_star;
    r.critical_value = it->second;
    r.p_value = std::clamp(p, 0.0, 1.0);
    r.alpha = alpha;
    r.pass = a2_star < it->second;
    return r;
}

ConcentrationTable concentration_table(const std::vector<NamedEstimate>& estimates, double c0,
                                       const std::vector<double>& half_widths) {
    if (estimates.empty()) throw ValidationError("concentration_table: no estimates");
    if (half_widths.empty()) throw ValidationError("concentration_table: no bands");
    for (std::size_t i = 0; i < half_widths.size(); ++i) {
        if (!(half_widths[i] >= 0.0)) throw ValidationError("concentration_table: negative band");
        if (i > 0 && half_widths[i] < half_widths[i - 1]) {
            throw ValidationError("concentration_table: bands must be sorted ascending");
        }
    }
    ConcentrationTable t;
    t.c0 = c0;
    t.total = estimates.size();
    for (double hw : half_widths) {
        // Absorb representation error so that e.g. |1.35 - 1.33| counts within 0.02.
        const double limit = hw + 1e-12 * std::max(1.0, std::fabs(c0));
        const auto count = static_cast<std::size_t>(std::count_if(
            estimates.begin(), estimates.end(),
            [&](const NamedEstimate& e) { return std::fabs(e.cpk_hat - c0) <= limit; }));
        t.bands.push_back({hw, count, static_cast<double>(count) / static_cast<double>(t.total)});
    }
    return t;
}

double scaled_boundary_half_width(double sigma_c, std::size_t n) {
    if (!(sigma_c > 0.0) || n == 0) throw ValidationError("scaled boundary: need sigma_c > 0 and n >= 1");
    return normal_quantile(0.95) * sigma_c / std::sqrt(static_cast<double>(n));
}

std::vector<double> default_half_widths(double sigma_c, std::size_t n) {
    std::vector<double> bands{0.01, 0.02, 0.05, 0.10, 0.15, 0.20};
    bands.push_back(scaled_boundary_half_width(sigma_c, n));
    std::sort(bands.begin(), bands.end());
    return bands;
}

std::vector<DimensionRecord> generate_synthetic_dataset(const std::vector<SyntheticGroup>& groups,
                                                        const SeedPath& base_seed) {
    if (groups.empty()) throw ValidationError("synthetic dataset: no groups");
    std::vector<DimensionRecord> out;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const SyntheticGroup& grp = groups[g];
        if (grp.count < 1) throw ValidationError("synthetic dataset: group count must be >= 1");
        if (grp.n < 2) throw ValidationError("synthetic dataset: n must be >= 2");
        const CalibratedProcess process =
            calibrate_model(grp.true_cpk, grp.calibration_mode, grp.family, grp.log_sigma);
        std::ostringstream prefix;
        prefix << 'g' << g << '-' << to_string(grp.family) << '-' << to_string(grp.calibration_mode)
               << "-cpk" << format_number(grp.true_cpk) << "-n" << grp.n << '-';
        const double nominal = model_median(process.model);
        for (std::size_t i = 0; i < grp.count; ++i) {
            std::ostringstream id;
            id << prefix.str() << std::setw(4) << std::setfill('0') << i;
            out.push_back({id.str(), process.spec, nominal,
                           sample(process.model, grp.n, base_seed.child(g).child(i))});
        }
    }
    return out;
}

SyntheticGroup parse_synthetic_group(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
    if (parts.size() < 3 || parts.size() > 5) {
        throw ValidationError("synthetic group '" + text + "': expected true_cpk:n:count[:family[:mode]]");
    }
    SyntheticGroup g;
    const auto cpk = parse_number(parts[0]);
    if (!cpk || !(*cpk > 0.0) || !std::isfinite(*cpk)) {
        throw ValidationError("synthetic group '" + text + "': invalid true_cpk");
    }
    g.true_cpk = *cpk;
    auto parse_count = [&](const std::string& s, const char* what) {
        std::size_t v = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || ptr != s.data() + s.size()) {
            throw ValidationError("synthetic group '" + text + "': invalid " + what);
        }
        return v;
    };
    g.n = parse_count(parts[1], "n");
    g.count = parse_count(parts[2], "count");
    if (parts.size() >= 4) g.family = parse_family(parts[3]);
    if (parts.size() == 5) g.calibration_mode = parse_calibration_mode(parts[4]);
    if (g.count < 1) throw ValidationError("synthetic group '" + text + "': count must be >= 1");
    return g;
}

std::optional<double> synthetic_true_cpk(const std::string& dimension_id) {
    const auto start = dimension_id.find("-cpk");
    if (start == std::string::npos) return std::nullopt;
    const auto end = dimension_id.find("-n", start + 4);
    if (end == std::string::npos) return std::nullopt;
    return parse_number(std::string_view(dimension_id).substr(start + 4, end - start - 4));
}

}  // namespace capgate
