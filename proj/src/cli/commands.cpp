#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "capgate/asymptotics.hpp"
#include "capgate/capability.hpp"
#include "capgate/cli.hpp"
#include "capgate/dataset_io.hpp"
#include "capgate/decision_rules.hpp"
#include "capgate/errors.hpp"
#include "capgate/parallel.hpp"
#include "capgate/resampling.hpp"
#include "capgate/simulation.hpp"
#include "output.hpp"

namespace capgate::cli {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kDefaultSeed = 20240607;

struct Common {
    std::uint64_t seed = kDefaultSeed;
    unsigned threads = 1;
    std::size_t reps = 0;  // 0: command default
    double c0 = 1.33;
    std::string out;
    std::string format = "json";
    bool gnuplot = false;

    [[nodiscard]] std::size_t reps_or(std::size_t fallback) const { return reps ? reps : fallback; }
};

struct ConfigArgs {
    std::string family = "normal";
    std::string mode = "one_sided";
    bool centered = false;
    std::string estimator = "cpk";
    double log_sigma = kDefaultLogSigma;
};

struct Outcome {
    Result result;
    std::vector<std::pair<std::string, std::string>> extra_files;  // name, contents
    std::optional<std::string> stdout_text;  // replaces the default stdout rendering
    std::string gnuplot;  // script body; empty when the command has none
};

void add_common(CLI::App* sub, Common& c, bool reps, bool gnuplot) {
    sub->add_option("--seed", c.seed, "Base seed (u64)")->capture_default_str();
    sub->add_option("--threads", c.threads, "Worker threads (default: CAPGATE_THREADS or all cores)")
        ->check(CLI::Range(1u, 4096u));
    if (reps) sub->add_option("--reps", c.reps, "Monte Carlo / bootstrap replicates (default per command)");
    sub->add_option("--c0", c.c0, "Approval threshold")->capture_default_str();
    sub->add_option("--out", c.out, "Output directory (default: print to stdout)");
    sub->add_option("--format", c.format, "Data file format")
        ->check(CLI::IsMember({"json", "csv"}))
        ->capture_default_str();
    if (gnuplot) sub->add_flag("--gnuplot-script", c.gnuplot, "Also write a gnuplot script (needs --out and --format csv)");
}

void add_config(CLI::App* sub, ConfigArgs& a, bool estimator) {
    sub->add_option("--family", a.family, "Process family: normal | shifted_lognormal")->capture_default_str();
    sub->add_option("--mode", a.mode, "Calibration mode: one_sided | centered")->capture_default_str();
    sub->add_flag("--centered", a.centered, "Shorthand for --mode centered");
    if (estimator) sub->add_option("--estimator", a.estimator, "Estimator: cpk | cnpk")->capture_default_str();
    sub->add_option("--log-sigma", a.log_sigma, "Log-scale sigma of the shifted lognormal")->capture_default_str();
}

SimulationConfig make_config(const ConfigArgs& a) {
    SimulationConfig c;
    c.family = parse_family(a.family);
    c.calibration_mode = a.centered ? CalibrationMode::centered : parse_calibration_mode(a.mode);
    c.estimator = parse_estimator(a.estimator);
    c.log_sigma = a.log_sigma;
    return c;
}

Json config_json(const SimulationConfig& c) {
    Json j = Json::object();
    j["family"] = std::string(to_string(c.family));
    j["calibration_mode"] = std::string(to_string(c.calibration_mode));
    j["estimator"] = std::string(to_string(c.estimator));
    j["log_sigma"] = c.log_sigma;
    return j;
}

Json base_parameters(const Common& c, std::size_t reps) {
    Json j = Json::object();
    j["seed"] = c.seed;
    j["c0"] = c.c0;
    if (reps) j["reps"] = reps;
    return j;
}

void merge(Json& into, const Json& from) {
    for (auto it = from.begin(); it != from.end(); ++it) into[it.key()] = it.value();
}

std::string file_digest(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open input file '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return sha256_hex(ss.str());
}

Cell opt_cell(std::optional<double> v) { return v ? Cell{*v} : Cell{}; }

// ---------------------------------------------------------------- estimate

struct EstimateArgs {
    std::string input;
    double alpha = 0.05;
    double p_min = 0.95;
    double normality_alpha = 0.05;
    double sigma_c = 0.0;
    std::size_t band_n = 0;
    std::vector<double> half_widths;
};

Outcome cmd_estimate(const Common& c, const EstimateArgs& a) {
    const fs::path input(a.input);
    const auto records = parse_dimensions(input);
    if (!(a.alpha > 0.0 && a.alpha < 1.0)) throw ValidationError("--alpha must lie in (0, 1)");
    if (!(a.p_min > 0.0 && a.p_min < 1.0)) throw ValidationError("--p-min must lie in (0, 1)");
    if (a.sigma_c < 0.0) throw ValidationError("--sigma-c must be > 0");
    const double sigma_c = a.sigma_c > 0.0 ? a.sigma_c : sigma_c_closed_form(std::max(c.c0, 0.0));

    Outcome o;
    Result& r = o.result;
    r.command = "estimate";
    r.parameters = base_parameters(c, 0);
    r.parameters["input"] = input.filename().string();
    r.parameters["input_sha256"] = file_digest(input);
    r.parameters["alpha"] = a.alpha;
    r.parameters["p_min"] = a.p_min;
    r.parameters["normality_alpha"] = a.normality_alpha;
    r.parameters["sigma_c"] = sigma_c;
    r.parameters["sigma_c_source"] = a.sigma_c > 0.0 ? "given" : "closed_form_at_c0";

    Table& dims = r.table("dimensions",
                          {"dimension_id", "n", "mean", "sd", "lsl", "usl", "nominal", "cpu", "cpl",
                           "cpk", "active_side", "normality_statistic", "normality_p_value",
                           "normality", "deterministic_accept", "margin_threshold", "margin_accept",
                           "lcb", "lcb_accept", "probability", "probability_accept"});
    Table& errors = r.table("errors", {"index", "dimension_id", "message"});

    std::vector<NamedEstimate> all, normal, non_normal;
    std::vector<std::size_t> sizes;
    std::uint64_t n_pass = 0, n_fail = 0, n_untested = 0;
    std::uint64_t acc_det = 0, acc_margin = 0, acc_lcb = 0, acc_prob = 0;

    DecisionRuleSpec prob_rule;
    prob_rule.kind = RuleKind::probability;
    prob_rule.c0 = c.c0;
    prob_rule.alpha = a.alpha;
    prob_rule.p_min = a.p_min;
    validate(prob_rule);

    for (std::size_t i = 0; i < records.size(); ++i) {
        const DimensionRecord& rec = records[i];
        CpkEstimate e;
        try {
            e = estimate_cpk(rec.measurements, rec.spec);
        } catch (const ComputationError& ex) {
            errors.add({static_cast<std::uint64_t>(i), rec.dimension_id, std::string(ex.what())});
            continue;
        }
        const std::size_t n = e.summary.n;
        sizes.push_back(n);

        Cell norm_stat, norm_p;
        std::string norm_status = "untested";
        if (n >= kMinNormalitySampleSize) {
            const NormalityResult nr = normality_test(rec.measurements, a.normality_alpha);
            norm_stat = nr.statistic;
            norm_p = nr.p_value;
            norm_status = nr.pass ? "pass" : "fail";
        }
        const NamedEstimate named{rec.dimension_id, e.estimate.cpk};
        all.push_back(named);
        if (norm_status == "pass") {
            normal.push_back(named);
            ++n_pass;
        } else if (norm_status == "fail") {
            non_normal.push_back(named);
            ++n_fail;
        } else {
            ++n_untested;
        }

        const Decision det = decide_deterministic(e.estimate, c.c0);
        const Decision margin = decide_margin(e.estimate, calibrate_margin(c.c0, n, sigma_c, a.alpha));
        acc_det += det.accept;
        acc_margin += margin.accept;
        Cell lcb, lcb_accept, prob, prob_accept;
        if (e.estimate.active_side != ActiveSide::tied) {
            const Decision l = decide_lcb(e.summary, e.estimate, c.c0, a.alpha);
            const Decision p = decide_probability(e.summary, e.estimate, prob_rule, SeedPath(c.seed).child(i));
            lcb = l.statistic;
            lcb_accept = l.accept;
            prob = p.statistic;
            prob_accept = p.accept;
            acc_lcb += l.accept;
            acc_prob += p.accept;
        }
        dims.add({rec.dimension_id, static_cast<std::uint64_t>(n), e.summary.mean, e.summary.sd,
                  rec.spec.lsl, rec.spec.usl, opt_cell(rec.nominal), e.estimate.cpu, e.estimate.cpl,
                  e.estimate.cpk, std::string(to_string(e.estimate.active_side)), norm_stat, norm_p,
                  norm_status, det.accept, margin.cutoff, margin.accept, lcb, lcb_accept, prob,
                  prob_accept});
    }
    if (all.empty()) throw ComputationError("no dimension could be estimated");

    std::sort(sizes.begin(), sizes.end());
    const std::size_t band_n = a.band_n ? a.band_n : sizes[(sizes.size() - 1) / 2];
    std::vector<double> widths = a.half_widths;
    if (widths.empty()) {
        widths = default_half_widths(sigma_c, band_n);
    } else {
        std::sort(widths.begin(), widths.end());
    }
    r.parameters["band_n"] = band_n;
    r.parameters["half_widths"] = widths;

    Table& conc = r.table("concentration", {"stratum", "half_width", "count", "share", "total"});
    for (const auto& [name, group] : {std::pair<std::string, const std::vector<NamedEstimate>*>{"all", &all},
                                      {"normal", &normal},
                                      {"non_normal", &non_normal}}) {
        if (group->empty()) continue;
        const ConcentrationTable t = concentration_table(*group, c.c0, widths);
        for (const auto& b : t.bands) {
            conc.add({name, b.half_width, static_cast<std::uint64_t>(b.count), b.share,
                      static_cast<std::uint64_t>(t.total)});
        }
    }

    Json& s = r.summary;
    s["dimensions"] = records.size();
    s["estimated"] = all.size();
    s["errors"] = errors.rows.size();
    s["normality_pass"] = n_pass;
    s["normality_fail"] = n_fail;
    s["normality_untested"] = n_untested;
    s["accepted_deterministic"] = acc_det;
    s["accepted_margin"] = acc_margin;
    s["accepted_lcb"] = acc_lcb;
    s["accepted_probability"] = acc_prob;
    s["scaled_boundary_half_width"] = scaled_boundary_half_width(sigma_c, band_n);
    return o;
}

// ---------------------------------------------------------------- surface

struct SurfaceArgs {
    double cpk_min = 1.0;
    double cpk_max = 1.7;
    double cpk_step = 0.02;
    std::vector<std::size_t> n{16, 32, 64, 128};
    ConfigArgs config;
};

Outcome cmd_surface(const Common& c, const SurfaceArgs& a) {
    const SimulationConfig config = make_config(a.config);
    const std::size_t reps = c.reps_or(kDefaultCellReps);
    const auto grid = linear_grid(a.cpk_min, a.cpk_max, a.cpk_step);
    const RiskSurface surface = risk_surface(grid, a.n, c.c0, reps, config, SeedPath(c.seed), c.threads);

    Outcome o;
    Result& r = o.result;
    r.command = "surface";
    r.parameters = base_parameters(c, reps);
    r.parameters["cpk_min"] = a.cpk_min;
    r.parameters["cpk_max"] = a.cpk_max;
    r.parameters["cpk_step"] = a.cpk_step;
    r.parameters["n"] = a.n;
    merge(r.parameters, config_json(config));

    Table& cells = r.table("cells", {"cpk_true", "n", "reps", "accepted", "p_accept", "misclass",
                                     "misclass_type", "mc_se", "degenerate_retries"});
    for (const MisclassEstimate& m : surface.cells) {
        cells.add({m.cpk_true, static_cast<std::uint64_t>(m.n), static_cast<std::uint64_t>(m.reps),
                   static_cast<std::uint64_t>(m.accepted), m.p_accept, m.misclass,
                   std::string(to_string(m.misclass_type)), m.mc_se,
                   static_cast<std::uint64_t>(m.degenerate_retries)});
    }
    Table& ridge = r.table("ridge", {"n", "ridge_cpk_true", "max_misclass", "distance_from_c0"});
    const auto rows = ridge_rows(surface);
    for (std::size_t col = 0; col < rows.size(); ++col) {
        const double x = surface.cpk_grid[rows[col]];
        ridge.add({static_cast<std::uint64_t>(surface.n_grid[col]), x, surface.at(rows[col], col).misclass,
                   x - c.c0});
    }
    r.summary["cells"] = surface.cells.size();
    r.summary["grid_step"] = a.cpk_step;

    o.gnuplot =
        "set datafile separator ','\n"
        "set title 'Misclassification probability'\n"
        "set xlabel 'n'\nset ylabel 'true C_pk'\nset logscale x 2\n"
        "set palette defined (0 'white', 0.25 'orange', 0.5 'dark-red')\n"
        "plot 'surface_cells.csv' skip 1 using 2:1:6 with points pt 5 ps 2 palette notitle, \\\n"
        "     'surface_ridge.csv' skip 1 using 1:2 with linespoints lw 2 title 'ridge'\n";
    return o;
}

// ---------------------------------------------------------------- collapse

struct CollapseArgs {
    std::vector<std::size_t> n{16, 64, 256};
    double z_min = -3.0;
    double z_max = 3.0;
    std::size_t z_points = 25;
    std::string sigma_source = "closed_form";
    std::size_t sigma_reps = kDefaultCellReps;
    ConfigArgs config;
};

Outcome cmd_collapse(const Common& c, const CollapseArgs& a) {
    const SimulationConfig config = make_config(a.config);
    const std::size_t reps = c.reps_or(kDefaultPointReps);
    const SigmaCSource source = parse_sigma_c_source(a.sigma_source);
    const auto z = linspace(a.z_min, a.z_max, a.z_points);
    const CollapseResult res =
        scaling_collapse(z, a.n, c.c0, reps, source, config, SeedPath(c.seed), c.threads, a.sigma_reps);

    Outcome o;
    Result& r = o.result;
    r.command = "collapse";
    r.parameters = base_parameters(c, reps);
    r.parameters["n"] = a.n;
    r.parameters["z_min"] = a.z_min;
    r.parameters["z_max"] = a.z_max;
    r.parameters["z_points"] = a.z_points;
    r.parameters["sigma_c_source"] = std::string(to_string(source));
    if (source == SigmaCSource::empirical) r.parameters["sigma_reps"] = a.sigma_reps;
    merge(r.parameters, config_json(config));

    Table& pts = r.table("points", {"n", "z", "cpk_true", "sigma_c", "p_mc", "phi_z", "residual", "mc_se"});
    for (const CollapsePoint& p : res.points) {
        pts.add({static_cast<std::uint64_t>(p.n), p.z, p.cpk_true, p.sigma_c, p.p_mc, p.phi_z, p.residual,
                 p.mc_se});
    }
    Table& resid = r.table("residuals", {"n", "max_abs_residual"});
    for (std::size_t n : a.n) resid.add({static_cast<std::uint64_t>(n), max_abs_residual(res, n)});
    Table& skipped = r.table("skipped", {"n", "z", "cpk_true", "reason"});
    for (const CollapseSkip& s : res.skipped) {
        skipped.add({static_cast<std::uint64_t>(s.n), s.z, s.cpk_true, s.reason});
    }
    r.summary["points"] = res.points.size();
    r.summary["skipped"] = res.skipped.size();

    o.gnuplot =
        "set datafile separator ','\n"
        "set multiplot layout 1,2\n"
        "set xlabel 'z'\nset ylabel 'acceptance'\n"
        "plot 'collapse_points.csv' skip 1 using 2:5:1 with points pt 7 palette title 'Monte Carlo', \\\n"
        "     'collapse_points.csv' skip 1 using 2:6 with lines lc 'black' title 'Phi(z)'\n"
        "set ylabel 'MC - theory'\n"
        "plot 'collapse_points.csv' skip 1 using 2:7:1 with points pt 7 palette notitle\n"
        "unset multiplot\n";
    return o;
}

// ---------------------------------------------------------------- rules

struct RulesArgs {
    std::vector<std::string> rules{"deterministic", "lcb", "probability"};
    double cpk_min = 1.0;
    double cpk_max = 2.0;
    double cpk_step = 0.02;
    std::vector<std::size_t> n{16, 32, 64, 128, 256};
    double alpha = 0.05;
    double p_min = 0.95;
    std::string prob_method = "plug_in_asymptotic";
    std::size_t inner_reps = 2000;
    double sigma_c = 0.0;
    ConfigArgs config;
};

Outcome cmd_rules(const Common& c, const RulesArgs& a) {
    ConfigArgs cfg = a.config;
    cfg.estimator = "cpk";
    const SimulationConfig config = make_config(cfg);
    const std::size_t reps = c.reps_or(kDefaultCellReps);
    const auto grid = linear_grid(a.cpk_min, a.cpk_max, a.cpk_step);

    std::vector<DecisionRuleSpec> specs;
    for (const std::string& name : a.rules) {
        DecisionRuleSpec s;
        s.kind = parse_rule_kind(name);
        s.c0 = c.c0;
        s.alpha = a.alpha;
        s.p_min = a.p_min;
        s.prob_method = parse_probability_method(a.prob_method);
        s.inner_reps = a.inner_reps;
        s.margin_sigma_c = a.sigma_c;
        validate(s);
        specs.push_back(s);
    }
    if (specs.empty()) throw ValidationError("--rules must name at least one rule");

    Outcome o;
    Result& r = o.result;
    r.command = "rules";
    r.parameters = base_parameters(c, reps);
    r.parameters["rules"] = a.rules;
    r.parameters["cpk_min"] = a.cpk_min;
    r.parameters["cpk_max"] = a.cpk_max;
    r.parameters["cpk_step"] = a.cpk_step;
    r.parameters["n"] = a.n;
    r.parameters["alpha"] = a.alpha;
    r.parameters["p_min"] = a.p_min;
    r.parameters["prob_method"] = std::string(to_string(specs.front().prob_method));
    r.parameters["inner_reps"] = a.inner_reps;
    r.parameters["margin_sigma_c"] = a.sigma_c > 0.0 ? a.sigma_c : sigma_c_closed_form(std::max(c.c0, 0.0));
    merge(r.parameters, config_json(config));

    Table& cells = r.table("cells", {"rule", "cpk_true", "n", "reps", "accepted", "p_accept", "mc_se"});
    Table& crossings = r.table("crossings", {"rule", "n", "crossing_cpk_true", "distance_from_c0"});
    for (const DecisionRuleSpec& spec : specs) {
        // Every rule sees the same replicate samples (common random numbers).
        const AcceptanceSurface s =
            rule_acceptance_surface(spec, grid, a.n, reps, config, SeedPath(c.seed), c.threads);
        const std::string name(to_string(spec.kind));
        for (const AcceptanceCell& cell : s.cells) {
            cells.add({name, cell.cpk_true, static_cast<std::uint64_t>(cell.n),
                       static_cast<std::uint64_t>(cell.reps), static_cast<std::uint64_t>(cell.accepted),
                       cell.p_accept, cell.mc_se});
        }
        for (std::size_t col = 0; col < a.n.size(); ++col) {
            const auto x = acceptance_crossing(s, col);
            crossings.add({name, static_cast<std::uint64_t>(a.n[col]), opt_cell(x),
                           x ? Cell{*x - c.c0} : Cell{}});
        }
    }
    r.summary["cells"] = cells.rows.size();

    o.gnuplot =
        "set datafile separator ','\n"
        "set xlabel 'n'\nset ylabel 'C_pk at 50% acceptance'\nset logscale x 2\n"
        "plot for [rule in 'deterministic margin lcb probability'] 'rules_crossings.csv' skip 1 \\\n"
        "     using 2:(strcol(1) eq rule ? $3 : NaN) with linespoints title rule\n";
    return o;
}

// ---------------------------------------------------------------- bootstrap

struct BootstrapArgs {
    std::string input;
    std::vector<std::string> synth;
    std::size_t bins = 10;
    double max_distance = 2.0;
    double log_sigma = kDefaultLogSigma;
};

Outcome cmd_bootstrap(const Common& c, const BootstrapArgs& a) {
    if (a.input.empty() == a.synth.empty()) {
        throw ValidationError("bootstrap needs exactly one of --input or --synth");
    }
    const std::size_t reps = c.reps_or(kDefaultBootstrapReps);
    Outcome o;
    Result& r = o.result;
    r.command = "bootstrap";
    r.parameters = base_parameters(c, reps);

    std::vector<DimensionRecord> records;
    if (!a.input.empty()) {
        const fs::path input(a.input);
        records = parse_dimensions(input);
        r.parameters["input"] = input.filename().string();
        r.parameters["input_sha256"] = file_digest(input);
    } else {
        std::vector<SyntheticGroup> groups;
        for (const std::string& g : a.synth) {
            SyntheticGroup grp = parse_synthetic_group(g);
            grp.log_sigma = a.log_sigma;
            groups.push_back(grp);
        }
        records = generate_synthetic_dataset(groups, SeedPath(c.seed).child(0));
        r.parameters["synth"] = a.synth;
        r.parameters["log_sigma"] = a.log_sigma;
    }
    r.parameters["bins"] = a.bins;
    r.parameters["max_distance"] = a.max_distance;

    const DatasetAnalysis analysis = analyze_dataset(records, c.c0, reps, SeedPath(c.seed).child(1), c.threads);

    Table& dims = r.table("dimensions", {"dimension_id", "n", "cpk_hat", "p_hat", "flip_rate", "reps",
                                         "valid_reps", "retried", "skipped", "true_cpk", "seed"});
    for (const BootstrapSummary& s : analysis.summaries) {
        dims.add({s.dimension_id, static_cast<std::uint64_t>(s.n), s.cpk_hat, s.p_hat, s.flip_rate,
                  static_cast<std::uint64_t>(s.reps), static_cast<std::uint64_t>(s.valid_reps),
                  static_cast<std::uint64_t>(s.retried), static_cast<std::uint64_t>(s.skipped),
                  opt_cell(synthetic_true_cpk(s.dimension_id)), s.seed.to_string()});
    }
    Table& errors = r.table("errors", {"index", "dimension_id", "message"});
    for (const RecordError& e : analysis.errors) {
        errors.add({static_cast<std::uint64_t>(e.index), e.dimension_id, e.message});
    }
    Table& curve_table = r.table("curve", {"bin", "distance_lo", "distance_hi", "count", "mean_flip",
                                           "q25_flip", "q75_flip"});
    Json& s = r.summary;
    s["interpretation"] = "conditional decision instability given the observed data";
    s["dimensions"] = records.size();
    s["analysed"] = analysis.summaries.size();
    s["errors"] = analysis.errors.size();
    if (analysis.summaries.empty()) throw ComputationError("no dimension could be bootstrapped");
    s["median_flip"] = analysis.median_flip;
    s["share_above_0.20"] = analysis.share_above_020;
    s["share_above_0.30"] = analysis.share_above_030;
    s["percentile_90"] = analysis.percentile_90;
    try {
        const InstabilityCurve curve = instability_curve(analysis.summaries, c.c0, a.bins, a.max_distance);
        for (std::size_t i = 0; i < curve.bins.size(); ++i) {
            const InstabilityBin& b = curve.bins[i];
            curve_table.add({static_cast<std::uint64_t>(i), b.distance_lo, b.distance_hi,
                             static_cast<std::uint64_t>(b.count), b.mean_flip, b.q25_flip, b.q75_flip});
        }
        s["curve"] = "quantile bins";
    } catch (const ValidationError& e) {
        s["curve"] = std::string("not computed: ") + e.what();
    }

    o.gnuplot =
        "set datafile separator ','\n"
        "set xlabel '|C_pk hat - c0|'\nset ylabel 'flip rate'\n"
        "plot 'bootstrap_dimensions.csv' skip 1 using (abs($3 - " + format_double(c.c0) +
        ")):5 with points pt 7 ps 0.5 title 'dimensions', \\\n"
        "     'bootstrap_curve.csv' skip 1 using (($2 + $3) / 2):5 with linespoints lw 2 title 'bin mean'\n";
    return o;
}

// ---------------------------------------------------------------- margin

struct MarginArgs {
    double alpha = 0.05;
    std::size_t n = 0;
    double sigma_c = 0.0;
    std::string sigma_source = "closed_form";
    double epsilon = 0.45;
    ConfigArgs config;
};

Outcome cmd_margin(const Common& c, const MarginArgs& a) {
    if (a.n == 0) throw ValidationError("--n must be >= 1");
    Outcome o;
    Result& r = o.result;
    r.command = "margin";
    double sigma_c = a.sigma_c;
    std::string source = "given";
    std::size_t reps = 0;
    if (sigma_c < 0.0) throw ValidationError("--sigma-c must be > 0");
    if (sigma_c == 0.0) {
        const SigmaCSource src = parse_sigma_c_source(a.sigma_source);
        source = std::string(to_string(src));
        if (src == SigmaCSource::closed_form) {
            sigma_c = sigma_c_closed_form(c.c0);
        } else {
            reps = c.reps_or(kDefaultCellReps);
            sigma_c = sigma_c_empirical(c.c0, a.n, make_config(a.config), reps, SeedPath(c.seed), c.threads);
        }
    }
    const MarginCalibration cal = calibrate_margin(c.c0, a.n, sigma_c, a.alpha);
    const InstabilityBand band = instability_band(c.c0, a.n, sigma_c, a.epsilon);

    r.parameters = base_parameters(c, reps);
    r.parameters["alpha"] = a.alpha;
    r.parameters["n"] = a.n;
    r.parameters["sigma_c_source"] = source;
    r.parameters["epsilon"] = a.epsilon;
    if (reps) merge(r.parameters, config_json(make_config(a.config)));

    Json& s = r.summary;
    s["c0"] = cal.c0;
    s["alpha"] = cal.alpha;
    s["n"] = cal.n;
    s["sigma_c"] = cal.sigma_c;
    s["kappa"] = cal.kappa;
    s["margin"] = cal.margin;
    s["adjusted_threshold"] = cal.adjusted_threshold;
    s["boundary_acceptance_asymptotic"] = acceptance_prob_asymptotic(c.c0, cal.adjusted_threshold, a.n, sigma_c);
    s["band_epsilon"] = band.epsilon;
    s["band_lower"] = band.lower;
    s["band_upper"] = band.upper;
    s["band_width"] = band.width;
    return o;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
    std::vector<std::string> groups;
    double log_sigma = kDefaultLogSigma;
};

Outcome cmd_synth(const Common& c, const SynthArgs& a) {
    std::vector<SyntheticGroup> groups;
    for (const std::string& g : a.groups) {
        SyntheticGroup grp = parse_synthetic_group(g);
        grp.log_sigma = a.log_sigma;
        groups.push_back(grp);
    }
    const auto records = generate_synthetic_dataset(groups, SeedPath(c.seed));
    std::ostringstream csv;
    write_dimensions(csv, records);

    Outcome o;
    Result& r = o.result;
    r.command = "synth";
    r.parameters = base_parameters(c, 0);
    r.parameters["groups"] = a.groups;
    r.parameters["log_sigma"] = a.log_sigma;
    r.summary["dimensions"] = records.size();
    std::size_t rows = 0;
    for (const auto& rec : records) rows += rec.measurements.size();
    r.summary["rows"] = rows;
    o.extra_files.emplace_back("synth_dataset.csv", csv.str());
    o.stdout_text = csv.str();
    return o;
}

// ---------------------------------------------------------------- sigma-c

struct SigmaArgs {
    std::optional<double> cpk;
    std::vector<std::size_t> n{32};
    std::string source = "both";
    ConfigArgs config;
};

Outcome cmd_sigma_c(const Common& c, const SigmaArgs& a) {
    if (a.source != "closed_form" && a.source != "empirical" && a.source != "both") {
        throw ValidationError("--source must be closed_form, empirical or both");
    }
    const SimulationConfig config = make_config(a.config);
    const double cpk = a.cpk.value_or(c.c0);
    const bool closed_ok = config.family == Family::normal &&
                           config.calibration_mode == CalibrationMode::one_sided &&
                           config.estimator == EstimatorKind::cpk;
    const bool want_closed = a.source != "empirical";
    const bool want_mc = a.source != "closed_form";
    if (want_closed && !closed_ok && a.source == "closed_form") {
        throw ValidationError("closed-form sigma_C only applies to the one-sided normal C_pk configuration");
    }
    const std::size_t reps = want_mc ? c.reps_or(kDefaultCellReps) : 0;

    Outcome o;
    Result& r = o.result;
    r.command = "sigma-c";
    r.parameters = base_parameters(c, reps);
    r.parameters["cpk"] = cpk;
    r.parameters["n"] = a.n;
    r.parameters["source"] = a.source;
    merge(r.parameters, config_json(config));

    Table& t = r.table("sigma_c", {"n", "closed_form", "empirical", "relative_difference"});
    const std::optional<double> closed =
        want_closed && closed_ok ? std::optional<double>(sigma_c_closed_form(cpk)) : std::nullopt;
    for (std::size_t i = 0; i < a.n.size(); ++i) {
        std::optional<double> mc;
        if (want_mc) mc = sigma_c_empirical(cpk, a.n[i], config, reps, SeedPath(c.seed).child(i), c.threads);
        const std::optional<double> rel =
            closed && mc ? std::optional<double>(*mc / *closed - 1.0) : std::nullopt;
        t.add({static_cast<std::uint64_t>(a.n[i]), opt_cell(closed), opt_cell(mc), opt_cell(rel)});
    }
    if (closed) r.summary["closed_form"] = *closed;
    return o;
}

// ---------------------------------------------------------------- distribution

struct DistributionArgs {
    double cpk = 1.40;
    std::vector<std::size_t> n{32, 128};
    ConfigArgs config;
};

Outcome cmd_distribution(const Common& c, const DistributionArgs& a) {
    const SimulationConfig config = make_config(a.config);
    const std::size_t reps = c.reps_or(kDefaultPointReps);
    const SamplingDistributions d =
        sampling_distribution(a.cpk, a.n, c.c0, reps, config, SeedPath(c.seed), c.threads);

    Outcome o;
    Result& r = o.result;
    r.command = "distribution";
    r.parameters = base_parameters(c, reps);
    r.parameters["cpk"] = a.cpk;
    r.parameters["n"] = a.n;
    merge(r.parameters, config_json(config));

    Table& stats = r.table("stats", {"n", "reps", "mean", "sd", "tail_below_c0", "degenerate_retries"});
    Table& hist = r.table("histogram", {"n", "bin", "bin_lo", "bin_hi", "count", "mass"});
    for (const SamplingDistribution& h : d.per_n) {
        stats.add({static_cast<std::uint64_t>(h.n), static_cast<std::uint64_t>(h.reps), h.mean, h.sd,
                   h.tail_below_c0, static_cast<std::uint64_t>(h.degenerate_retries)});
        for (std::size_t b = 0; b < h.counts.size(); ++b) {
            const double lo = d.bin_origin + static_cast<double>(b) * d.bin_width;
            hist.add({static_cast<std::uint64_t>(h.n), static_cast<std::uint64_t>(b), lo, lo + d.bin_width,
                      static_cast<std::uint64_t>(h.counts[b]), h.mass(b)});
        }
    }
    r.summary["bin_width"] = d.bin_width;
    r.summary["bin_origin"] = d.bin_origin;
    r.summary["bins"] = d.bin_count();

    o.gnuplot =
        "set datafile separator ','\n"
        "set xlabel 'C_pk hat'\nset ylabel 'mass'\n"
        "set arrow from " + format_double(c.c0) + ", graph 0 to " + format_double(c.c0) +
        ", graph 1 nohead dt 2\n"
        "plot 'distribution_histogram.csv' skip 1 using 3:($1 == " + std::to_string(a.n.front()) +
        " ? $6 : NaN) with steps title 'n = " + std::to_string(a.n.front()) + "'" +
        (a.n.size() > 1 ? ", \\\n     '' skip 1 using 3:($1 == " + std::to_string(a.n.back()) +
                              " ? $6 : NaN) with steps title 'n = " + std::to_string(a.n.back()) + "'"
                        : std::string()) +
        "\n";
    return o;
}

// ---------------------------------------------------------------- emission

void emit(const Common& c, Outcome& o, const std::vector<std::string>& args, const std::string& started,
          std::ostream& out) {
    const Result& r = o.result;
    if (c.gnuplot && (c.out.empty() || c.format != "csv")) {
        throw ValidationError("--gnuplot-script needs --out and --format csv");
    }
    if (c.out.empty()) {
        if (o.stdout_text) {
            out << *o.stdout_text;
        } else if (c.format == "json") {
            out << dump_json(result_to_json(r));
        } else {
            bool first = true;
            for (const Table& t : r.tables) {
                if (!first) out << '\n';
                first = false;
                out << "# " << t.name << '\n' << table_to_csv(t);
            }
        }
        return;
    }

    StagedOutputs staged{fs::path(c.out)};
    if (c.format == "json") {
        staged.add(r.command + ".json", dump_json(result_to_json(r)));
    } else {
        Result head = r;
        head.tables.clear();
        Json summary = result_to_json(head);
        summary.erase("tables");
        staged.add(r.command + "_summary.json", dump_json(summary));
        for (const Table& t : r.tables) staged.add(r.command + "_" + t.name + ".csv", table_to_csv(t));
    }
    for (const auto& [name, contents] : o.extra_files) staged.add(name, contents);
    if (c.gnuplot && !o.gnuplot.empty()) staged.add(r.command + ".gp", o.gnuplot);

    Json manifest = Json::object();
    manifest["tool"] = "capgate";
    manifest["version"] = std::string(kToolVersion);
    manifest["command"] = r.command;
    manifest["argv"] = args;
    manifest["parameters"] = r.parameters;
    manifest["base_seed"] = c.seed;
    manifest["threads"] = c.threads;
    manifest["format"] = c.format;
    manifest["started_at"] = started;
    manifest["finished_at"] = utc_timestamp();
    Json outputs = Json::array();
    for (const FileDigest& d : staged.digests()) {
        outputs.push_back({{"file", d.file}, {"bytes", d.bytes}, {"sha256", d.sha256}});
    }
    manifest["outputs"] = std::move(outputs);
    staged.add(r.command + ".manifest.json", dump_json(manifest));
    const auto written = staged.commit();
    out << "wrote " << written.size() << " files to " << c.out << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"capgate: reliability of threshold-based process capability decisions"};
    app.name("capgate");
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);

    Common common;
    common.threads = default_threads();

    EstimateArgs est;
    auto* s_est = app.add_subcommand("estimate", "Per-dimension C_pk estimates, decisions, normality and concentration");
    add_common(s_est, common, false, false);
    s_est->add_option("input,--input", est.input, "Long-format CSV: dimension_id,lsl,usl,nominal,value")->required();
    s_est->add_option("--alpha", est.alpha, "Alpha for the margin and LCB rules")->capture_default_str();
    s_est->add_option("--p-min", est.p_min, "Probability rule threshold")->capture_default_str();
    s_est->add_option("--normality-alpha", est.normality_alpha, "Anderson-Darling level (0.10, 0.05, 0.025, 0.01, 0.005)")
        ->capture_default_str();
    s_est->add_option("--sigma-c", est.sigma_c, "sigma_C for margin and scaled band (default: closed form at c0)");
    s_est->add_option("--band-n", est.band_n, "n of the scaled concentration band (default: median n)");
    s_est->add_option("--half-widths", est.half_widths, "Concentration half-widths (comma separated)")->delimiter(',');

    SurfaceArgs surf;
    auto* s_surf = app.add_subcommand("surface", "Monte Carlo misclassification surface over (true C_pk, n)");
    add_common(s_surf, common, true, true);
    s_surf->add_option("--cpk-min", surf.cpk_min, "Lowest true capability")->capture_default_str();
    s_surf->add_option("--cpk-max", surf.cpk_max, "Highest true capability")->capture_default_str();
    s_surf->add_option("--cpk-step", surf.cpk_step, "Capability grid step")->capture_default_str();
    s_surf->add_option("--n", surf.n, "Sample sizes (comma separated)")->delimiter(',')->capture_default_str();
    add_config(s_surf, surf.config, true);

    CollapseArgs col;
    auto* s_col = app.add_subcommand("collapse", "sqrt(n) scaling collapse of acceptance probabilities");
    add_common(s_col, common, true, true);
    s_col->add_option("--n", col.n, "Sample sizes (comma separated)")->delimiter(',')->capture_default_str();
    s_col->add_option("--z-min", col.z_min, "Lowest z")->capture_default_str();
    s_col->add_option("--z-max", col.z_max, "Highest z")->capture_default_str();
    s_col->add_option("--z-points", col.z_points, "Number of z grid points")->capture_default_str();
    s_col->add_option("--sigma-c-source", col.sigma_source, "closed_form | empirical")->capture_default_str();
    s_col->add_option("--sigma-reps", col.sigma_reps, "Replicates for the empirical sigma_C")->capture_default_str();
    add_config(s_col, col.config, true);

    RulesArgs rules;
    auto* s_rules = app.add_subcommand("rules", "Acceptance surfaces of the approval rules");
    add_common(s_rules, common, true, true);
    s_rules->add_option("--rules", rules.rules, "deterministic, margin, lcb, probability (comma separated)")
        ->delimiter(',')
        ->capture_default_str();
    s_rules->add_option("--cpk-min", rules.cpk_min, "Lowest true capability")->capture_default_str();
    s_rules->add_option("--cpk-max", rules.cpk_max, "Highest true capability")->capture_default_str();
    s_rules->add_option("--cpk-step", rules.cpk_step, "Capability grid step")->capture_default_str();
    s_rules->add_option("--n", rules.n, "Sample sizes (comma separated)")->delimiter(',')->capture_default_str();
    s_rules->add_option("--alpha", rules.alpha, "Alpha for margin and LCB")->capture_default_str();
    s_rules->add_option("--p-min", rules.p_min, "Probability rule threshold")->capture_default_str();
    s_rules->add_option("--prob-method", rules.prob_method, "plug_in_asymptotic | nested_monte_carlo")
        ->capture_default_str();
    s_rules->add_option("--inner-reps", rules.inner_reps, "Inner replicates for the nested probability rule")
        ->capture_default_str();
    s_rules->add_option("--sigma-c", rules.sigma_c, "sigma_C for the margin rule (default: closed form at c0)");
    add_config(s_rules, rules.config, false);

    BootstrapArgs boot;
    auto* s_boot = app.add_subcommand("bootstrap", "Bootstrap flip rates and the binned instability curve");
    add_common(s_boot, common, true, true);
    s_boot->add_option("--input", boot.input, "Long-format CSV dataset");
    s_boot->add_option("--synth", boot.synth, "Synthetic group true_cpk:n:count[:family[:mode]] (repeatable)");
    s_boot->add_option("--bins", boot.bins, "Quantile bins of the instability curve")->capture_default_str();
    s_boot->add_option("--max-distance", boot.max_distance, "Truncation of |C_pk hat - c0|")->capture_default_str();
    s_boot->add_option("--log-sigma", boot.log_sigma, "Log-scale sigma for lognormal synthetic groups")
        ->capture_default_str();

    MarginArgs marg;
    auto* s_marg = app.add_subcommand("margin", "sqrt(n)-scaled guard band and instability band");
    add_common(s_marg, common, true, false);
    s_marg->add_option("--alpha", marg.alpha, "Target boundary acceptance probability")->capture_default_str();
    s_marg->add_option("--n", marg.n, "Sample size")->required();
    s_marg->add_option("--sigma-c", marg.sigma_c, "sigma_C (default: from --sigma-c-source)");
    s_marg->add_option("--sigma-c-source", marg.sigma_source, "closed_form | empirical")->capture_default_str();
    s_marg->add_option("--epsilon", marg.epsilon, "Instability band epsilon")->capture_default_str();
    add_config(s_marg, marg.config, true);

    SynthArgs syn;
    auto* s_syn = app.add_subcommand("synth", "Generate a synthetic long-format dataset");
    add_common(s_syn, common, false, false);
    s_syn->add_option("--group", syn.groups, "true_cpk:n:count[:family[:mode]] (repeatable)")->required();
    s_syn->add_option("--log-sigma", syn.log_sigma, "Log-scale sigma for lognormal groups")->capture_default_str();

    SigmaArgs sig;
    auto* s_sig = app.add_subcommand("sigma-c", "Closed-form and Monte Carlo sigma_C");
    add_common(s_sig, common, true, false);
    s_sig->add_option("--cpk", sig.cpk, "True capability (default: c0)");
    s_sig->add_option("--n", sig.n, "Sample sizes for the Monte Carlo estimate")->delimiter(',')->capture_default_str();
    s_sig->add_option("--source", sig.source, "closed_form | empirical | both")->capture_default_str();
    add_config(s_sig, sig.config, true);

    DistributionArgs dist;
    auto* s_dist = app.add_subcommand("distribution", "Sampling distribution of the estimator near c0");
    add_common(s_dist, common, true, true);
    s_dist->add_option("--cpk", dist.cpk, "True capability")->capture_default_str();
    s_dist->add_option("--n", dist.n, "Sample sizes (comma separated)")->delimiter(',')->capture_default_str();
    add_config(s_dist, dist.config, true);

    std::vector<const char*> argv{"capgate"};
    for (const std::string& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e, out, err);
        err << "capgate: " << e.what() << '\n';
        if (app.get_subcommands().empty()) err << "run 'capgate --help' for usage\n";
        return kExitValidation;
    }

    const std::string started = utc_timestamp();
    try {
        Outcome o;
        if (s_est->parsed()) o = cmd_estimate(common, est);
        else if (s_surf->parsed()) o = cmd_surface(common, surf);
        else if (s_col->parsed()) o = cmd_collapse(common, col);
        else if (s_rules->parsed()) o = cmd_rules(common, rules);
        else if (s_boot->parsed()) o = cmd_bootstrap(common, boot);
        else if (s_marg->parsed()) o = cmd_margin(common, marg);
        else if (s_syn->parsed()) o = cmd_synth(common, syn);
        else if (s_sig->parsed()) o = cmd_sigma_c(common, sig);
        else o = cmd_distribution(common, dist);
        emit(common, o, args, started, out);
        return kExitOk;
    } catch (const ValidationError& e) {
        err << "capgate: invalid input: " << e.what() << '\n';
        return kExitValidation;
    } catch (const IoError& e) {
        err << "capgate: I/O error: " << e.what() << '\n';
        return kExitIo;
    } catch (const ComputationError& e) {
        err << "capgate: computation failed: " << e.what() << '\n';
        return kExitComputation;
    } catch (const std::exception& e) {
        err << "capgate: computation failed: " << e.what() << '\n';
        return kExitComputation;
    }
}

}  // namespace capgate::cli
