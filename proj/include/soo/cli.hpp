#pragma once

// Subcommands behind the `soo` executable. Each command returns its process
// exit code: 0 success, 2 config/schema, 3 divergence, 4 estimation failure.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "soo/error.hpp"
#include "soo/experiments.hpp"
#include "soo/io.hpp"
#include "soo/linalg.hpp"
#include "soo/optimizer.hpp"
#include "soo/oracle.hpp"
#include "soo/theory.hpp"

namespace soo::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfig = 2, kDivergence = 3, kEstimation = 4 };

enum class EtaMode { Missing, Optimal, Value };

struct ExperimentConfig {
    QuadraticProblem problem;
    NoiseModel noise;
    int setting = 1;
    EtaMode eta_mode = EtaMode::Missing;
    double eta = 0.0;  ///< meaningful when eta_mode == Value
    double theta = 1.0;
    double gamma = 0.1;
    std::size_t steps = 100000;
    std::size_t n_runs = 1000;
    double init_radius = 10.0;
    std::uint64_t seed = 42;
    std::size_t burn_in = 0;
    std::size_t histogram_bins = 60;
    std::optional<double> histogram_range{};  ///< nullopt = auto
    std::filesystem::path out_dir = ".";
    std::string samples_file = "samples.csv";
    std::string report_file = "report.json";
    std::string histogram_file = "histogram.csv";

    SampleKind kind() const { return setting == 3 ? SampleKind::ScaledAvg : SampleKind::ScaledLast; }
};

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ConfigError(where + ": expected an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : obj.items())
        if (!ok.count(key)) throw ConfigError(where + ": unknown field '" + key + "'");
}

inline double get_number(const json& obj, const char* key, const std::string& where) {
    const auto& v = obj.at(key);
    if (!v.is_number()) throw ConfigError(where + "." + key + ": expected a number");
    return v.get<double>();
}

inline std::uint64_t get_count(const json& obj, const char* key, const std::string& where) {
    const auto& v = obj.at(key);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
        throw ConfigError(where + "." + key + ": expected a non-negative integer");
    return v.get<std::uint64_t>();
}

inline std::vector<double> get_vector(const json& v, const std::string& where) {
    if (!v.is_array()) throw ConfigError(where + ": expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) throw ConfigError(where + "[" + std::to_string(i) + "]: expected a number");
        out.push_back(v[i].get<double>());
    }
    return out;
}

inline QuadraticProblem parse_problem(const json& p) {
    reject_unknown(p, "problem", {"A", "b", "c0"});
    if (!p.contains("A")) throw ConfigError("problem.A: missing field");
    const auto& a = p.at("A");
    if (!a.is_array() || a.empty()) throw ConfigError("problem.A: expected a non-empty array of rows");
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < a.size(); ++i) rows.push_back(get_vector(a[i], "problem.A[" + std::to_string(i) + "]"));
    const std::size_t d = rows.size();
    for (std::size_t i = 0; i < d; ++i)
        if (rows[i].size() != d)
            throw ConfigError("problem.A[" + std::to_string(i) + "]: row has " + std::to_string(rows[i].size()) +
                              " entries, matrix needs " + std::to_string(d));
    if (d < 2) throw ConfigError("problem.A: dimension must be >= 2");
    Vector b = p.contains("b") ? get_vector(p.at("b"), "problem.b") : Vector(d, 0.0);
    if (b.size() != d) throw ConfigError("problem.b: expected " + std::to_string(d) + " entries");
    const double c0 = p.contains("c0") ? get_number(p, "c0", "problem") : 0.0;
    try {
        return QuadraticProblem(SymMatrix::from_rows(rows), std::move(b), c0);
    } catch (const Error& e) {
        throw ConfigError(std::string("problem: ") + e.what());
    }
}

inline NoiseModel parse_noise(const json& n, std::size_t d) {
    reject_unknown(n, "noise", {"kind", "radius"});
    NoiseModel m = NoiseModel::sphere(d, 1.0);
    if (n.contains("kind")) {
        const auto& k = n.at("kind");
        if (k == "sphere")
            m.kind = NoiseKind::SphereUniform;
        else if (k == "ball")
            m.kind = NoiseKind::BallUniform;
        else
            throw ConfigError("noise.kind: expected \"sphere\" or \"ball\"");
    }
    if (n.contains("radius")) m.radius = get_number(n, "radius", "noise");
    try {
        m.validate();
    } catch (const Error& e) {
        throw ConfigError(std::string("noise: ") + e.what());
    }
    return m;
}

}  // namespace detail

/**
 * Parses and validates an experiment config document. Unknown fields are
 * rejected at every level. Only `problem` is required.
 */
inline ExperimentConfig parse_config(const nlohmann::json& j) {
    using detail::get_count;
    using detail::get_number;
    detail::reject_unknown(j, "config",
                           {"problem", "noise", "setting", "eta", "theta", "gamma", "steps", "n_runs", "init_radius",
                            "seed", "burn_in", "histogram", "output"});
    if (!j.contains("problem")) throw ConfigError("config.problem: missing field");
    QuadraticProblem problem = detail::parse_problem(j.at("problem"));
    const std::size_t d = problem.dim();
    ExperimentConfig cfg{std::move(problem), NoiseModel::sphere(d, 1.0)};
    if (j.contains("noise")) cfg.noise = detail::parse_noise(j.at("noise"), d);

    if (j.contains("setting")) {
        const auto& s = j.at("setting");
        if (!s.is_number_integer() || s.get<int>() < 1 || s.get<int>() > 3)
            throw ConfigError("config.setting: expected 1, 2 or 3");
        cfg.setting = s.get<int>();
    }
    if (j.contains("eta")) {
        const auto& e = j.at("eta");
        if (e.is_string() && e.get<std::string>() == "optimal") {
            cfg.eta_mode = EtaMode::Optimal;
        } else if (e.is_number()) {
            cfg.eta_mode = EtaMode::Value;
            cfg.eta = e.get<double>();
            if (!(cfg.eta > 0.0) || !std::isfinite(cfg.eta)) throw ConfigError("config.eta: must be positive");
        } else {
            throw ConfigError("config.eta: expected a number or \"optimal\"");
        }
    }
    if (cfg.setting == 1 && cfg.eta_mode != EtaMode::Value)
        throw ConfigError("config.eta: setting 1 needs a numeric eta (\"optimal\" is for settings 2 and 3)");
    if (cfg.setting == 2 && cfg.eta_mode == EtaMode::Value)
        throw ConfigError("config.eta: setting 2 always runs at eta_0; use \"optimal\" or omit eta");

    if (j.contains("theta")) cfg.theta = get_number(j, "theta", "config");
    if (j.contains("gamma")) cfg.gamma = get_number(j, "gamma", "config");
    if (j.contains("steps")) cfg.steps = get_count(j, "steps", "config");
    if (j.contains("n_runs")) cfg.n_runs = get_count(j, "n_runs", "config");
    if (j.contains("init_radius")) cfg.init_radius = get_number(j, "init_radius", "config");
    if (j.contains("seed")) cfg.seed = get_count(j, "seed", "config");
    if (j.contains("burn_in")) cfg.burn_in = get_count(j, "burn_in", "config");

    if (j.contains("histogram")) {
        const auto& h = j.at("histogram");
        detail::reject_unknown(h, "histogram", {"bins", "range"});
        if (h.contains("bins")) cfg.histogram_bins = get_count(h, "bins", "histogram");
        if (h.contains("range")) {
            const auto& r = h.at("range");
            if (r.is_string() && r.get<std::string>() == "auto")
                cfg.histogram_range.reset();
            else if (r.is_number() && r.get<double>() > 0.0)
                cfg.histogram_range = r.get<double>();
            else
                throw ConfigError("histogram.range: expected a positive number or \"auto\"");
        }
        if (cfg.histogram_bins < 1) throw ConfigError("histogram.bins: must be >= 1");
    }
    if (j.contains("output")) {
        const auto& o = j.at("output");
        detail::reject_unknown(o, "output", {"dir", "samples", "report", "histogram"});
        auto str = [&](const char* key) {
            if (!o.at(key).is_string()) throw ConfigError(std::string("output.") + key + ": expected a string");
            return o.at(key).get<std::string>();
        };
        if (o.contains("dir")) cfg.out_dir = str("dir");
        if (o.contains("samples")) cfg.samples_file = str("samples");
        if (o.contains("report")) cfg.report_file = str("report");
        if (o.contains("histogram")) cfg.histogram_file = str("histogram");
    }

    if (!(cfg.theta > 0.5 && cfg.theta <= 1.0)) throw ConfigError("config.theta: must lie in (1/2, 1]");
    if (!(cfg.gamma > 0.0)) throw ConfigError("config.gamma: must be positive");
    if (cfg.steps < 1) throw ConfigError("config.steps: must be >= 1");
    if (cfg.n_runs < 2) throw ConfigError("config.n_runs: must be >= 2");
    if (!(cfg.init_radius >= 0.0)) throw ConfigError("config.init_radius: must be >= 0");
    if (cfg.burn_in >= cfg.steps) throw ConfigError("config.burn_in: must be smaller than steps");
    return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    try {
        return parse_config(j);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

/// eta used for the runs: the configured value, or eta_0 for "optimal"/missing.
inline double resolve_eta(const ExperimentConfig& cfg, const TheoryContext& ctx) {
    return cfg.eta_mode == EtaMode::Value ? cfg.eta : eta_opt(ctx);
}

inline RunConfig make_run_config(const ExperimentConfig& cfg, double eta) {
    RunConfig rc;
    rc.dim = cfg.problem.dim();
    rc.steps = cfg.steps;
    rc.eta = eta;
    rc.theta = cfg.theta;
    rc.gamma = cfg.gamma;
    rc.noise = cfg.noise;
    rc.init_radius = cfg.init_radius;
    rc.seed = cfg.seed;
    rc.burn_in = cfg.burn_in;
    return rc;
}

/// Theoretical covariance paired with a setting: V(eta) for settings 1 and 2,
/// the averaged-iterate covariance for setting 3.
inline SymMatrix setting_theory(const ExperimentConfig& cfg, const TheoryContext& ctx, double eta) {
    return cfg.setting == 3 ? v_averaged(ctx) : v_last_iterate(ctx, eta);
}

/// Command-line options shared by all subcommands.
struct CommandOptions {
    std::filesystem::path config{};
    std::optional<std::filesystem::path> out_dir{};
    unsigned threads = 0;
    std::optional<std::size_t> runs{};
    std::optional<std::size_t> steps{};
    std::filesystem::path samples{};  ///< compare / estimate input
};

namespace detail {

inline ExperimentConfig load_with_overrides(const CommandOptions& opts) {
    ExperimentConfig cfg = load_config(opts.config);
    if (opts.runs) {
        if (*opts.runs < 2) throw ConfigError("--runs: must be >= 2");
        cfg.n_runs = *opts.runs;
    }
    if (opts.steps) {
        if (*opts.steps < 1 || cfg.burn_in >= *opts.steps) throw ConfigError("--steps: must be >= 1 and > burn_in");
        cfg.steps = *opts.steps;
    }
    if (opts.out_dir) cfg.out_dir = *opts.out_dir;
    return cfg;
}

inline void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
}

inline nlohmann::json run_parameters(const ExperimentConfig& cfg, const TheoryContext& ctx, double eta) {
    return nlohmann::json{{"eta", eta},
                          {"eta_mode", cfg.eta_mode == EtaMode::Value ? "value" : "optimal"},
                          {"eta_opt", eta_opt(ctx)},
                          {"theta", cfg.theta},
                          {"gamma", cfg.gamma},
                          {"seed", cfg.seed},
                          {"init_radius", cfg.init_radius},
                          {"burn_in", cfg.burn_in},
                          {"noise", {{"kind", to_string(cfg.noise.kind)}, {"radius", cfg.noise.radius}}},
                          {"c", ctx.c},
                          {"alpha", ctx.alpha}};
}

inline nlohmann::json report_json(const SampleMatrix& samples, const ExperimentConfig& cfg, const TheoryContext& ctx,
                                  double eta) {
    nlohmann::json j;
    try {
        const SymMatrix theo = setting_theory(cfg, ctx, eta);
        j = to_json(compare_covariance(samples, theo, cfg.setting, cfg.steps));
    } catch (const StepSizeError& e) {
        j = nlohmann::json{{"setting", cfg.setting},
                           {"kind", to_string(samples.kind())},
                           {"n_runs", samples.n_runs()},
                           {"steps", cfg.steps},
                           {"empirical", to_json(empirical_covariance(samples))},
                           {"theoretical", nullptr},
                           {"theory_error", e.what()}};
    }
    j["parameters"] = run_parameters(cfg, ctx, eta);
    return j;
}

}  // namespace detail

/// Runs the configured setting and writes samples.csv, report.json and (for
/// d = 2) histogram.csv into the output directory.
inline int cmd_simulate(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
    const ExperimentConfig cfg = detail::load_with_overrides(opts);
    const TheoryContext ctx(cfg.problem, cfg.noise);
    const double eta = resolve_eta(cfg, ctx);
    const RunConfig base = make_run_config(cfg, eta);
    detail::ensure_dir(cfg.out_dir);

    MonteCarloOptions mc;
    mc.threads = opts.threads;
    mc.on_progress = [&err, n = cfg.n_runs](std::size_t done) { err << "[soo] " << done << "/" << n << " runs\n"; };

    std::optional<MonteCarloSamples> all;
    try {
        all.emplace(monte_carlo_all(cfg.problem, base, cfg.n_runs, mc));
    } catch (const MonteCarloError& e) {
        err << "error: divergence in " << e.failures().size() << " run(s); failed run indices:";
        for (const auto& f : e.failures()) err << ' ' << f.run_index;
        err << '\n';
        return kDivergence;
    }
    const SampleMatrix& samples = all->get(cfg.kind());

    const auto samples_path = cfg.out_dir / cfg.samples_file;
    const auto report_path = cfg.out_dir / cfg.report_file;
    write_samples_csv(samples_path, samples);
    write_json(report_path, detail::report_json(samples, cfg, ctx, eta));
    out << "samples: " << samples_path.string() << '\n' << "report: " << report_path.string() << '\n';

    if (samples.dim() == 2) {
        const double range = cfg.histogram_range ? *cfg.histogram_range : auto_histogram_range(samples);
        const auto hist_path = cfg.out_dir / cfg.histogram_file;
        std::ofstream hs(hist_path, std::ios::binary);
        if (!hs) throw Error("cannot open " + hist_path.string() + " for writing");
        write_histogram_csv(hs, histogram2d(samples, cfg.histogram_bins, range));
        out << "histogram: " << hist_path.string() << '\n';
    }
    return kOk;
}

/// Closed-form objects for the configured problem as one JSON document.
inline nlohmann::json theory_json(const ExperimentConfig& cfg) {
    const TheoryContext ctx(cfg.problem, cfg.noise);
    const double e0 = eta_opt(ctx);
    const double eta = cfg.eta_mode == EtaMode::Value ? cfg.eta : e0;
    auto guarded = [](auto&& make) -> nlohmann::json {
        try {
            return to_json(make());
        } catch (const Error& e) {
            return nlohmann::json{{"error", e.what()}};
        }
    };
    return nlohmann::json{
        {"dim", ctx.dim()},
        {"mu", ctx.problem.mu()},
        {"L", ctx.problem.lip()},
        {"c", ctx.c},
        {"alpha", ctx.alpha},
        {"eta", eta},
        {"eta_opt", e0},
        {"eta_threshold", last_iterate_threshold(ctx)},
        {"V_last_at_eta", guarded([&] { return v_last_iterate(ctx, eta); })},
        {"V_last_at_eta_opt", guarded([&] { return v_last_iterate(ctx, e0); })},
        {"V_avg", guarded([&] { return v_averaged(ctx); })},
        {"gap_eigenvalues", covariance_gap(ctx)},
        {"psi_prime_zero", to_json(psi_prime_zero(ctx))},
        {"chi_zero", to_json(chi_zero(ctx.dim(), ctx.c))},
        {"hurwitz", check_hurwitz(ctx)},
    };
}

/// Prints the theory document; with --out it is also written to theory.json.
inline int cmd_theory(const CommandOptions& opts, std::ostream& out, std::ostream& /*err*/) {
    const ExperimentConfig cfg = detail::load_with_overrides(opts);
    const nlohmann::json j = theory_json(cfg);
    out << j.dump(2) << '\n';
    if (opts.out_dir) {
        detail::ensure_dir(*opts.out_dir);
        write_json(*opts.out_dir / "theory.json", j);
    }
    return kOk;
}

/// Pairs an existing samples CSV with the theoretical covariance of the
/// configured setting and writes report.json.
inline int cmd_compare(const CommandOptions& opts, std::ostream& out, std::ostream& /*err*/) {
    const ExperimentConfig cfg = detail::load_with_overrides(opts);
    const SampleMatrix samples = read_samples_csv(opts.samples, cfg.problem.dim(), cfg.kind());
    const TheoryContext ctx(cfg.problem, cfg.noise);
    const double eta = resolve_eta(cfg, ctx);
    SymMatrix theo = [&] {
        try {
            return setting_theory(cfg, ctx, eta);
        } catch (const StepSizeError& e) {
            throw ConfigError(std::string("compare: no theoretical covariance for this config: ") + e.what());
        }
    }();
    nlohmann::json j = to_json(compare_covariance(samples, theo, cfg.setting, cfg.steps));
    j["parameters"] = detail::run_parameters(cfg, ctx, eta);
    detail::ensure_dir(cfg.out_dir);
    const auto report_path = cfg.out_dir / cfg.report_file;
    write_json(report_path, j);
    out << "report: " << report_path.string() << '\n';
    return kOk;
}

/// c * alpha from a setting-1 samples file, plus the eta_0 it implies.
inline int cmd_estimate(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
    const ExperimentConfig cfg = detail::load_with_overrides(opts);
    if (cfg.eta_mode != EtaMode::Value)
        throw ConfigError("config.eta: estimate needs the numeric eta the samples were generated with");
    const SampleMatrix samples = read_samples_csv(opts.samples, cfg.problem.dim(), SampleKind::ScaledLast);
    const SymMatrix emp = empirical_covariance(samples);
    double c_alpha = 0.0;
    try {
        c_alpha = estimate_c_alpha(emp, cfg.problem, cfg.eta, cfg.noise);
    } catch (const StepSizeError& e) {
        throw ConfigError(std::string("estimate: ") + e.what());
    } catch (const DegenerateSampleError& e) {
        err << "error: " << e.what() << '\n';
        return kEstimation;
    }
    const double d = static_cast<double>(cfg.problem.dim());
    const double implied = d * std::sqrt(d) / ((d - 1.0) * c_alpha * cfg.problem.mu());
    out << nlohmann::json{{"c_alpha", c_alpha}, {"eta_opt_implied", implied}, {"n_runs", samples.n_runs()}, {"eta", cfg.eta}}
               .dump(2)
        << '\n';
    return kOk;
}

/// Maps library exceptions onto the exit-code contract.
template <class Command>
int dispatch(Command&& cmd, const CommandOptions& opts, std::ostream& out, std::ostream& err) {
    try {
        return cmd(opts, out, err);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kConfig;
    } catch (const DivergenceError& e) {
        err << "error: " << e.what() << '\n';
        return kDivergence;
    } catch (const MonteCarloError& e) {
        err << "error: " << e.what() << '\n';
        return kDivergence;
    } catch (const DegenerateSampleError& e) {
        err << "error: " << e.what() << '\n';
        return kEstimation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kFailure;
    }
}

}  // namespace soo::cli
