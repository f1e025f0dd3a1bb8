#include "synthmix/cli.hpp"

#include "synthmix/dynamics.hpp"
#include "synthmix/errors.hpp"
#include "synthmix/experiment.hpp"
#include "synthmix/montecarlo.hpp"
#include "synthmix/scenario.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>

namespace synthmix {

using nlohmann::json;

namespace {

struct GlobalOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir = ".";
    std::size_t reps = 20000;
    std::string format = "csv";
    std::optional<double> alpha;
    std::optional<double> beta;
    unsigned threads = 0;
};

/// Accepts a scenario config or a manifest written by run_experiment.
ScenarioConfig read_config_or_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config '" + path + "': " + e.what());
    }
    if (j.is_object() && j.contains("tool") && j.contains("config")) return config_from_json(j.at("config"));
    return config_from_json(j);
}

ScenarioConfig resolve_config(const GlobalOptions& g, std::optional<ScenarioConfig> fallback = std::nullopt) {
    ScenarioConfig c = !g.config_path.empty() ? read_config_or_manifest(g.config_path)
                                               : fallback.value_or(ScenarioConfig{});
    if (g.seed) c.seed = *g.seed;
    if (g.alpha || g.beta) {
        const double a = g.alpha.value_or(c.alpha_schedule.empty() ? 0.5 : c.alpha_schedule.front());
        const double b = g.beta.value_or(c.beta_schedule.empty() ? 0.5 : c.beta_schedule.front());
        c.set_constant_weights(a, b);
    }
    c.validate();
    return c;
}

std::string command_line(const std::vector<std::string>& args) {
    std::string s(kToolName);
    for (const auto& a : args) s += " " + a;
    return s;
}

json certificate_json(const ConvergenceCertificate& cert) {
    return {
        {"lemma1_applicable", cert.lemma1_applicable},
        {"lambda", cert.lambda ? json(*cert.lambda) : json(nullptr)},
        {"gamma", cert.gamma ? json(*cert.gamma) : json(nullptr)},
        {"fit_residual", cert.fit_residual},
        {"rho_q", cert.rho_q},
        {"guaranteed", cert.guaranteed},
    };
}

void print_certificate(std::ostream& out, const ConvergenceCertificate& cert, OutputFormat fmt) {
    if (fmt == OutputFormat::Json) {
        out << certificate_json(cert).dump(2) << '\n';
        return;
    }
    out << "lemma1_applicable=" << (cert.lemma1_applicable ? "true" : "false") << '\n'
        << "lambda=" << (cert.lambda ? format_double(*cert.lambda) : "none") << '\n'
        << "gamma=" << (cert.gamma ? format_double(*cert.gamma) : "none") << '\n'
        << "fit_residual=" << format_double(cert.fit_residual) << '\n'
        << "rho_q=" << format_double(cert.rho_q) << '\n'
        << "guaranteed=" << (cert.guaranteed ? "true" : "false") << '\n';
}

/// Stationary gram set and weights used by `limits` and `check`.
struct StationaryView {
    Scenario scenario;
    GramSet grams;
    double alpha;
    double beta;
};

StationaryView stationary_view(const ScenarioConfig& c) {
    StationaryView v{materialize(c), {}, 0.0, 0.0};
    v.grams = v.scenario.grams;
    v.grams.synthetic_grams = v.scenario.synthetic_grams.front();
    v.alpha = c.alpha_schedule.front();
    v.beta = c.beta_schedule.front();
    return v;
}

int run_check(const GlobalOptions& g, std::ostream& out) {
    const auto view = stationary_view(resolve_config(g));
    print_certificate(out, check_lemma1(view.grams, view.alpha, view.beta), parse_format(g.format));
    return kExitOk;
}

int run_limits(const GlobalOptions& g, const std::string& cmd, std::ostream& out, std::ostream& err) {
    const ScenarioConfig c = resolve_config(g);
    const auto view = stationary_view(c);
    const auto cert = check_lemma1(view.grams, view.alpha, view.beta);
    const auto fmt = parse_format(g.format);
    print_certificate(out, cert, fmt);
    if (!(cert.rho_q < 1.0 - DynamicsOptions{}.divergence_slack)) {
        err << "error: spectral radius of Q is " << format_double(cert.rho_q)
            << " >= 1 at alpha=" << format_double(view.alpha) << ", beta=" << format_double(view.beta)
            << "; the moment recursion has no finite limit\n";
        return kExitDivergence;
    }
    ScenarioConfig stationary = c;
    stationary.set_constant_weights(view.alpha, view.beta);
    const auto preset = single_config_experiment(stationary, ExperimentKind::Efficiency, "limits");
    const auto output = run_experiment(preset, g.out_dir, fmt, cmd, g.threads);
    out << "rows=" << output.result.records.size() << '\n'
        << "table=" << output.table.string() << '\n'
        << "manifest=" << output.manifest.string() << '\n';
    return kExitOk;
}

int run_theory(const GlobalOptions& g, const std::string& cmd, std::ostream& out) {
    const auto preset = single_config_experiment(resolve_config(g), ExperimentKind::Trajectory, "theory");
    const auto output = run_experiment(preset, g.out_dir, parse_format(g.format), cmd, g.threads);
    out << "rows=" << output.result.records.size() << '\n'
        << "table=" << output.table.string() << '\n'
        << "manifest=" << output.manifest.string() << '\n';
    return kExitOk;
}

int run_efficiency(const GlobalOptions& g, const std::vector<double>& betas, const std::string& cmd,
                   std::ostream& out) {
    auto preset = make_preset("fig3");
    preset.name = "efficiency";
    preset.config = resolve_config(g, preset.config);
    if (!betas.empty()) {
        preset.betas = betas;
    } else if (g.beta) {
        preset.betas = {*g.beta};
    }
    const auto output = run_experiment(preset, g.out_dir, parse_format(g.format), cmd, g.threads);
    out << "rows=" << output.result.records.size() << '\n'
        << "skipped_cells=" << output.result.skipped.size() << '\n'
        << "table=" << output.table.string() << '\n'
        << "manifest=" << output.manifest.string() << '\n';
    return kExitOk;
}

int run_figure(const GlobalOptions& g, const std::string& name, const std::string& cmd, std::ostream& out) {
    auto preset = make_preset(name);
    preset.config = resolve_config(g, preset.config);
    if (g.alpha || g.beta) {
        throw ConfigError("figure presets define their own (alpha, beta) grid; drop --alpha/--beta");
    }
    const auto output = run_experiment(preset, g.out_dir, parse_format(g.format), cmd, g.threads);
    out << "rows=" << output.result.records.size() << '\n'
        << "skipped_cells=" << output.result.skipped.size() << '\n'
        << "wall_clock_seconds=" << format_double(output.result.wall_seconds) << '\n'
        << "table=" << output.table.string() << '\n'
        << "manifest=" << output.manifest.string() << '\n';
    return kExitOk;
}

int run_mc(const GlobalOptions& g, std::optional<int> generation, bool unconditional,
           std::optional<std::uint64_t> mc_seed, std::ostream& out) {
    const ScenarioConfig c = resolve_config(g);
    const Scenario scenario = materialize(c);
    const int t = generation.value_or(c.horizon);
    if (t < 0 || t > c.horizon) throw ConfigError("--generation must lie in [0, horizon]");
    const std::uint64_t base_seed = mc_seed.value_or(c.seed + 1);

    const auto states = run_conditional(scenario.grams, scenario.weights, scenario.synthetic_grams,
                                        scenario.truth.sigma2);
    const MomentState& state = states[static_cast<std::size_t>(t)];
    Vector theory_mean;
    Matrix theory_cov;
    if (unconditional) {
        const auto m = unconditional_moments_general(state, scenario.truth, scenario.grams);
        theory_mean = m.mean;
        theory_cov = m.cov;
    } else {
        theory_mean = state.m * initial_ols_vector(conditional_initial_data(scenario));
        theory_cov = state.c;
    }

    const auto emp = estimate_moments(scenario, g.reps, base_seed, t, !unconditional, g.threads);
    double max_z = 0.0;
    for (Eigen::Index i = 0; i < theory_mean.size(); ++i) {
        const double se = emp.mean_standard_error(i);
        const double diff = std::abs(emp.mean(i) - theory_mean(i));
        const double z = se > 0.0 ? diff / se : (diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
        max_z = std::max(max_z, z);
    }
    const double cov_norm = theory_cov.norm();
    const double cov_err = cov_norm > 0.0 ? (emp.cov - theory_cov).norm() / cov_norm : emp.cov.norm();

    json report = {
        {"mode", unconditional ? "unconditional" : "conditional"},
        {"generation", t},
        {"reps", emp.n_reps},
        {"base_seed", base_seed},
        {"scenario_seed", c.seed},
        {"max_abs_z", max_z},
        {"cov_frobenius_rel_error", cov_err},
        {"mean_within_3se", max_z < 3.0},
        {"cov_within_5pct", cov_err < 0.05},
        {"config", config_to_json(c)},
    };
    std::error_code ec;
    std::filesystem::create_directories(g.out_dir, ec);
    if (ec) throw IoError("cannot create output directory '" + g.out_dir + "': " + ec.message());
    const auto path = std::filesystem::path(g.out_dir) / "mc_report.json";
    std::ofstream f(path);
    if (!f) throw IoError("cannot write '" + path.string() + "'");
    f << report.dump(2) << '\n';

    out << "mode=" << report["mode"].get<std::string>() << '\n'
        << "generation=" << t << '\n'
        << "reps=" << emp.n_reps << '\n'
        << "max_abs_z=" << format_double(max_z) << '\n'
        << "cov_frobenius_rel_error=" << format_double(cov_err) << '\n'
        << "report=" << path.string() << '\n';
    return kExitOk;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Moment dynamics of interacting models retrained on shared synthetic data", std::string(kToolName)};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions g;
    app.add_option("--config", g.config_path, "Scenario JSON (or a manifest written by a previous run)");
    app.add_option("--seed", g.seed, "Override the scenario seed");
    app.add_option("--out", g.out_dir, "Output directory");
    app.add_option("--reps", g.reps, "Monte Carlo replications")->check(CLI::Range(std::size_t{2}, std::size_t{100000000}));
    app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--alpha", g.alpha, "Constant alpha for every generation")->check(CLI::Range(0.0, 1.0));
    app.add_option("--beta", g.beta, "Constant beta for every generation")->check(CLI::Range(0.0, 1.0));
    app.add_option("--threads", g.threads, "Worker threads (0 = hardware concurrency)");

    auto* theory = app.add_subcommand("theory", "Per-generation moment trajectories for one scenario");
    auto* limits = app.add_subcommand("limits", "Stationary limits plus the convergence certificate");
    auto* check = app.add_subcommand("check", "Convergence certificate only");

    auto* mc = app.add_subcommand("mc", "Monte Carlo moments compared against the analytic moments");
    std::optional<int> mc_generation;
    bool mc_unconditional = false;
    std::optional<std::uint64_t> mc_seed;
    mc->add_option("--generation", mc_generation, "Generation to compare (default: horizon)");
    mc->add_flag("--unconditional", mc_unconditional, "Redraw initial responses per replication");
    mc->add_option("--mc-seed", mc_seed, "Base seed for replication streams (default: scenario seed + 1)");

    auto* efficiency = app.add_subcommand("efficiency", "Relative efficiency sweep over alpha");
    std::vector<double> eff_betas;
    efficiency->add_option("--betas", eff_betas, "Beta panel values")->check(CLI::Range(0.0, 1.0));

    auto* figure = app.add_subcommand("figure", "Run a figure preset");
    std::string figure_name;
    figure->add_option("name", figure_name, "fig3, fig4 or fig5")->required()->check(CLI::IsMember({"fig3", "fig4", "fig5"}));

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n' << app.help();
        return kExitValidation;
    }

    const std::string cmd = command_line(args);
    try {
        if (*theory) return run_theory(g, cmd, out);
        if (*limits) return run_limits(g, cmd, out, err);
        if (*check) return run_check(g, out);
        if (*mc) return run_mc(g, mc_generation, mc_unconditional, mc_seed, out);
        if (*efficiency) return run_efficiency(g, eff_betas, cmd, out);
        if (*figure) return run_figure(g, figure_name, cmd, out);
    } catch (const DivergenceError& e) {
        err << "error: " << e.what() << '\n';
        return kExitDivergence;
    } catch (const Error& e) {
        err << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
        return kExitValidation;
    }
    err << app.help();
    return kExitValidation;
}

int cli_main(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return cli_main(args, std::cout, std::cerr);
}

}  // namespace synthmix
