#include "synthmix/experiment.hpp"

#include "synthmix/errors.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <ctime>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

namespace synthmix {

using nlohmann::json;

namespace {

std::vector<double> alpha_grid_fig3() {
    std::vector<double> out;
    for (int i = 0; i < 20; ++i) out.push_back(static_cast<double>(i) / 20.0);
    return out;
}

ScenarioConfig fig4_config(int k) {
    ScenarioConfig c;
    c.k_entities = k;
    c.dim = 50;
    c.private_rows.assign(static_cast<std::size_t>(k), 100);
    c.public_rows = 100;
    c.private_rank = 15;
    c.public_rank = 50;
    c.synthetic_rows.assign(static_cast<std::size_t>(k), 100);
    c.horizon = 15;
    c.sigma2 = 1.0;
    c.seed = 4;
    c.feature_mode = FeatureMode::LowRank;
    c.synthetic_feature_mode = SyntheticFeatureMode::Fixed;
    c.set_constant_weights(0.5, 0.5);
    return c;
}

MetricRecord record(int t, int entity, MetricName metric, double value, double alpha, double beta,
                    std::uint64_t seed, std::optional<int> target = std::nullopt) {
    MetricRecord r;
    r.generation = t;
    r.entity = entity;
    r.metric = metric;
    r.target = target;
    r.value = value;
    r.alpha = alpha;
    r.beta = beta;
    r.seed = seed;
    return r;
}

bool pooled_is_full_rank(const GramSet& grams) {
    Matrix pooled = grams.public_gram;
    for (const auto& s : grams.private_grams) pooled += s;
    return is_full_rank(pooled);
}

/// Rows for one set of unconditional moments at generation t.
void append_moment_rows(std::vector<MetricRecord>& out, const Scenario& scenario,
                        const UnconditionalMoments& moments, const Matrix& m, int t, double alpha,
                        double beta, bool with_efficiency, bool with_mean_efficiency) {
    const auto k = static_cast<int>(scenario.entities());
    const auto seed = scenario.config.seed;
    const double pooled = with_efficiency ? pooled_mvue_mse(scenario.grams, scenario.truth) : 0.0;
    double efficiency_sum = 0.0;
    for (int i = 0; i < k; ++i) {
        const double mse = entity_mse(moments, scenario.truth, i);
        out.push_back(record(t, i, MetricName::Mse, mse, alpha, beta, seed));
        for (int target = 0; target < k; ++target) {
            const double v = entity_mspe(moments, scenario.truth, i,
                                         scenario.private_features[static_cast<std::size_t>(target)]);
            out.push_back(record(t, i, MetricName::Mspe, v, alpha, beta, seed, target));
        }
        if (with_efficiency && mse > 0.0) {
            const double eff = pooled / mse;
            efficiency_sum += eff;
            out.push_back(record(t, i, MetricName::RelEfficiency, eff, alpha, beta, seed));
        }
    }
    if (with_efficiency && with_mean_efficiency) {
        out.push_back(record(t, kAggregateEntity, MetricName::RelEfficiency, efficiency_sum / k,
                             alpha, beta, seed));
    }
    out.push_back(record(t, kAggregateEntity, MetricName::Dispersion,
                         dispersion(m, scenario.entities(), scenario.dim()), alpha, beta, seed));
}

std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

}  // namespace

ExperimentPreset make_preset(std::string_view name) {
    ExperimentPreset p;
    p.name = std::string(name);
    if (name == "fig3") {
        p.kind = ExperimentKind::Efficiency;
        ScenarioConfig c;
        c.k_entities = 4;
        c.dim = 15;
        c.private_rows.assign(4, 200);
        c.public_rows = 200;
        c.private_rank = 5;
        c.public_rank = 15;
        c.synthetic_rows.assign(4, 200);
        c.horizon = 1;
        c.sigma2 = 1.0;
        c.seed = 3;
        c.feature_mode = FeatureMode::LowRank;
        c.synthetic_feature_mode = SyntheticFeatureMode::Fixed;
        c.set_constant_weights(0.0, 1.0);
        p.config = c;
        p.alphas = alpha_grid_fig3();
        p.betas = {0.25, 0.5, 1.0};
        p.notes = {
            "alpha grid spacing and beta panel values are a shape-faithful choice, not published values",
            "sample sizes (200 rows per dataset) and sigma2 = 1 are not published; chosen for this preset",
        };
    } else if (name == "fig4" || name == "fig5") {
        p.kind = ExperimentKind::Trajectory;
        p.config = fig4_config(name == "fig4" ? 3 : 2);
        p.alphas = {0.0, 0.5, 1.0};
        p.betas = {0.0, 0.5, 1.0};
        p.notes = {"sample sizes (100 rows per dataset) and sigma2 = 1 are not published; chosen for this preset"};
    } else {
        throw ConfigError("unknown preset '" + std::string(name) + "' (expected fig3, fig4 or fig5)");
    }
    return p;
}

ExperimentPreset single_config_experiment(const ScenarioConfig& config, ExperimentKind kind,
                                          std::string name) {
    config.validate();
    ExperimentPreset p;
    p.name = std::move(name);
    p.kind = kind;
    p.config = config;
    p.use_config_schedule = true;
    p.alphas = {config.alpha_schedule.empty() ? 0.0 : config.alpha_schedule.front()};
    p.betas = {config.beta_schedule.empty() ? 1.0 : config.beta_schedule.front()};
    return p;
}

std::vector<MetricRecord> trajectory_records(const Scenario& scenario, double alpha, double beta,
                                             const DynamicsOptions& opts) {
    const auto chain = operator_chain(scenario.grams, scenario.weights, scenario.synthetic_grams, opts);
    const auto states = run_conditional(chain, scenario.synthetic_grams, scenario.truth.sigma2, opts);
    const bool with_efficiency = pooled_is_full_rank(scenario.grams);

    std::vector<MetricRecord> out;
    for (const auto& state : states) {
        const auto moments = unconditional_moments_general(state, scenario.truth, scenario.grams);
        append_moment_rows(out, scenario, moments, state.m, state.generation, alpha, beta,
                           with_efficiency, false);
    }
    return out;
}

std::vector<MetricRecord> efficiency_records(const Scenario& scenario, double alpha, double beta,
                                             const DynamicsOptions& opts) {
    if (scenario.synthetic_grams.empty()) throw ConfigError("efficiency: scenario has no synthetic design");
    GramSet grams = scenario.grams;
    grams.synthetic_grams = scenario.synthetic_grams.front();
    const auto ops = build_operators(grams, alpha, beta, opts.pinv_tol);
    const auto limit = asymptotic_moments(ops, grams.lifted_synthetic(), scenario.grams,
                                          scenario.truth, opts);
    std::vector<MetricRecord> out;
    append_moment_rows(out, scenario, limit.moments, limit.m, kLimitGeneration, alpha, beta,
                       pooled_is_full_rank(scenario.grams), true);
    return out;
}

ExperimentResult run_grid(const ExperimentPreset& preset, unsigned threads,
                          const DynamicsOptions& opts) {
    if (preset.alphas.empty() || preset.betas.empty()) {
        throw ConfigError("experiment '" + preset.name + "' has an empty (alpha, beta) grid");
    }
    const auto started = std::chrono::steady_clock::now();
    const Scenario base = materialize(preset.config);

    struct Cell {
        double alpha;
        double beta;
    };
    std::vector<Cell> cells;
    for (double b : preset.betas)
        for (double a : preset.alphas) cells.push_back({a, b});

    std::vector<std::vector<MetricRecord>> rows(cells.size());
    std::vector<std::optional<CellFailure>> failures(cells.size());

    auto run_cell = [&](std::size_t i) {
        const Cell& cell = cells[i];
        Scenario scenario = base;
        if (!preset.use_config_schedule) {
            scenario.weights = MixWeights::constant(cell.alpha, cell.beta, preset.config.horizon);
        }
        try {
            rows[i] = preset.kind == ExperimentKind::Trajectory
                          ? trajectory_records(scenario, cell.alpha, cell.beta, opts)
                          : efficiency_records(scenario, cell.alpha, cell.beta, opts);
        } catch (const DivergenceError& e) {
            failures[i] = CellFailure{cell.alpha, cell.beta, e.what(), e.rho()};
        } catch (const ConditioningError& e) {
            failures[i] = CellFailure{cell.alpha, cell.beta, e.what(), 0.0};
        }
    };

    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, cells.size()));
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;
    auto worker = [&] {
        try {
            for (std::size_t i = next.fetch_add(1); i < cells.size(); i = next.fetch_add(1)) run_cell(i);
        } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
            next = cells.size();
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (error) std::rethrow_exception(error);

    ExperimentResult result;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        result.records.insert(result.records.end(), rows[i].begin(), rows[i].end());
        if (failures[i]) result.skipped.push_back(*failures[i]);
    }
    for (const auto& r : result.records) {
        if (!std::isfinite(r.value)) {
            throw ConditioningError("experiment produced a non-finite " + std::string(to_string(r.metric)) +
                                    " value at alpha=" + format_double(r.alpha) +
                                    ", beta=" + format_double(r.beta));
        }
    }
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

OutputFormat parse_format(std::string_view s) {
    if (s == "csv") return OutputFormat::Csv;
    if (s == "json") return OutputFormat::Json;
    throw ConfigError("unknown output format '" + std::string(s) + "' (expected csv or json)");
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void write_csv(std::ostream& out, const std::vector<MetricRecord>& records) {
    out << "alpha,beta,seed,generation,entity,metric,target,value\n";
    for (const auto& r : records) {
        out << format_double(r.alpha) << ',' << format_double(r.beta) << ',' << r.seed << ','
            << r.generation << ',' << r.entity << ',' << to_string(r.metric) << ',';
        if (r.target) out << *r.target;
        out << ',' << format_double(r.value) << '\n';
    }
}

json records_to_json(const std::vector<MetricRecord>& records) {
    json arr = json::array();
    for (const auto& r : records) {
        arr.push_back({
            {"alpha", r.alpha},
            {"beta", r.beta},
            {"seed", r.seed},
            {"generation", r.generation},
            {"entity", r.entity},
            {"metric", std::string(to_string(r.metric))},
            {"target", r.target ? json(*r.target) : json(nullptr)},
            {"value", r.value},
        });
    }
    return arr;
}

json make_manifest(const ExperimentPreset& preset, const ExperimentResult& result,
                   const std::string& command, OutputFormat format) {
    json skipped = json::array();
    for (const auto& f : result.skipped) {
        skipped.push_back({{"alpha", f.alpha}, {"beta", f.beta}, {"rho", f.rho}, {"reason", f.reason}});
    }
    return {
        {"tool", std::string(kToolName)},
        {"version", std::string(kToolVersion)},
        {"command", command},
        {"experiment", preset.name},
        {"kind", preset.kind == ExperimentKind::Trajectory ? "trajectory" : "efficiency"},
        {"config", config_to_json(preset.config)},
        {"grid", {{"alpha", preset.alphas}, {"beta", preset.betas}, {"use_config_schedule", preset.use_config_schedule}}},
        {"seeds", {{"scenario", preset.config.seed}}},
        {"format", format == OutputFormat::Csv ? "csv" : "json"},
        {"rows", result.records.size()},
        {"skipped_cells", skipped},
        {"notes", preset.notes},
        {"conventions", {{"generation_limit", kLimitGeneration}, {"entity_aggregate", kAggregateEntity}}},
        {"started_at", iso_timestamp()},
        {"wall_clock_seconds", result.wall_seconds},
    };
}

ExperimentOutput run_experiment(const ExperimentPreset& preset, const std::filesystem::path& out_dir,
                                OutputFormat format, const std::string& command, unsigned threads) {
    if (preset.alphas.empty() || preset.betas.empty()) {
        throw ConfigError("experiment '" + preset.name + "' has an empty (alpha, beta) grid");
    }
    ExperimentOutput output;
    output.result = run_grid(preset, threads);
    if (output.result.records.empty()) {
        throw ConditioningError("experiment '" + preset.name + "' produced no rows (every cell diverged)");
    }

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory '" + out_dir.string() + "': " + ec.message());

    output.table = out_dir / (preset.name + (format == OutputFormat::Csv ? ".csv" : ".json"));
    output.manifest = out_dir / (preset.name + ".manifest.json");

    {
        std::ofstream out(output.table, std::ios::binary);
        if (!out) throw IoError("cannot write '" + output.table.string() + "'");
        if (format == OutputFormat::Csv) {
            write_csv(out, output.result.records);
        } else {
            out << records_to_json(output.result.records).dump(1) << '\n';
        }
        if (!out) throw IoError("write failed for '" + output.table.string() + "'");
    }
    {
        std::ofstream out(output.manifest, std::ios::binary);
        if (!out) throw IoError("cannot write '" + output.manifest.string() + "'");
        out << make_manifest(preset, output.result, command, format).dump(2) << '\n';
        if (!out) throw IoError("write failed for '" + output.manifest.string() + "'");
    }
    return output;
}

}  // namespace synthmix
