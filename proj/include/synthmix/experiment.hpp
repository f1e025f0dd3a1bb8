#pragma once

#include "synthmix/dynamics.hpp"
#include "synthmix/metrics.hpp"
#include "synthmix/scenario.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace synthmix {

inline constexpr std::string_view kToolName = "synthmix";
inline constexpr std::string_view kToolVersion = "0.1.0";

enum class ExperimentKind {
    Trajectory,  // per-generation moments for t = 0..T
    Efficiency,  // t -> infinity limits
};

/// A scenario plus an (alpha, beta) grid. With use_config_schedule the grid has
/// one cell and the scenario's own (possibly non-constant) schedules are used.
struct ExperimentPreset {
    std::string name;
    ExperimentKind kind = ExperimentKind::Trajectory;
    ScenarioConfig config;
    std::vector<double> alphas;
    std::vector<double> betas;
    bool use_config_schedule = false;
    std::vector<std::string> notes;
};

/// fig3: K=4, d=15, private rank 5, alpha in {0, 0.05, ..., 0.95}, beta in {0.25, 0.5, 1}.
/// fig4: K=3, d=50, rank 15, alpha, beta in {0, 0.5, 1}, T=15.
/// fig5: fig4 with K=2.
ExperimentPreset make_preset(std::string_view name);

/// Single-cell trajectory experiment over the config's own schedules.
ExperimentPreset single_config_experiment(const ScenarioConfig& config, ExperimentKind kind,
                                          std::string name);

struct CellFailure {
    double alpha = 0.0;
    double beta = 0.0;
    std::string reason;
    double rho = 0.0;
};

struct ExperimentResult {
    std::vector<MetricRecord> records;
    std::vector<CellFailure> skipped;
    double wall_seconds = 0.0;
};

/// Metric rows for every generation of the scenario's schedule. alpha/beta are
/// only used as row labels.
std::vector<MetricRecord> trajectory_records(const Scenario& scenario, double alpha, double beta,
                                             const DynamicsOptions& opts = {});

/// Limit rows (generation = kLimitGeneration). Throws DivergenceError when rho(Q) >= 1.
std::vector<MetricRecord> efficiency_records(const Scenario& scenario, double alpha, double beta,
                                             const DynamicsOptions& opts = {});

/// Runs every grid cell (in parallel when threads != 1). Rows are ordered by
/// cell (beta-major, then alpha), generation, entity. Divergent cells are
/// reported in `skipped`, never emitted as rows.
ExperimentResult run_grid(const ExperimentPreset& preset, unsigned threads = 0,
                          const DynamicsOptions& opts = {});

enum class OutputFormat { Csv, Json };

OutputFormat parse_format(std::string_view s);

void write_csv(std::ostream& out, const std::vector<MetricRecord>& records);
nlohmann::json records_to_json(const std::vector<MetricRecord>& records);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

struct ExperimentOutput {
    std::filesystem::path table;
    std::filesystem::path manifest;
    ExperimentResult result;
};

/// Writes <out_dir>/<name>.csv|json and <out_dir>/<name>.manifest.json.
/// Throws ConfigError for an empty grid (before any file is created) and
/// IoError with the offending path on write failures.
ExperimentOutput run_experiment(const ExperimentPreset& preset, const std::filesystem::path& out_dir,
                                OutputFormat format, const std::string& command,
                                unsigned threads = 0);

nlohmann::json make_manifest(const ExperimentPreset& preset, const ExperimentResult& result,
                             const std::string& command, OutputFormat format);

}  // namespace synthmix
