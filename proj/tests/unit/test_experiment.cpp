#include "support.hpp"
#include "synthmix/errors.hpp"
#include "synthmix/experiment.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

using namespace synthmix;
using namespace synthmix::testing;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("synthmix_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

ExperimentPreset small_efficiency() {
    auto p = make_preset("fig3");
    ScenarioConfig& c = p.config;
    c.dim = 6;
    c.private_rank = 2;
    c.public_rank = 6;
    c.private_rows.assign(4, 20);
    c.synthetic_rows.assign(4, 20);
    c.public_rows = 20;
    p.alphas = {0.0, 0.25, 0.5, 0.75};
    p.betas = {1.0};
    return p;
}

}  // namespace

TEST_CASE("presets") {
    const auto f3 = make_preset("fig3");
    CHECK(f3.config.k_entities == 4);
    CHECK(f3.config.dim == 15);
    CHECK(f3.config.private_rank == 5);
    CHECK(f3.alphas.size() == 20);
    CHECK(f3.alphas.back() < 1.0);
    const auto f4 = make_preset("fig4");
    CHECK(f4.config.k_entities == 3);
    CHECK(f4.config.dim == 50);
    CHECK(f4.config.private_rank == 15);
    CHECK(f4.config.horizon == 15);
    CHECK(make_preset("fig5").config.k_entities == 2);
    CHECK_THROWS_AS(make_preset("fig6"), ConfigError);
}

TEST_CASE("fig4 grid structure") {
    const auto result = run_grid(make_preset("fig4"));
    CHECK(result.skipped.empty());
    // per generation: K mse, K*K mspe, K efficiency, one dispersion
    const std::size_t per_generation = 3 + 9 + 3 + 1;
    CHECK(result.records.size() == 9 * 16 * per_generation);
    std::map<std::pair<double, double>, int> cells;
    for (const auto& r : result.records) {
        cells[{r.alpha, r.beta}] += 1;
        CHECK(std::isfinite(r.value));
        if (r.metric != MetricName::Dispersion) CHECK(r.value >= 0.0);
        if (r.metric == MetricName::RelEfficiency) CHECK(r.value > 0.0);
    }
    CHECK(cells.size() == 9);
    // Rows come beta-major, then alpha.
    CHECK(result.records.front().beta == 0.0);
    CHECK(result.records.front().alpha == 0.0);
    CHECK(result.records.back().beta == 1.0);
    CHECK(result.records.back().alpha == 1.0);
}

TEST_CASE("alpha = 0 trajectories are constant in the generation") {
    auto p = make_preset("fig5");
    p.alphas = {0.0};
    p.betas = {0.5};
    const auto result = run_grid(p);
    std::map<std::tuple<int, int, std::optional<int>>, double> first;
    for (const auto& r : result.records) {
        const auto key = std::make_tuple(static_cast<int>(r.metric), r.entity, r.target);
        if (r.generation == 0) {
            first[key] = r.value;
        } else {
            CHECK(r.value == doctest::Approx(first.at(key)).epsilon(1e-12));
        }
    }
}

TEST_CASE("efficiency rows stay in (0, 1.05] on a reduced four-entity design") {
    const auto result = run_grid(small_efficiency());
    CHECK(result.skipped.empty());
    int count = 0;
    for (const auto& r : result.records) {
        CHECK(r.generation == kLimitGeneration);
        if (r.metric != MetricName::RelEfficiency) continue;
        ++count;
        CHECK(r.value > 0.0);
        CHECK(r.value <= 1.05);
    }
    CHECK(count == 4 * 5);
}

TEST_CASE("divergent cells are skipped, never emitted") {
    auto p = small_efficiency();
    p.alphas = {0.5, 1.0};
    const auto result = run_grid(p);
    REQUIRE(result.skipped.size() == 1);
    CHECK(result.skipped[0].alpha == 1.0);
    CHECK(result.skipped[0].rho >= 1.0 - 1e-9);
    for (const auto& r : result.records) CHECK(r.alpha == 0.5);
}

TEST_CASE("empty grid is an error and writes nothing") {
    auto p = small_efficiency();
    p.alphas.clear();
    const auto dir = scratch_dir("empty");
    CHECK_THROWS_AS(run_experiment(p, dir, OutputFormat::Csv, "test"), ConfigError);
    CHECK_FALSE(fs::exists(dir));
}

TEST_CASE("CSV output is deterministic and well formed") {
    const auto p = small_efficiency();
    const auto d1 = scratch_dir("csv1");
    const auto d2 = scratch_dir("csv2");
    const auto o1 = run_experiment(p, d1, OutputFormat::Csv, "test", 1);
    const auto o2 = run_experiment(p, d2, OutputFormat::Csv, "test", 3);
    const std::string text = slurp(o1.table);
    CHECK(text == slurp(o2.table));
    CHECK(text.rfind("alpha,beta,seed,generation,entity,metric,target,value\n", 0) == 0);
    CHECK(text.find("nan") == std::string::npos);
    CHECK(text.find('\r') == std::string::npos);

    std::istringstream lines(text);
    std::string line;
    std::getline(lines, line);
    std::size_t rows = 0;
    while (std::getline(lines, line)) {
        ++rows;
        CHECK(std::count(line.begin(), line.end(), ',') == 7);
    }
    CHECK(rows == o1.result.records.size());

    const auto manifest = nlohmann::json::parse(slurp(o1.manifest));
    CHECK(manifest.at("tool") == "synthmix");
    CHECK(manifest.at("rows") == rows);
    CHECK(manifest.at("config") == config_to_json(p.config));
    fs::remove_all(d1);
    fs::remove_all(d2);
}

TEST_CASE("JSON output carries the same fields") {
    const auto p = small_efficiency();
    const auto dir = scratch_dir("json");
    const auto out = run_experiment(p, dir, OutputFormat::Json, "test");
    const auto arr = nlohmann::json::parse(slurp(out.table));
    REQUIRE(arr.size() == out.result.records.size());
    for (const char* key : {"alpha", "beta", "seed", "generation", "entity", "metric", "target", "value"}) {
        CHECK(arr[0].contains(key));
    }
    fs::remove_all(dir);
}

TEST_CASE("format helpers") {
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(1.0) == "1");
    CHECK(format_double(-0.25) == "-0.25");
    CHECK(parse_format("json") == OutputFormat::Json);
    CHECK_THROWS_AS(parse_format("xml"), ConfigError);
}

TEST_CASE("unwritable output directory reports the path") {
    const auto p = small_efficiency();
    const fs::path blocker = scratch_dir("blocker");
    std::ofstream(blocker) << "x";
    try {
        (void)run_experiment(p, blocker / "sub", OutputFormat::Csv, "test");
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("blocker") != std::string::npos);
    }
    fs::remove(blocker);
}
