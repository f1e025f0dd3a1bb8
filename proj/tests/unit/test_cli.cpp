#include "synthmix/cli.hpp"
#include "synthmix/experiment.hpp"
#include "synthmix/scenario.hpp"

#include <doctest.h>

#include <cstdlib>
#include <sys/wait.h>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace synthmix;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli_main(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("synthmix_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

fs::path write_json(const fs::path& dir, const std::string& name, const nlohmann::json& j) {
    const fs::path p = dir / name;
    std::ofstream(p) << j.dump();
    return p;
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
    CHECK(run({}).code == kExitValidation);
    CHECK(run({"bogus"}).code == kExitValidation);
    const auto r = run({"check", "--no-such-flag"});
    CHECK(r.code == kExitValidation);
    CHECK(r.err.find("no-such-flag") != std::string::npos);
    CHECK(run({"--format", "xml", "check"}).code == kExitValidation);
    CHECK(run({"--config", "/nonexistent.json", "check"}).code == kExitValidation);
    CHECK(run({"figure", "fig9"}).code == kExitValidation);
}

TEST_CASE("check on a proportional scenario is guaranteed") {
    const auto dir = scratch("check");
    ScenarioConfig c;
    c.synthetic_feature_mode = SyntheticFeatureMode::PrivateCopy;
    c.set_constant_weights(0.9, 1.0);
    const auto cfg = write_json(dir, "c.json", config_to_json(c));
    const auto r = run({"--config", cfg.string(), "check"});
    CHECK(r.code == kExitOk);
    CHECK(r.out.find("guaranteed=true") != std::string::npos);
    CHECK(r.out.find("rho_q=") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("limits at alpha = 1 exits with 2") {
    const auto dir = scratch("limits");
    const auto r = run({"--out", dir.string(), "--alpha", "1", "limits"});
    CHECK(r.code == kExitDivergence);
    CHECK(r.err.find("spectral radius") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "limits.csv"));

    const auto ok = run({"--out", dir.string(), "--alpha", "0.5", "limits"});
    CHECK(ok.code == kExitOk);
    CHECK(fs::exists(dir / "limits.csv"));
    fs::remove_all(dir);
}

TEST_CASE("manifest replay reproduces the table byte for byte") {
    const auto d1 = scratch("replay1");
    const auto d2 = scratch("replay2");
    REQUIRE(run({"--out", d1.string(), "--seed", "17", "theory"}).code == kExitOk);
    REQUIRE(run({"--out", d2.string(), "--config", (d1 / "theory.manifest.json").string(), "theory"}).code ==
            kExitOk);
    const std::string a = slurp(d1 / "theory.csv");
    CHECK_FALSE(a.empty());
    CHECK(a == slurp(d2 / "theory.csv"));

    REQUIRE(run({"--out", d1.string(), "figure", "fig5"}).code == kExitOk);
    REQUIRE(run({"--out", d2.string(), "--config", (d1 / "fig5.manifest.json").string(), "figure", "fig5"})
                .code == kExitOk);
    CHECK(slurp(d1 / "fig5.csv") == slurp(d2 / "fig5.csv"));
    fs::remove_all(d1);
    fs::remove_all(d2);
}

TEST_CASE("json format") {
    const auto dir = scratch("json");
    REQUIRE(run({"--out", dir.string(), "--format", "json", "theory"}).code == kExitOk);
    const auto arr = nlohmann::json::parse(slurp(dir / "theory.json"));
    CHECK(arr.is_array());
    CHECK(arr.size() > 0);
    const auto cert = run({"--format", "json", "check"});
    CHECK(nlohmann::json::parse(cert.out).contains("rho_q"));
    fs::remove_all(dir);
}

TEST_CASE("mc report") {
    const auto dir = scratch("mc");
    const auto r = run({"--out", dir.string(), "--reps", "400", "mc", "--generation", "2"});
    CHECK(r.code == kExitOk);
    const auto report = nlohmann::json::parse(slurp(dir / "mc_report.json"));
    CHECK(report.at("reps") == 400);
    CHECK(report.at("generation") == 2);
    CHECK(report.at("max_abs_z").get<double>() < 4.5);
    CHECK(run({"mc", "--generation", "99"}).code == kExitValidation);
    fs::remove_all(dir);
}

TEST_CASE("invalid config values exit with 1") {
    const auto dir = scratch("badcfg");
    const auto cfg = write_json(dir, "bad.json", {{"dim", 2}, {"private_rank", 5}});
    CHECK(run({"--config", cfg.string(), "theory"}).code == kExitValidation);
    const auto typo = write_json(dir, "typo.json", {{"sigma", 1.0}});
    const auto r = run({"--config", typo.string(), "theory"});
    CHECK(r.code == kExitValidation);
    CHECK(r.err.find("sigma") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("installed binary returns the documented exit codes") {
    const char* exe = std::getenv("SYNTHMIX_CLI");
    if (exe == nullptr) return;
    const auto dir = scratch("proc");
    const std::string base = std::string("\"") + exe + "\" --out \"" + dir.string() + "\" ";
    const auto status = [](int raw) { return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1; };
    CHECK(status(std::system((base + "check >/dev/null").c_str())) == 0);
    CHECK(status(std::system((base + "--alpha 1 limits >/dev/null 2>&1").c_str())) == 2);
    CHECK(status(std::system((base + "--bogus check >/dev/null 2>&1").c_str())) == 1);
    fs::remove_all(dir);
}
