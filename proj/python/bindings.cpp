#include "synthmix/cli.hpp"
#include "synthmix/dynamics.hpp"
#include "synthmix/errors.hpp"
#include "synthmix/experiment.hpp"
#include "synthmix/montecarlo.hpp"
#include "synthmix/scenario.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace synthmix;
using nlohmann::json;

namespace {

ScenarioConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return config_from_json(j);
}

GramSet make_grams(const std::vector<Matrix>& private_grams, const Matrix& public_gram,
                   const std::vector<Matrix>& synthetic_grams) {
    GramSet g;
    g.private_grams = private_grams;
    g.public_gram = public_gram;
    g.synthetic_grams = synthetic_grams;
    return g;
}

py::dict certificate_dict(const ConvergenceCertificate& c) {
    py::dict d;
    d["lemma1_applicable"] = c.lemma1_applicable;
    d["lambda"] = c.lambda ? py::object(py::float_(*c.lambda)) : py::object(py::none());
    d["gamma"] = c.gamma ? py::object(py::float_(*c.gamma)) : py::object(py::none());
    d["fit_residual"] = c.fit_residual;
    d["rho_q"] = c.rho_q;
    d["guaranteed"] = c.guaranteed;
    return d;
}

std::string records_json(const std::vector<MetricRecord>& records) { return records_to_json(records).dump(); }

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Moment dynamics of interacting regression models retrained on shared synthetic data";
    m.attr("__version__") = std::string(kToolVersion);

    static py::exception<Error> base_error(m, "SynthmixError");
    static py::exception<DivergenceError> divergence_error(m, "DivergenceError", base_error.ptr());
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const DivergenceError& e) {
            py::set_error(divergence_error, e.what());
        } catch (const Error& e) {
            py::set_error(base_error, e.what());
        }
    });

    m.def("pinv", &pinv, py::arg("a"), py::arg("rel_tol") = kDefaultPinvTolerance);
    m.def("kron", &kron, py::arg("a"), py::arg("b"));
    m.def("spectral_radius", [](const Matrix& a) { return spectral_radius(a).radius; }, py::arg("a"));
    m.def("block_diag", [](const std::vector<Matrix>& blocks) { return block_diag(blocks); }, py::arg("blocks"));

    m.def(
        "build_operators",
        [](const std::vector<Matrix>& private_grams, const Matrix& public_gram,
           const std::vector<Matrix>& synthetic_grams, double alpha, double beta) {
            const auto ops = build_operators(make_grams(private_grams, public_gram, synthetic_grams), alpha, beta);
            py::dict d;
            d["g"] = ops.g;
            d["p"] = ops.p;
            d["q"] = ops.q;
            d["pi"] = ops.pi;
            return d;
        },
        py::arg("private_grams"), py::arg("public_gram"), py::arg("synthetic_grams"), py::arg("alpha"),
        py::arg("beta"));

    m.def(
        "check_lemma1",
        [](const std::vector<Matrix>& private_grams, const Matrix& public_gram,
           const std::vector<Matrix>& synthetic_grams, double alpha, double beta) {
            return certificate_dict(check_lemma1(make_grams(private_grams, public_gram, synthetic_grams), alpha, beta));
        },
        py::arg("private_grams"), py::arg("public_gram"), py::arg("synthetic_grams"), py::arg("alpha"),
        py::arg("beta"));

    m.def(
        "_conditional_moments",
        [](const std::string& config_json) {
            const Scenario sc = materialize(parse_config(config_json));
            const auto states = run_conditional(sc.grams, sc.weights, sc.synthetic_grams, sc.truth.sigma2);
            py::list out;
            for (const auto& s : states) out.append(py::make_tuple(s.m, s.c));
            return out;
        },
        py::arg("config_json"));

    m.def(
        "_trajectory",
        [](const std::string& config_json) {
            const Scenario sc = materialize(parse_config(config_json));
            const auto rows = trajectory_records(sc, sc.config.alpha_schedule.front(), sc.config.beta_schedule.front());
            return records_json(rows);
        },
        py::arg("config_json"));

    m.def(
        "_limits",
        [](const std::string& config_json) {
            const Scenario sc = materialize(parse_config(config_json));
            const double a = sc.config.alpha_schedule.front();
            const double b = sc.config.beta_schedule.front();
            return records_json(efficiency_records(sc, a, b));
        },
        py::arg("config_json"));

    m.def(
        "_estimate_moments",
        [](const std::string& config_json, std::size_t n_reps, std::uint64_t base_seed, int generation,
           bool condition_on_initial, unsigned threads) {
            const ScenarioConfig c = parse_config(config_json);
            EmpiricalMoments e;
            {
                py::gil_scoped_release release;
                e = estimate_moments(c, n_reps, base_seed, generation, condition_on_initial, threads);
            }
            py::dict d;
            d["mean"] = e.mean;
            d["cov"] = e.cov;
            d["n_reps"] = e.n_reps;
            d["mean_standard_error"] = e.mean_standard_error;
            return d;
        },
        py::arg("config_json"), py::arg("n_reps"), py::arg("base_seed"), py::arg("generation"),
        py::arg("condition_on_initial"), py::arg("threads") = 0);

    m.def(
        "run_preset",
        [](const std::string& name, const std::string& out_dir, const std::string& format, unsigned threads) {
            const auto preset = make_preset(name);
            ExperimentOutput o;
            {
                py::gil_scoped_release release;
                o = run_experiment(preset, out_dir, parse_format(format), "python run_preset " + name, threads);
            }
            return py::make_tuple(o.table.string(), o.manifest.string());
        },
        py::arg("name"), py::arg("out_dir"), py::arg("format") = "csv", py::arg("threads") = 0);

    m.def(
        "cli_main",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            const int code = cli_main(args, out, err);
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"));
}
