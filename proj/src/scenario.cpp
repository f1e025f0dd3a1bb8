#include "synthmix/scenario.hpp"

#include "synthmix/errors.hpp"

#include <Eigen/QR>

#include <fstream>
#include <set>
#include <sstream>

namespace synthmix {

using nlohmann::json;

namespace {

const std::set<std::string> kConfigKeys = {
    "k_entities",     "dim",          "private_rows", "public_rows", "private_rank",
    "public_rank",    "synthetic_rows", "alpha_schedule", "beta_schedule", "beta0",
    "sigma2",         "theta_spec",   "horizon",      "seed",        "feature_mode",
    "synthetic_feature_mode",
};

template <typename T>
std::vector<T> scalar_or_array(const json& v, std::size_t broadcast, const char* key) {
    if (v.is_array()) return v.get<std::vector<T>>();
    if (v.is_number()) return std::vector<T>(broadcast, v.get<T>());
    throw ConfigError(std::string("config: '") + key + "' must be a number or an array");
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> n01(0.0, 1.0);
    Matrix z(rows, cols);
    // Row-major fill so a prefix of rows does not depend on the column count.
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) z(i, j) = n01(rng);
    return z;
}

}  // namespace

const char* to_string(FeatureMode m) {
    return m == FeatureMode::Gaussian ? "gaussian" : "low_rank";
}

const char* to_string(SyntheticFeatureMode m) {
    switch (m) {
        case SyntheticFeatureMode::Fixed: return "fixed";
        case SyntheticFeatureMode::RedrawPerGeneration: return "redraw_per_generation";
        case SyntheticFeatureMode::PrivateCopy: return "private_copy";
    }
    return "fixed";
}

void ScenarioConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError("config: " + msg); };
    if (k_entities < 1) fail("k_entities must be >= 1");
    if (dim < 1) fail("dim must be >= 1");
    if (horizon < 0) fail("horizon must be >= 0");
    const auto k = static_cast<std::size_t>(k_entities);
    if (private_rows.size() != k) fail("private_rows needs one entry per entity");
    if (synthetic_rows.size() != k) fail("synthetic_rows needs one entry per entity");
    for (int n : private_rows) if (n < 0) fail("private_rows must be >= 0");
    for (int n : synthetic_rows) if (n < 0) fail("synthetic_rows must be >= 0");
    if (public_rows < 0) fail("public_rows must be >= 0");
    if (private_rank < 0 || private_rank > dim) fail("private_rank must lie in [0, dim]");
    if (public_rank < 0 || public_rank > dim) fail("public_rank must lie in [0, dim]");
    if (alpha_schedule.size() < static_cast<std::size_t>(horizon)) fail("alpha_schedule shorter than horizon");
    if (beta_schedule.size() < static_cast<std::size_t>(horizon)) fail("beta_schedule shorter than horizon");
    for (double a : alpha_schedule) if (!(a >= 0.0 && a <= 1.0)) fail("alpha values must lie in [0, 1]");
    for (double b : beta_schedule) if (!(b >= 0.0 && b <= 1.0)) fail("beta values must lie in [0, 1]");
    if (beta0 && !(*beta0 >= 0.0 && *beta0 <= 1.0)) fail("beta0 must lie in [0, 1]");
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) fail("sigma2 must be positive");
    if (const auto* explicit_theta = std::get_if<std::vector<double>>(&theta_spec)) {
        if (explicit_theta->size() != static_cast<std::size_t>(dim)) fail("theta_spec length must equal dim");
    }
}

MixWeights ScenarioConfig::weights() const {
    MixWeights w;
    const auto horizon_sz = static_cast<std::size_t>(horizon);
    w.alpha.assign(horizon_sz + 1, 0.0);
    w.beta.assign(horizon_sz + 1, effective_beta0());
    for (std::size_t t = 1; t <= horizon_sz; ++t) {
        w.alpha[t] = alpha_schedule[t - 1];
        w.beta[t] = beta_schedule[t - 1];
    }
    return w;
}

void ScenarioConfig::set_constant_weights(double alpha, double beta) {
    const auto n = static_cast<std::size_t>(std::max(horizon, 1));
    alpha_schedule.assign(n, alpha);
    beta_schedule.assign(n, beta);
    beta0.reset();
}

ScenarioConfig config_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (!kConfigKeys.contains(key)) throw ConfigError("config: unknown key '" + key + "'");
    }
    ScenarioConfig c;
    try {
        if (j.contains("k_entities")) c.k_entities = j.at("k_entities").get<int>();
        if (j.contains("dim")) c.dim = j.at("dim").get<int>();
        if (j.contains("horizon")) c.horizon = j.at("horizon").get<int>();
        const auto k = static_cast<std::size_t>(std::max(c.k_entities, 0));
        const auto t = static_cast<std::size_t>(std::max(c.horizon, 1));

        c.private_rows.assign(k, 30);
        c.synthetic_rows.assign(k, 30);
        c.private_rank = c.dim;
        c.public_rank = c.dim;
        c.alpha_schedule.assign(t, 0.5);
        c.beta_schedule.assign(t, 0.5);

        if (j.contains("private_rows")) c.private_rows = scalar_or_array<int>(j.at("private_rows"), k, "private_rows");
        if (j.contains("synthetic_rows")) c.synthetic_rows = scalar_or_array<int>(j.at("synthetic_rows"), k, "synthetic_rows");
        if (j.contains("public_rows")) c.public_rows = j.at("public_rows").get<int>();
        if (j.contains("private_rank")) c.private_rank = j.at("private_rank").get<int>();
        if (j.contains("public_rank")) c.public_rank = j.at("public_rank").get<int>();
        if (j.contains("alpha_schedule")) c.alpha_schedule = scalar_or_array<double>(j.at("alpha_schedule"), t, "alpha_schedule");
        if (j.contains("beta_schedule")) c.beta_schedule = scalar_or_array<double>(j.at("beta_schedule"), t, "beta_schedule");
        if (j.contains("beta0") && !j.at("beta0").is_null()) c.beta0 = j.at("beta0").get<double>();
        if (j.contains("sigma2")) c.sigma2 = j.at("sigma2").get<double>();
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();

        if (j.contains("theta_spec")) {
            const auto& ts = j.at("theta_spec");
            if (ts.is_array()) {
                c.theta_spec = ts.get<std::vector<double>>();
            } else if (ts.is_string() && ts.get<std::string>() == "unit_norm_random") {
                c.theta_spec = RandomUnitTheta{};
            } else if (ts.is_object() && ts.size() == 1 && ts.contains("unit_norm_random")) {
                c.theta_spec = RandomUnitTheta{ts.at("unit_norm_random").get<std::uint64_t>()};
            } else {
                throw ConfigError("config: theta_spec must be an array, \"unit_norm_random\", or {\"unit_norm_random\": seed}");
            }
        }
        if (j.contains("feature_mode")) {
            const auto m = j.at("feature_mode").get<std::string>();
            if (m == "gaussian") c.feature_mode = FeatureMode::Gaussian;
            else if (m == "low_rank") c.feature_mode = FeatureMode::LowRank;
            else throw ConfigError("config: feature_mode must be gaussian or low_rank");
        }
        if (j.contains("synthetic_feature_mode")) {
            const auto m = j.at("synthetic_feature_mode").get<std::string>();
            if (m == "fixed") c.synthetic_feature_mode = SyntheticFeatureMode::Fixed;
            else if (m == "redraw_per_generation") c.synthetic_feature_mode = SyntheticFeatureMode::RedrawPerGeneration;
            else if (m == "private_copy") c.synthetic_feature_mode = SyntheticFeatureMode::PrivateCopy;
            else throw ConfigError("config: synthetic_feature_mode must be fixed, redraw_per_generation or private_copy");
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

json config_to_json(const ScenarioConfig& c) {
    json j;
    j["k_entities"] = c.k_entities;
    j["dim"] = c.dim;
    j["private_rows"] = c.private_rows;
    j["public_rows"] = c.public_rows;
    j["private_rank"] = c.private_rank;
    j["public_rank"] = c.public_rank;
    j["synthetic_rows"] = c.synthetic_rows;
    j["alpha_schedule"] = c.alpha_schedule;
    j["beta_schedule"] = c.beta_schedule;
    j["beta0"] = c.beta0 ? json(*c.beta0) : json(nullptr);
    j["sigma2"] = c.sigma2;
    if (const auto* v = std::get_if<std::vector<double>>(&c.theta_spec)) {
        j["theta_spec"] = *v;
    } else {
        const auto& r = std::get<RandomUnitTheta>(c.theta_spec);
        j["theta_spec"] = r.seed ? json{{"unit_norm_random", *r.seed}} : json("unit_norm_random");
    }
    j["horizon"] = c.horizon;
    j["seed"] = c.seed;
    j["feature_mode"] = to_string(c.feature_mode);
    j["synthetic_feature_mode"] = to_string(c.synthetic_feature_mode);
    return j;
}

ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config '" + path + "': " + e.what());
    }
    return config_from_json(j);
}

std::mt19937_64 keyed_stream(std::uint64_t seed, StreamTag tag, std::uint64_t a, std::uint64_t b) {
    const std::uint64_t parts[] = {seed, static_cast<std::uint64_t>(tag), a, b};
    std::vector<std::uint32_t> words;
    words.reserve(8);
    for (std::uint64_t p : parts) {
        words.push_back(static_cast<std::uint32_t>(p & 0xffffffffULL));
        words.push_back(static_cast<std::uint32_t>(p >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    return std::mt19937_64(seq);
}

std::uint64_t replication_seed(std::uint64_t base_seed, std::uint64_t index) {
    return splitmix64(splitmix64(base_seed) ^ splitmix64(index + 0x5851f42d4c957f2dULL));
}

Matrix generate_features(const ScenarioConfig& config, const FeatureRole& role, std::mt19937_64& rng) {
    const Eigen::Index d = config.dim;
    Eigen::Index n = 0;
    int rank = config.dim;
    switch (role.kind) {
        case FeatureRole::Kind::Private:
            n = config.private_rows.at(static_cast<std::size_t>(role.entity));
            rank = config.private_rank;
            break;
        case FeatureRole::Kind::Public:
            n = config.public_rows;
            rank = config.public_rank;
            break;
        case FeatureRole::Kind::Synthetic:
            n = config.synthetic_rows.at(static_cast<std::size_t>(role.entity));
            break;
    }
    if (rank > d || rank < 0) throw ConfigError("generate_features: rank exceeds dimension");
    if (config.feature_mode == FeatureMode::Gaussian || role.kind == FeatureRole::Kind::Synthetic ||
        rank == d) {
        return standard_normal(n, d, rng);
    }
    if (rank == 0) return Matrix::Zero(n, d);
    const Matrix raw = standard_normal(d, rank, rng);
    Eigen::HouseholderQR<Matrix> qr(raw);
    const Matrix basis = qr.householderQ() * Matrix::Identity(d, rank);
    const Matrix z = standard_normal(n, rank, rng);
    return z * basis.transpose();
}

InitialData Scenario::draw_initial(std::uint64_t seed) const {
    InitialData data;
    const auto k = private_features.size();
    data.private_data.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        auto rng = keyed_stream(seed, StreamTag::InitialResponses, i);
        data.private_data.push_back({private_features[i], generate_synthetic(truth.theta, private_features[i], truth.sigma2, rng)});
    }
    auto rng = keyed_stream(seed, StreamTag::InitialResponses, k);
    data.public_data = {public_features, generate_synthetic(truth.theta, public_features, truth.sigma2, rng)};
    return data;
}

Scenario Scenario::with_weights(const MixWeights& w) const {
    w.validate();
    if (w.horizon() > static_cast<int>(synthetic_grams.size())) {
        throw ConfigError("with_weights: schedule longer than the materialized horizon");
    }
    Scenario s = *this;
    s.weights = w;
    return s;
}

Scenario materialize(const ScenarioConfig& config) {
    config.validate();
    Scenario s;
    s.config = config;
    const auto k = static_cast<std::size_t>(config.k_entities);
    const std::uint64_t seed = config.seed;

    for (std::size_t i = 0; i < k; ++i) {
        auto rng = keyed_stream(seed, StreamTag::PrivateFeatures, i);
        s.private_features.push_back(generate_features(config, FeatureRole::private_of(static_cast<int>(i)), rng));
    }
    {
        auto rng = keyed_stream(seed, StreamTag::PublicFeatures);
        s.public_features = generate_features(config, FeatureRole::public_data(), rng);
    }

    // At least one synthetic generation so stationary limits are always defined.
    for (int t = 1; t <= std::max(config.horizon, 1); ++t) {
        std::vector<Matrix> per_entity;
        per_entity.reserve(k);
        for (std::size_t i = 0; i < k; ++i) {
            switch (config.synthetic_feature_mode) {
                case SyntheticFeatureMode::PrivateCopy:
                    per_entity.push_back(s.private_features[i]);
                    break;
                case SyntheticFeatureMode::Fixed:
                    if (t > 1) {
                        per_entity.push_back(s.synthetic_features.front()[i]);
                        break;
                    }
                    [[fallthrough]];
                case SyntheticFeatureMode::RedrawPerGeneration: {
                    auto rng = keyed_stream(seed, StreamTag::SyntheticFeatures, static_cast<std::uint64_t>(t), i);
                    per_entity.push_back(generate_features(
                        config, FeatureRole::synthetic(t, static_cast<int>(i)), rng));
                    break;
                }
            }
        }
        s.synthetic_features.push_back(std::move(per_entity));
    }

    if (const auto* explicit_theta = std::get_if<std::vector<double>>(&config.theta_spec)) {
        s.truth.theta = Eigen::Map<const Vector>(explicit_theta->data(), config.dim);
    } else {
        const auto& spec = std::get<RandomUnitTheta>(config.theta_spec);
        auto rng = keyed_stream(spec.seed.value_or(seed), StreamTag::Theta);
        Vector theta = standard_normal(config.dim, 1, rng);
        s.truth.theta = theta / theta.norm();
    }
    s.truth.sigma2 = config.sigma2;

    for (const auto& x : s.private_features) s.grams.private_grams.push_back(build_gram(x));
    s.grams.public_gram = build_gram(s.public_features);
    for (const auto& gen : s.synthetic_features) {
        std::vector<Matrix> blocks;
        blocks.reserve(gen.size());
        for (const auto& x : gen) blocks.push_back(build_gram(x));
        s.synthetic_grams.push_back(std::move(blocks));
    }
    s.weights = config.weights();
    return s;
}

}  // namespace synthmix
