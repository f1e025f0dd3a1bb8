#include "support.hpp"
#include "synthmix/errors.hpp"
#include "synthmix/scenario.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace synthmix;
using namespace synthmix::testing;
using nlohmann::json;

TEST_CASE("default config is valid and round-trips through JSON") {
    ScenarioConfig c;
    c.validate();
    c.theta_spec = std::vector<double>{1, 0, 0, 0};
    c.beta0 = 0.25;
    const json j = config_to_json(c);
    const ScenarioConfig back = config_from_json(j);
    CHECK(config_to_json(back) == j);
    CHECK(back.effective_beta0() == 0.25);
}

TEST_CASE("unknown keys are rejected") {
    CHECK_THROWS_AS(config_from_json(json{{"k_entitees", 3}}), ConfigError);
    CHECK_THROWS_AS(config_from_json(json::array()), ConfigError);
}

TEST_CASE("scalars broadcast to per-entity and per-generation lists") {
    const auto c = config_from_json(json{{"k_entities", 3}, {"horizon", 4}, {"private_rows", 12},
                                         {"alpha_schedule", 0.2}, {"beta_schedule", {1, 0.5, 0.5, 0}}});
    CHECK(c.private_rows == std::vector<int>{12, 12, 12});
    CHECK(c.alpha_schedule == std::vector<double>{0.2, 0.2, 0.2, 0.2});
    CHECK(c.effective_beta0() == 1.0);
    const auto w = c.weights();
    CHECK(w.alpha[0] == 0.0);
    CHECK(w.beta[4] == 0.0);
}

TEST_CASE("invalid values raise config errors") {
    CHECK_THROWS_AS(config_from_json(json{{"dim", 3}, {"private_rank", 4}}), ConfigError);
    CHECK_THROWS_AS(config_from_json(json{{"sigma2", 0.0}}), ConfigError);
    CHECK_THROWS_AS(config_from_json(json{{"alpha_schedule", 1.5}}), ConfigError);
    CHECK_THROWS_AS(config_from_json(json{{"horizon", 3}, {"alpha_schedule", {0.1, 0.2}}}), ConfigError);
    CHECK_THROWS_AS(config_from_json(json{{"feature_mode", "sparse"}}), ConfigError);
    CHECK_THROWS_AS(config_from_json(json{{"theta_spec", {1, 2}}}), ConfigError);
    CHECK_THROWS_AS(config_from_json(json{{"dim", "four"}}), ConfigError);
}

TEST_CASE("load_config reports missing and malformed files") {
    CHECK_THROWS_AS(load_config("/nonexistent/config.json"), IoError);
    const auto path = std::filesystem::temp_directory_path() / "synthmix_bad_config.json";
    std::ofstream(path) << "{ not json";
    CHECK_THROWS_AS(load_config(path.string()), ConfigError);
    std::filesystem::remove(path);
}

TEST_CASE("keyed streams are reproducible and distinct") {
    auto a = keyed_stream(1, StreamTag::SyntheticNoise, 2, 3);
    auto b = keyed_stream(1, StreamTag::SyntheticNoise, 2, 3);
    auto c = keyed_stream(1, StreamTag::SyntheticNoise, 3, 2);
    auto d = keyed_stream(1, StreamTag::Theta, 2, 3);
    const auto x = a();
    CHECK(x == b());
    CHECK(x != c());
    CHECK(x != d());
    CHECK(replication_seed(5, 0) != replication_seed(5, 1));
    CHECK(replication_seed(5, 0) != replication_seed(6, 0));
}

TEST_CASE("low-rank features have the requested rank") {
    ScenarioConfig c;
    c.dim = 6;
    c.private_rows = {20, 20};
    c.public_rows = 20;
    c.feature_mode = FeatureMode::LowRank;
    for (int r : {1, 3, 6}) {
        c.private_rank = r;
        auto rng = keyed_stream(9, StreamTag::PrivateFeatures, static_cast<std::uint64_t>(r));
        const Matrix x = generate_features(c, FeatureRole::private_of(0), rng);
        CHECK(x.rows() == 20);
        CHECK(numerical_rank(x.transpose() * x) == r);
    }
    c.private_rank = 7;
    auto rng = keyed_stream(9, StreamTag::PrivateFeatures);
    CHECK_THROWS_AS(generate_features(c, FeatureRole::private_of(0), rng), ConfigError);
}

TEST_CASE("four rank-5 entities in dimension 15 pool to full rank") {
    ScenarioConfig c;
    c.k_entities = 4;
    c.dim = 15;
    c.private_rows.assign(4, 50);
    c.synthetic_rows.assign(4, 50);
    c.public_rows = 0;
    c.private_rank = 5;
    c.public_rank = 15;
    c.feature_mode = FeatureMode::LowRank;
    c.horizon = 1;
    c.set_constant_weights(0.5, 1.0);
    const Scenario sc = materialize(c);
    Matrix pooled = Matrix::Zero(15, 15);
    for (const auto& s : sc.grams.private_grams) {
        CHECK(numerical_rank(s) == 5);
        pooled += s;
    }
    CHECK(numerical_rank(pooled) == 15);
}

TEST_CASE("materialize is deterministic and respects the synthetic feature mode") {
    ScenarioConfig c;
    c.horizon = 3;
    c.set_constant_weights(0.5, 0.5);
    const Scenario a = materialize(c);
    const Scenario b = materialize(c);
    CHECK(a.truth.theta == b.truth.theta);
    CHECK(a.truth.theta.norm() == doctest::Approx(1.0));
    CHECK(a.private_features[1] == b.private_features[1]);
    REQUIRE(a.synthetic_features.size() == 3);
    CHECK(a.synthetic_features[0][0] == a.synthetic_features[2][0]);
    CHECK(a.synthetic_features[0][0] != a.synthetic_features[0][1]);

    c.synthetic_feature_mode = SyntheticFeatureMode::RedrawPerGeneration;
    const Scenario r = materialize(c);
    CHECK(r.synthetic_features[0][0] == a.synthetic_features[0][0]);
    CHECK(r.synthetic_features[0][0] != r.synthetic_features[1][0]);

    c.synthetic_feature_mode = SyntheticFeatureMode::PrivateCopy;
    const Scenario p = materialize(c);
    CHECK(p.synthetic_features[2][1] == p.private_features[1]);

    c.theta_spec = std::vector<double>{1, 2, 3, 4};
    CHECK(materialize(c).truth.theta(3) == 4.0);
}

TEST_CASE("initial responses follow the linear model") {
    ScenarioConfig c;
    c.sigma2 = 1e-12;
    const Scenario sc = materialize(c);
    const auto data = sc.draw_initial(4);
    CHECK(max_abs(data.private_data[0].responses - sc.private_features[0] * sc.truth.theta) < 1e-4);
    const auto again = sc.draw_initial(4);
    CHECK(again.public_data.responses == data.public_data.responses);
}
