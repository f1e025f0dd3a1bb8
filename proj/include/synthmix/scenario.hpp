#pragma once

#include "synthmix/dynamics.hpp"
#include "synthmix/matcore.hpp"
#include "synthmix/workflow.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace synthmix {

enum class FeatureMode { Gaussian, LowRank };

/// fixed: one synthetic design per entity reused every generation.
/// redraw_per_generation: a new design per generation (still shared by all replications).
/// private_copy: synthetic design equals the entity's private design.
enum class SyntheticFeatureMode { Fixed, RedrawPerGeneration, PrivateCopy };

struct RandomUnitTheta {
    std::optional<std::uint64_t> seed;  // falls back to the scenario seed
};

using ThetaSpec = std::variant<std::vector<double>, RandomUnitTheta>;

struct ScenarioConfig {
    int k_entities = 2;
    int dim = 4;
    std::vector<int> private_rows{30, 30};
    int public_rows = 30;
    int private_rank = 4;
    int public_rank = 4;
    std::vector<int> synthetic_rows{30, 30};
    /// Weights for generations 1..T (entry t-1 is generation t).
    std::vector<double> alpha_schedule{0.5, 0.5, 0.5, 0.5, 0.5};
    std::vector<double> beta_schedule{0.5, 0.5, 0.5, 0.5, 0.5};
    std::optional<double> beta0;
    double sigma2 = 1.0;
    ThetaSpec theta_spec = RandomUnitTheta{};
    int horizon = 5;
    std::uint64_t seed = 20240601;
    FeatureMode feature_mode = FeatureMode::Gaussian;
    SyntheticFeatureMode synthetic_feature_mode = SyntheticFeatureMode::Fixed;

    /// Throws ConfigError on any violated invariant.
    void validate() const;

    double effective_beta0() const { return beta0.value_or(beta_schedule.empty() ? 1.0 : beta_schedule.front()); }
    MixWeights weights() const;

    /// Replace both schedules by constants over the current horizon.
    void set_constant_weights(double alpha, double beta);
};

/// Unknown keys are rejected.
ScenarioConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ScenarioConfig& c);
ScenarioConfig load_config(const std::string& path);

const char* to_string(FeatureMode m);
const char* to_string(SyntheticFeatureMode m);

/// Purposes for keyed random streams. Values are part of the reproducibility contract.
enum class StreamTag : std::uint32_t {
    Theta = 1,
    PrivateFeatures = 2,
    PublicFeatures = 3,
    SyntheticFeatures = 4,
    InitialResponses = 5,
    SyntheticNoise = 6,
    Replication = 7,
};

/// Independent generator keyed by (seed, tag, a, b). Order-independent, so
/// parallel consumers get the same draws regardless of scheduling.
std::mt19937_64 keyed_stream(std::uint64_t seed, StreamTag tag, std::uint64_t a = 0,
                             std::uint64_t b = 0);

/// Seed for replication i derived from a base seed.
std::uint64_t replication_seed(std::uint64_t base_seed, std::uint64_t index);

struct FeatureRole {
    enum class Kind { Private, Public, Synthetic } kind = Kind::Private;
    int entity = 0;
    int generation = 0;

    static FeatureRole private_of(int k) { return {Kind::Private, k, 0}; }
    static FeatureRole public_data() { return {Kind::Public, 0, 0}; }
    static FeatureRole synthetic(int t, int k) { return {Kind::Synthetic, k, t}; }
};

/// Gaussian mode: iid N(0,1) rows. Low-rank mode with rank r: Z B^T with Z
/// n x r standard normal and B a d x r orthonormal basis drawn from the same stream.
Matrix generate_features(const ScenarioConfig& config, const FeatureRole& role, std::mt19937_64& rng);

/// All deterministic ingredients of a scenario: features, truth, grams, weights.
struct Scenario {
    ScenarioConfig config;
    std::vector<Matrix> private_features;
    Matrix public_features;
    std::vector<std::vector<Matrix>> synthetic_features;  // [t-1][k], t = 1..T
    GroundTruth truth;
    GramSet grams;  // private + public only
    SyntheticGramSchedule synthetic_grams;
    MixWeights weights;

    Eigen::Index entities() const { return config.k_entities; }
    Eigen::Index dim() const { return config.dim; }

    /// Initial responses y = X theta + N(0, sigma2), drawn from streams keyed by seed.
    InitialData draw_initial(std::uint64_t seed) const;

    /// Same scenario with different weights; features are untouched.
    Scenario with_weights(const MixWeights& w) const;
};

Scenario materialize(const ScenarioConfig& config);

}  // namespace synthmix
