#pragma once

#include "synthmix/matcore.hpp"
#include "synthmix/scenario.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace synthmix {

struct Replication {
    std::uint64_t seed = 0;
    std::vector<Vector> trajectory;  // stacked Kd estimates for t = 0..T
};

struct EmpiricalMoments {
    Vector mean;
    Matrix cov;  // unbiased (n - 1) normalization
    std::size_t n_reps = 0;
    Vector mean_standard_error;
};

/// Initial responses: drawn from the replication seed (unconditional) or
/// supplied by the caller and reused (conditional on D0).
struct SimulationOptions {
    std::optional<InitialData> fixed_initial;
    int generations = -1;  // -1 runs the whole schedule
};

/// One pass of the literal workflow: fit at t = 0 with (beta0, 1 - beta0),
/// then per generation synthesize responses and refit every entity with
/// weights ((1-a) b, (1-a)(1-b), a / K).
Replication simulate_once(const Scenario& scenario, std::uint64_t seed,
                          const SimulationOptions& opts = {});
Replication simulate_once(const ScenarioConfig& config, std::uint64_t seed);

/// Initial data used in conditional mode; depends only on the scenario seed.
InitialData conditional_initial_data(const Scenario& scenario);

/// Moments of theta_hat at `generation` over n_reps replications. Results do
/// not depend on thread count or scheduling.
EmpiricalMoments estimate_moments(const Scenario& scenario, std::size_t n_reps,
                                  std::uint64_t base_seed, int generation,
                                  bool condition_on_initial, unsigned threads = 0);
EmpiricalMoments estimate_moments(const ScenarioConfig& config, std::size_t n_reps,
                                  std::uint64_t base_seed, int generation,
                                  bool condition_on_initial, unsigned threads = 0);

/// Moments from a column-per-sample matrix; shared with the metric oracles.
EmpiricalMoments moments_from_samples(const Matrix& samples);

}  // namespace synthmix
