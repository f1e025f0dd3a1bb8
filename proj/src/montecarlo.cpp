#include "synthmix/montecarlo.hpp"

#include "synthmix/errors.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace synthmix {

Replication simulate_once(const Scenario& scenario, std::uint64_t seed,
                          const SimulationOptions& opts) {
    const MixWeights& w = scenario.weights;
    const int horizon = opts.generations < 0 ? w.horizon() : std::min(opts.generations, w.horizon());
    const auto k = static_cast<std::size_t>(scenario.entities());
    const Eigen::Index d = scenario.dim();
    const double sigma2 = scenario.truth.sigma2;

    const InitialData initial = opts.fixed_initial ? *opts.fixed_initial : scenario.draw_initial(seed);

    Replication rep;
    rep.seed = seed;
    rep.trajectory.reserve(static_cast<std::size_t>(horizon) + 1);

    Vector stacked(static_cast<Eigen::Index>(k) * d);
    const double beta0 = w.beta[0];
    for (std::size_t i = 0; i < k; ++i) {
        const WeightedDataset sets[] = {
            {initial.private_data[i].features, initial.private_data[i].responses, beta0},
            {initial.public_data.features, initial.public_data.responses, 1.0 - beta0},
        };
        stacked.segment(static_cast<Eigen::Index>(i) * d, d) = weighted_min_norm_fit(sets);
    }
    rep.trajectory.push_back(stacked);

    std::vector<Vector> synthetic_y(k);
    for (int t = 1; t <= horizon; ++t) {
        const auto& features = scenario.synthetic_features[static_cast<std::size_t>(t - 1)];
        for (std::size_t j = 0; j < k; ++j) {
            auto rng = keyed_stream(seed, StreamTag::SyntheticNoise, static_cast<std::uint64_t>(t), j);
            synthetic_y[j] = generate_synthetic(stacked.segment(static_cast<Eigen::Index>(j) * d, d),
                                                features[j], sigma2, rng);
        }
        const double a = w.alpha[static_cast<std::size_t>(t)];
        const double b = w.beta[static_cast<std::size_t>(t)];
        Vector next(stacked.size());
        for (std::size_t i = 0; i < k; ++i) {
            std::vector<WeightedDataset> sets;
            sets.reserve(k + 2);
            sets.push_back({initial.private_data[i].features, initial.private_data[i].responses, (1.0 - a) * b});
            sets.push_back({initial.public_data.features, initial.public_data.responses, (1.0 - a) * (1.0 - b)});
            for (std::size_t j = 0; j < k; ++j) {
                sets.push_back({features[j], synthetic_y[j], a / static_cast<double>(k)});
            }
            next.segment(static_cast<Eigen::Index>(i) * d, d) = weighted_min_norm_fit(sets);
        }
        stacked = std::move(next);
        rep.trajectory.push_back(stacked);
    }
    return rep;
}

Replication simulate_once(const ScenarioConfig& config, std::uint64_t seed) {
    return simulate_once(materialize(config), seed);
}

InitialData conditional_initial_data(const Scenario& scenario) {
    return scenario.draw_initial(replication_seed(scenario.config.seed, ~std::uint64_t{0}));
}

EmpiricalMoments moments_from_samples(const Matrix& samples) {
    const auto n = static_cast<std::size_t>(samples.cols());
    if (n < 2) throw InvalidInputError("moments need at least two samples");
    EmpiricalMoments out;
    out.n_reps = n;
    out.mean = samples.rowwise().mean();
    const Matrix centered = samples.colwise() - out.mean;
    out.cov = symmetrize(centered * centered.transpose() / static_cast<double>(n - 1));
    out.mean_standard_error = (out.cov.diagonal() / static_cast<double>(n)).cwiseSqrt();
    return out;
}

EmpiricalMoments estimate_moments(const Scenario& scenario, std::size_t n_reps,
                                  std::uint64_t base_seed, int generation,
                                  bool condition_on_initial, unsigned threads) {
    if (n_reps < 2) throw InvalidInputError("estimate_moments: n_reps must be >= 2");
    if (generation < 0 || generation > scenario.weights.horizon()) {
        throw InvalidInputError("estimate_moments: generation outside [0, horizon]");
    }
    SimulationOptions opts;
    opts.generations = generation;
    if (condition_on_initial) opts.fixed_initial = conditional_initial_data(scenario);

    const Eigen::Index kd = scenario.entities() * scenario.dim();
    Matrix samples(kd, static_cast<Eigen::Index>(n_reps));

    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n_reps));

    // Each replication writes its own column; the reduction below runs in index order.
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;
    auto worker = [&] {
        try {
            for (std::size_t i = next.fetch_add(1); i < n_reps; i = next.fetch_add(1)) {
                const Replication rep = simulate_once(scenario, replication_seed(base_seed, i), opts);
                samples.col(static_cast<Eigen::Index>(i)) = rep.trajectory.back();
            }
        } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
            next = n_reps;
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (error) std::rethrow_exception(error);
    return moments_from_samples(samples);
}

EmpiricalMoments estimate_moments(const ScenarioConfig& config, std::size_t n_reps,
                                  std::uint64_t base_seed, int generation,
                                  bool condition_on_initial, unsigned threads) {
    return estimate_moments(materialize(config), n_reps, base_seed, generation,
                            condition_on_initial, threads);
}

}  // namespace synthmix
