#pragma once

#include "synthmix/dynamics.hpp"
#include "synthmix/matcore.hpp"
#include "synthmix/workflow.hpp"

#include <cstdint>
#include <optional>
#include <string_view>

namespace synthmix {

enum class MetricName { Mse, Mspe, RelEfficiency, Dispersion };

std::string_view to_string(MetricName m);

/// Generation value used for t -> infinity limits in exported tables.
inline constexpr int kLimitGeneration = -1;
/// Entity value used for cross-entity aggregates (mean efficiency, dispersion).
inline constexpr int kAggregateEntity = -1;

struct MetricRecord {
    int generation = 0;
    int entity = 0;
    MetricName metric = MetricName::Mse;
    std::optional<int> target;
    double value = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
    std::uint64_t seed = 0;
};

/// E||theta_hat_k - theta||^2 = ||bias_k||^2 + tr(cov_kk).
double entity_mse(const UnconditionalMoments& moments, const GroundTruth& truth, Eigen::Index k);

/// E||X_m (theta_hat_k - theta)||^2. With normalized = true the value is
/// divided by the number of rows of X_m.
double entity_mspe(const UnconditionalMoments& moments, const GroundTruth& truth, Eigen::Index k,
                   const Matrix& target_features, bool normalized = false);

/// sigma2 tr((sum_k S~_k + S_*)^{-1}): MSE of pooled least squares on all real data.
double pooled_mvue_mse(const GramSet& grams, const GroundTruth& truth,
                       double rank_tol = kDefaultRankTolerance);
double pooled_mvue_mse(const InitialData& initial, const GroundTruth& truth);

/// pooled_mvue_mse / entity_mse.
double relative_efficiency(const UnconditionalMoments& moments, const GramSet& grams,
                           const GroundTruth& truth, Eigen::Index k);
double relative_efficiency(const UnconditionalMoments& moments, const InitialData& initial,
                           const GroundTruth& truth, Eigen::Index k);

/// Largest Frobenius distance between two entities' d x (K+1)d row blocks of M_t.
double dispersion(const Matrix& m_t, Eigen::Index k, Eigen::Index d);

}  // namespace synthmix
