#pragma once

#include "synthmix/matcore.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace synthmix {

/// Feature matrix with its response vector.
struct Dataset {
    Matrix features;
    Vector responses;
};

/// Private data for each of the K entities plus the shared public data.
struct InitialData {
    std::vector<Dataset> private_data;
    Dataset public_data;

    Eigen::Index entities() const { return static_cast<Eigen::Index>(private_data.size()); }
    Eigen::Index dim() const { return public_data.features.cols(); }

    /// Throws ShapeError/InvalidInputError when blocks disagree on d or row counts.
    void validate() const;
};

/// Weight schedules indexed by generation. alpha[0] is always zero; beta[0] is
/// the initialization weight on private data.
struct MixWeights {
    std::vector<double> alpha;
    std::vector<double> beta;

    static MixWeights constant(double alpha, double beta, int horizon, double beta0);
    static MixWeights constant(double alpha, double beta, int horizon) {
        return constant(alpha, beta, horizon, beta);
    }

    int horizon() const { return static_cast<int>(alpha.size()) - 1; }
    void validate() const;
};

struct GramSet {
    std::vector<Matrix> private_grams;    // S~_k
    Matrix public_gram;                   // S_*
    std::vector<Matrix> synthetic_grams;  // S_tk for one generation

    Eigen::Index entities() const { return static_cast<Eigen::Index>(private_grams.size()); }
    Eigen::Index dim() const { return public_gram.rows(); }

    Matrix mean_synthetic() const;
    Matrix lifted_private() const;    // blockdiag(S~_1..S~_K)
    Matrix lifted_synthetic() const;  // blockdiag(S_t1..S_tK)

    /// Symmetry and PSD checks plus consistent dimensions.
    void validate() const;
};

/// Operators for one generation. g: Kd x Kd, p: Kd x (K+1)d, q: Kd x Kd, pi: Kd x Kd.
struct LiftedOperators {
    Matrix g;
    Matrix g_pinv;
    Matrix p;
    Matrix q;
    Matrix pi;
    double alpha = 0.0;
    double beta = 1.0;
};

struct GroundTruth {
    Vector theta;
    double sigma2 = 1.0;
};

Matrix build_gram(const Matrix& features);

/// (1/K) (1_{KxK} kron I_d).
Matrix build_projection(Eigen::Index k, Eigen::Index d);

/// Builds G, P, Q and the averaging projection for weights (alpha, beta).
LiftedOperators build_operators(const GramSet& grams, double alpha, double beta,
                                double pinv_tol = kDefaultPinvTolerance);

/// Block-diagonal pseudoinverse diag(S~^+, S_*^+): the OLS covariance factor.
Matrix initial_ols_cov_factor(const GramSet& grams);

/// Expected initial OLS vector [X~^+ y~; X_*^+ y_*] under y = X theta + noise.
Vector initial_ols_mean(const GramSet& grams, const Vector& theta);

/// Realized initial OLS vector [X~_1^+ y~_1; ...; X_*^+ y_*].
Vector initial_ols_vector(const InitialData& data);

GramSet grams_from(const InitialData& data);

struct WeightedDataset {
    const Matrix& features;
    const Vector& responses;
    double weight;
};

/// Minimum-norm minimizer of sum_i w_i ||y_i - X_i theta||^2.
Vector weighted_min_norm_fit(std::span<const WeightedDataset> datasets,
                             double pinv_tol = kDefaultPinvTolerance);

/// y = X theta_hat + w with w iid N(0, sigma2).
Vector generate_synthetic(const Vector& theta_hat, const Matrix& features, double sigma2,
                          std::mt19937_64& rng);

}  // namespace synthmix
