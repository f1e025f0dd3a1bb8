#pragma once

#include "synthmix/matcore.hpp"
#include "synthmix/workflow.hpp"

#include <optional>
#include <vector>

namespace synthmix {

/// Conditional moments at one generation: E[theta_t | D0] = m * b0 and
/// cov(theta_t | D0) = c, where b0 stacks the initial per-dataset OLS fits.
struct MomentState {
    Matrix m;  // Kd x (K+1)d
    Matrix c;  // Kd x Kd
    int generation = 0;
};

struct UnconditionalMoments {
    Vector mean;  // Kd
    Matrix cov;   // Kd x Kd
};

struct ConvergenceCertificate {
    bool lemma1_applicable = false;
    std::optional<double> lambda;
    std::optional<double> gamma;
    double rho_q = 0.0;
    double fit_residual = 0.0;  // relative residual of the proportionality fit
    bool guaranteed = false;
};

/// Synthetic gram matrices for generations 1..T; entry t-1 holds the K blocks S_tk.
using SyntheticGramSchedule = std::vector<std::vector<Matrix>>;

struct DynamicsOptions {
    double pinv_tol = kDefaultPinvTolerance;
    double rank_tol = kDefaultRankTolerance;
    /// Largest Kd for which the Kronecker-form Lyapunov system is solved directly.
    Eigen::Index lyapunov_direct_max_dim = 60;
    double lyapunov_tol = 1e-12;
    int lyapunov_max_iter = 200;
    /// rho(Q) > 1 - divergence_slack is treated as divergent (alpha = 1 gives rho = 1 up to rounding).
    double divergence_slack = 1e-10;
};

MomentState initial_state(const LiftedOperators& ops0);

/// One generation: M_t = P_t + Q_t M_{t-1}, C_t = Q_t (sigma2 S_t^+ + C_{t-1}) Q_t^T.
MomentState step_moments(const MomentState& state, const LiftedOperators& ops, const Matrix& s_t,
                         double sigma2, double pinv_tol = kDefaultPinvTolerance);

/// Per-generation operators for t = 0..T. The schedule must cover generations 1..T.
std::vector<LiftedOperators> operator_chain(const GramSet& initial_grams, const MixWeights& weights,
                                            const SyntheticGramSchedule& synthetic,
                                            const DynamicsOptions& opts = {});

std::vector<MomentState> run_conditional(const std::vector<LiftedOperators>& chain,
                                         const SyntheticGramSchedule& synthetic, double sigma2,
                                         const DynamicsOptions& opts = {});

std::vector<MomentState> run_conditional(const GramSet& initial_grams, const MixWeights& weights,
                                         const SyntheticGramSchedule& synthetic, double sigma2,
                                         const DynamicsOptions& opts = {});

/// Closed form for stationary weights and synthetic grams:
/// M_t = Q^t P_0 + (sum_{s<t} Q^s) P,  C_t = sigma2 sum_{s=1..t} Q^s S^+ (Q^s)^T.
MomentState stationary_closed_form(const Matrix& p0, const Matrix& p, const Matrix& q,
                                   const Matrix& s, double sigma2, int t,
                                   double pinv_tol = kDefaultPinvTolerance);

/// Mean and covariance over both the initial data and the synthetic noise,
/// with the mean in the product form (I - Q_t...Q_1 (I - G_0 G_0^+)) (1_K kron theta).
/// Requires G_1..G_t full rank; throws PreconditionError naming the first
/// offending generation otherwise.
UnconditionalMoments unconditional_moments(const MomentState& state,
                                           const std::vector<LiftedOperators>& chain,
                                           const GroundTruth& truth, const GramSet& grams,
                                           const DynamicsOptions& opts = {});

/// Same moments without a rank requirement: mean = M_t E[b0].
UnconditionalMoments unconditional_moments_general(const MomentState& state,
                                                   const GroundTruth& truth, const GramSet& grams);

struct AsymptoticMoments {
    Matrix m;  // (I - Q)^{-1} P
    Matrix c;  // solves C = Q (C + sigma2 S^+) Q^T
    double rho_q = 0.0;
    UnconditionalMoments moments;
    bool used_direct_solve = false;
};

/// Limits of the stationary recursion. Throws DivergenceError when rho(Q) >= 1
/// and ConditioningError when the linear systems are numerically singular.
AsymptoticMoments asymptotic_moments(const LiftedOperators& ops, const Matrix& s,
                                     const GramSet& grams, const GroundTruth& truth,
                                     const DynamicsOptions& opts = {});

/// Solves C = Q C Q^T + W via the Kronecker system (I - Q kron Q) vec C = vec W.
Matrix solve_discrete_lyapunov_direct(const Matrix& q, const Matrix& w);

/// Solves C = Q C Q^T + W by squaring iteration on the series sum_s Q^s W (Q^s)^T.
Matrix solve_discrete_lyapunov_iterative(const Matrix& q, const Matrix& w, double tol = 1e-12,
                                         int max_iter = 200);

/// Checks whether the synthetic gram is proportional to a convex combination of
/// the private and public grams and reports rho(Q) for (alpha, beta).
ConvergenceCertificate check_lemma1(const GramSet& grams, double alpha, double beta,
                                    double residual_tol = 1e-8);

}  // namespace synthmix
