#include "synthmix/dynamics.hpp"

#include "synthmix/errors.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <string>

namespace synthmix {

namespace {

void require_state_shape(const MomentState& state, const LiftedOperators& ops) {
    const Eigen::Index kd = ops.q.rows();
    if (state.m.rows() != kd || state.m.cols() != ops.p.cols() || state.c.rows() != kd ||
        state.c.cols() != kd) {
        throw ShapeError("moment state does not match operator dimensions");
    }
}

MomentState step_with_pinv(const MomentState& state, const LiftedOperators& ops,
                           const Matrix& s_pinv, double sigma2) {
    MomentState next;
    next.generation = state.generation + 1;
    next.m = ops.p + ops.q * state.m;
    if (ops.alpha == 0.0) {
        next.c = Matrix::Zero(state.c.rows(), state.c.cols());
    } else {
        next.c = symmetrize(ops.q * (sigma2 * s_pinv + state.c) * ops.q.transpose());
    }
    return next;
}

double relative_residual(const Vector& target, const Vector& fitted) {
    const double n = target.norm();
    return n > 0.0 ? (target - fitted).norm() / n : (target - fitted).norm();
}

}  // namespace

MomentState initial_state(const LiftedOperators& ops0) {
    MomentState s;
    s.m = ops0.p;
    s.c = Matrix::Zero(ops0.q.rows(), ops0.q.cols());
    s.generation = 0;
    return s;
}

MomentState step_moments(const MomentState& state, const LiftedOperators& ops, const Matrix& s_t,
                         double sigma2, double pinv_tol) {
    if (!(sigma2 > 0.0)) throw InvalidInputError("step_moments: sigma2 must be positive");
    require_state_shape(state, ops);
    if (s_t.rows() != ops.q.rows() || s_t.cols() != ops.q.cols()) {
        throw ShapeError("step_moments: synthetic gram has wrong shape");
    }
    return step_with_pinv(state, ops, pinv(s_t, pinv_tol), sigma2);
}

std::vector<LiftedOperators> operator_chain(const GramSet& initial_grams, const MixWeights& weights,
                                            const SyntheticGramSchedule& synthetic,
                                            const DynamicsOptions& opts) {
    weights.validate();
    const int horizon = weights.horizon();
    if (static_cast<int>(synthetic.size()) < horizon) {
        throw ShapeError("synthetic gram schedule covers " + std::to_string(synthetic.size()) +
                         " generations, horizon is " + std::to_string(horizon));
    }
    std::vector<LiftedOperators> chain;
    chain.reserve(static_cast<std::size_t>(horizon) + 1);

    GramSet g0 = initial_grams;
    g0.synthetic_grams.clear();
    chain.push_back(build_operators(g0, 0.0, weights.beta[0], opts.pinv_tol));

    for (int t = 1; t <= horizon; ++t) {
        GramSet gt = initial_grams;
        gt.synthetic_grams = synthetic[static_cast<std::size_t>(t - 1)];
        chain.push_back(build_operators(gt, weights.alpha[static_cast<std::size_t>(t)],
                                        weights.beta[static_cast<std::size_t>(t)], opts.pinv_tol));
    }
    return chain;
}

std::vector<MomentState> run_conditional(const std::vector<LiftedOperators>& chain,
                                         const SyntheticGramSchedule& synthetic, double sigma2,
                                         const DynamicsOptions& opts) {
    if (chain.empty()) throw InvalidInputError("run_conditional: empty operator chain");
    if (!(sigma2 > 0.0)) throw InvalidInputError("run_conditional: sigma2 must be positive");
    if (synthetic.size() + 1 < chain.size()) {
        throw ShapeError("run_conditional: synthetic schedule shorter than operator chain");
    }
    std::vector<MomentState> states;
    states.reserve(chain.size());
    states.push_back(initial_state(chain.front()));
    for (std::size_t t = 1; t < chain.size(); ++t) {
        const Matrix s_pinv = pinv_block_diag(synthetic[t - 1], opts.pinv_tol);
        require_state_shape(states.back(), chain[t]);
        states.push_back(step_with_pinv(states.back(), chain[t], s_pinv, sigma2));
    }
    return states;
}

std::vector<MomentState> run_conditional(const GramSet& initial_grams, const MixWeights& weights,
                                         const SyntheticGramSchedule& synthetic, double sigma2,
                                         const DynamicsOptions& opts) {
    return run_conditional(operator_chain(initial_grams, weights, synthetic, opts), synthetic,
                           sigma2, opts);
}

MomentState stationary_closed_form(const Matrix& p0, const Matrix& p, const Matrix& q,
                                   const Matrix& s, double sigma2, int t, double pinv_tol) {
    if (t < 0) throw InvalidInputError("stationary_closed_form: t must be nonnegative");
    const Eigen::Index kd = q.rows();
    const Matrix s_pinv = pinv(s, pinv_tol);

    Matrix q_power = Matrix::Identity(kd, kd);
    Matrix partial_sum = Matrix::Zero(kd, kd);
    Matrix c = Matrix::Zero(kd, kd);
    for (int i = 0; i < t; ++i) {
        partial_sum += q_power;
        q_power = q * q_power;
        c += q_power * s_pinv * q_power.transpose();
    }
    MomentState out;
    out.generation = t;
    out.m = q_power * p0 + partial_sum * p;
    out.c = symmetrize(sigma2 * c);
    return out;
}

UnconditionalMoments unconditional_moments_general(const MomentState& state,
                                                   const GroundTruth& truth, const GramSet& grams) {
    const Eigen::Index d = grams.dim();
    const Eigen::Index k = grams.entities();
    if (state.m.rows() != k * d || state.m.cols() != (k + 1) * d) {
        throw ShapeError("unconditional_moments: moment state does not match gram set");
    }
    UnconditionalMoments out;
    out.mean = state.m * initial_ols_mean(grams, truth.theta);
    out.cov = symmetrize(truth.sigma2 * state.m * initial_ols_cov_factor(grams) *
                             state.m.transpose() +
                         state.c);
    return out;
}

UnconditionalMoments unconditional_moments(const MomentState& state,
                                           const std::vector<LiftedOperators>& chain,
                                           const GroundTruth& truth, const GramSet& grams,
                                           const DynamicsOptions& opts) {
    const int t = state.generation;
    if (t < 0 || static_cast<std::size_t>(t) >= chain.size()) {
        throw ShapeError("unconditional_moments: operator chain does not reach generation " +
                         std::to_string(t));
    }
    for (int s = 1; s <= t; ++s) {
        if (!is_full_rank(chain[static_cast<std::size_t>(s)].g, opts.rank_tol)) {
            throw PreconditionError("unconditional_moments: G at generation " + std::to_string(s) +
                                    " is rank deficient");
        }
    }
    const Eigen::Index k = grams.entities();
    const Matrix& g0 = chain.front().g;
    const Vector stacked = kron(ones(k), truth.theta);

    Vector residual = stacked - g0 * chain.front().g_pinv * stacked;
    for (int s = 1; s <= t; ++s) residual = chain[static_cast<std::size_t>(s)].q * residual;

    UnconditionalMoments out;
    out.mean = stacked - residual;
    out.cov = symmetrize(truth.sigma2 * state.m * initial_ols_cov_factor(grams) *
                             state.m.transpose() +
                         state.c);
    return out;
}

Matrix solve_discrete_lyapunov_direct(const Matrix& q, const Matrix& w) {
    const Eigen::Index n = q.rows();
    const Matrix system = Matrix::Identity(n * n, n * n) - kron(q, q);
    Eigen::PartialPivLU<Matrix> lu(system);
    if (!(lu.rcond() > 1e-14)) {
        throw ConditioningError("lyapunov: (I - Q kron Q) is numerically singular (rcond " +
                                std::to_string(lu.rcond()) + ")");
    }
    const Matrix vec_c = lu.solve(vecm(w));
    return symmetrize(unvec(vec_c, n, n));
}

Matrix solve_discrete_lyapunov_iterative(const Matrix& q, const Matrix& w, double tol,
                                         int max_iter) {
    // After j squarings x holds sum_{s < 2^j} Q^s W (Q^s)^T.
    Matrix x = w;
    Matrix a = q;
    for (int it = 0; it < max_iter; ++it) {
        Matrix next = x + a * x * a.transpose();
        const double change = (next - x).norm();
        x = std::move(next);
        a = a * a;
        if (change <= tol * std::max(1.0, x.norm())) return symmetrize(x);
        if (!x.allFinite()) break;
    }
    throw ConditioningError("lyapunov: squaring iteration did not converge");
}

AsymptoticMoments asymptotic_moments(const LiftedOperators& ops, const Matrix& s,
                                     const GramSet& grams, const GroundTruth& truth,
                                     const DynamicsOptions& opts) {
    if (!(truth.sigma2 > 0.0)) throw InvalidInputError("asymptotic_moments: sigma2 must be positive");
    const Eigen::Index kd = ops.q.rows();
    if (s.rows() != kd || s.cols() != kd) throw ShapeError("asymptotic_moments: S has wrong shape");

    AsymptoticMoments out;
    out.rho_q = spectral_radius(ops.q).radius;
    if (!(out.rho_q < 1.0 - opts.divergence_slack)) {
        throw DivergenceError("asymptotic_moments: spectral radius of Q is " +
                                  std::to_string(out.rho_q) + " (must be < 1)",
                              out.rho_q);
    }

    Eigen::PartialPivLU<Matrix> lu(Matrix::Identity(kd, kd) - ops.q);
    if (!(lu.rcond() > 1e-14)) throw ConditioningError("asymptotic_moments: I - Q is numerically singular");
    out.m = lu.solve(ops.p);

    const Matrix w = truth.sigma2 * ops.q * pinv(s, opts.pinv_tol) * ops.q.transpose();
    if (ops.q.isZero(0.0)) {
        out.c = Matrix::Zero(kd, kd);
    } else if (kd <= opts.lyapunov_direct_max_dim) {
        out.c = solve_discrete_lyapunov_direct(ops.q, w);
        out.used_direct_solve = true;
    } else {
        out.c = solve_discrete_lyapunov_iterative(ops.q, w, opts.lyapunov_tol, opts.lyapunov_max_iter);
    }

    MomentState limit;
    limit.m = out.m;
    limit.c = out.c;
    out.moments = unconditional_moments_general(limit, truth, grams);
    return out;
}

ConvergenceCertificate check_lemma1(const GramSet& grams, double alpha, double beta,
                                    double residual_tol) {
    ConvergenceCertificate cert;
    const LiftedOperators ops = build_operators(grams, alpha, beta);
    cert.rho_q = spectral_radius(ops.q).radius;

    const Eigen::Index k = grams.entities();
    const Vector target = vecm(grams.lifted_synthetic());
    const Vector u = vecm(grams.lifted_private());
    const Vector v = vecm(kron(Matrix::Identity(k, k), grams.public_gram));

    // Nonnegative least squares in two unknowns: check the interior solution,
    // then both single-coefficient boundaries.
    struct Candidate {
        double a = 0.0;
        double b = 0.0;
        double residual = std::numeric_limits<double>::infinity();
    };
    std::vector<Candidate> candidates;

    Eigen::Matrix2d normal;
    normal << u.dot(u), u.dot(v), u.dot(v), v.dot(v);
    const Eigen::Vector2d rhs(u.dot(target), v.dot(target));
    Eigen::FullPivLU<Eigen::Matrix2d> lu2(normal);
    if (lu2.rank() == 2) {
        const Eigen::Vector2d ab = lu2.solve(rhs);
        if (ab(0) >= 0.0 && ab(1) >= 0.0) {
            candidates.push_back({ab(0), ab(1), relative_residual(target, ab(0) * u + ab(1) * v)});
        }
    }
    if (normal(0, 0) > 0.0) {
        const double a = std::max(0.0, rhs(0) / normal(0, 0));
        candidates.push_back({a, 0.0, relative_residual(target, a * u)});
    }
    if (normal(1, 1) > 0.0) {
        const double b = std::max(0.0, rhs(1) / normal(1, 1));
        candidates.push_back({0.0, b, relative_residual(target, b * v)});
    }

    const Candidate* best = nullptr;
    for (const auto& c : candidates) {
        if (best == nullptr || c.residual < best->residual - 1e-12) {
            best = &c;
        } else if (std::abs(c.residual - best->residual) <= 1e-12 && c.a * (best->a + best->b) > best->a * (c.a + c.b)) {
            // Equal fit: prefer the larger lambda, which weakens the beta <= lambda requirement.
            best = &c;
        }
    }

    if (best != nullptr) {
        cert.fit_residual = best->residual;
        if (best->residual < residual_tol && best->a > 0.0) {
            cert.lemma1_applicable = true;
            cert.gamma = best->a + best->b;
            cert.lambda = best->a / (best->a + best->b);
        }
    } else {
        cert.fit_residual = target.norm() > 0.0 ? 1.0 : 0.0;
    }

    cert.guaranteed = cert.lemma1_applicable && alpha < 1.0 && beta > 0.0 &&
                      beta <= *cert.lambda + 1e-12;
    return cert;
}

}  // namespace synthmix
