#include "synthmix/metrics.hpp"

#include "synthmix/errors.hpp"

#include <string>

namespace synthmix {

namespace {

void require_entity(const UnconditionalMoments& moments, const GroundTruth& truth, Eigen::Index k) {
    const Eigen::Index d = truth.theta.size();
    if (d == 0 || moments.mean.size() % d != 0) throw ShapeError("moments do not match theta dimension");
    const Eigen::Index entities = moments.mean.size() / d;
    if (k < 0 || k >= entities) {
        throw InvalidInputError("entity index " + std::to_string(k) + " out of range [0, " +
                                std::to_string(entities) + ")");
    }
    if (moments.cov.rows() != moments.mean.size() || moments.cov.cols() != moments.mean.size()) {
        throw ShapeError("covariance does not match mean dimension");
    }
}

}  // namespace

std::string_view to_string(MetricName m) {
    switch (m) {
        case MetricName::Mse: return "mse";
        case MetricName::Mspe: return "mspe";
        case MetricName::RelEfficiency: return "rel_efficiency";
        case MetricName::Dispersion: return "dispersion";
    }
    return "unknown";
}

double entity_mse(const UnconditionalMoments& moments, const GroundTruth& truth, Eigen::Index k) {
    require_entity(moments, truth, k);
    const Eigen::Index d = truth.theta.size();
    const Vector bias = moments.mean.segment(k * d, d) - truth.theta;
    return bias.squaredNorm() + moments.cov.block(k * d, k * d, d, d).trace();
}

double entity_mspe(const UnconditionalMoments& moments, const GroundTruth& truth, Eigen::Index k,
                   const Matrix& target_features, bool normalized) {
    require_entity(moments, truth, k);
    const Eigen::Index d = truth.theta.size();
    if (target_features.cols() != d) {
        throw ShapeError("target features have " + std::to_string(target_features.cols()) +
                         " columns, expected " + std::to_string(d));
    }
    const Vector bias = moments.mean.segment(k * d, d) - truth.theta;
    const Matrix cov = moments.cov.block(k * d, k * d, d, d);
    const double value = (target_features * bias).squaredNorm() +
                         (target_features * cov * target_features.transpose()).trace();
    if (normalized) {
        if (target_features.rows() == 0) return 0.0;
        return value / static_cast<double>(target_features.rows());
    }
    return value;
}

double pooled_mvue_mse(const GramSet& grams, const GroundTruth& truth, double rank_tol) {
    Matrix pooled = grams.public_gram;
    for (const auto& s : grams.private_grams) pooled += s;
    if (!is_full_rank(pooled, rank_tol)) {
        throw PreconditionError("pooled gram of all real data is rank deficient; relative efficiency is undefined");
    }
    return truth.sigma2 * symmetrize(pooled).ldlt().solve(Matrix::Identity(pooled.rows(), pooled.cols())).trace();
}

double pooled_mvue_mse(const InitialData& initial, const GroundTruth& truth) {
    return pooled_mvue_mse(grams_from(initial), truth);
}

double relative_efficiency(const UnconditionalMoments& moments, const GramSet& grams,
                           const GroundTruth& truth, Eigen::Index k) {
    const double mse = entity_mse(moments, truth, k);
    if (!(mse > 0.0)) throw PreconditionError("workflow MSE is zero; relative efficiency is degenerate");
    return pooled_mvue_mse(grams, truth) / mse;
}

double relative_efficiency(const UnconditionalMoments& moments, const InitialData& initial,
                           const GroundTruth& truth, Eigen::Index k) {
    return relative_efficiency(moments, grams_from(initial), truth, k);
}

double dispersion(const Matrix& m_t, Eigen::Index k, Eigen::Index d) {
    if (k < 1 || d < 1 || m_t.rows() != k * d || m_t.cols() != (k + 1) * d) {
        throw ShapeError("dispersion: M must be Kd x (K+1)d");
    }
    double worst = 0.0;
    for (Eigen::Index a = 0; a < k; ++a) {
        for (Eigen::Index b = a + 1; b < k; ++b) {
            const double dist = (m_t.middleRows(a * d, d) - m_t.middleRows(b * d, d)).norm();
            worst = std::max(worst, dist);
        }
    }
    return worst;
}

}  // namespace synthmix
