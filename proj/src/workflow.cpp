#include "synthmix/workflow.hpp"

#include "synthmix/errors.hpp"

#include <Eigen/Eigenvalues>

#include <string>

namespace synthmix {

namespace {

std::string dims(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_unit_interval(double v, const char* name, std::size_t t) {
    if (!(v >= 0.0 && v <= 1.0)) {
        throw InvalidInputError(std::string(name) + "[" + std::to_string(t) +
                                "] = " + std::to_string(v) + " outside [0, 1]");
    }
}

void require_psd(const Matrix& s, const std::string& name) {
    require_finite(s, name.c_str());
    if (s.rows() != s.cols()) throw ShapeError(name + " must be square, got " + dims(s));
    if (s.size() == 0) return;
    const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
    if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
        throw InvalidInputError(name + " is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(s), Eigen::EigenvaluesOnly);
    const double trace = s.trace();
    if (es.eigenvalues().minCoeff() < -1e-10 * std::max(trace, 1.0)) {
        throw InvalidInputError(name + " is not positive semidefinite");
    }
}

}  // namespace

void InitialData::validate() const {
    if (private_data.empty()) throw InvalidInputError("initial data needs at least one entity");
    const Eigen::Index d = public_data.features.cols();
    auto check = [d](const Dataset& ds, const std::string& name) {
        if (ds.features.cols() != d) {
            throw ShapeError(name + " has " + std::to_string(ds.features.cols()) +
                             " feature columns, expected " + std::to_string(d));
        }
        if (ds.responses.size() != ds.features.rows()) {
            throw ShapeError(name + " has " + std::to_string(ds.responses.size()) +
                             " responses for " + std::to_string(ds.features.rows()) + " rows");
        }
        require_finite(ds.features, name.c_str());
        require_finite(ds.responses, name.c_str());
    };
    check(public_data, "public data");
    for (std::size_t k = 0; k < private_data.size(); ++k) {
        check(private_data[k], "private data " + std::to_string(k));
    }
}

MixWeights MixWeights::constant(double alpha, double beta, int horizon, double beta0) {
    if (horizon < 0) throw InvalidInputError("horizon must be nonnegative");
    MixWeights w;
    w.alpha.assign(static_cast<std::size_t>(horizon) + 1, alpha);
    w.beta.assign(static_cast<std::size_t>(horizon) + 1, beta);
    w.alpha[0] = 0.0;
    w.beta[0] = beta0;
    return w;
}

void MixWeights::validate() const {
    if (alpha.empty() || alpha.size() != beta.size()) {
        throw InvalidInputError("alpha and beta schedules must be non-empty and of equal length");
    }
    if (alpha[0] != 0.0) throw InvalidInputError("alpha[0] must be 0");
    for (std::size_t t = 0; t < alpha.size(); ++t) {
        require_unit_interval(alpha[t], "alpha", t);
        require_unit_interval(beta[t], "beta", t);
    }
}

Matrix GramSet::mean_synthetic() const {
    const Eigen::Index d = dim();
    if (synthetic_grams.empty()) return Matrix::Zero(d, d);
    Matrix sum = Matrix::Zero(d, d);
    for (const auto& s : synthetic_grams) sum += s;
    return sum / static_cast<double>(synthetic_grams.size());
}

Matrix GramSet::lifted_private() const { return block_diag(private_grams); }

Matrix GramSet::lifted_synthetic() const {
    if (synthetic_grams.empty()) {
        const Eigen::Index n = entities() * dim();
        return Matrix::Zero(n, n);
    }
    return block_diag(synthetic_grams);
}

void GramSet::validate() const {
    if (private_grams.empty()) throw InvalidInputError("gram set needs at least one entity");
    const Eigen::Index d = dim();
    require_psd(public_gram, "public gram");
    for (std::size_t k = 0; k < private_grams.size(); ++k) {
        const auto name = "private gram " + std::to_string(k);
        if (private_grams[k].rows() != d || private_grams[k].cols() != d) {
            throw ShapeError(name + " is " + dims(private_grams[k]) + ", expected d = " + std::to_string(d));
        }
        require_psd(private_grams[k], name);
    }
    if (!synthetic_grams.empty() && synthetic_grams.size() != private_grams.size()) {
        throw ShapeError("synthetic grams: expected " + std::to_string(private_grams.size()) +
                         " blocks, got " + std::to_string(synthetic_grams.size()));
    }
    for (std::size_t k = 0; k < synthetic_grams.size(); ++k) {
        const auto name = "synthetic gram " + std::to_string(k);
        if (synthetic_grams[k].rows() != d || synthetic_grams[k].cols() != d) {
            throw ShapeError(name + " is " + dims(synthetic_grams[k]) + ", expected d = " + std::to_string(d));
        }
        require_psd(synthetic_grams[k], name);
    }
}

Matrix build_gram(const Matrix& features) {
    require_finite(features, "build_gram");
    Matrix s = features.transpose() * features;
    return symmetrize(s);
}

Matrix build_projection(Eigen::Index k, Eigen::Index d) {
    if (k < 1 || d < 1) throw InvalidInputError("build_projection: k and d must be positive");
    return kron(Matrix::Constant(k, k, 1.0 / static_cast<double>(k)), Matrix::Identity(d, d));
}

LiftedOperators build_operators(const GramSet& grams, double alpha, double beta, double pinv_tol) {
    grams.validate();
    require_unit_interval(alpha, "alpha", 0);
    require_unit_interval(beta, "beta", 0);

    const Eigen::Index k = grams.entities();
    const Eigen::Index d = grams.dim();
    const double abar = 1.0 - alpha;
    const double bbar = 1.0 - beta;
    const Matrix mean_syn = grams.mean_synthetic();

    LiftedOperators ops;
    ops.alpha = alpha;
    ops.beta = beta;

    // G is block diagonal; invert block by block.
    std::vector<Matrix> g_blocks;
    g_blocks.reserve(static_cast<std::size_t>(k));
    for (Eigen::Index i = 0; i < k; ++i) {
        g_blocks.push_back(abar * beta * grams.private_grams[static_cast<std::size_t>(i)] +
                           abar * bbar * grams.public_gram + alpha * mean_syn);
    }
    ops.g = block_diag(g_blocks);
    ops.g_pinv = pinv_block_diag(g_blocks, pinv_tol);
    ops.pi = build_projection(k, d);

    Matrix initial_map(k * d, (k + 1) * d);
    initial_map.leftCols(k * d) = beta * grams.lifted_private();
    initial_map.rightCols(d) = bbar * kron(ones(k), grams.public_gram);
    ops.p = abar * ops.g_pinv * initial_map;

    if (alpha == 0.0) {
        ops.q = Matrix::Zero(k * d, k * d);
    } else {
        ops.q = alpha * ops.g_pinv * ops.pi * grams.lifted_synthetic();
    }
    return ops;
}

Matrix initial_ols_cov_factor(const GramSet& grams) {
    std::vector<Matrix> blocks;
    blocks.reserve(grams.private_grams.size() + 1);
    for (const auto& s : grams.private_grams) blocks.push_back(pinv(s));
    blocks.push_back(pinv(grams.public_gram));
    return block_diag(blocks);
}

Vector initial_ols_mean(const GramSet& grams, const Vector& theta) {
    const Eigen::Index d = grams.dim();
    if (theta.size() != d) throw ShapeError("theta has wrong dimension");
    const Eigen::Index k = grams.entities();
    Vector out((k + 1) * d);
    for (Eigen::Index i = 0; i < k; ++i) {
        const Matrix& s = grams.private_grams[static_cast<std::size_t>(i)];
        out.segment(i * d, d) = s * pinv(s) * theta;
    }
    out.segment(k * d, d) = grams.public_gram * pinv(grams.public_gram) * theta;
    return out;
}

Vector initial_ols_vector(const InitialData& data) {
    data.validate();
    const Eigen::Index d = data.dim();
    const Eigen::Index k = data.entities();
    Vector out((k + 1) * d);
    for (Eigen::Index i = 0; i < k; ++i) {
        const auto& ds = data.private_data[static_cast<std::size_t>(i)];
        out.segment(i * d, d) = pinv(ds.features) * ds.responses;
    }
    out.segment(k * d, d) = pinv(data.public_data.features) * data.public_data.responses;
    return out;
}

GramSet grams_from(const InitialData& data) {
    data.validate();
    GramSet g;
    for (const auto& ds : data.private_data) g.private_grams.push_back(build_gram(ds.features));
    g.public_gram = build_gram(data.public_data.features);
    return g;
}

Vector weighted_min_norm_fit(std::span<const WeightedDataset> datasets, double pinv_tol) {
    if (datasets.empty()) throw InvalidInputError("weighted_min_norm_fit: no datasets");
    const Eigen::Index d = datasets.front().features.cols();
    Matrix lhs = Matrix::Zero(d, d);
    Vector rhs = Vector::Zero(d);
    bool any_positive = false;
    for (const auto& ds : datasets) {
        if (ds.features.cols() != d) throw ShapeError("weighted_min_norm_fit: inconsistent feature dimension");
        if (ds.responses.size() != ds.features.rows()) {
            throw ShapeError("weighted_min_norm_fit: response length does not match rows");
        }
        if (!(ds.weight >= 0.0) || !std::isfinite(ds.weight)) {
            throw InvalidInputError("weighted_min_norm_fit: weights must be finite and nonnegative");
        }
        if (ds.weight == 0.0) continue;
        any_positive = true;
        lhs.noalias() += ds.weight * (ds.features.transpose() * ds.features);
        rhs.noalias() += ds.weight * (ds.features.transpose() * ds.responses);
    }
    if (!any_positive) throw InvalidInputError("weighted_min_norm_fit: all weights are zero");
    return pinv(symmetrize(lhs), pinv_tol) * rhs;
}

Vector generate_synthetic(const Vector& theta_hat, const Matrix& features, double sigma2,
                          std::mt19937_64& rng) {
    if (!(sigma2 >= 0.0)) throw InvalidInputError("generate_synthetic: sigma2 must be nonnegative");
    if (features.cols() != theta_hat.size()) throw ShapeError("generate_synthetic: dimension mismatch");
    Vector y = features * theta_hat;
    if (sigma2 == 0.0) return y;
    std::normal_distribution<double> noise(0.0, std::sqrt(sigma2));
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += noise(rng);
    return y;
}

}  // namespace synthmix
