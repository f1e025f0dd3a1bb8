#pragma once

// Shared helpers for the test suites: seeded random matrices and oracles
// that deliberately avoid the library code paths they are used to check.

#include "synthmix/matcore.hpp"
#include "synthmix/workflow.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>
#include <vector>

namespace synthmix::testing {

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> n01(0.0, 1.0);
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = n01(rng);
    return m;
}

/// rows x cols matrix with exact rank r (r <= min(rows, cols)).
inline Matrix random_rank(Eigen::Index rows, Eigen::Index cols, Eigen::Index r, std::mt19937_64& rng) {
    return random_matrix(rows, r, rng) * random_matrix(r, cols, rng);
}

inline Matrix random_psd(Eigen::Index d, Eigen::Index n, std::mt19937_64& rng) {
    const Matrix x = random_matrix(n, d, rng);
    return symmetrize(x.transpose() * x);
}

inline double max_abs(const Matrix& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

inline double rel_err(const Matrix& a, const Matrix& b) {
    const double scale = std::max(1.0, b.norm());
    return (a - b).norm() / scale;
}

/// Pseudoinverse through the symmetric eigen-decomposition of A^T A; used as
/// an independent check on the SVD route.
inline Matrix pinv_oracle(const Matrix& a, double rel_tol = 1e-10) {
    const Matrix ata = symmetrize(a.transpose() * a);
    Eigen::SelfAdjointEigenSolver<Matrix> es(ata);
    const Vector& ev = es.eigenvalues();
    const double top = ev.size() ? ev.maxCoeff() : 0.0;
    Vector inv = Vector::Zero(ev.size());
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (ev(i) > rel_tol * top && ev(i) > 0.0) inv(i) = 1.0 / ev(i);
    return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose() * a.transpose();
}

/// Largest eigenvalue magnitude from the companion characteristic route:
/// complex Schur form diagonal.
inline double spectral_radius_oracle(const Matrix& a) {
    Eigen::ComplexSchur<Matrix> schur(a);
    double r = 0.0;
    const auto& t = schur.matrixT();
    for (Eigen::Index i = 0; i < t.rows(); ++i) r = std::max(r, std::abs(t(i, i)));
    return r;
}

/// Random gram set with K entities in dimension d.
inline GramSet random_grams(Eigen::Index k, Eigen::Index d, std::mt19937_64& rng,
                            Eigen::Index private_rank = -1) {
    GramSet g;
    for (Eigen::Index i = 0; i < k; ++i) {
        const Eigen::Index r = private_rank < 0 ? d : private_rank;
        const Matrix x = random_rank(3 * d, d, std::max<Eigen::Index>(r, 0), rng);
        g.private_grams.push_back(symmetrize(x.transpose() * x));
    }
    g.public_gram = random_psd(d, 3 * d, rng);
    for (Eigen::Index i = 0; i < k; ++i) g.synthetic_grams.push_back(random_psd(d, 2 * d, rng));
    return g;
}

}  // namespace synthmix::testing
