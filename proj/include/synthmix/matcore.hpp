#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace synthmix {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kDefaultPinvTolerance = 1e-12;
inline constexpr double kDefaultRankTolerance = 1e-10;

struct SpectralReport {
    double radius = 0.0;
    /// Residual ||A v - lambda v|| / ||v|| of the dominant eigenpair estimate.
    double dominant_magnitude_error = 0.0;
    bool converged = true;
};

/// Throws InvalidInputError if any entry is NaN or infinite.
void require_finite(const Matrix& a, const char* what);

/// Moore-Penrose pseudoinverse via SVD. Singular values below
/// rel_tol * sigma_max are treated as zero.
Matrix pinv(const Matrix& a, double rel_tol = kDefaultPinvTolerance);

/// Pseudoinverse of a block-diagonal matrix given by its square diagonal blocks.
Matrix pinv_block_diag(std::span<const Matrix> blocks, double rel_tol = kDefaultPinvTolerance);

Matrix kron(const Matrix& a, const Matrix& b);

/// Column-stacking vectorization; returns a (rows*cols) x 1 matrix.
Matrix vecm(const Matrix& a);
Matrix unvec(const Matrix& v, Eigen::Index rows, Eigen::Index cols);

/// Largest eigenvalue magnitude. Uses a dense eigen-decomposition; falls back
/// to power iteration (with an error bound in the report) if that fails.
SpectralReport spectral_radius(const Matrix& a, int max_iter = 10000, double tol = 1e-12);

/// Power iteration estimate of the spectral radius. Works on non-symmetric
/// input by tracking the growth rate of ||A^k x||.
SpectralReport spectral_radius_power(const Matrix& a, int max_iter = 10000, double tol = 1e-12);

Matrix block_diag(std::span<const Matrix> blocks);

/// Numerical rank: count of singular values above rel_tol * sigma_max.
Eigen::Index numerical_rank(const Matrix& a, double rel_tol = kDefaultRankTolerance);

bool is_full_rank(const Matrix& a, double rel_tol = kDefaultRankTolerance);

/// Column of ones of length n.
inline Matrix ones(Eigen::Index n) { return Matrix::Ones(n, 1); }

inline Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

}  // namespace synthmix
