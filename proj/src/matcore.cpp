#include "synthmix/matcore.hpp"

#include "synthmix/errors.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

namespace synthmix {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::InvalidInput: return "invalid-input";
        case ErrorKind::Shape: return "shape";
        case ErrorKind::Precondition: return "precondition";
        case ErrorKind::Divergence: return "divergence";
        case ErrorKind::Conditioning: return "conditioning";
        case ErrorKind::Config: return "config";
        case ErrorKind::Io: return "io";
    }
    return "unknown";
}

void require_finite(const Matrix& a, const char* what) {
    if (!a.allFinite()) {
        throw InvalidInputError(std::string(what) + ": matrix has non-finite entries");
    }
}

Matrix pinv(const Matrix& a, double rel_tol) {
    require_finite(a, "pinv");
    if (!(rel_tol > 0.0)) throw InvalidInputError("pinv: tolerance must be positive");
    if (a.size() == 0) return Matrix::Zero(a.cols(), a.rows());

    Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sv = svd.singularValues();
    const double cutoff = rel_tol * (sv.size() > 0 ? sv(0) : 0.0);

    Vector inv = Vector::Zero(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > cutoff && sv(i) > 0.0) inv(i) = 1.0 / sv(i);
    }
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Matrix pinv_block_diag(std::span<const Matrix> blocks, double rel_tol) {
    std::vector<Matrix> inverted;
    inverted.reserve(blocks.size());
    for (const auto& b : blocks) inverted.push_back(pinv(b, rel_tol));
    return block_diag(inverted);
}

Matrix kron(const Matrix& a, const Matrix& b) {
    require_finite(a, "kron");
    require_finite(b, "kron");
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

Matrix vecm(const Matrix& a) {
    require_finite(a, "vecm");
    // Eigen storage is column-major, so the raw buffer is already the column stack.
    return Eigen::Map<const Matrix>(a.data(), a.size(), 1);
}

Matrix unvec(const Matrix& v, Eigen::Index rows, Eigen::Index cols) {
    if (v.cols() != 1 || rows < 0 || cols < 0 || v.rows() != rows * cols) {
        throw ShapeError("unvec: cannot reshape " + std::to_string(v.rows()) + "x" +
                         std::to_string(v.cols()) + " into " + std::to_string(rows) + "x" +
                         std::to_string(cols));
    }
    return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

namespace {

void require_square(const Matrix& a, const char* what) {
    if (a.rows() != a.cols()) {
        throw ShapeError(std::string(what) + ": matrix must be square, got " +
                         std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
    }
}

}  // namespace

SpectralReport spectral_radius_power(const Matrix& a, int max_iter, double tol) {
    require_square(a, "spectral_radius_power");
    require_finite(a, "spectral_radius_power");
    SpectralReport report;
    const Eigen::Index n = a.rows();
    if (n == 0 || a.isZero(0.0)) return report;

    // Deterministic start with components in every direction.
    Vector x(n);
    for (Eigen::Index i = 0; i < n; ++i) x(i) = 1.0 + 0.1 * std::sin(static_cast<double>(i + 1));
    x.normalize();

    // Two-step ratio sqrt(||A^2 x|| / ||x||) is stable for a dominant +-lambda
    // pair or a complex-conjugate pair of equal modulus.
    double estimate = 0.0;
    double change = std::numeric_limits<double>::infinity();
    report.converged = false;
    for (int it = 0; it < max_iter; ++it) {
        Vector y = a * x;
        Vector z = a * y;
        const double nz = z.norm();
        if (nz == 0.0) {
            estimate = 0.0;
            change = 0.0;
            report.converged = true;
            break;
        }
        const double next = std::sqrt(nz);
        change = std::abs(next - estimate);
        estimate = next;
        x = z / nz;
        if (it > 2 && change <= tol * std::max(1.0, estimate)) {
            report.converged = true;
            break;
        }
    }
    report.radius = estimate;
    report.dominant_magnitude_error = change;
    return report;
}

SpectralReport spectral_radius(const Matrix& a, int max_iter, double tol) {
    require_square(a, "spectral_radius");
    require_finite(a, "spectral_radius");
    SpectralReport report;
    if (a.rows() == 0) return report;

    Eigen::EigenSolver<Matrix> es(a, /*computeEigenvectors=*/true);
    if (es.info() != Eigen::Success) return spectral_radius_power(a, max_iter, tol);

    const auto& values = es.eigenvalues();
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < values.size(); ++i) {
        if (std::abs(values(i)) > std::abs(values(best))) best = i;
    }
    report.radius = std::abs(values(best));
    const Eigen::VectorXcd v = es.eigenvectors().col(best);
    const double vn = v.norm();
    if (vn > 0.0) {
        report.dominant_magnitude_error =
            (a.cast<std::complex<double>>() * v - values(best) * v).norm() / vn;
    }
    return report;
}

Matrix block_diag(std::span<const Matrix> blocks) {
    if (blocks.empty()) throw InvalidInputError("block_diag: empty block list");
    Eigen::Index rows = 0, cols = 0;
    for (const auto& b : blocks) {
        require_finite(b, "block_diag");
        rows += b.rows();
        cols += b.cols();
    }
    Matrix out = Matrix::Zero(rows, cols);
    Eigen::Index r = 0, c = 0;
    for (const auto& b : blocks) {
        out.block(r, c, b.rows(), b.cols()) = b;
        r += b.rows();
        c += b.cols();
    }
    return out;
}

Eigen::Index numerical_rank(const Matrix& a, double rel_tol) {
    require_finite(a, "numerical_rank");
    if (a.size() == 0) return 0;
    Eigen::JacobiSVD<Matrix> svd(a);
    const Vector& sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) == 0.0) return 0;
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > rel_tol * sv(0)) ++rank;
    }
    return rank;
}

bool is_full_rank(const Matrix& a, double rel_tol) {
    return numerical_rank(a, rel_tol) == std::min(a.rows(), a.cols());
}

}  // namespace synthmix
