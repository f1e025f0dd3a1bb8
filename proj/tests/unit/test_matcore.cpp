#include "support.hpp"
#include "synthmix/errors.hpp"
#include "synthmix/matcore.hpp"

#include <doctest.h>

#include <limits>

using namespace synthmix;
using namespace synthmix::testing;

TEST_CASE("pinv of a singular diagonal") {
    Matrix a = Matrix::Zero(2, 2);
    a(0, 0) = 2.0;
    Matrix expected = Matrix::Zero(2, 2);
    expected(0, 0) = 0.5;
    CHECK(max_abs(pinv(a) - expected) < 1e-15);
}

TEST_CASE("pinv of invertible matrix is the inverse") {
    std::mt19937_64 rng(11);
    const Matrix a = random_matrix(5, 5, rng);
    CHECK(max_abs(pinv(a) * a - Matrix::Identity(5, 5)) < 1e-9);
}

TEST_CASE("Penrose identities across rank profiles") {
    std::mt19937_64 rng(12);
    const int shapes[][3] = {{6, 4, 4}, {6, 4, 2}, {4, 6, 3}, {5, 5, 1}, {7, 3, 3}, {3, 3, 0}};
    for (const auto& s : shapes) {
        const Matrix a = s[2] == 0 ? Matrix(Matrix::Zero(s[0], s[1])) : random_rank(s[0], s[1], s[2], rng);
        const Matrix ap = pinv(a);
        const double scale = std::max(1.0, a.norm());
        const double scale_p = std::max(1.0, ap.norm());
        CAPTURE(s[2]);
        CHECK((a * ap * a - a).norm() / scale < 1e-9);
        CHECK((ap * a * ap - ap).norm() / scale_p < 1e-9);
        CHECK(max_abs((a * ap) - (a * ap).transpose()) < 1e-9);
        CHECK(max_abs((ap * a) - (ap * a).transpose()) < 1e-9);
        CHECK(rel_err(ap, pinv_oracle(a)) < 1e-7);
    }
}

TEST_CASE("pinv rejects non-finite input") {
    Matrix a = Matrix::Identity(2, 2);
    a(1, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(pinv(a), InvalidInputError);
}

TEST_CASE("pinv_block_diag matches dense pinv") {
    std::mt19937_64 rng(13);
    std::vector<Matrix> blocks{random_psd(3, 5, rng), random_rank(3, 3, 1, rng), Matrix::Zero(3, 3)};
    CHECK(max_abs(pinv_block_diag(blocks) - pinv(block_diag(blocks))) < 1e-10);
}

TEST_CASE("kron small example and vec identity") {
    Matrix a(2, 2);
    a << 1, 2, 3, 4;
    const Matrix i2 = Matrix::Identity(2, 2);
    const Matrix k = kron(a, i2);
    CHECK(k.rows() == 4);
    CHECK(k(0, 2) == 2.0);
    CHECK(k(3, 1) == 3.0);
    CHECK(k(1, 0) == 0.0);

    std::mt19937_64 rng(14);
    const Matrix x = random_matrix(3, 4, rng);
    const Matrix b = random_matrix(5, 3, rng);
    const Matrix c = random_matrix(4, 2, rng);
    // vec(B X C) = (C^T kron B) vec X
    CHECK(max_abs(vecm(b * x * c) - kron(c.transpose(), b) * vecm(x)) < 1e-10);
}

TEST_CASE("kron mixed product and bilinearity") {
    std::mt19937_64 rng(15);
    const Matrix a = random_matrix(2, 3, rng), b = random_matrix(4, 2, rng);
    const Matrix c = random_matrix(3, 2, rng), d = random_matrix(2, 5, rng);
    CHECK(max_abs(kron(a, b) * kron(c, d) - kron(a * c, b * d)) < 1e-10);
    const Matrix a2 = random_matrix(2, 3, rng);
    CHECK(max_abs(kron(2.0 * a + a2, b) - (2.0 * kron(a, b) + kron(a2, b))) < 1e-12);
    CHECK(max_abs(kron(b, a + a2) - (kron(b, a) + kron(b, a2))) < 1e-12);
}

TEST_CASE("vec and unvec round trip") {
    Matrix a(2, 3);
    a << 1, 2, 3, 4, 5, 6;
    const Matrix v = vecm(a);
    REQUIRE(v.rows() == 6);
    CHECK(v(1, 0) == 4.0);
    CHECK(v(2, 0) == 2.0);
    CHECK(unvec(v, 2, 3) == a);
    CHECK_THROWS_AS(unvec(v, 4, 2), ShapeError);
}

TEST_CASE("spectral radius examples") {
    CHECK(spectral_radius(0.5 * Matrix::Identity(4, 4)).radius == doctest::Approx(0.5).epsilon(1e-12));
    const Matrix pi = (1.0 / 3.0) * kron(Matrix::Ones(3, 3), Matrix::Identity(2, 2));
    CHECK(spectral_radius(pi).radius == doctest::Approx(1.0).epsilon(1e-12));

    Matrix rot(2, 2);
    rot << 0, -2, 2, 0;
    CHECK(spectral_radius(rot).radius == doctest::Approx(2.0).epsilon(1e-12));
    CHECK_THROWS_AS(spectral_radius(Matrix::Zero(2, 3)), ShapeError);
}

TEST_CASE("spectral radius on non-symmetric input matches oracle and transpose") {
    std::mt19937_64 rng(16);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix a = random_matrix(7, 7, rng);
        const double r = spectral_radius(a).radius;
        CHECK(r == doctest::Approx(spectral_radius_oracle(a)).epsilon(1e-10));
        CHECK(r == doctest::Approx(spectral_radius(a.transpose()).radius).epsilon(1e-10));
    }
}

TEST_CASE("power iteration agrees with eigen route") {
    std::mt19937_64 rng(17);
    const Matrix s = random_psd(6, 10, rng);
    const auto rep = spectral_radius_power(s);
    CHECK(rep.converged);
    CHECK(rep.radius == doctest::Approx(spectral_radius_oracle(s)).epsilon(1e-6));
}

TEST_CASE("block_diag assembly") {
    CHECK(block_diag(std::vector<Matrix>{Matrix::Identity(2, 2)}) == Matrix::Identity(2, 2));
    Matrix one(1, 1), two(1, 1);
    one << 1;
    two << 2;
    Matrix expected = Matrix::Zero(2, 2);
    expected(0, 0) = 1;
    expected(1, 1) = 2;
    CHECK(block_diag(std::vector<Matrix>{one, two}) == expected);
    CHECK_THROWS_AS(block_diag(std::vector<Matrix>{}), InvalidInputError);

    // Lifted private gram equals X^T X of the block-diagonal design.
    std::mt19937_64 rng(18);
    std::vector<Matrix> xs{random_matrix(5, 3, rng), random_matrix(4, 3, rng)};
    std::vector<Matrix> grams;
    for (const auto& x : xs) grams.push_back(x.transpose() * x);
    const Matrix xbig = block_diag(xs);
    CHECK(max_abs(block_diag(grams) - xbig.transpose() * xbig) < 1e-12);
}

TEST_CASE("numerical rank") {
    std::mt19937_64 rng(19);
    CHECK(numerical_rank(random_rank(8, 6, 3, rng)) == 3);
    CHECK(is_full_rank(random_matrix(6, 6, rng)));
    CHECK_FALSE(is_full_rank(random_rank(6, 6, 5, rng)));
    CHECK(numerical_rank(Matrix::Zero(3, 3)) == 0);
}
