#include "doctest.h"

#include <cmath>

#include "krplev/dense_kernels.hpp"
#include "reference.hpp"
#include "support.hpp"

using namespace krplev;
using testsupport::max_abs_diff;
using testsupport::random_matrix;
using testsupport::random_psd;

TEST_CASE("gram of identity and all-ones") {
    CHECK(max_abs_diff(gram(Matrix::identity(2)), Matrix::identity(2)) == 0.0);

    const Matrix ones = Matrix::ones(2, 2);
    Matrix expected(2, 2, 2.0);
    CHECK(max_abs_diff(gram(ones), expected) == 0.0);
}

TEST_CASE("gram matches the triple-loop oracle") {
    const Matrix u = random_matrix(8, 4, 101);
    CHECK(max_abs_diff(gram(u), ref::gram_serial(u)) <= 1e-12);
    const Matrix big = random_matrix(700, 5, 102);
    CHECK(max_abs_diff(gram(big), ref::gram_serial(big)) <= 1e-9);
}

TEST_CASE("khatri_rao basic cases") {
    Matrix a(1, 2);
    a(0, 0) = 1;
    a(0, 1) = 2;
    Matrix b(1, 2);
    b(0, 0) = 3;
    b(0, 1) = 4;
    const Matrix c = khatri_rao(a, b);
    CHECK(c.rows == 1);
    CHECK(c(0, 0) == 3.0);
    CHECK(c(0, 1) == 8.0);

    const Matrix kr = khatri_rao(Matrix::identity(2), Matrix::identity(2));
    CHECK(kr.rows == 4);
    // rows: e1, 0, 0, e2
    CHECK(kr(0, 0) == 1.0);
    CHECK(kr(0, 1) == 0.0);
    CHECK(kr(1, 0) == 0.0);
    CHECK(kr(1, 1) == 0.0);
    CHECK(kr(2, 0) == 0.0);
    CHECK(kr(2, 1) == 0.0);
    CHECK(kr(3, 1) == 1.0);

    CHECK_THROWS(khatri_rao(Matrix(2, 2), Matrix(2, 3)));
}

TEST_CASE("khatri_rao equals the per-column Kronecker oracle") {
    const Matrix a = random_matrix(3, 2, 11);
    const Matrix b = random_matrix(4, 2, 12);
    CHECK(max_abs_diff(khatri_rao(a, b), ref::khatri_rao_columns(a, b)) <= 1e-14);
}

TEST_CASE("gen_inner examples and oracle") {
    const Matrix ones = Matrix::ones(2, 2);
    CHECK(gen_inner(ones, ones, ones) == 4.0);

    const Matrix a = random_matrix(3, 3, 21), b = random_matrix(3, 3, 22);
    CHECK(gen_inner(a, b, Matrix(3, 3)) == 0.0);

    const Matrix x = random_matrix(4, 4, 23), y = random_matrix(4, 4, 24),
                 z = random_matrix(4, 4, 25);
    double oracle = 0.0;
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) oracle += x(i, j) * y(i, j) * z(i, j);
    CHECK(std::abs(gen_inner(x, y, z) - oracle) <= 1e-12);

    CHECK_THROWS(gen_inner(Matrix(2, 2), Matrix(2, 3), Matrix(2, 2)));
}

TEST_CASE("gen_inner is invariant under a common permutation of entries") {
    const Matrix x = random_matrix(3, 4, 31), y = random_matrix(3, 4, 32),
                 z = random_matrix(3, 4, 33);
    const double base = gen_inner(x, y, z);
    // reverse all three layouts identically
    Matrix xr = x, yr = y, zr = z;
    std::reverse(xr.data.begin(), xr.data.end());
    std::reverse(yr.data.begin(), yr.data.end());
    std::reverse(zr.data.begin(), zr.data.end());
    CHECK(std::abs(gen_inner(xr, yr, zr) - base) <= 1e-12);
}

TEST_CASE("hadamard_chain examples") {
    const Matrix empty = hadamard_chain({}, 2, 2);
    CHECK(max_abs_diff(empty, Matrix::ones(2, 2)) == 0.0);

    const Matrix a = random_matrix(2, 2, 41);
    CHECK(max_abs_diff(hadamard_chain({&a}, 2, 2), a) == 0.0);

    Matrix twos = Matrix::identity(2);
    twos(0, 0) = 2.0;
    twos(1, 1) = 2.0;
    Matrix fours = Matrix::identity(2);
    fours(0, 0) = 4.0;
    fours(1, 1) = 4.0;
    CHECK(max_abs_diff(hadamard_chain({&twos, &twos}, 2, 2), fours) == 0.0);

    CHECK_THROWS(hadamard_chain({&a}, 3, 2));
}

TEST_CASE("gram of khatri_rao equals hadamard of grams") {
    const Matrix a = random_matrix(8, 3, 51);
    const Matrix b = random_matrix(8, 3, 52);
    const Matrix left = gram(khatri_rao(a, b));
    const Matrix ga = gram(a), gb = gram(b);
    const Matrix right = hadamard_chain({&ga, &gb}, 3, 3);
    CHECK(max_abs_diff(left, right) <= 1e-10 * right.max_abs());
}

TEST_CASE("eigh_psd on diagonal and analytic 2x2") {
    Matrix d(2, 2);
    d(0, 0) = 3.0;
    d(1, 1) = 2.0;
    const EigenPair e = eigh_psd(d);
    CHECK(e.values[0] == doctest::Approx(3.0));
    CHECK(e.values[1] == doctest::Approx(2.0));
    // permutation-of-identity eigenvectors
    CHECK(std::abs(e.vectors(0, 0)) == doctest::Approx(1.0));
    CHECK(std::abs(e.vectors(1, 1)) == doctest::Approx(1.0));

    Matrix g(2, 2);
    g(0, 0) = 2.0;
    g(0, 1) = 1.0;
    g(1, 0) = 1.0;
    g(1, 1) = 2.0;
    const EigenPair e2 = eigh_psd(g);
    CHECK(e2.values[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(e2.values[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("eigh_psd invariants on a random Gram") {
    const Matrix u = random_matrix(16, 4, 61);
    const Matrix g = gram(u);
    const EigenPair e = eigh_psd(g);

    // orthogonality
    const Matrix vtv = gram(e.vectors);
    CHECK(max_abs_diff(vtv, Matrix::identity(4)) <= 1e-10);

    // descending, nonnegative
    for (std::size_t i = 0; i + 1 < 4; ++i) CHECK(e.values[i] >= e.values[i + 1]);
    CHECK(e.values[3] >= 0.0);

    // reconstruction
    Matrix recon(4, 4);
    for (std::size_t a = 0; a < 4; ++a)
        for (std::size_t b = 0; b < 4; ++b) {
            double acc = 0.0;
            for (std::size_t k = 0; k < 4; ++k)
                acc += e.vectors(a, k) * e.values[k] * e.vectors(b, k);
            recon(a, b) = acc;
        }
    CHECK(max_abs_diff(recon, g) <= 1e-8 * g.max_abs());
}

TEST_CASE("eigh_psd rejects bad input") {
    Matrix asym(2, 2);
    asym(0, 1) = 1.0;  // not symmetric
    CHECK_THROWS(eigh_psd(asym));

    Matrix indef = Matrix::identity(2);
    indef(1, 1) = -1.0;  // genuinely negative eigenvalue
    CHECK_THROWS(eigh_psd(indef));
}

TEST_CASE("pinv_psd examples") {
    Matrix one(1, 1);
    one(0, 0) = 4.0;
    CHECK(pinv_psd(one)(0, 0) == doctest::Approx(0.25));

    Matrix d(2, 2);
    d(0, 0) = 2.0;
    const Matrix p = pinv_psd(d);
    CHECK(p(0, 0) == doctest::Approx(0.5));
    CHECK(p(1, 1) == doctest::Approx(0.0));
}

TEST_CASE("pinv_psd satisfies the Moore-Penrose identities") {
    const Matrix g = random_psd(4, 71);
    const Matrix p = pinv_psd(g);
    const double scale = g.max_abs();

    const Matrix gpg = matmul(matmul(g, p), g);
    CHECK(max_abs_diff(gpg, g) <= 1e-8 * scale);
    const Matrix pgp = matmul(matmul(p, g), p);
    CHECK(max_abs_diff(pgp, p) <= 1e-8 * p.max_abs());
    // symmetry of the two projectors
    const Matrix gp = matmul(g, p);
    CHECK(max_abs_diff(gp, transpose(gp)) <= 1e-8);
    const Matrix pg = matmul(p, g);
    CHECK(max_abs_diff(pg, transpose(pg)) <= 1e-8);

    // rank-deficient case
    Matrix lowrank(3, 3);
    const Matrix u = random_matrix(3, 2, 72);
    for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = 0; b < 3; ++b) {
            double acc = 0.0;
            for (std::size_t k = 0; k < 2; ++k) acc += u(a, k) * u(b, k);
            lowrank(a, b) = acc;
        }
    const Matrix lp = pinv_psd(lowrank);
    const Matrix check = matmul(matmul(lowrank, lp), lowrank);
    CHECK(max_abs_diff(check, lowrank) <= 1e-8 * lowrank.max_abs());
}
