#include "krplev/dense_kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace krplev {

namespace {

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

Matrix gram(const Matrix& U) {
    require(!U.empty(), "gram: empty matrix");
    require(U.all_finite(), "gram: non-finite entries");
    const std::size_t n = U.cols, I = U.rows;
    Matrix G(n, n);
    // Parallelized over output entries so the accumulation order per entry is
    // fixed regardless of thread count.
    const std::size_t pairs = n * (n + 1) / 2;
#pragma omp parallel for schedule(static) if (I * pairs > 4096)
    for (std::size_t p = 0; p < pairs; ++p) {
        // unrank p -> (a, b) with a <= b
        std::size_t a = 0, rem = p;
        while (rem >= n - a) {
            rem -= n - a;
            ++a;
        }
        const std::size_t b = a + rem;
        double acc = 0.0;
        for (std::size_t i = 0; i < I; ++i) acc += U(i, a) * U(i, b);
        G(a, b) = acc;
        G(b, a) = acc;
    }
    return G;
}

Matrix gram_cross(const Matrix& A, const Matrix& B) {
    require(A.rows == B.rows, "gram_cross: row count mismatch");
    Matrix C(A.cols, B.cols);
#pragma omp parallel for schedule(static) if (A.rows * A.cols * B.cols > 8192)
    for (std::size_t a = 0; a < A.cols; ++a) {
        for (std::size_t b = 0; b < B.cols; ++b) {
            double acc = 0.0;
            for (std::size_t i = 0; i < A.rows; ++i) acc += A(i, a) * B(i, b);
            C(a, b) = acc;
        }
    }
    return C;
}

Matrix khatri_rao(const Matrix& A, const Matrix& B) {
    require(A.cols == B.cols, "khatri_rao: column count mismatch");
    Matrix C(A.rows * B.rows, A.cols);
#pragma omp parallel for schedule(static) if (A.rows * B.rows * A.cols > 16384)
    for (std::size_t i1 = 0; i1 < A.rows; ++i1) {
        for (std::size_t i2 = 0; i2 < B.rows; ++i2) {
            double* out = C.row(i1 * B.rows + i2);
            const double* ra = A.row(i1);
            const double* rb = B.row(i2);
            for (std::size_t j = 0; j < A.cols; ++j) out[j] = ra[j] * rb[j];
        }
    }
    return C;
}

double gen_inner(const Matrix& A, const Matrix& B, const Matrix& C) {
    require(A.rows == B.rows && A.cols == B.cols && A.rows == C.rows && A.cols == C.cols,
            "gen_inner: shape mismatch");
    double acc = 0.0;
    const std::size_t n = A.data.size();
    for (std::size_t k = 0; k < n; ++k) acc += A.data[k] * B.data[k] * C.data[k];
    return acc;
}

Matrix hadamard_chain(const std::vector<const Matrix*>& mats, std::size_t rows,
                      std::size_t cols) {
    Matrix out = Matrix::ones(rows, cols);
    for (const Matrix* m : mats) {
        require(m != nullptr, "hadamard_chain: null matrix");
        require(m->rows == rows && m->cols == cols, "hadamard_chain: shape mismatch");
        for (std::size_t k = 0; k < out.data.size(); ++k) out.data[k] *= m->data[k];
    }
    return out;
}

EigenPair eigh_psd(const Matrix& G) {
    require(!G.empty() && G.rows == G.cols, "eigh_psd: matrix must be square");
    require(G.all_finite(), "eigh_psd: non-finite entries");
    const std::size_t n = G.rows;

    double asym = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            asym = std::max(asym, std::abs(G(i, j) - G(j, i)));
    if (asym > 1e-10 * std::max(1.0, G.max_abs()))
        throw std::invalid_argument("eigh_psd: input not symmetric within tolerance");

    Matrix A(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) A(i, j) = 0.5 * (G(i, j) + G(j, i));
    Matrix V = Matrix::identity(n);

    double frob = 0.0;
    for (double v : A.data) frob += v * v;
    frob = std::sqrt(frob);
    const double off_target = 1e-12 * frob;

    auto off_norm = [&]() {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) s += 2.0 * A(i, j) * A(i, j);
        return std::sqrt(s);
    };

    const int max_sweeps = 64;
    for (int sweep = 0; sweep < max_sweeps && off_norm() > off_target; ++sweep) {
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = A(p, q);
                if (apq == 0.0) continue;
                const double app = A(p, p), aqq = A(q, q);
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(1.0 + theta * theta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = A(k, p), akq = A(k, q);
                    A(k, p) = c * akp - s * akq;
                    A(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = A(p, k), aqk = A(q, k);
                    A(p, k) = c * apk - s * aqk;
                    A(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = V(k, p), vkq = V(k, q);
                    V(k, p) = c * vkp - s * vkq;
                    V(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = A(i, i);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });

    EigenPair out;
    out.values.resize(n);
    out.vectors = Matrix(n, n);
    const double lambda_max = values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
    for (std::size_t k = 0; k < n; ++k) {
        double lam = values[order[k]];
        if (lam < 0.0) {
            if (lam < -1e-8 * std::max(lambda_max, 0.0))
                throw std::invalid_argument("eigh_psd: significantly negative eigenvalue; input not PSD");
            lam = 0.0;
        }
        out.values[k] = lam;
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = V(i, order[k]);
    }
    return out;
}

double rank_cutoff(const EigenPair& eig) {
    const double lambda_max = eig.values.empty() ? 0.0 : eig.values.front();
    return static_cast<double>(eig.values.size()) *
           std::numeric_limits<double>::epsilon() * lambda_max;
}

std::size_t numerical_rank(const EigenPair& eig) {
    const double tau = rank_cutoff(eig);
    std::size_t r = 0;
    for (double v : eig.values)
        if (v > tau) ++r;
    return r;
}

Matrix pinv_from_eigen(const EigenPair& eig) {
    const std::size_t n = eig.values.size();
    const double tau = rank_cutoff(eig);
    Matrix P(n, n);
    for (std::size_t u = 0; u < n; ++u) {
        if (eig.values[u] <= tau) continue;
        const double inv = 1.0 / eig.values[u];
        for (std::size_t i = 0; i < n; ++i) {
            const double vi = eig.vectors(i, u) * inv;
            for (std::size_t j = 0; j < n; ++j) P(i, j) += vi * eig.vectors(j, u);
        }
    }
    return P;
}

Matrix pinv_psd(const Matrix& G) { return pinv_from_eigen(eigh_psd(G)); }

Matrix matmul(const Matrix& A, const Matrix& B) {
    require(A.cols == B.rows, "matmul: inner dimension mismatch");
    Matrix C(A.rows, B.cols);
#pragma omp parallel for schedule(static) if (A.rows * A.cols * B.cols > 32768)
    for (std::size_t i = 0; i < A.rows; ++i) {
        double* out = C.row(i);
        for (std::size_t k = 0; k < A.cols; ++k) {
            const double aik = A(i, k);
            if (aik == 0.0) continue;
            const double* rb = B.row(k);
            for (std::size_t j = 0; j < B.cols; ++j) out[j] += aik * rb[j];
        }
    }
    return C;
}

Matrix transpose(const Matrix& A) {
    Matrix T(A.cols, A.rows);
    for (std::size_t i = 0; i < A.rows; ++i)
        for (std::size_t j = 0; j < A.cols; ++j) T(j, i) = A(i, j);
    return T;
}

double quadratic_form(std::span<const double> x, const Matrix& M,
                      std::span<const double> y) {
    require(x.size() == M.rows && y.size() == M.cols, "quadratic_form: shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < M.rows; ++i) {
        const double* r = M.row(i);
        double inner = 0.0;
        for (std::size_t j = 0; j < M.cols; ++j) inner += r[j] * y[j];
        acc += x[i] * inner;
    }
    return acc;
}

}  // namespace krplev
