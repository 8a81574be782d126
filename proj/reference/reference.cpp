#include "reference.hpp"

#include <cmath>
#include <stdexcept>

#include "krplev/dense_kernels.hpp"

namespace krplev::ref {

Matrix gram_serial(const Matrix& U) {
    Matrix G(U.cols, U.cols);
    for (std::size_t i = 0; i < U.rows; ++i)
        for (std::size_t a = 0; a < U.cols; ++a)
            for (std::size_t b = 0; b < U.cols; ++b) G(a, b) += U(i, a) * U(i, b);
    return G;
}

Matrix khatri_rao_columns(const Matrix& A, const Matrix& B) {
    if (A.cols != B.cols) throw std::invalid_argument("khatri_rao_columns: column mismatch");
    Matrix C(A.rows * B.rows, A.cols);
    for (std::size_t j = 0; j < A.cols; ++j) {
        // Kronecker product of column j of A with column j of B.
        for (std::size_t i1 = 0; i1 < A.rows; ++i1)
            for (std::size_t i2 = 0; i2 < B.rows; ++i2)
                C(i1 * B.rows + i2, j) = A(i1, j) * B(i2, j);
    }
    return C;
}

Matrix materialize_krp(std::span<const Matrix> factors, RowOrder order) {
    if (factors.empty()) throw std::invalid_argument("materialize_krp: no factors");
    std::vector<std::size_t> seq(factors.size());
    for (std::size_t k = 0; k < factors.size(); ++k)
        seq[k] = (order == RowOrder::Ascending) ? k : factors.size() - 1 - k;
    Matrix A = factors[seq[0]];
    for (std::size_t k = 1; k < seq.size(); ++k) A = khatri_rao_columns(A, factors[seq[k]]);
    return A;
}

std::vector<double> leverage_scores(const Matrix& A) {
    const Matrix pinv = pinv_psd(gram_serial(A));
    std::vector<double> ell(A.rows);
    for (std::size_t i = 0; i < A.rows; ++i) {
        const std::span<const double> row(A.row(i), A.cols);
        ell[i] = quadratic_form(row, pinv, row);
    }
    return ell;
}

std::vector<double> enumerate_q(const Matrix& U, std::span<const double> h,
                                const Matrix& Y) {
    if (h.size() != U.cols || Y.rows != U.cols || Y.cols != U.cols)
        throw std::invalid_argument("enumerate_q: shape mismatch");
    std::vector<double> mass(U.rows);
    double total = 0.0;
    for (std::size_t i = 0; i < U.rows; ++i) {
        double acc = 0.0;
        const double* r = U.row(i);
        for (std::size_t a = 0; a < U.cols; ++a)
            for (std::size_t b = 0; b < U.cols; ++b)
                acc += h[a] * h[b] * r[a] * r[b] * Y(a, b);
        mass[i] = acc;
        total += acc;
    }
    if (!(total > 0.0)) throw std::runtime_error("enumerate_q: degenerate distribution");
    for (double& m : mass) m /= total;
    return mass;
}

std::size_t draw_by_enumeration(std::span<const double> probs, CounterRng& rng) {
    const double d = rng.uniform();
    double cum = 0.0;
    std::size_t last_nonzero = probs.size() - 1;
    bool seen = false;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] > 0.0) {
            last_nonzero = i;
            seen = true;
        }
        cum += probs[i];
        if (cum >= d) return i;
    }
    return seen ? last_nonzero : probs.size() - 1;
}

Matrix mttkrp_serial(const SparseTensorCoo& T, const std::vector<Matrix>& factors,
                     std::size_t j) {
    const std::size_t N = T.ndim();
    const std::size_t R = factors[0].cols;
    Matrix M(T.dims()[j], R);
    for (std::size_t e = 0; e < T.nnz(); ++e) {
        const auto c = T.coords(e);
        for (std::size_t r = 0; r < R; ++r) {
            double v = T.values()[e];
            for (std::size_t k = 0; k < N; ++k)
                if (k != j) v *= factors[k](c[k], r);
            M(c[j], r) += v;
        }
    }
    return M;
}

Matrix matricize(const DenseTensor& T, std::size_t j) {
    std::uint64_t other = 1;
    for (std::size_t k = 0; k < T.ndim(); ++k)
        if (k != j) other *= T.dims[k];
    Matrix M(T.dims[j], other);
    std::vector<std::uint32_t> c(T.ndim(), 0);
    for (std::uint64_t f = 0; f < T.size(); ++f) {
        M(c[j], matricize_column_index(c, j, T.dims)) = T.values[f];
        for (std::size_t k = 0; k < T.ndim(); ++k) {
            if (++c[k] < T.dims[k]) break;
            c[k] = 0;
        }
    }
    return M;
}

Matrix naive_als_update(const DenseTensor& T, const std::vector<Matrix>& factors,
                        std::size_t j) {
    std::vector<Matrix> others;
    for (std::size_t k = factors.size(); k-- > 0;)
        if (k != j) others.push_back(factors[k]);
    const Matrix design = materialize_krp(others, RowOrder::Ascending);
    const Matrix rhs = transpose(matricize(T, j));  // prod(others) x I_j
    // argmin_X |design X^T - rhs|: X = (rhs^T design) (design^T design)^+
    return matmul(gram_cross(rhs, design), pinv_psd(gram_serial(design)));
}

double fit_bruteforce(const KruskalTensor& model, const DenseTensor& T) {
    double resid = 0.0, norm = 0.0;
    std::vector<std::uint32_t> c(T.ndim(), 0);
    for (std::uint64_t f = 0; f < T.size(); ++f) {
        const double d = model.value_at(c) - T.values[f];
        resid += d * d;
        norm += T.values[f] * T.values[f];
        for (std::size_t k = 0; k < T.ndim(); ++k) {
            if (++c[k] < T.dims[k]) break;
            c[k] = 0;
        }
    }
    return 1.0 - std::sqrt(resid) / std::sqrt(norm);
}

DenseTensor densify(const SparseTensorCoo& T) {
    DenseTensor d;
    d.dims = T.dims();
    d.values.assign(d.size(), 0.0);
    for (std::size_t e = 0; e < T.nnz(); ++e) d.values[d.flat(T.coords(e))] = T.values()[e];
    return d;
}

std::vector<double> kron_vectors(std::span<const std::vector<double>> vs) {
    std::vector<double> out{1.0};
    for (const std::vector<double>& v : vs) {
        std::vector<double> next(out.size() * v.size());
        for (std::size_t a = 0; a < out.size(); ++a)
            for (std::size_t b = 0; b < v.size(); ++b) next[a * v.size() + b] = out[a] * v[b];
        out = std::move(next);
    }
    return out;
}

double total_variation(std::span<const double> p, std::span<const std::uint64_t> counts,
                       std::uint64_t total) {
    double tv = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        tv += std::abs(p[i] - static_cast<double>(counts[i]) / static_cast<double>(total));
    return 0.5 * tv;
}

}  // namespace krplev::ref
