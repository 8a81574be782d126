#include "krplev/cp_als.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <type_traits>

#include "krplev/dense_kernels.hpp"

namespace krplev {

namespace {

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// |U_neq_j X^T - mat(T,j)^T|_F^2 for X = candidate factor (I_j x R), using
// the Gram identity: tr(X G X^T) - 2 <X, M> + |T|^2.
double solve_residual_sq(const Matrix& X, const Matrix& G, const Matrix& M,
                         double tensor_norm_sq) {
    double acc = tensor_norm_sq;
    for (std::size_t i = 0; i < X.rows; ++i) {
        const std::span<const double> row(X.row(i), X.cols);
        acc += quadratic_form(row, G, row);
        const double* mrow = M.row(i);
        for (std::size_t c = 0; c < X.cols; ++c) acc -= 2.0 * row[c] * mrow[c];
    }
    return acc;
}

// Column renormalization: norms move into sigma; exact zero columns get a
// deterministic unit basis vector and zero weight.
void normalize_columns(Matrix& U, std::vector<double>& sigma) {
    sigma.assign(U.cols, 0.0);
    for (std::size_t c = 0; c < U.cols; ++c) {
        double nrm = 0.0;
        for (std::size_t i = 0; i < U.rows; ++i) nrm += U(i, c) * U(i, c);
        nrm = std::sqrt(nrm);
        sigma[c] = nrm;
        if (nrm > 0.0) {
            for (std::size_t i = 0; i < U.rows; ++i) U(i, c) /= nrm;
        } else {
            U(c % U.rows, c) = 1.0;
        }
    }
}

Matrix gram_of_others(const std::vector<Matrix>& factors, std::size_t j) {
    std::vector<Matrix> grams;
    for (std::size_t k = 0; k < factors.size(); ++k)
        if (k != j) grams.push_back(gram(factors[k]));
    std::vector<const Matrix*> gs;
    for (const Matrix& g : grams) gs.push_back(&g);
    return hadamard_chain(gs, factors[0].cols, factors[0].cols);
}

}  // namespace

Matrix mttkrp(const SparseTensorCoo& T, const std::vector<Matrix>& factors, std::size_t j) {
    require(j < T.ndim(), "mttkrp: mode out of range");
    require(factors.size() == T.ndim(), "mttkrp: factor count mismatch");
    const std::size_t N = T.ndim();
    const std::size_t R = factors[0].cols;
    const std::size_t Ij = T.dims()[j];
    Matrix M(Ij, R);
    const SparseTensorCoo::ModeIndex& idx = T.mode_index(j);

#pragma omp parallel for schedule(dynamic, 64)
    for (std::size_t i = 0; i < Ij; ++i) {
        double* out = M.row(i);
        std::vector<double> tmp(R);
        for (std::uint64_t p = idx.ptr[i]; p < idx.ptr[i + 1]; ++p) {
            const std::size_t e = idx.order[p];
            const std::span<const std::uint32_t> c = T.coords(e);
            const double v = T.values()[e];
            for (std::size_t r = 0; r < R; ++r) tmp[r] = v;
            for (std::size_t k = 0; k < N; ++k) {
                if (k == j) continue;
                const double* row = factors[k].row(c[k]);
                for (std::size_t r = 0; r < R; ++r) tmp[r] *= row[r];
            }
            for (std::size_t r = 0; r < R; ++r) out[r] += tmp[r];
        }
    }
    return M;
}

Matrix mttkrp(const DenseTensor& T, const std::vector<Matrix>& factors, std::size_t j) {
    require(j < T.ndim(), "mttkrp: mode out of range");
    require(factors.size() == T.ndim(), "mttkrp: factor count mismatch");
    const std::size_t N = T.ndim();
    const std::size_t R = factors[0].cols;
    Matrix M(T.dims[j], R);
    std::vector<std::uint32_t> c(N, 0);
    std::vector<double> tmp(R);
    for (std::uint64_t f = 0; f < T.size(); ++f) {
        const double v = T.values[f];
        if (v != 0.0) {
            for (std::size_t r = 0; r < R; ++r) tmp[r] = v;
            for (std::size_t k = 0; k < N; ++k) {
                if (k == j) continue;
                const double* row = factors[k].row(c[k]);
                for (std::size_t r = 0; r < R; ++r) tmp[r] *= row[r];
            }
            double* out = M.row(c[j]);
            for (std::size_t r = 0; r < R; ++r) out[r] += tmp[r];
        }
        for (std::size_t k = 0; k < N; ++k) {
            if (++c[k] < T.dims[k]) break;
            c[k] = 0;
        }
    }
    return M;
}

Matrix sampled_rhs_rows(const SparseTensorCoo& T, std::size_t j, const SampleBatch& batch) {
    require(j < T.ndim(), "sampled_rhs_rows: mode out of range");
    require(batch.excluded && *batch.excluded == j,
            "sampled_rhs_rows: batch must exclude the solved mode");
    const std::size_t N = T.ndim();
    const std::size_t Ij = T.dims()[j];
    Matrix out(batch.count, Ij);
    const SparseTensorCoo::FiberIndex& idx = T.fiber_index(j);

#pragma omp parallel for schedule(static)
    for (std::size_t d = 0; d < batch.count; ++d) {
        const std::uint64_t u = batch.flat_index(d, RowOrder::Reversed);
        const auto it = std::lower_bound(idx.keys.begin(), idx.keys.end(), u);
        if (it == idx.keys.end() || *it != u) continue;  // all-zero fiber
        const std::size_t g = static_cast<std::size_t>(it - idx.keys.begin());
        double* row = out.row(d);
        for (std::uint64_t p = idx.ptr[g]; p < idx.ptr[g + 1]; ++p) {
            const std::size_t e = idx.order[p];
            row[T.coords(e)[j]] = T.values()[e];
        }
        (void)N;
    }
    return out;
}

Matrix sampled_rhs_rows(const DenseTensor& T, std::size_t j, const SampleBatch& batch) {
    require(j < T.ndim(), "sampled_rhs_rows: mode out of range");
    require(batch.excluded && *batch.excluded == j,
            "sampled_rhs_rows: batch must exclude the solved mode");
    const std::size_t N = T.ndim();
    const std::size_t Ij = T.dims[j];
    Matrix out(batch.count, Ij);

    std::uint64_t stride_j = 1;
    for (std::size_t k = 0; k < j; ++k) stride_j *= T.dims[k];

#pragma omp parallel for schedule(static)
    for (std::size_t d = 0; d < batch.count; ++d) {
        std::uint64_t base = 0, stride = 1;
        for (std::size_t k = 0; k < N; ++k) {
            if (k != j) base += static_cast<std::uint64_t>(batch.index(d, k)) * stride;
            stride *= T.dims[k];
        }
        double* row = out.row(d);
        for (std::size_t i = 0; i < Ij; ++i) row[i] = T.values[base + i * stride_j];
    }
    return out;
}

namespace {

double fit_from_inner(const KruskalTensor& model, double inner, double tensor_norm_sq) {
    const double model_norm_sq = model.norm_squared();
    const double resid_sq =
        std::max(0.0, tensor_norm_sq - 2.0 * inner + model_norm_sq);
    return 1.0 - std::sqrt(resid_sq) / std::sqrt(tensor_norm_sq);
}

}  // namespace

double fit(const KruskalTensor& model, const SparseTensorCoo& T) {
    require(model.ndim() == T.ndim(), "fit: arity mismatch");
    for (std::size_t k = 0; k < T.ndim(); ++k)
        require(model.factors[k].rows == T.dims()[k], "fit: shape mismatch");
    const double tns = T.norm_squared();
    require(tns > 0.0, "fit: zero tensor");
    double inner = 0.0;
#pragma omp parallel for schedule(static) reduction(+ : inner)
    for (std::size_t e = 0; e < T.nnz(); ++e)
        inner += T.values()[e] * model.value_at(T.coords(e));
    return fit_from_inner(model, inner, tns);
}

double fit(const KruskalTensor& model, const DenseTensor& T) {
    require(model.ndim() == T.ndim(), "fit: arity mismatch");
    for (std::size_t k = 0; k < T.ndim(); ++k)
        require(model.factors[k].rows == T.dims[k], "fit: shape mismatch");
    const double tns = T.norm_squared();
    require(tns > 0.0, "fit: zero tensor");
    double inner = 0.0;
    std::vector<std::uint32_t> c(T.ndim(), 0);
    for (std::uint64_t f = 0; f < T.size(); ++f) {
        if (T.values[f] != 0.0) inner += T.values[f] * model.value_at(c);
        for (std::size_t k = 0; k < T.ndim(); ++k) {
            if (++c[k] < T.dims[k]) break;
            c[k] = 0;
        }
    }
    return fit_from_inner(model, inner, tns);
}

KruskalTensor random_kruskal(std::span<const std::uint64_t> dims, std::size_t R,
                             std::uint64_t seed) {
    require(R >= 1, "random_kruskal: rank must be positive");
    KruskalTensor model;
    model.sigma.assign(R, 1.0);
    for (std::size_t j = 0; j < dims.size(); ++j) {
        CounterRng rng(seed, j);
        Matrix U(dims[j], R);
        for (double& v : U.data) v = rng.normal();
        std::vector<double> tmp;
        normalize_columns(U, tmp);
        model.factors.push_back(std::move(U));
    }
    model.sigma.assign(R, 1.0);
    return model;
}

template <typename TensorT>
AlsResult cp_als(const TensorT& T, std::size_t R, const AlsOptions& opts,
                 std::uint64_t seed) {
    require(R >= 1, "cp_als: rank must be positive");
    std::vector<std::uint64_t> dims;
    if constexpr (std::is_same_v<TensorT, SparseTensorCoo>)
        dims = T.dims();
    else
        dims = T.dims;
    const std::size_t N = dims.size();
    require(N >= 2, "cp_als: tensor must have at least two modes");

    const double tensor_norm_sq = T.norm_squared();
    require(tensor_norm_sq > 0.0, "cp_als: zero tensor");

    const bool randomized = opts.solver != Solver::Exact;
    if (randomized)
        require(opts.sketch.samples >= 1, "cp_als: randomized solver needs a sample count");

    AlsResult res;
    res.model = random_kruskal(dims, R, derive_seed(seed, 0));
    std::vector<Matrix>& factors = res.model.factors;

    std::optional<KrpSampler> sampler;
    if (opts.solver == Solver::StsCp) sampler.emplace(factors);

    const auto record_fit = [&]() {
        const double f = fit(res.model, T);
        res.epoch_fits.push_back(f);
        if (!res.metrics.empty()) res.metrics.back().fit = f;
        return f;
    };

    for (std::size_t round = 0; round < opts.max_rounds; ++round) {
        for (std::size_t j = 0; j < N; ++j) {
            const auto t0 = std::chrono::steady_clock::now();
            const std::uint64_t step_seed = derive_seed(seed, 1 + round * N + j);

            Matrix unew;
            Matrix g_exact, m_exact;
            const bool need_exact =
                opts.solver == Solver::Exact || opts.exact_solve_oracle;
            if (need_exact) {
                g_exact = gram_of_others(factors, j);
                m_exact = mttkrp(T, factors, j);
            }

            if (opts.solver == Solver::Exact) {
                unew = matmul(m_exact, pinv_psd(g_exact));
            } else {
                SampleBatch batch =
                    opts.solver == Solver::StsCp
                        ? sampler->sample(j, opts.sketch.samples, step_seed)
                        : product_lev_sample(factors, j, opts.sketch.samples, step_seed);
                const RowSampleWeights w = make_sampling_weights(
                    batch.flat_indices(RowOrder::Reversed), batch.probabilities,
                    batch.count);
                Matrix sa = std::move(batch.rows);
                for (std::size_t d = 0; d < sa.rows; ++d)
                    for (std::size_t c = 0; c < R; ++c) sa(d, c) *= w.weights[d];
                Matrix sb = sampled_rhs_rows(T, j, batch);
                for (std::size_t d = 0; d < sb.rows; ++d)
                    for (std::size_t c = 0; c < sb.cols; ++c) sb(d, c) *= w.weights[d];
                const Matrix gs = gram(sa);
                unew = transpose(matmul(pinv_psd(gs), gram_cross(sa, sb)));
            }

            RoundMetric metric;
            metric.round = round;
            metric.mode = j;
            if (opts.exact_solve_oracle) {
                const Matrix u_opt = matmul(m_exact, pinv_psd(g_exact));
                const double r_opt = std::sqrt(
                    std::max(0.0, solve_residual_sq(u_opt, g_exact, m_exact, tensor_norm_sq)));
                const double r_new = std::sqrt(
                    std::max(0.0, solve_residual_sq(unew, g_exact, m_exact, tensor_norm_sq)));
                metric.solve_epsilon =
                    residual_epsilon(r_new, r_opt, std::sqrt(tensor_norm_sq));
            }

            normalize_columns(unew, res.model.sigma);
            factors[j] = std::move(unew);
            if (sampler) {
                sampler->update_factor(j, factors[j]);
                if (opts.debug_checks) sampler->validate();
            }

            metric.solve_seconds = seconds_since(t0);
            res.metrics.push_back(metric);
        }
        res.rounds_run = round + 1;

        const bool epoch_end = (round + 1) % opts.epoch_length == 0;
        if (epoch_end || round + 1 == opts.max_rounds) {
            record_fit();
            // Stop once the best fit of the last three epochs no longer beats
            // the best of all earlier epochs by the tolerance.
            const std::size_t E = res.epoch_fits.size();
            if (epoch_end && E >= 4) {
                const double recent =
                    *std::max_element(res.epoch_fits.end() - 3, res.epoch_fits.end());
                const double prior =
                    *std::max_element(res.epoch_fits.begin(), res.epoch_fits.end() - 3);
                if (recent <= prior + opts.stop_tolerance) break;
            }
        }
    }

    res.final_fit = res.epoch_fits.empty() ? fit(res.model, T) : res.epoch_fits.back();
    return res;
}

template AlsResult cp_als<SparseTensorCoo>(const SparseTensorCoo&, std::size_t,
                                           const AlsOptions&, std::uint64_t);
template AlsResult cp_als<DenseTensor>(const DenseTensor&, std::size_t, const AlsOptions&,
                                       std::uint64_t);

}  // namespace krplev
