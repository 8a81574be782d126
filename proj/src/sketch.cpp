#include "krplev/sketch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "krplev/dense_kernels.hpp"

namespace krplev {

namespace {

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

// Inversion draw from a cumulative mass table; one uniform per draw, branch
// rule matching the segment-tree sampler (first bin whose cumulative mass
// reaches d).
std::size_t draw_from_cumulative(std::span<const double> cum, CounterRng& rng) {
    const double d = rng.uniform() * cum.back();
    const auto it = std::lower_bound(cum.begin(), cum.end(), d);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cum.begin()),
                                 cum.size() - 1);
}

}  // namespace

std::size_t SketchConfig::advisory_sample_count(std::size_t R) const {
    const double r = static_cast<double>(R);
    const double bound = r * std::max(std::log(r / delta), 1.0 / (epsilon * delta));
    return static_cast<std::size_t>(std::ceil(bound));
}

RowSampleWeights make_sampling_weights(std::span<const std::uint64_t> indices,
                                       std::span<const double> probabilities,
                                       std::size_t J) {
    require(indices.size() == probabilities.size(), "make_sampling_weights: size mismatch");
    require(J >= 1, "make_sampling_weights: J must be positive");
    RowSampleWeights out;
    out.indices.assign(indices.begin(), indices.end());
    out.weights.resize(indices.size());
    for (std::size_t d = 0; d < indices.size(); ++d) {
        const double q = probabilities[d];
        if (!(q > 0.0) || !std::isfinite(q))
            throw std::invalid_argument(
                "make_sampling_weights: sampled index has zero probability");
        out.weights[d] = 1.0 / std::sqrt(static_cast<double>(J) * q);
    }
    return out;
}

Matrix sketched_solve(const KrpSampler& sampler, std::optional<std::size_t> excluded,
                      const RhsRowsFn& rhs_rows, const SketchConfig& cfg,
                      RowOrder order) {
    require(cfg.samples >= 1, "sketched_solve: sample count must be positive");
    const std::size_t J = cfg.samples;
    const std::size_t R = sampler.rank();

    SampleBatch batch = sampler.sample(excluded, J, cfg.seed);
    const std::vector<std::uint64_t> flats = batch.flat_indices(order);
    const RowSampleWeights w = make_sampling_weights(flats, batch.probabilities, J);

    Matrix sa = std::move(batch.rows);
    for (std::size_t d = 0; d < J; ++d) {
        double* row = sa.row(d);
        for (std::size_t c = 0; c < R; ++c) row[c] *= w.weights[d];
    }

    Matrix sb = rhs_rows(flats);
    if (sb.rows != J) throw std::runtime_error("sketched_solve: rhs callback returned wrong row count");
    for (std::size_t d = 0; d < J; ++d) {
        double* row = sb.row(d);
        for (std::size_t c = 0; c < sb.cols; ++c) row[c] *= w.weights[d];
    }

    const Matrix gs = gram(sa);
    double tr = 0.0;
    for (std::size_t r = 0; r < R; ++r) tr += gs(r, r);
    if (!(tr > 0.0)) throw std::runtime_error("sketched_solve: degenerate sketch (rank 0)");

    return matmul(pinv_psd(gs), gram_cross(sa, sb));
}

SampleBatch product_lev_sample(const std::vector<Matrix>& factors,
                               std::optional<std::size_t> excluded, std::size_t J,
                               std::uint64_t seed) {
    require(!factors.empty(), "product_lev_sample: factor list is empty");
    require(J >= 1, "product_lev_sample: J must be positive");
    const std::size_t N = factors.size();
    const std::size_t R = factors[0].cols;
    if (excluded) require(*excluded < N, "product_lev_sample: excluded index out of range");

    std::vector<std::size_t> inc;
    for (std::size_t k = 0; k < N; ++k)
        if (!excluded || *excluded != k) inc.push_back(k);
    require(!inc.empty(), "product_lev_sample: no factors left after exclusion");

    // Per-factor leverage scores, normalized to probabilities, as cumulative
    // tables for inversion sampling.
    std::vector<std::vector<double>> probs(N), cums(N);
    for (std::size_t k : inc) {
        const Matrix& U = factors[k];
        require(U.cols == R, "product_lev_sample: inconsistent column counts");
        const Matrix gp = pinv_psd(gram(U));
        std::vector<double>& p = probs[k];
        p.resize(U.rows);
        double total = 0.0;
        for (std::size_t i = 0; i < U.rows; ++i) {
            const std::span<const double> row(U.row(i), R);
            p[i] = quadratic_form(row, gp, row);
            total += p[i];
        }
        if (!(total > 0.0)) throw std::runtime_error("product_lev_sample: zero factor");
        std::vector<double>& c = cums[k];
        c.resize(U.rows);
        double run = 0.0;
        for (std::size_t i = 0; i < U.rows; ++i) {
            p[i] /= total;
            run += p[i];
            c[i] = run;
        }
    }

    SampleBatch batch;
    batch.excluded = excluded;
    batch.count = J;
    batch.factor_count = N;
    batch.dims.assign(N, 0);
    for (std::size_t k : inc) batch.dims[k] = factors[k].rows;
    batch.indices.assign(J * N, SampleBatch::kExcluded);
    batch.rows = Matrix::ones(J, R);
    batch.probabilities.assign(J, 1.0);

#pragma omp parallel for schedule(static)
    for (std::size_t d = 0; d < J; ++d) {
        CounterRng rng(seed, d);
        double* h = batch.rows.row(d);
        for (std::size_t k : inc) {
            const std::size_t t = draw_from_cumulative(cums[k], rng);
            batch.indices[d * N + k] = static_cast<std::uint32_t>(t);
            batch.probabilities[d] *= probs[k][t];
            const double* row = factors[k].row(t);
            for (std::size_t c = 0; c < R; ++c) h[c] *= row[c];
        }
    }
    return batch;
}

double distortion(const Matrix& weighted_rows, const std::vector<Matrix>& factors,
                  std::optional<std::size_t> excluded) {
    require(!factors.empty(), "distortion: factor list is empty");
    const std::size_t R = factors[0].cols;
    require(weighted_rows.cols == R, "distortion: sampled rows have wrong width");

    std::vector<Matrix> grams;
    std::vector<const Matrix*> gs;
    for (std::size_t k = 0; k < factors.size(); ++k) {
        if (excluded && *excluded == k) continue;
        grams.push_back(gram(factors[k]));
    }
    for (const Matrix& g : grams) gs.push_back(&g);
    const Matrix G = hadamard_chain(gs, R, R);
    const EigenPair eig = eigh_psd(G);
    const std::size_t r = numerical_rank(eig);
    if (r == 0) return std::numeric_limits<double>::infinity();

    // M = S A V Sigma^-1 has the same singular values as S Q.
    Matrix vs(R, r);
    for (std::size_t u = 0; u < r; ++u) {
        const double inv_s = 1.0 / std::sqrt(eig.values[u]);
        for (std::size_t c = 0; c < R; ++c) vs(c, u) = eig.vectors(c, u) * inv_s;
    }
    const Matrix m = matmul(weighted_rows, vs);
    const EigenPair meig = eigh_psd(gram(m));

    const double lambda_max = meig.values.front();
    const double lambda_min = meig.values[r - 1];
    if (!(lambda_min > rank_cutoff(meig)))
        return std::numeric_limits<double>::infinity();
    return std::sqrt(lambda_max / lambda_min) - 1.0;
}

double residual_epsilon(double approx_residual, double exact_residual, double scale) {
    const double tol = 1e-10 * std::max(scale, 0.0);
    if (exact_residual <= tol)
        return approx_residual <= tol ? 0.0 : std::numeric_limits<double>::infinity();
    return approx_residual / exact_residual - 1.0;
}

KroneckerRhs KroneckerRhs::random(std::span<const std::uint64_t> dims, std::uint64_t seed) {
    KroneckerRhs rhs;
    CounterRng rng(seed);
    for (std::uint64_t d : dims) {
        std::vector<double> c(d);
        for (double& v : c) v = rng.normal();
        rhs.components.push_back(std::move(c));
    }
    return rhs;
}

double KroneckerRhs::at(std::uint64_t flat) const {
    double v = 1.0;
    for (std::size_t k = components.size(); k-- > 0;) {
        const std::size_t n = components[k].size();
        v *= components[k][flat % n];
        flat /= n;
    }
    return v;
}

RhsRowsFn KroneckerRhs::rows_fn() const {
    return [this](std::span<const std::uint64_t> flats) {
        Matrix out(flats.size(), 1);
        for (std::size_t d = 0; d < flats.size(); ++d) out(d, 0) = at(flats[d]);
        return out;
    };
}

double KroneckerRhs::norm_squared() const {
    double n2 = 1.0;
    for (const auto& c : components) {
        double s = 0.0;
        for (double v : c) s += v * v;
        n2 *= s;
    }
    return n2;
}

std::vector<double> KroneckerRhs::design_inner(const std::vector<Matrix>& factors) const {
    require(factors.size() == components.size(), "design_inner: arity mismatch");
    const std::size_t R = factors[0].cols;
    std::vector<double> acc(R, 1.0);
    for (std::size_t k = 0; k < factors.size(); ++k) {
        require(factors[k].rows == components[k].size(), "design_inner: shape mismatch");
        for (std::size_t r = 0; r < R; ++r) {
            double dot = 0.0;
            for (std::size_t i = 0; i < factors[k].rows; ++i)
                dot += factors[k](i, r) * components[k][i];
            acc[r] *= dot;
        }
    }
    return acc;
}

namespace {

Matrix hadamard_of_grams(const std::vector<Matrix>& factors) {
    std::vector<Matrix> grams;
    std::vector<const Matrix*> gs;
    for (const Matrix& f : factors) grams.push_back(gram(f));
    for (const Matrix& g : grams) gs.push_back(&g);
    return hadamard_chain(gs, factors[0].cols, factors[0].cols);
}

}  // namespace

ExactLstsq exact_kron_solve(const std::vector<Matrix>& factors, const KroneckerRhs& rhs) {
    const std::size_t R = factors[0].cols;
    const Matrix G = hadamard_of_grams(factors);
    const std::vector<double> atb = rhs.design_inner(factors);
    const Matrix gp = pinv_psd(G);
    ExactLstsq out;
    out.solution.assign(R, 0.0);
    for (std::size_t a = 0; a < R; ++a)
        for (std::size_t b = 0; b < R; ++b) out.solution[a] += gp(a, b) * atb[b];
    double r2 = rhs.norm_squared() + quadratic_form(out.solution, G, out.solution);
    for (std::size_t a = 0; a < R; ++a) r2 -= 2.0 * out.solution[a] * atb[a];
    out.residual = std::sqrt(std::max(0.0, r2));
    return out;
}

double kron_solve_residual(const std::vector<Matrix>& factors, const KroneckerRhs& rhs,
                           std::span<const double> x) {
    const Matrix G = hadamard_of_grams(factors);
    const std::vector<double> atb = rhs.design_inner(factors);
    double r2 = rhs.norm_squared() + quadratic_form(x, G, x);
    for (std::size_t a = 0; a < atb.size(); ++a) r2 -= 2.0 * x[a] * atb[a];
    return std::sqrt(std::max(0.0, r2));
}

}  // namespace krplev
