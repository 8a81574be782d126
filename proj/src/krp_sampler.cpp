#include "krplev/krp_sampler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "krplev/dense_kernels.hpp"

namespace krplev {

namespace {

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

std::uint64_t SampleBatch::flat_index(std::size_t draw, RowOrder order) const {
    std::uint64_t flat = 0;
    if (order == RowOrder::Ascending) {
        for (std::size_t k = 0; k < factor_count; ++k) {
            if (excluded && *excluded == k) continue;
            flat = flat * dims[k] + index(draw, k);
        }
    } else {
        for (std::size_t k = factor_count; k-- > 0;) {
            if (excluded && *excluded == k) continue;
            flat = flat * dims[k] + index(draw, k);
        }
    }
    return flat;
}

std::vector<std::uint64_t> SampleBatch::flat_indices(RowOrder order) const {
    std::vector<std::uint64_t> out(count);
    for (std::size_t d = 0; d < count; ++d) out[d] = flat_index(d, order);
    return out;
}

KrpSampler::KrpSampler(std::vector<Matrix> factors) : factors_(std::move(factors)) {
    require(!factors_.empty(), "KrpSampler: factor list is empty");
    rank_ = factors_[0].cols;
    for (const Matrix& U : factors_) {
        require(!U.empty(), "KrpSampler: empty factor");
        require(U.cols == rank_, "KrpSampler: inconsistent column counts");
        require(U.all_finite(), "KrpSampler: non-finite factor entries");
    }
    grams_.reserve(factors_.size());
    trees_.reserve(factors_.size());
    for (const Matrix& U : factors_) {
        grams_.push_back(gram(U));
        trees_.emplace_back(U, rank_, std::vector<double>(rank_, 1.0));
    }
    // A zero Khatri-Rao product has no leverage distribution to sample.
    std::vector<const Matrix*> gs;
    for (const Matrix& g : grams_) gs.push_back(&g);
    const Matrix G = hadamard_chain(gs, rank_, rank_);
    double tr = 0.0;
    for (std::size_t r = 0; r < rank_; ++r) tr += G(r, r);
    require(tr > 0.0, "KrpSampler: Khatri-Rao product is identically zero");
}

std::vector<std::size_t> KrpSampler::included_modes(
    std::optional<std::size_t> excluded) const {
    if (excluded) require(*excluded < factors_.size(), "KrpSampler: excluded index out of range");
    std::vector<std::size_t> inc;
    for (std::size_t k = 0; k < factors_.size(); ++k)
        if (!excluded || *excluded != k) inc.push_back(k);
    require(!inc.empty(), "KrpSampler: no factors left after exclusion");
    return inc;
}

Matrix KrpSampler::downstream_gram(const std::vector<std::size_t>& included, std::size_t pos,
                                   const Matrix& pinv) const {
    // G_{>k} = G^+ (hadamard) product of Grams of included factors after pos.
    std::vector<const Matrix*> gs{&pinv};
    for (std::size_t p = pos + 1; p < included.size(); ++p) gs.push_back(&grams_[included[p]]);
    return hadamard_chain(gs, rank_, rank_);
}

SampleBatch KrpSampler::sample(std::optional<std::size_t> excluded, std::size_t J,
                               std::uint64_t seed) const {
    require(J >= 1, "KrpSample: sample count must be positive");
    const std::vector<std::size_t> inc = included_modes(excluded);
    const std::size_t N = factors_.size();
    const std::size_t R = rank_;

    std::vector<const Matrix*> gs;
    for (std::size_t k : inc) gs.push_back(&grams_[k]);
    const Matrix G = hadamard_chain(gs, R, R);
    const EigenPair geig = eigh_psd(G);
    const std::size_t krp_rank = numerical_rank(geig);
    if (krp_rank == 0)
        throw std::runtime_error("KRPSample: Khatri-Rao product of included factors is zero");
    const Matrix gpinv = pinv_from_eigen(geig);

    SampleBatch batch;
    batch.excluded = excluded;
    batch.count = J;
    batch.factor_count = N;
    batch.dims.assign(N, 0);
    for (std::size_t k : inc) batch.dims[k] = factors_[k].rows;
    batch.indices.assign(J * N, SampleBatch::kExcluded);
    batch.rows = Matrix::ones(J, R);

    std::vector<CounterRng> rngs;
    rngs.reserve(J);
    for (std::size_t d = 0; d < J; ++d) rngs.emplace_back(seed, d);

    // Memory-saving loop order: all J draws for factor k before moving to
    // k+1, so only one eigenvector-stage sampler is alive at a time.
    for (std::size_t pos = 0; pos < inc.size(); ++pos) {
        const std::size_t k = inc[pos];
        const Matrix gk = downstream_gram(inc, pos, gpinv);
        const EigenPair eig = eigh_psd(gk);

        Matrix scaled(R, R);  // row u = sqrt(lambda_u) * V[:,u]^T
        for (std::size_t u = 0; u < R; ++u) {
            const double s = std::sqrt(eig.values[u]);
            for (std::size_t c = 0; c < R; ++c) scaled(u, c) = s * eig.vectors(c, u);
        }
        const SegmentTreeSampler estage(scaled, 1, grams_[k]);

        const SegmentTreeSampler& zk = trees_[k];
        const Matrix& uk = factors_[k];

#pragma omp parallel for schedule(static)
        for (std::size_t d = 0; d < J; ++d) {
            double* h = batch.rows.row(d);
            const std::span<const double> hs(h, R);
            const std::size_t u = estage.row_sample(hs, rngs[d]);
            std::vector<double> htilde(R);
            for (std::size_t c = 0; c < R; ++c) htilde[c] = h[c] * eig.vectors(c, u);
            const std::size_t t = zk.row_sample(htilde, rngs[d]);
            batch.indices[d * N + k] = static_cast<std::uint32_t>(t);
            const double* row = uk.row(t);
            for (std::size_t c = 0; c < R; ++c) h[c] *= row[c];
        }
    }

    // The probability of a drawn row is its leverage score over the rank.
    batch.probabilities.resize(J);
#pragma omp parallel for schedule(static)
    for (std::size_t d = 0; d < J; ++d) {
        const std::span<const double> h(batch.rows.row(d), R);
        batch.probabilities[d] =
            quadratic_form(h, gpinv, h) / static_cast<double>(krp_rank);
    }
    return batch;
}

ConditionalDistribution KrpSampler::conditional(std::optional<std::size_t> excluded,
                                                std::size_t k,
                                                std::span<const double> h) const {
    const std::vector<std::size_t> inc = included_modes(excluded);
    const auto it = std::find(inc.begin(), inc.end(), k);
    require(it != inc.end(), "conditional: factor k is not included");
    const std::size_t pos = static_cast<std::size_t>(it - inc.begin());
    require(h.size() == rank_, "conditional: history vector has wrong length");

    std::vector<const Matrix*> gs;
    for (std::size_t m : inc) gs.push_back(&grams_[m]);
    const Matrix G = hadamard_chain(gs, rank_, rank_);
    const Matrix gpinv = pinv_psd(G);
    const Matrix gk = downstream_gram(inc, pos, gpinv);
    const EigenPair eig = eigh_psd(gk);

    const Matrix& uk = factors_[k];
    const double C = quadratic_form(h, hadamard_chain({&grams_[k], &gk}, rank_, rank_), h);
    if (!(C > 0.0)) throw std::runtime_error("conditional: zero normalizer");

    ConditionalDistribution out;
    out.probabilities.assign(uk.rows, 0.0);
    out.mixture_weights.assign(rank_, 0.0);

    std::vector<double> htilde(rank_), col(uk.rows);
    for (std::size_t u = 0; u < rank_; ++u) {
        if (eig.values[u] == 0.0) continue;
        for (std::size_t c = 0; c < rank_; ++c) htilde[c] = h[c] * eig.vectors(c, u);
        double norm1 = 0.0;
        for (std::size_t t = 0; t < uk.rows; ++t) {
            const double* row = uk.row(t);
            double dot = 0.0;
            for (std::size_t c = 0; c < rank_; ++c) dot += row[c] * htilde[c];
            col[t] = dot * dot;
            norm1 += col[t];
        }
        if (norm1 == 0.0) continue;
        const double w = eig.values[u] * norm1 / C;
        out.mixture_weights[u] = w;
        for (std::size_t t = 0; t < uk.rows; ++t)
            out.probabilities[t] += w * col[t] / norm1;
    }
    return out;
}

void KrpSampler::update_factor(std::size_t j, const Matrix& U) {
    require(j < factors_.size(), "update_factor: index out of range");
    require(U.cols == rank_, "update_factor: column count mismatch");
    require(!U.empty() && U.all_finite(), "update_factor: invalid factor");
    factors_[j] = U;
    grams_[j] = gram(U);
    trees_[j] = SegmentTreeSampler(U, rank_, std::vector<double>(rank_, 1.0));
}

void KrpSampler::update_factor_entry(std::size_t j, std::size_t r, std::size_t c,
                                     double value) {
    require(j < factors_.size(), "update_factor_entry: index out of range");
    Matrix& U = factors_[j];
    require(r < U.rows && c < U.cols, "update_factor_entry: entry out of range");
    require(std::isfinite(value), "update_factor_entry: non-finite value");

    const double old = U(r, c);
    const double delta = value - old;
    trees_[j].update_entry(r, c, value);

    // Rank-1 correction of the cached Gram: row/column c pick up
    // delta * U[r,:], the diagonal picks up the squared change.
    Matrix& G = grams_[j];
    for (std::size_t b = 0; b < rank_; ++b) {
        if (b == c) continue;
        G(c, b) += delta * U(r, b);
        G(b, c) += delta * U(r, b);
    }
    G(c, c) += 2.0 * delta * old + delta * delta;
    U(r, c) = value;
}

void KrpSampler::validate(double tol) const {
    for (std::size_t j = 0; j < factors_.size(); ++j) {
        const Matrix fresh = gram(factors_[j]);
        const Matrix root = trees_[j].node_gram(0);
        for (std::size_t k = 0; k < fresh.data.size(); ++k) {
            if (std::abs(fresh.data[k] - grams_[j].data[k]) > tol)
                throw std::runtime_error("KrpSampler::validate: cached Gram drifted");
            if (std::abs(fresh.data[k] - root.data[k]) > tol)
                throw std::runtime_error("KrpSampler::validate: tree root Gram drifted");
        }
        const Matrix& tu = trees_[j].dense_matrix();
        for (std::size_t k = 0; k < tu.data.size(); ++k)
            if (tu.data[k] != factors_[j].data[k])
                throw std::runtime_error("KrpSampler::validate: tree factor copy drifted");
    }
}

}  // namespace krplev
