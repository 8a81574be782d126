#include "krplev/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "krplev/dense_kernels.hpp"

namespace krplev {

namespace {

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

std::uint64_t matricize_column_index(std::span<const std::uint32_t> coords, std::size_t j,
                                     std::span<const std::uint64_t> dims) {
    require(coords.size() == dims.size(), "matricize_column_index: arity mismatch");
    require(j < dims.size(), "matricize_column_index: mode out of range");
    std::uint64_t u = 0, stride = 1;
    for (std::size_t k = 0; k < dims.size(); ++k) {
        if (k == j) continue;
        require(coords[k] < dims[k], "matricize_column_index: coordinate out of range");
        u += coords[k] * stride;
        stride *= dims[k];
    }
    return u;
}

SparseTensorCoo SparseTensorCoo::from_entries(std::vector<std::uint64_t> dims,
                                              std::vector<std::uint32_t> coords,
                                              std::vector<double> values) {
    require(!dims.empty(), "SparseTensorCoo: no dimensions");
    const std::size_t N = dims.size();
    require(coords.size() == values.size() * N, "SparseTensorCoo: coords/values mismatch");
    for (std::uint64_t d : dims) require(d >= 1, "SparseTensorCoo: empty mode");

    const std::size_t nnz_in = values.size();
    for (std::size_t e = 0; e < nnz_in; ++e)
        for (std::size_t k = 0; k < N; ++k)
            require(coords[e * N + k] < dims[k], "SparseTensorCoo: coordinate out of range");

    // Sort entry ids lexicographically by coordinates, then fold duplicates.
    std::vector<std::uint32_t> order(nnz_in);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        return std::lexicographical_compare(
            coords.begin() + a * N, coords.begin() + (a + 1) * N,
            coords.begin() + b * N, coords.begin() + (b + 1) * N);
    });

    SparseTensorCoo t;
    t.dims_ = std::move(dims);
    t.coords_.reserve(coords.size());
    t.values_.reserve(nnz_in);
    for (std::size_t p = 0; p < nnz_in; ++p) {
        const std::uint32_t e = order[p];
        const bool same =
            !t.values_.empty() &&
            std::equal(coords.begin() + e * N, coords.begin() + (e + 1) * N,
                       t.coords_.end() - N);
        if (same) {
            t.values_.back() += values[e];
        } else {
            t.coords_.insert(t.coords_.end(), coords.begin() + e * N,
                             coords.begin() + (e + 1) * N);
            t.values_.push_back(values[e]);
        }
    }
    return t;
}

double SparseTensorCoo::norm_squared() const {
    if (norm_sq_cached_ < 0.0) {
        double s = 0.0;
#pragma omp parallel for schedule(static) reduction(+ : s)
        for (std::size_t e = 0; e < values_.size(); ++e) s += values_[e] * values_[e];
        norm_sq_cached_ = s;
    }
    return norm_sq_cached_;
}

const SparseTensorCoo::ModeIndex& SparseTensorCoo::mode_index(std::size_t j) const {
    require(j < ndim(), "mode_index: mode out of range");
    if (mode_index_.empty()) mode_index_.resize(ndim());
    ModeIndex& idx = mode_index_[j];
    if (idx.ptr.empty()) {
        const std::size_t N = ndim();
        idx.ptr.assign(dims_[j] + 1, 0);
        for (std::size_t e = 0; e < nnz(); ++e) idx.ptr[coords_[e * N + j] + 1]++;
        for (std::size_t i = 0; i < dims_[j]; ++i) idx.ptr[i + 1] += idx.ptr[i];
        idx.order.resize(nnz());
        std::vector<std::uint64_t> cursor(idx.ptr.begin(), idx.ptr.end() - 1);
        for (std::size_t e = 0; e < nnz(); ++e)
            idx.order[cursor[coords_[e * N + j]]++] = static_cast<std::uint32_t>(e);
    }
    return idx;
}

const SparseTensorCoo::FiberIndex& SparseTensorCoo::fiber_index(std::size_t j) const {
    require(j < ndim(), "fiber_index: mode out of range");
    if (fiber_index_.empty()) fiber_index_.resize(ndim());
    FiberIndex& idx = fiber_index_[j];
    if (idx.ptr.empty()) {
        std::vector<std::uint64_t> ucol(nnz());
#pragma omp parallel for schedule(static)
        for (std::size_t e = 0; e < nnz(); ++e)
            ucol[e] = matricize_column_index(coords(e), j, dims_);

        idx.order.resize(nnz());
        std::iota(idx.order.begin(), idx.order.end(), 0);
        std::sort(idx.order.begin(), idx.order.end(),
                  [&](std::uint32_t a, std::uint32_t b) { return ucol[a] < ucol[b]; });

        for (std::size_t p = 0; p < nnz(); ++p) {
            const std::uint64_t u = ucol[idx.order[p]];
            if (idx.keys.empty() || idx.keys.back() != u) {
                idx.keys.push_back(u);
                idx.ptr.push_back(p);
            }
        }
        idx.ptr.push_back(nnz());
    }
    return idx;
}

double KruskalTensor::value_at(std::span<const std::uint32_t> coords) const {
    const std::size_t R = rank();
    double acc = 0.0;
    for (std::size_t r = 0; r < R; ++r) {
        double term = sigma[r];
        for (std::size_t j = 0; j < factors.size(); ++j) term *= factors[j](coords[j], r);
        acc += term;
    }
    return acc;
}

double KruskalTensor::norm_squared() const {
    const std::size_t R = rank();
    std::vector<Matrix> grams;
    std::vector<const Matrix*> gs;
    for (const Matrix& U : factors) grams.push_back(gram(U));
    for (const Matrix& g : grams) gs.push_back(&g);
    const Matrix G = hadamard_chain(gs, R, R);
    double acc = 0.0;
    for (std::size_t a = 0; a < R; ++a)
        for (std::size_t b = 0; b < R; ++b) acc += sigma[a] * G(a, b) * sigma[b];
    return acc;
}

DenseTensor KruskalTensor::reconstruct_dense() const {
    DenseTensor t;
    for (const Matrix& U : factors) t.dims.push_back(U.rows);
    t.values.assign(t.size(), 0.0);
    std::vector<std::uint32_t> c(ndim(), 0);
    for (std::uint64_t f = 0; f < t.size(); ++f) {
        t.values[f] = value_at(c);
        for (std::size_t k = 0; k < ndim(); ++k) {
            if (++c[k] < t.dims[k]) break;
            c[k] = 0;
        }
    }
    return t;
}

}  // namespace krplev
