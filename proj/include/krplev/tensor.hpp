#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "krplev/matrix.hpp"

namespace krplev {

// Column index of a tensor entry in the mode-j matricization: mode j is
// isolated along the rows, the remaining coordinates mix with the lowest
// mode varying fastest. Coordinates are 0-based.
std::uint64_t matricize_column_index(std::span<const std::uint32_t> coords, std::size_t j,
                                     std::span<const std::uint64_t> dims);

// N-dimensional sparse tensor in coordinate format with per-mode lookup
// indexes. Coordinates are 0-based; duplicates are summed at ingestion.
class SparseTensorCoo {
public:
    SparseTensorCoo() = default;
    // Deduplicates (summing values), validates ranges, sorts entries.
    static SparseTensorCoo from_entries(std::vector<std::uint64_t> dims,
                                        std::vector<std::uint32_t> coords,
                                        std::vector<double> values);

    std::size_t ndim() const { return dims_.size(); }
    std::size_t nnz() const { return values_.size(); }
    const std::vector<std::uint64_t>& dims() const { return dims_; }
    const std::vector<double>& values() const { return values_; }
    // Coordinates of entry e.
    std::span<const std::uint32_t> coords(std::size_t e) const {
        return {coords_.data() + e * ndim(), ndim()};
    }
    double norm_squared() const;

    // Entries grouped by their mode-j coordinate (CSR-like); built on first
    // use and cached. `order` lists entry ids, `ptr` delimits the group of
    // coordinate i at [ptr[i], ptr[i+1]).
    struct ModeIndex {
        std::vector<std::uint64_t> ptr;
        std::vector<std::uint32_t> order;
    };
    const ModeIndex& mode_index(std::size_t j) const;

    // Entries grouped by their mode-j matricization column (the non-j
    // coordinate tuple). `keys` holds the distinct column indices sorted
    // ascending; group g occupies order[ptr[g], ptr[g+1]).
    struct FiberIndex {
        std::vector<std::uint64_t> keys;
        std::vector<std::uint64_t> ptr;
        std::vector<std::uint32_t> order;
    };
    const FiberIndex& fiber_index(std::size_t j) const;

    // Applies f to every stored value (used for log preprocessing).
    template <typename F>
    void transform_values(F&& f) {
        for (double& v : values_) v = f(v);
        norm_sq_cached_ = -1.0;
    }

private:
    std::vector<std::uint64_t> dims_;
    std::vector<std::uint32_t> coords_;
    std::vector<double> values_;
    mutable double norm_sq_cached_ = -1.0;
    mutable std::vector<ModeIndex> mode_index_;
    mutable std::vector<FiberIndex> fiber_index_;
};

// Dense tensor, mode-0 fastest (matching the matricization formula).
struct DenseTensor {
    std::vector<std::uint64_t> dims;
    std::vector<double> values;

    std::size_t ndim() const { return dims.size(); }
    std::uint64_t size() const {
        std::uint64_t n = 1;
        for (std::uint64_t d : dims) n *= d;
        return n;
    }
    std::uint64_t flat(std::span<const std::uint32_t> coords) const {
        std::uint64_t f = 0, stride = 1;
        for (std::size_t k = 0; k < dims.size(); ++k) {
            f += coords[k] * stride;
            stride *= dims[k];
        }
        return f;
    }
    double norm_squared() const {
        double s = 0.0;
        for (double v : values) s += v * v;
        return s;
    }
};

// Rank-R CP model: nonnegative weights plus factor matrices with unit-norm
// columns.
struct KruskalTensor {
    std::vector<double> sigma;
    std::vector<Matrix> factors;

    std::size_t ndim() const { return factors.size(); }
    std::size_t rank() const { return sigma.size(); }

    double value_at(std::span<const std::uint32_t> coords) const;
    // Reconstructed Frobenius norm squared via the Gram/Hadamard identity.
    double norm_squared() const;
    DenseTensor reconstruct_dense() const;
};

}  // namespace krplev
