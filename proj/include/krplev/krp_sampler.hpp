#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "krplev/matrix.hpp"
#include "krplev/rng.hpp"
#include "krplev/segment_tree_sampler.hpp"

namespace krplev {

// Linearization convention for a multi-index into the rows of a Khatri-Rao
// product of the included factors.
enum class RowOrder {
    // Operands in ascending factor order: the first factor varies slowest.
    Ascending,
    // Operands reversed (U_N o ... o U_1): the first factor varies fastest.
    // This matches the column indexing of a mode-j tensor matricization.
    Reversed,
};

// One batch of i.i.d. draws from the leverage-score distribution on the rows
// of the Khatri-Rao product of the included factors.
struct SampleBatch {
    static constexpr std::uint32_t kExcluded = static_cast<std::uint32_t>(-1);

    std::optional<std::size_t> excluded;
    std::size_t count = 0;                 // J
    std::size_t factor_count = 0;          // N (including the excluded slot)
    std::vector<std::uint64_t> dims;       // per-factor row counts, excluded slot = 0
    std::vector<std::uint32_t> indices;    // J x N, excluded column = kExcluded
    std::vector<double> probabilities;     // exact probability assigned to each draw
    Matrix rows;                           // J x R Hadamard products of the drawn rows

    std::uint32_t index(std::size_t draw, std::size_t factor) const {
        return indices[draw * factor_count + factor];
    }
    // Linearized row index into the Khatri-Rao product under the given order.
    std::uint64_t flat_index(std::size_t draw, RowOrder order) const;
    std::vector<std::uint64_t> flat_indices(RowOrder order) const;
};

// Per-factor conditional distribution of the two-stage draw, marginalized
// over the eigenvector stage; test-support surface.
struct ConditionalDistribution {
    std::vector<double> probabilities;   // over the rows of factor k
    std::vector<double> mixture_weights; // stage-1 weights w[u], sum to 1
};

// Exact leverage-score sampler for U_1 o ... o U_N, optionally excluding one
// factor. Holds one segment-tree row sampler per factor (leaf capacity R,
// all-ones Y) plus cached Gram matrices. Draws happen in two stages per
// factor: an eigenvector of the downstream Gram product is selected first,
// then a row of the factor under the rank-1 projected distribution.
//
// construct / update_* require exclusive access; sample() is read-only and
// internally parallelized over draws.
class KrpSampler {
public:
    explicit KrpSampler(std::vector<Matrix> factors);

    std::size_t factor_count() const { return factors_.size(); }
    std::size_t rank() const { return rank_; }
    const Matrix& factor(std::size_t j) const { return factors_[j]; }
    const Matrix& factor_gram(std::size_t j) const { return grams_[j]; }
    const SegmentTreeSampler& tree(std::size_t j) const { return trees_[j]; }

    // Draws J multi-indices from the exact leverage distribution of the
    // Khatri-Rao product of all factors except `excluded`. Deterministic in
    // (seed, J) regardless of thread count.
    SampleBatch sample(std::optional<std::size_t> excluded, std::size_t J,
                       std::uint64_t seed) const;

    // Exact conditional distribution of the stage-2 draw for factor k given
    // history h, obtained by chaining the two-stage procedure.
    ConditionalDistribution conditional(std::optional<std::size_t> excluded, std::size_t k,
                                        std::span<const double> h) const;

    // Replace factor j; rebuilds only its tree and cached Gram.
    void update_factor(std::size_t j, const Matrix& U);
    // Single-entry update; O(R log(I_j / R)) via the tree's incremental patch
    // plus a rank-1 correction of the cached Gram.
    void update_factor_entry(std::size_t j, std::size_t r, std::size_t c, double value);

    // Verifies cached Grams and tree roots against a fresh recomputation;
    // throws on drift. Test support.
    void validate(double tol = 1e-10) const;

private:
    std::vector<std::size_t> included_modes(std::optional<std::size_t> excluded) const;
    Matrix downstream_gram(const std::vector<std::size_t>& included, std::size_t pos,
                           const Matrix& pinv) const;

    std::size_t rank_ = 0;
    std::vector<Matrix> factors_;
    std::vector<Matrix> grams_;
    std::vector<SegmentTreeSampler> trees_;
};

}  // namespace krplev
