#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "krplev/matrix.hpp"
#include "krplev/rng.hpp"

namespace krplev {

// Binary segment tree of partial Gram matrices over the rows of a matrix U,
// supporting draws from the distribution
//
//   q_{h,U,Y}[i] = C^-1 <h h^T, U[i,:]^T U[i,:], Y>,   C = <h h^T, U^T U, Y>
//
// for a fixed PSD matrix Y and per-draw history vectors h. A draw walks the
// tree comparing one uniform variate against cumulative segment masses, then
// scans the rows of a single leaf; cost is O(R^2 log(I/F)) plus the leaf scan.
//
// Construction and update_entry need exclusive access. row_sample and
// leaf_probabilities are read-only and may run concurrently from many
// threads, each with its own CounterRng stream.
class SegmentTreeSampler {
public:
    enum class Layout {
        // Packed upper triangles, stored only at the root and left children
        // (the only partial Grams the sampling walk reads).
        Compact,
        // Every node stores its partial Gram; used by correctness tests that
        // verify the children-sum invariant directly.
        Full,
    };

    // General PSD Y. F is the leaf capacity.
    SegmentTreeSampler(const Matrix& U, std::size_t F, const Matrix& Y,
                       Layout layout = Layout::Compact);

    // Rank-1 Y = y y^T. Leaf scans drop to O(F R) on this path.
    SegmentTreeSampler(const Matrix& U, std::size_t F, std::vector<double> y_rank1,
                       Layout layout = Layout::Compact);

    // Sparse construction with Y fixed to the all-ones matrix: leaf segments
    // are chosen so each holds at most R^2 stored nonzeros, and persistent
    // storage stays O(nnz). Entries must be sorted row-major.
    static SegmentTreeSampler from_sparse(const SparseMatrixCoo& U,
                                          Layout layout = Layout::Compact);

    std::size_t rows() const { return I_; }
    std::size_t cols() const { return R_; }
    bool sparse() const { return sparse_; }

    // Draws one row index in [0, I); consumes exactly one uniform variate.
    std::size_t row_sample(std::span<const double> h, CounterRng& rng) const;

    // q_{h,U,Y} restricted to the rows of the given in-order leaf.
    std::vector<double> leaf_probabilities(std::span<const double> h,
                                           std::size_t leaf) const;

    // Sets U[r, c] = value and patches the partial Grams along the root-leaf
    // path; O(R log(I/F)). Sparse-built samplers only accept updates to
    // entries present in the stored pattern.
    void update_entry(std::size_t r, std::size_t c, double value);

    // --- introspection and test support -------------------------------------

    std::size_t leaf_count() const { return leaf_count_; }
    std::size_t node_count() const { return seg0_.size(); }
    // Row range [first, last) of the in-order leaf.
    std::pair<std::size_t, std::size_t> leaf_segment(std::size_t leaf) const;
    // Row range [first, last) covered by an arbitrary node.
    std::pair<std::size_t, std::size_t> node_segment(std::size_t node) const {
        return {seg0_[node], seg1_[node]};
    }
    bool gram_stored(std::size_t node) const { return gram_off_[node] != kAbsent; }
    // Unpacked partial Gram of a stored node.
    Matrix node_gram(std::size_t node) const;
    std::size_t left_child(std::size_t node) const { return 2 * node + 1; }
    std::size_t right_child(std::size_t node) const { return 2 * node + 2; }
    bool is_leaf(std::size_t node) const { return 2 * node + 1 >= node_count(); }

    // Normalizer C = <h h^T, U^T U, Y>.
    double normalizer(std::span<const double> h) const;
    // Total mass of the left subtree of an internal node, i.e. the branch
    // threshold of the sampling walk without the running offset.
    double left_subtree_mass(std::size_t node, std::span<const double> h) const;
    // The probability the tree assigns to every row, assembled leaf by leaf;
    // equals q_{h,U,Y} exactly up to roundoff and needs no sampling.
    std::vector<double> analytic_probabilities(std::span<const double> h) const;

    // Dense copy of U held by the sampler (dense mode only).
    const Matrix& dense_matrix() const;

private:
    SegmentTreeSampler() = default;

    void init_tree(std::vector<std::pair<std::size_t, std::size_t>> leaf_segments,
                   Layout layout);
    void build_grams();

    // <h h^T, G^node, Y> evaluated against the packed storage; `folded` is the
    // packed upper triangle of (h h^T o Y) with off-diagonal entries doubled.
    double packed_inner(std::size_t node, std::span<const double> folded) const;
    std::vector<double> fold_weights(std::span<const double> h) const;
    // Unnormalized q_{h,U,Y} masses of rows [first, last).
    void segment_masses(std::size_t first, std::size_t last, std::span<const double> h,
                        std::span<const double> folded, std::vector<double>& out) const;

    std::size_t pack_size() const { return R_ * (R_ + 1) / 2; }
    std::size_t pack_index(std::size_t a, std::size_t b) const {
        // a <= b required
        return a * R_ - a * (a - 1) / 2 + (b - a);
    }
    double* gram_at(std::size_t node) { return grams_.data() + gram_off_[node]; }
    const double* gram_at(std::size_t node) const { return grams_.data() + gram_off_[node]; }

    static constexpr std::size_t kAbsent = static_cast<std::size_t>(-1);

    std::size_t I_ = 0, R_ = 0, F_ = 0;
    bool sparse_ = false;
    Layout layout_ = Layout::Compact;

    Matrix dense_u_;
    // CSR storage for sparse mode.
    std::vector<std::uint64_t> row_ptr_;
    std::vector<std::uint32_t> col_idx_;
    std::vector<double> vals_;

    Matrix y_;                   // general Y (empty on the rank-1 path)
    std::vector<double> y_vec_;  // rank-1 factor (empty on the general path)

    std::size_t leaf_count_ = 0;
    std::vector<std::size_t> seg0_, seg1_;      // per-node row range [seg0, seg1)
    std::vector<std::size_t> leaf_node_;        // in-order leaf -> node id
    std::vector<std::size_t> gram_off_;         // node -> offset into grams_, kAbsent if unstored
    std::vector<double> grams_;                 // packed upper triangles
};

}  // namespace krplev
