#include "krplev/segment_tree_sampler.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

#include "krplev/dense_kernels.hpp"

namespace krplev {

namespace {

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

std::size_t ceil_log2(std::size_t n) {
    std::size_t d = 0;
    while ((std::size_t{1} << d) < n) ++d;
    return d;
}

}  // namespace

SegmentTreeSampler::SegmentTreeSampler(const Matrix& U, std::size_t F, const Matrix& Y,
                                       Layout layout) {
    require(!U.empty(), "build_sampler: empty matrix");
    require(U.all_finite(), "build_sampler: non-finite entries");
    require(F >= 1, "build_sampler: leaf capacity must be positive");
    require(Y.rows == U.cols && Y.cols == U.cols, "build_sampler: Y must be R x R");
    require(Y.all_finite(), "build_sampler: non-finite Y");
    eigh_psd(Y);  // rejects asymmetric or indefinite Y

    I_ = U.rows;
    R_ = U.cols;
    F_ = F;
    dense_u_ = U;
    y_ = Y;

    std::vector<std::pair<std::size_t, std::size_t>> segs;
    for (std::size_t s = 0; s < I_; s += F) segs.emplace_back(s, std::min(s + F, I_));
    init_tree(std::move(segs), layout);
    build_grams();
}

SegmentTreeSampler::SegmentTreeSampler(const Matrix& U, std::size_t F,
                                       std::vector<double> y_rank1, Layout layout) {
    require(!U.empty(), "build_sampler: empty matrix");
    require(U.all_finite(), "build_sampler: non-finite entries");
    require(F >= 1, "build_sampler: leaf capacity must be positive");
    require(y_rank1.size() == U.cols, "build_sampler: rank-1 factor must have length R");
    for (double v : y_rank1) require(std::isfinite(v), "build_sampler: non-finite Y factor");

    I_ = U.rows;
    R_ = U.cols;
    F_ = F;
    dense_u_ = U;
    y_vec_ = std::move(y_rank1);

    std::vector<std::pair<std::size_t, std::size_t>> segs;
    for (std::size_t s = 0; s < I_; s += F) segs.emplace_back(s, std::min(s + F, I_));
    init_tree(std::move(segs), layout);
    build_grams();
}

SegmentTreeSampler SegmentTreeSampler::from_sparse(const SparseMatrixCoo& U, Layout layout) {
    require(U.rows >= 1 && U.cols >= 1, "build_sampler_sparse: empty matrix");
    require(!U.entries.empty(), "build_sampler_sparse: matrix has no nonzeros");
    require(U.sorted_row_major(), "build_sampler_sparse: entries must be sorted row-major");

    SegmentTreeSampler s;
    s.I_ = U.rows;
    s.R_ = U.cols;
    s.F_ = U.cols;  // nominal; leaf partition below follows the nnz rule
    s.sparse_ = true;
    s.y_vec_.assign(U.cols, 1.0);

    s.row_ptr_.assign(U.rows + 1, 0);
    s.col_idx_.reserve(U.nnz());
    s.vals_.reserve(U.nnz());
    for (const auto& e : U.entries) {
        require(e.row < U.rows && e.col < U.cols, "build_sampler_sparse: entry out of range");
        require(std::isfinite(e.value), "build_sampler_sparse: non-finite entry");
        s.row_ptr_[e.row + 1]++;
        s.col_idx_.push_back(e.col);
        s.vals_.push_back(e.value);
    }
    for (std::size_t i = 0; i < U.rows; ++i) s.row_ptr_[i + 1] += s.row_ptr_[i];

    // Greedy row partition: each leaf holds at most R^2 stored nonzeros.
    const std::size_t cap = s.R_ * s.R_;
    std::vector<std::pair<std::size_t, std::size_t>> segs;
    std::size_t start = 0, cur = 0;
    for (std::size_t i = 0; i < U.rows; ++i) {
        const std::size_t rn = s.row_ptr_[i + 1] - s.row_ptr_[i];
        if (cur + rn > cap && cur > 0) {
            segs.emplace_back(start, i);
            start = i;
            cur = 0;
        }
        cur += rn;
    }
    segs.emplace_back(start, U.rows);

    s.init_tree(std::move(segs), layout);
    s.build_grams();
    return s;
}

void SegmentTreeSampler::init_tree(
    std::vector<std::pair<std::size_t, std::size_t>> leaf_segments, Layout layout) {
    layout_ = layout;
    leaf_count_ = leaf_segments.size();
    const std::size_t L = leaf_count_;
    const std::size_t n = 2 * L - 1;
    seg0_.assign(n, 0);
    seg1_.assign(n, 0);
    leaf_node_.assign(L, 0);

    // Complete-tree heap layout: in left-to-right order, the leaves on the
    // deepest level come first, then the leaves one level up.
    const std::size_t d = ceil_log2(L);
    const std::size_t bottom = 2 * L - (std::size_t{1} << d);
    for (std::size_t l = 0; l < L; ++l) {
        const std::size_t node =
            (l < bottom) ? ((std::size_t{1} << d) - 1 + l) : (L - 1 + (l - bottom));
        leaf_node_[l] = node;
        seg0_[node] = leaf_segments[l].first;
        seg1_[node] = leaf_segments[l].second;
    }
    for (std::size_t v = n; v-- > 0;) {
        if (!is_leaf(v)) {
            seg0_[v] = seg0_[left_child(v)];
            seg1_[v] = seg1_[right_child(v)];
        }
    }

    gram_off_.assign(n, kAbsent);
    std::size_t off = 0;
    for (std::size_t v = 0; v < n; ++v) {
        const bool stored = (layout == Layout::Full) || v == 0 || (v % 2 == 1);
        if (stored) {
            gram_off_[v] = off;
            off += pack_size();
        }
    }
    grams_.assign(off, 0.0);
}

void SegmentTreeSampler::build_grams() {
    const std::size_t n = node_count();
    const std::size_t P = pack_size();

    // Transient full store: leaf Grams in parallel, then one upward sweep.
    std::vector<double> all(n * P, 0.0);

    const std::size_t L = leaf_count_;
#pragma omp parallel for schedule(static) if (I_ * P > 8192)
    for (std::size_t l = 0; l < L; ++l) {
        const std::size_t v = leaf_node_[l];
        double* g = all.data() + v * P;
        for (std::size_t i = seg0_[v]; i < seg1_[v]; ++i) {
            if (sparse_) {
                for (std::size_t ka = row_ptr_[i]; ka < row_ptr_[i + 1]; ++ka) {
                    const std::size_t a = col_idx_[ka];
                    const double va = vals_[ka];
                    for (std::size_t kb = ka; kb < row_ptr_[i + 1]; ++kb)
                        g[pack_index(a, col_idx_[kb])] += va * vals_[kb];
                }
            } else {
                const double* r = dense_u_.row(i);
                std::size_t idx = 0;
                for (std::size_t a = 0; a < R_; ++a)
                    for (std::size_t b = a; b < R_; ++b, ++idx) g[idx] += r[a] * r[b];
            }
        }
    }

    for (std::size_t v = n; v-- > 0;) {
        if (is_leaf(v)) continue;
        double* g = all.data() + v * P;
        const double* gl = all.data() + left_child(v) * P;
        const double* gr = all.data() + right_child(v) * P;
        for (std::size_t k = 0; k < P; ++k) g[k] = gl[k] + gr[k];
    }

    for (std::size_t v = 0; v < n; ++v)
        if (gram_off_[v] != kAbsent)
            std::copy(all.begin() + v * P, all.begin() + (v + 1) * P, gram_at(v));
}

std::vector<double> SegmentTreeSampler::fold_weights(std::span<const double> h) const {
    require(h.size() == R_, "sampler: history vector has wrong length");
    std::vector<double> folded(pack_size());
    std::size_t idx = 0;
    if (!y_vec_.empty()) {
        for (std::size_t a = 0; a < R_; ++a) {
            const double za = h[a] * y_vec_[a];
            for (std::size_t b = a; b < R_; ++b, ++idx) {
                const double zb = h[b] * y_vec_[b];
                folded[idx] = (a == b ? 1.0 : 2.0) * za * zb;
            }
        }
    } else {
        for (std::size_t a = 0; a < R_; ++a)
            for (std::size_t b = a; b < R_; ++b, ++idx)
                folded[idx] = (a == b ? 1.0 : 2.0) * h[a] * h[b] * y_(a, b);
    }
    return folded;
}

double SegmentTreeSampler::packed_inner(std::size_t node, std::span<const double> folded) const {
    const double* g = gram_at(node);
    double acc = 0.0;
    for (std::size_t k = 0; k < folded.size(); ++k) acc += g[k] * folded[k];
    return acc;
}

void SegmentTreeSampler::segment_masses(std::size_t first, std::size_t last,
                                        std::span<const double> h,
                                        std::span<const double> folded,
                                        std::vector<double>& out) const {
    out.resize(last - first);
    if (!y_vec_.empty()) {
        // Rank-1 path: mass_i = (U[i,:] . (h o y))^2
        std::vector<double> z(R_);
        for (std::size_t c = 0; c < R_; ++c) z[c] = h[c] * y_vec_[c];
        for (std::size_t i = first; i < last; ++i) {
            double dot = 0.0;
            if (sparse_) {
                for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
                    dot += vals_[k] * z[col_idx_[k]];
            } else {
                const double* r = dense_u_.row(i);
                for (std::size_t c = 0; c < R_; ++c) dot += r[c] * z[c];
            }
            out[i - first] = dot * dot;
        }
    } else {
        for (std::size_t i = first; i < last; ++i) {
            const double* r = dense_u_.row(i);
            double acc = 0.0;
            std::size_t idx = 0;
            for (std::size_t a = 0; a < R_; ++a) {
                const double ra = r[a];
                for (std::size_t b = a; b < R_; ++b, ++idx) acc += folded[idx] * ra * r[b];
            }
            out[i - first] = acc;
        }
    }
}

double SegmentTreeSampler::normalizer(std::span<const double> h) const {
    return packed_inner(0, fold_weights(h));
}

std::size_t SegmentTreeSampler::row_sample(std::span<const double> h, CounterRng& rng) const {
    const std::vector<double> folded = fold_weights(h);
    const double C = packed_inner(0, folded);
    if (!std::isfinite(C)) throw std::runtime_error("row_sample: non-finite normalizer");
    if (C <= 0.0) throw std::runtime_error("row_sample: degenerate distribution (C <= 0)");
    const double inv_c = 1.0 / C;

    const double d = rng.uniform();

    std::size_t node = 0;
    double low = 0.0;
    while (!is_leaf(node)) {
        const double cutoff = low + inv_c * packed_inner(left_child(node), folded);
        if (cutoff >= d) {
            node = left_child(node);
        } else {
            low = cutoff;
            node = right_child(node);
        }
    }

    // Scan the leaf's rows. If rounding leaves the cumulative mass short of d,
    // fall back to the last index with nonzero probability.
    const std::size_t first = seg0_[node], last = seg1_[node];
    std::vector<double> masses;
    segment_masses(first, last, h, folded, masses);
    double cum = low;
    std::size_t last_nonzero = kAbsent;
    for (std::size_t i = first; i < last; ++i) {
        const double m = inv_c * masses[i - first];
        if (m > 0.0) last_nonzero = i;
        cum += m;
        if (cum >= d) return i;
    }
    return last_nonzero != kAbsent ? last_nonzero : last - 1;
}

std::vector<double> SegmentTreeSampler::leaf_probabilities(std::span<const double> h,
                                                           std::size_t leaf) const {
    require(leaf < leaf_count_, "leaf_probabilities: leaf index out of range");
    const std::vector<double> folded = fold_weights(h);
    const double C = packed_inner(0, folded);
    if (!std::isfinite(C)) throw std::runtime_error("leaf_probabilities: non-finite normalizer");
    if (C <= 0.0)
        throw std::runtime_error("leaf_probabilities: degenerate distribution (C <= 0)");
    const std::size_t v = leaf_node_[leaf];
    std::vector<double> masses;
    segment_masses(seg0_[v], seg1_[v], h, folded, masses);
    for (double& m : masses) m /= C;
    return masses;
}

std::vector<double> SegmentTreeSampler::analytic_probabilities(std::span<const double> h) const {
    const std::vector<double> folded = fold_weights(h);
    const double C = packed_inner(0, folded);
    if (C <= 0.0)
        throw std::runtime_error("analytic_probabilities: degenerate distribution (C <= 0)");
    std::vector<double> probs(I_);
    std::vector<double> masses;
    for (std::size_t l = 0; l < leaf_count_; ++l) {
        const std::size_t v = leaf_node_[l];
        segment_masses(seg0_[v], seg1_[v], h, folded, masses);
        for (std::size_t i = seg0_[v]; i < seg1_[v]; ++i) probs[i] = masses[i - seg0_[v]] / C;
    }
    return probs;
}

double SegmentTreeSampler::left_subtree_mass(std::size_t node, std::span<const double> h) const {
    require(!is_leaf(node), "left_subtree_mass: node is a leaf");
    const std::vector<double> folded = fold_weights(h);
    const double C = packed_inner(0, folded);
    if (C <= 0.0) throw std::runtime_error("left_subtree_mass: degenerate distribution");
    return packed_inner(left_child(node), folded) / C;
}

std::pair<std::size_t, std::size_t> SegmentTreeSampler::leaf_segment(std::size_t leaf) const {
    require(leaf < leaf_count_, "leaf_segment: leaf index out of range");
    const std::size_t v = leaf_node_[leaf];
    return {seg0_[v], seg1_[v]};
}

Matrix SegmentTreeSampler::node_gram(std::size_t node) const {
    require(node < node_count(), "node_gram: node out of range");
    require(gram_stored(node), "node_gram: partial Gram not stored at this node");
    Matrix G(R_, R_);
    const double* g = gram_at(node);
    std::size_t idx = 0;
    for (std::size_t a = 0; a < R_; ++a)
        for (std::size_t b = a; b < R_; ++b, ++idx) {
            G(a, b) = g[idx];
            G(b, a) = g[idx];
        }
    return G;
}

const Matrix& SegmentTreeSampler::dense_matrix() const {
    if (sparse_) throw std::logic_error("dense_matrix: sampler was built from sparse input");
    return dense_u_;
}

void SegmentTreeSampler::update_entry(std::size_t r, std::size_t c, double value) {
    require(r < I_ && c < R_, "update_entry: index out of range");
    require(std::isfinite(value), "update_entry: non-finite value");

    double old = 0.0;
    std::size_t sparse_slot = kAbsent;
    if (sparse_) {
        for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
            if (col_idx_[k] == c) {
                sparse_slot = k;
                old = vals_[k];
                break;
            }
        }
        if (sparse_slot == kAbsent)
            throw std::invalid_argument(
                "update_entry: entry outside the stored sparsity pattern");
    } else {
        old = dense_u_(r, c);
    }
    const double delta = value - old;

    // Patch row/column c of every stored partial Gram on the root-leaf path.
    std::size_t node = 0;
    while (true) {
        if (gram_off_[node] != kAbsent) {
            double* g = gram_at(node);
            if (sparse_) {
                for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
                    const std::size_t b = col_idx_[k];
                    if (b == c) continue;
                    g[pack_index(std::min(b, c), std::max(b, c))] += delta * vals_[k];
                }
            } else {
                const double* row = dense_u_.row(r);
                for (std::size_t b = 0; b < R_; ++b) {
                    if (b == c) continue;
                    g[pack_index(std::min(b, c), std::max(b, c))] += delta * row[b];
                }
            }
            g[pack_index(c, c)] += 2.0 * delta * old + delta * delta;
        }
        if (is_leaf(node)) break;
        node = (r < seg1_[left_child(node)]) ? left_child(node) : right_child(node);
    }

    if (sparse_) {
        vals_[sparse_slot] = value;
    } else {
        dense_u_(r, c) = value;
    }
}

}  // namespace krplev
