#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "krplev/krp_sampler.hpp"
#include "krplev/matrix.hpp"

namespace krplev {

// Sketched overdetermined least squares with Khatri-Rao design matrices:
// row-sampling operators, the sketched normal-equations solve, the
// product-of-leverage baseline sampler, and distortion diagnostics.
// Everything here is a pure function over immutable inputs.

struct SketchConfig {
    std::size_t samples = 0;   // J
    double epsilon = 0.1;      // target residual inflation, in (0,1)
    double delta = 0.05;       // failure probability, in (0,1)
    std::uint64_t seed = 0;

    // Advisory lower bound on J from the leverage-sampling guarantee:
    // R * max(log(R/delta), 1/(epsilon*delta)).
    std::size_t advisory_sample_count(std::size_t R) const;
};

struct RowSampleWeights {
    std::vector<std::uint64_t> indices;
    std::vector<double> weights;  // 1 / sqrt(J * q_i)
};

// Bias-correcting weights for a set of sampled rows with their sampling
// probabilities. Throws if any probability is not strictly positive.
RowSampleWeights make_sampling_weights(std::span<const std::uint64_t> indices,
                                       std::span<const double> probabilities,
                                       std::size_t J);

// Black-box row access to the right-hand side: given J linearized row
// indices, returns the corresponding J x C block of B.
using RhsRowsFn = std::function<Matrix(std::span<const std::uint64_t>)>;

// argmin_X || S A X - S B ||_F from cfg.samples leverage-score draws,
// assembled row-wise (A is never materialized) and solved by normal
// equations with a pseudoinverse fallback. `order` fixes the linearization
// used for the rhs row lookups.
Matrix sketched_solve(const KrpSampler& sampler, std::optional<std::size_t> excluded,
                      const RhsRowsFn& rhs_rows, const SketchConfig& cfg,
                      RowOrder order = RowOrder::Ascending);

// CP-ARLS-LEV baseline: each mode drawn independently from that factor's own
// normalized leverage scores; reported probability is the product.
SampleBatch product_lev_sample(const std::vector<Matrix>& factors,
                               std::optional<std::size_t> excluded, std::size_t J,
                               std::uint64_t seed);

// Distortion D(S, A) = kappa(S Q) - 1 for Q an orthonormal basis of
// range(A), computed from the weighted sampled rows S A and the Gram
// eigendecomposition of A (via the Hadamard-of-Grams identity), without
// materializing A or Q. Returns +infinity when the sketch loses rank.
double distortion(const Matrix& weighted_rows, const std::vector<Matrix>& factors,
                  std::optional<std::size_t> excluded);

// epsilon = approx/exact - 1, with both-residuals-negligible mapped to 0.
// `scale` is the magnitude against which "negligible" is judged (|B|_F).
double residual_epsilon(double approx_residual, double exact_residual, double scale);

// Kronecker-structured right-hand side b = c_1 (x) ... (x) c_N, the
// evaluation fixture for least-squares benchmarks: the exact solution is
// computable through the Gram identity while consumers only get black-box
// row access. Linearization is ascending (first component slowest).
struct KroneckerRhs {
    std::vector<std::vector<double>> components;

    static KroneckerRhs random(std::span<const std::uint64_t> dims, std::uint64_t seed);

    double at(std::uint64_t flat) const;
    RhsRowsFn rows_fn() const;
    double norm_squared() const;
    // A^T b for A the Khatri-Rao product of `factors` (ascending order):
    // the Hadamard product of the per-factor inner products U_k^T c_k.
    std::vector<double> design_inner(const std::vector<Matrix>& factors) const;
};

struct ExactLstsq {
    std::vector<double> solution;
    double residual;
};

// Exact minimizer and residual of min_x |A x - b| for a Khatri-Rao design
// and Kronecker rhs, via normal equations on the Hadamard-of-Grams; nothing
// is materialized.
ExactLstsq exact_kron_solve(const std::vector<Matrix>& factors, const KroneckerRhs& rhs);
// Residual |A x - b| of an arbitrary candidate solution, same identity.
double kron_solve_residual(const std::vector<Matrix>& factors, const KroneckerRhs& rhs,
                           std::span<const double> x);

}  // namespace krplev
