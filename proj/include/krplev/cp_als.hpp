#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "krplev/krp_sampler.hpp"
#include "krplev/sketch.hpp"
#include "krplev/tensor.hpp"

namespace krplev {

// CP decomposition engines: exact alternating least squares, the randomized
// variant driven by the exact Khatri-Rao leverage sampler (STS-CP), and the
// product-of-leverage baseline (CP-ARLS-LEV).

enum class Solver { Exact, StsCp, CpArlsLev };

struct AlsOptions {
    std::size_t max_rounds = 40;
    std::size_t epoch_length = 5;  // rounds between fit evaluations
    double stop_tolerance = 1e-4;
    Solver solver = Solver::Exact;
    SketchConfig sketch;             // sample count/seed for randomized solvers
    bool exact_solve_oracle = false; // record per-solve epsilon against the exact solution
    bool debug_checks = false;       // re-validate sampler state after each factor update
};

struct RoundMetric {
    std::size_t round = 0;
    std::size_t mode = 0;
    double solve_seconds = 0.0;
    std::optional<double> fit;            // set on epoch boundaries
    std::optional<double> solve_epsilon;  // set when the oracle is enabled
};

struct AlsResult {
    KruskalTensor model;
    std::vector<RoundMetric> metrics;
    std::vector<double> epoch_fits;
    std::size_t rounds_run = 0;
    double final_fit = 0.0;
};

// Matricized-tensor times Khatri-Rao product: the I_j x R right-hand side of
// the mode-j normal equations.
Matrix mttkrp(const SparseTensorCoo& T, const std::vector<Matrix>& factors, std::size_t j);
Matrix mttkrp(const DenseTensor& T, const std::vector<Matrix>& factors, std::size_t j);

// J x I_j block of mode-j fibers addressed by the sampled multi-indices;
// positions with no stored value are zero.
Matrix sampled_rhs_rows(const SparseTensorCoo& T, std::size_t j, const SampleBatch& batch);
Matrix sampled_rhs_rows(const DenseTensor& T, std::size_t j, const SampleBatch& batch);

// fit = 1 - |T~ - T|_F / |T|_F, computed without materializing the model.
double fit(const KruskalTensor& model, const SparseTensorCoo& T);
double fit(const KruskalTensor& model, const DenseTensor& T);

// Random model: i.i.d. standard normal factors with renormalized columns,
// unit weights.
KruskalTensor random_kruskal(std::span<const std::uint64_t> dims, std::size_t R,
                             std::uint64_t seed);

template <typename TensorT>
AlsResult cp_als(const TensorT& T, std::size_t R, const AlsOptions& opts,
                 std::uint64_t seed);

extern template AlsResult cp_als<SparseTensorCoo>(const SparseTensorCoo&, std::size_t,
                                                  const AlsOptions&, std::uint64_t);
extern template AlsResult cp_als<DenseTensor>(const DenseTensor&, std::size_t,
                                              const AlsOptions&, std::uint64_t);

}  // namespace krplev
