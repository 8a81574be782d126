#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "krplev/krp_sampler.hpp"
#include "krplev/matrix.hpp"
#include "krplev/rng.hpp"
#include "krplev/tensor.hpp"

namespace krplev::ref {

// Serial reference implementations. These materialize and enumerate what the
// library is careful never to touch, and exist so tests and benchmarks can
// check the fast kernels against an independent computation path. Nothing
// here uses segment trees, two-stage draws, or OpenMP.

// U^T U by the naive triple loop.
Matrix gram_serial(const Matrix& U);

// Khatri-Rao product assembled column by column as Kronecker products of the
// operand columns.
Matrix khatri_rao_columns(const Matrix& A, const Matrix& B);

// Full Khatri-Rao product of several factors under the given row ordering.
Matrix materialize_krp(std::span<const Matrix> factors, RowOrder order);

// Row leverage scores l_i = A[i,:] (A^T A)^+ A[i,:]^T of a materialized
// matrix; sums to rank(A).
std::vector<double> leverage_scores(const Matrix& A);

// Direct enumeration of q_{h,U,Y}[i] = C^-1 <h h^T, U[i,:]^T U[i,:], Y>.
std::vector<double> enumerate_q(const Matrix& U, std::span<const double> h,
                                const Matrix& Y);

// Inversion draw over an explicit probability vector; consumes one uniform
// and breaks ties exactly like the tree sampler.
std::size_t draw_by_enumeration(std::span<const double> probs, CounterRng& rng);

// Naive MTTKRP: loops every stored entry without mode grouping.
Matrix mttkrp_serial(const SparseTensorCoo& T, const std::vector<Matrix>& factors,
                     std::size_t j);

// Mode-j matricization of a dense tensor, I_j x prod(other dims).
Matrix matricize(const DenseTensor& T, std::size_t j);

// Exact least-squares factor update with the design matrix materialized:
// argmin_X |U_neq_j X^T - mat(T,j)^T|_F.
Matrix naive_als_update(const DenseTensor& T, const std::vector<Matrix>& factors,
                        std::size_t j);

// Elementwise |T~ - T| fit on a densified tensor.
double fit_bruteforce(const KruskalTensor& model, const DenseTensor& T);

DenseTensor densify(const SparseTensorCoo& T);

// Kronecker product of a list of vectors under ascending linearization
// (first vector varies slowest).
std::vector<double> kron_vectors(std::span<const std::vector<double>> vs);

// Total variation distance between a probability vector and a draw histogram.
double total_variation(std::span<const double> p, std::span<const std::uint64_t> counts,
                       std::uint64_t total);

}  // namespace krplev::ref
