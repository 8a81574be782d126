#pragma once

#include <span>
#include <vector>

#include "krplev/matrix.hpp"

namespace krplev {

// Small dense kernels shared by the samplers and the tensor engines.
// Everything here is a pure function of its inputs and safe to call from
// any number of threads.

// U^T U, symmetric PSD, cols x cols.
Matrix gram(const Matrix& U);

// A^T B; A and B must have the same row count.
Matrix gram_cross(const Matrix& A, const Matrix& B);

// Column-wise Kronecker product. Row (i2, i1) of the result lands at
// linear index i1 * B.rows + i2, i.e. the first operand varies slowest.
Matrix khatri_rao(const Matrix& A, const Matrix& B);

// Sum of all entries of the elementwise product of three equal-shape matrices.
double gen_inner(const Matrix& A, const Matrix& B, const Matrix& C);

// Elementwise product of a list of equal-shape matrices. An empty chain
// yields the all-ones matrix of the declared shape.
Matrix hadamard_chain(const std::vector<const Matrix*>& mats, std::size_t rows,
                      std::size_t cols);

// Symmetric PSD eigendecomposition by cyclic Jacobi rotations. Input must be
// symmetric to within 1e-10 (relative to its largest entry); it is
// symmetrized before decomposition. Eigenvalues in [-1e-8 * lambda_max, 0)
// are clamped to zero; anything lower throws, since it signals a caller that
// passed a matrix that is not PSD. Results sorted descending.
EigenPair eigh_psd(const Matrix& G);

// Moore-Penrose pseudoinverse of a symmetric PSD matrix: eigenvalues above
// rank_cutoff(eig) are inverted, the rest zeroed.
Matrix pinv_psd(const Matrix& G);
Matrix pinv_from_eigen(const EigenPair& eig);

// Eigenvalue threshold separating the retained subspace: R * eps * lambda_max.
double rank_cutoff(const EigenPair& eig);
// Number of eigenvalues above rank_cutoff.
std::size_t numerical_rank(const EigenPair& eig);

// C = A * B.
Matrix matmul(const Matrix& A, const Matrix& B);
Matrix transpose(const Matrix& A);

// x^T M y for an n x n matrix M.
double quadratic_form(std::span<const double> x, const Matrix& M,
                      std::span<const double> y);

}  // namespace krplev
