#pragma once

#include <Eigen/Dense>

#include <span>

namespace dkf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// (X + Xᵀ) / 2.
Matrix symmetrize(const Matrix& x);

/// Eigenvalues of the symmetric part of `x`, ascending.
Vector symmetric_eigenvalues(const Matrix& x);

/// Relative PSD tolerance: 1e-9 × (1 + largest |eigenvalue|).
double psd_tolerance(const Vector& eigenvalues, double relative = 1e-9);

/// True when every eigenvalue of the symmetrized matrix is ≥ −psd_tolerance.
bool is_psd(const Matrix& x, double relative = 1e-9);

/// Max-abs asymmetry, judged against 1e-9 × (1 + max|entry|).
bool is_symmetric(const Matrix& x, double relative = 1e-9);

/// Moore–Penrose pseudoinverse. Singular values at or below
/// `relative_tol` × largest singular value are treated as zero.
Matrix pseudo_inverse(const Matrix& x, double relative_tol = 1e-12);

/// Rank with singular values below `relative_tol` × largest counted as zero.
Index numerical_rank(const Matrix& x, double relative_tol = 1e-10);

/// max |eigenvalue| of a square matrix.
double spectral_radius(const Matrix& x);

Matrix block_diagonal(std::span<const Matrix> blocks);

bool all_finite(const Matrix& x);

}  // namespace dkf
