#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

#include "rfm/random.hpp"

namespace rfm {

using DenseMatrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Largest row or column count accepted by `singular_values`.
inline constexpr std::size_t kDefaultSvdCap = 20000;

/// Truncated column-pivoted QR: a[:, kept] = q * r_factor.
struct PivotedQR {
  DenseMatrix q;         // m x r, orthonormal columns
  DenseMatrix r_factor;  // r x r, upper triangular, positive non-increasing diagonal
  std::vector<std::size_t> kept;     // original column indices in pivot order
  std::vector<std::size_t> dropped;  // remaining columns in pivot order

  std::size_t rank() const noexcept { return kept.size(); }
};

/// Householder QR with greedy pivoting on residual column norms.
///
/// Stops at the first step t with |R(t,t)| < sigma_rel * |R(0,0)|; that column
/// and every later pivot candidate are dropped. A zero matrix keeps nothing.
/// Throws Error(invalid_input) on non-finite entries or negative sigma_rel.
PivotedQR qr_column_pivot(const DenseMatrix& a, double sigma_rel);

/// Solves r * x = y for upper-triangular r.
/// Throws Error(singular_factor) on a zero diagonal entry.
Vector back_substitute(const DenseMatrix& r, const Vector& y);

/// Same as back_substitute but overwrites y with the solution.
void back_substitute_in_place(const DenseMatrix& r, Eigen::Ref<Vector> y);

/// Full singular spectrum in descending order, length min(rows, cols).
/// Throws Error(cap_exceeded) when either dimension exceeds `cap`.
std::vector<double> singular_values(const DenseMatrix& a, std::size_t cap = kDefaultSvdCap);

/// Largest singular value.
double spectral_norm(const DenseMatrix& a);

/// Matrix of independent standard normals.
DenseMatrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, RandomSource& rng);

/// Haar-distributed n x n orthogonal matrix (QR of a Gaussian matrix with
/// the R diagonal normalised to be positive).
DenseMatrix haar_orthogonal(std::size_t n, RandomSource& rng);

/// max |q^T q - I|.
double orthonormality_error(const DenseMatrix& q);

/// Throws Error(invalid_input) if any entry is NaN or infinite.
void require_finite(const DenseMatrix& a, const char* what);

}  // namespace rfm
