#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "rfm/linalg.hpp"
#include "rfm/system.hpp"

namespace rfm {

/// sigma-RRQR result for one subdomain block: M_j[:, kept] = q * r.
struct FilteredBlock {
  std::vector<std::size_t> kept;     // local column indices (0..K-1) in pivot order
  std::vector<std::size_t> dropped;  // local column indices in pivot order
  DenseMatrix q;                     // |I_j| x r_j
  DenseMatrix r;                     // r_j x r_j upper triangular
  std::size_t reduced_offset = 0;    // first column of this block in the reduced numbering

  std::size_t rank() const noexcept { return kept.size(); }
};

class FilteredSystem {
 public:
  FilteredSystem(const GlobalSystem& source, double sigma, std::vector<FilteredBlock> blocks);

  const GlobalSystem& source() const noexcept { return *source_; }
  double sigma() const noexcept { return sigma_; }
  const std::vector<FilteredBlock>& blocks() const noexcept { return blocks_; }
  const FilteredBlock& block(std::size_t j) const { return blocks_.at(j); }

  std::size_t reduced_cols() const noexcept { return reduced_cols_; }
  /// 1 - sum_j r_j / (J K).
  double drop_fraction() const;
  /// Kept columns in original global numbering, block by block in pivot order.
  std::vector<std::size_t> kept_columns() const;

  /// JSON object with sigma, drop fraction and per-block ranks.
  std::string summary_json() const;

 private:
  const GlobalSystem* source_;
  double sigma_;
  std::vector<FilteredBlock> blocks_;
  std::size_t reduced_cols_ = 0;
};

/// Independent qr_column_pivot(M_j, sigma) for every block.
/// The source system must outlive the result.
/// Throws Error(degenerate_subdomain) naming j when a block keeps no columns.
FilteredSystem filter(const GlobalSystem& sys, double sigma);

/// Q = M^ S^-1 = sum_j V_j^T Q^_j W^_j as an implicit block matrix.
/// Products are orthonormal gemvs plus scatter/gather; no triangular solves.
class PreconditionedOperator {
 public:
  explicit PreconditionedOperator(const FilteredSystem& fs);

  std::size_t rows() const noexcept { return matrix_.rows(); }
  std::size_t cols() const noexcept { return matrix_.cols(); }
  const BlockMatrix& matrix() const noexcept { return matrix_; }

  Vector apply(const Vector& y) const { return matrix_.apply(y); }
  Vector apply_transpose(const Vector& r) const { return matrix_.apply_transpose(r); }
  DenseMatrix to_dense(std::size_t cap = kDefaultSvdCap) const { return matrix_.to_dense(cap); }

 private:
  BlockMatrix matrix_;
};

PreconditionedOperator precondition(const FilteredSystem& fs);

/// The filtered matrix M^ (kept columns only, reduced numbering in pivot order).
BlockMatrix filtered_matrix(const FilteredSystem& fs);

/// a = S^-1 y scattered to the kept global columns, zero at dropped ones.
/// Throws Error(dimension_mismatch) unless y has reduced_cols() entries.
Vector recover_solution(const FilteredSystem& fs, const Vector& y);

}  // namespace rfm
