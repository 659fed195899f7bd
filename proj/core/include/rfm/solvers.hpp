#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "rfm/linalg.hpp"
#include "rfm/system.hpp"

namespace rfm {

/// Matrix-free operator: y = A x and z = A^T r. Output vectors are resized by the callee.
struct LinearOperator {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::function<void(const Vector&, Vector&)> apply;
  std::function<void(const Vector&, Vector&)> apply_transpose;
};

/// Views; the referenced matrix must outlive the operator.
LinearOperator make_operator(const BlockMatrix& m);
LinearOperator make_operator(const DenseMatrix& m);

struct SolveConfig {
  std::size_t max_iters = 10000;
  /// Residual and test error are recorded every eval_stride iterations (and at the last one).
  std::size_t eval_stride = 1;
  /// Stop once ||A x - h|| <= rtol ||h|| at a recorded iteration; 0 disables stopping.
  double rtol = 0.0;
};

struct IterationRecord {
  std::size_t iteration = 0;
  double residual = 0.0;
  double error = std::numeric_limits<double>::quiet_NaN();
};

struct SolveResult {
  Vector x;       // final iterate
  Vector best_x;  // iterate with the lowest recorded test error (final iterate without a callback)
  double best_error = std::numeric_limits<double>::quiet_NaN();
  std::size_t best_iteration = 0;
  std::size_t iterations = 0;
  std::vector<IterationRecord> history;
  bool breakdown = false;
  std::string note;
};

/// Test error of an iterate (in the operator's own unknowns).
using ErrorCallback = std::function<double(const Vector&)>;

/// Paige-Saunders LSQR with zero damping; no stopping rule unless cfg.rtol > 0.
/// Throws Error(divergence) if an iterate becomes non-finite.
SolveResult lsqr(const LinearOperator& a, const Vector& h, const SolveConfig& cfg = {},
                 const ErrorCallback& callback = nullptr);

/// Symmetric positive semi-definite approximation of (A^T A)^-1.
using Preconditioner = std::function<void(const Vector&, Vector&)>;

/// Conjugate gradients on A^T A x = A^T h (CGNR), optionally preconditioned.
/// A zero-curvature direction halts the iteration and sets `breakdown`.
SolveResult cg_normal(const LinearOperator& a, const Vector& h, const SolveConfig& cfg = {},
                      const ErrorCallback& callback = nullptr, const Preconditioner& preconditioner = nullptr);

/// Additive Schwarz preconditioner sum_j W_j A_j^+ W_j^T with A_j = M_j^T M_j.
/// A_j^+ is the eigen pseudo-inverse keeping eigenvalues above 1e-14 * lambda_max.
struct AdditiveSchwarz {
  std::vector<std::size_t> offsets;
  /// B_j = U_j Lambda_j^-1/2 on retained eigenpairs, so A_j^+ = B_j B_j^T.
  std::vector<DenseMatrix> factors;
  std::size_t truncated_blocks = 0;  // blocks where the cutoff removed eigenvalues
  std::size_t cols = 0;

  static constexpr double kCutoff = 1e-14;

  void apply(const Vector& r, Vector& z) const;
  Preconditioner as_function() const;
  /// blockdiag(B_j), so that kappa(A_AS^-1 A) = kappa(M B)^2 on the retained subspace.
  BlockMatrix scaled_matrix(const BlockMatrix& m) const;
};

AdditiveSchwarz as_preconditioner(const GlobalSystem& sys);

}  // namespace rfm
