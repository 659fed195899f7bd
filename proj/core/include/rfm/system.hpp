#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "rfm/features.hpp"
#include "rfm/linalg.hpp"
#include "rfm/problems.hpp"

namespace rfm {

/// Worker threads used by assembly, filtering and block products.
/// Defaults to std::thread::hardware_concurrency(). Results never depend on it.
void set_thread_count(std::size_t threads);
std::size_t thread_count();

/// Runs body(i) for i in [0, n), split into contiguous chunks over thread_count() threads.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

/// Regular lattice over the box with `counts[i]` points along dimension i;
/// row-major (last dimension fastest), flattened n x dims. Endpoints are included
/// unless `cell_centred`, which places points at the centres of counts[i] equal cells.
std::vector<double> lattice(const Domain& domain, std::span<const std::size_t> counts, bool cell_centred = false);

/// Collocation rows: interior lattice first, then boundary operators in order.
struct CollocationSet {
  std::size_t dims = 0;
  std::vector<double> points;   // rows x dims
  std::vector<double> weights;  // per row
  std::vector<int> source;      // -1 for interior rows, l for boundary operator l
  std::size_t interior = 0;

  std::size_t rows() const noexcept { return weights.size(); }
  std::span<const double> point(std::size_t row) const { return {points.data() + row * dims, dims}; }
};

/// Interior lattice of S * ceil(K^(1/d)) points per dimension unless
/// `interior_per_dim` is nonzero; boundary rows from the problem's sample sets.
/// Hard-constrained problems use a cell-centred lattice: C vanishes on the
/// boundary, so endpoint rows would be identically zero.
CollocationSet collocation(const ProblemSpec& problem, const Decomposition& dec, std::size_t features,
                           std::size_t interior_per_dim = 0);

/// Dense block restricted to rows I_j and columns K_j of the implicit matrix.
struct MatrixBlock {
  std::vector<std::size_t> rows;  // ascending global row indices
  std::size_t col_offset = 0;
  DenseMatrix values;             // rows.size() x width
};

/// Implicit sum_j V_j^T M_j W_j. Overlapping rows accumulate over blocks in
/// block order, so products are deterministic for any thread count.
class BlockMatrix {
 public:
  BlockMatrix() = default;
  BlockMatrix(std::size_t rows, std::size_t cols, std::vector<MatrixBlock> blocks);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  const std::vector<MatrixBlock>& blocks() const noexcept { return blocks_; }
  const MatrixBlock& block(std::size_t j) const { return blocks_.at(j); }

  Vector apply(const Vector& a) const;
  Vector apply_transpose(const Vector& r) const;
  void apply(const Vector& a, Vector& y) const;
  void apply_transpose(const Vector& r, Vector& z) const;

  /// Materialised matrix; Error(cap_exceeded) beyond `cap` rows or columns.
  DenseMatrix to_dense(std::size_t cap = kDefaultSvdCap) const;
  std::size_t nonzeros() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<MatrixBlock> blocks_;
};

struct GlobalSystem {
  BlockMatrix matrix;
  Vector rhs;
  CollocationSet collocation;
  std::size_t features = 0;
  std::size_t dims = 0;
  std::size_t per_dim = 0;
  double overlap = 0.0;

  std::size_t rows() const noexcept { return matrix.rows(); }
  std::size_t cols() const noexcept { return matrix.cols(); }
  std::size_t subdomains() const noexcept { return matrix.blocks().size(); }
};

/// Builds M and h. For hard-constrained problems the effective basis function is
/// C * omega_j * phi_jk and the right-hand side becomes f - N[G].
/// Throws Error(coverage) if a collocation point is not covered by any subdomain,
/// Error(dimension_mismatch) if the basis does not match the decomposition.
GlobalSystem assemble(const ProblemSpec& problem, const Decomposition& dec, const FeatureBasis& basis,
                      const CollocationSet& colloc);
GlobalSystem assemble(const ProblemSpec& problem, const Decomposition& dec, const FeatureBasis& basis,
                      std::size_t interior_per_dim = 0);

/// Value-only map a -> u~(points) = C (E a) + G, stored as E' = diag(C) E and offset G.
struct EvaluationOperator {
  BlockMatrix matrix;
  Vector offset;

  Vector evaluate(const Vector& a) const;
};

EvaluationOperator evaluation_operator(const ProblemSpec& problem, const Decomposition& dec,
                                       const FeatureBasis& basis, std::span<const double> points);

/// u~ = C u^ + G at the given flattened points.
Vector evaluate_solution(const ProblemSpec& problem, const Decomposition& dec, const FeatureBasis& basis,
                         const Vector& a, std::span<const double> points);

/// Jet along `axis` of u~ - G = C u^ at one point; pointwise re-evaluation used by tests.
Jet2 constrained_jet(const ProblemSpec& problem, const Decomposition& dec, const FeatureBasis& basis,
                     const Vector& a, std::span<const double> x, std::size_t axis);

struct TestSet {
  std::size_t dims = 0;
  std::vector<double> points;  // count x dims
  Vector truth;
  double sigma = 0.0;          // standard deviation of truth

  std::size_t size() const noexcept { return static_cast<std::size_t>(truth.size()); }
};

/// Lattice with test_points_per_subdomain * S points per dimension.
/// Throws Error(degenerate_test_set) when the problem has no truth or it is constant.
TestSet make_test_set(const ProblemSpec& problem, const Decomposition& dec);
TestSet make_test_set(std::vector<double> points, std::size_t dims, Vector truth);

/// mean |predicted - truth| / sigma.
double l1_error(const TestSet& test, const Vector& predicted);

/// Writes `<stem>.coo` (a "% rows cols nnz" header, then "row col value" per line, 0-based) and `<stem>.rhs` (one value per line).
/// Throws Error(cap_exceeded) when nonzeros exceed `max_nonzeros`.
void export_coo(const GlobalSystem& sys, const std::filesystem::path& stem, std::size_t max_nonzeros = 50'000'000);

}  // namespace rfm
