#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "rfm/filter_precond.hpp"
#include "rfm/linalg.hpp"
#include "rfm/solvers.hpp"
#include "rfm/system.hpp"

namespace rfm {

struct ConditionEstimate {
  double value = 0.0;  // sigma_max / sigma_min (infinity when sigma_min = 0)
  double sigma_max = 0.0;
  double sigma_min = 0.0;
  bool exact = true;       // false for the Lanczos estimate
  bool singular = false;   // sigma_min < 1e2 * eps * sigma_max
};

/// Dense SVD. Throws Error(cap_exceeded) above `cap`.
ConditionEstimate condition_number(const DenseMatrix& a, std::size_t cap = kDefaultSvdCap);

/// Dense SVD when the matrix fits under `cap`, otherwise the Lanczos estimate.
ConditionEstimate condition_number(const BlockMatrix& a, std::size_t cap = kDefaultSvdCap);

/// Golub-Kahan bidiagonalisation with full reorthogonalisation; the extreme
/// singular values of the bidiagonal approximate those of the operator.
ConditionEstimate lanczos_condition(const LinearOperator& a, std::size_t iterations = 200,
                                    std::uint64_t seed = 0x5eed);

struct CouplingReport {
  std::vector<double> pair_norms;  // ||A_j||_2 = ||Q_{j+1,j}^T Q_{j,j}||_2 per adjacent pair
  double alpha = 0.0;
  bool bound_defined = false;      // 2 alpha < 1
  double bound = 0.0;              // sqrt((1 + 2 alpha) / (1 - 2 alpha)) when defined
  bool three_way_overlap = false;  // some row is shared by non-adjacent blocks
  double measured_kappa = 0.0;     // exact kappa(Q); 0 when not computed
};

/// Chain coupling of a block matrix with orthonormal blocks ordered along a chain.
CouplingReport coupling_alpha(const BlockMatrix& q, bool measure_kappa = true);

/// Same for the preconditioned operator of a filtered system.
/// Throws Error(unsupported_topology) unless the decomposition is one-dimensional.
CouplingReport coupling_alpha(const FilteredSystem& fs, bool measure_kappa = true);

/// sqrt((1 + 2 alpha) / (1 - 2 alpha)); infinity when 2 alpha >= 1.
double theorem1_bound(double alpha);

/// Two-block closed form sqrt((1 + a) / (1 - a)) with a = ||A_1||_2.
double two_block_kappa(double pair_norm);

/// J orthonormal blocks on a chain: block j spans rows [j (rows - overlap), + rows),
/// so neighbours share `overlap` rows. Each block is the Q factor of a Gaussian matrix.
BlockMatrix random_orthonormal_chain(std::size_t blocks, std::size_t features, std::size_t rows,
                                     std::size_t overlap, RandomSource& rng);

struct RmtConfig {
  std::size_t n = 100;
  std::size_t ell = 10;
  std::size_t K = 5;
  std::size_t trials = 1000;
};

/// (1 + K / (2n)) (sqrt(K) + sqrt(ell)) / sqrt(n).
double rmt_epsilon(std::size_t ell, std::size_t K, std::size_t n);

struct RmtFrobeniusResult {
  double mean_product = 0.0;  // mean ||Q_1^T P_1||_F
  double bound = 0.0;         // K sqrt(ell) / n
  double slack_bound = 0.0;   // bound (1 + 3 / sqrt(trials))
  double mean_single = 0.0;   // mean ||P_1||_F
  double single_expected = 0.0;  // sqrt(K ell / n)
};

struct RmtSpectralResult {
  double mean_block = 0.0;    // mean ||P_1||_2
  double mean_product = 0.0;  // mean ||Q_1^T P_1||_2
  double epsilon = 0.0;
  double epsilon_squared = 0.0;
  /// Probabilistic kappa estimate with alpha ~ eps^2 (as printed); 0 when 2 eps^2 >= 1.
  double kappa_estimate_eps2 = 0.0;
  /// Alternative reading alpha ~ eps; 0 when 2 eps >= 1.
  double kappa_estimate_eps = 0.0;
};

/// P_1, Q_1: top ell rows of the first K columns of independent Haar n x n matrices.
/// Throws Error(invalid_input) for trials < 100 or ell, K > n.
RmtFrobeniusResult rmt_frobenius_experiment(const RmtConfig& cfg, std::uint64_t seed);
RmtSpectralResult rmt_spectral_experiment(const RmtConfig& cfg, std::uint64_t seed);

struct SweepCell {
  std::size_t K = 0;
  double overlap = 0.0;
  std::vector<double> kappa_m;  // per seed
  std::vector<double> kappa_q;  // per seed
  double median_kappa_m = 0.0;
  double median_kappa_q = 0.0;
};

struct SweepConfig {
  double omega0 = 60.0;
  std::size_t per_dim = 20;
  std::size_t interior_points = 2000;
  std::vector<std::size_t> features{2, 4, 8};
  std::vector<double> overlaps{1.1, 1.5, 2.0, 2.9};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
};

/// kappa(M) and kappa(Q) with sigma = 0 over a (K, delta) grid on the oscillator.
std::vector<SweepCell> kappa_vs_overlap_sweep(const SweepConfig& cfg);

double median(std::vector<double> values);

}  // namespace rfm
