#include "rfm/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SVD>

#include "rfm/error.hpp"
#include "rfm/features.hpp"
#include "rfm/problems.hpp"

namespace rfm {

namespace {

ConditionEstimate from_extremes(double smax, double smin, bool exact) {
  ConditionEstimate c;
  c.sigma_max = smax;
  c.sigma_min = smin;
  c.exact = exact;
  c.value = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
  c.singular = smin < 1e2 * std::numeric_limits<double>::epsilon() * smax;
  return c;
}

double small_spectral_norm(const DenseMatrix& a) {
  if (a.size() == 0) return 0.0;
  return Eigen::JacobiSVD<DenseMatrix>(a).singularValues()(0);
}

}  // namespace

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

ConditionEstimate condition_number(const DenseMatrix& a, std::size_t cap) {
  const auto s = singular_values(a, cap);
  if (s.empty()) return from_extremes(0.0, 0.0, true);
  return from_extremes(s.front(), s.back(), true);
}

ConditionEstimate condition_number(const BlockMatrix& a, std::size_t cap) {
  if (a.rows() <= cap && a.cols() <= cap) return condition_number(a.to_dense(cap), cap);
  return lanczos_condition(make_operator(a));
}

ConditionEstimate lanczos_condition(const LinearOperator& a, std::size_t iterations, std::uint64_t seed) {
  const std::size_t k_max = std::min({iterations, a.rows, a.cols});
  if (k_max == 0) return from_extremes(0.0, 0.0, false);
  const auto m = static_cast<Eigen::Index>(a.rows);
  const auto n = static_cast<Eigen::Index>(a.cols);
  DenseMatrix U(m, static_cast<Eigen::Index>(k_max));
  DenseMatrix V(n, static_cast<Eigen::Index>(k_max));
  std::vector<double> alphas, betas;

  RandomSource rng(seed);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.normal();
  v.normalize();
  Vector p, r;
  std::size_t k = 0;
  for (; k < k_max; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    V.col(kk) = v;
    a.apply(v, p);
    if (k > 0) p -= betas.back() * U.col(kk - 1);
    // Full reorthogonalisation (twice is enough).
    for (int pass = 0; pass < 2; ++pass) p -= U.leftCols(kk) * (U.leftCols(kk).transpose() * p);
    const double alpha = p.norm();
    alphas.push_back(alpha);
    if (alpha == 0.0) {
      ++k;
      break;
    }
    U.col(kk) = p / alpha;
    if (k + 1 == k_max) {
      ++k;
      break;
    }
    a.apply_transpose(U.col(kk), r);
    r -= alpha * v;
    for (int pass = 0; pass < 2; ++pass) r -= V.leftCols(kk + 1) * (V.leftCols(kk + 1).transpose() * r);
    const double beta = r.norm();
    if (beta <= 1e-14 * alpha) {
      ++k;
      break;
    }
    betas.push_back(beta);
    v = r / beta;
  }
  const auto kk = static_cast<Eigen::Index>(alphas.size());
  DenseMatrix B = DenseMatrix::Zero(kk, kk);
  for (Eigen::Index i = 0; i < kk; ++i) {
    B(i, i) = alphas[static_cast<std::size_t>(i)];
    if (i + 1 < kk) B(i, i + 1) = betas[static_cast<std::size_t>(i)];
  }
  const Vector s = Eigen::JacobiSVD<DenseMatrix>(B).singularValues();
  return from_extremes(s(0), s(s.size() - 1), false);
}

double theorem1_bound(double alpha) {
  if (!(2.0 * alpha < 1.0)) return std::numeric_limits<double>::infinity();
  return std::sqrt((1.0 + 2.0 * alpha) / (1.0 - 2.0 * alpha));
}

double two_block_kappa(double pair_norm) {
  if (!(pair_norm < 1.0)) return std::numeric_limits<double>::infinity();
  return std::sqrt((1.0 + pair_norm) / (1.0 - pair_norm));
}

CouplingReport coupling_alpha(const BlockMatrix& q, bool measure_kappa) {
  CouplingReport rep;
  const auto& blocks = q.blocks();
  // Which blocks touch each row; more than two, or two non-adjacent ones, breaks the chain model.
  std::vector<std::vector<std::size_t>> owners(q.rows());
  for (std::size_t j = 0; j < blocks.size(); ++j)
    for (const std::size_t r : blocks[j].rows) owners[r].push_back(j);
  for (const auto& o : owners) {
    if (o.size() > 2 || (o.size() == 2 && o[1] != o[0] + 1)) rep.three_way_overlap = true;
  }

  for (std::size_t j = 0; j + 1 < blocks.size(); ++j) {
    const auto& a = blocks[j];
    const auto& b = blocks[j + 1];
    std::vector<Eigen::Index> ia, ib;
    std::size_t x = 0, y = 0;
    while (x < a.rows.size() && y < b.rows.size()) {
      if (a.rows[x] < b.rows[y]) {
        ++x;
      } else if (b.rows[y] < a.rows[x]) {
        ++y;
      } else {
        ia.push_back(static_cast<Eigen::Index>(x++));
        ib.push_back(static_cast<Eigen::Index>(y++));
      }
    }
    double norm = 0.0;
    if (!ia.empty()) {
      const DenseMatrix qa = a.values(ia, Eigen::all);
      const DenseMatrix qb = b.values(ib, Eigen::all);
      norm = small_spectral_norm(qb.transpose() * qa);
    }
    rep.pair_norms.push_back(norm);
    rep.alpha = std::max(rep.alpha, norm);
  }
  rep.bound_defined = 2.0 * rep.alpha < 1.0;
  rep.bound = rep.bound_defined ? theorem1_bound(rep.alpha) : 0.0;
  if (measure_kappa) rep.measured_kappa = condition_number(q.to_dense()).value;
  return rep;
}

CouplingReport coupling_alpha(const FilteredSystem& fs, bool measure_kappa) {
  if (fs.source().dims != 1) {
    throw Error(ErrorCode::unsupported_topology, "coupling alpha is defined for one-dimensional chains only");
  }
  return coupling_alpha(precondition(fs).matrix(), measure_kappa);
}

BlockMatrix random_orthonormal_chain(std::size_t blocks, std::size_t features, std::size_t rows, std::size_t overlap,
                                     RandomSource& rng) {
  if (blocks < 1 || features < 1 || rows < features || overlap >= rows) {
    throw Error(ErrorCode::invalid_input, "chain needs rows >= features and overlap < rows");
  }
  const std::size_t stride = rows - overlap;
  std::vector<MatrixBlock> out(blocks);
  for (std::size_t j = 0; j < blocks; ++j) {
    const DenseMatrix g = gaussian_matrix(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(features), rng);
    PivotedQR qr = qr_column_pivot(g, 0.0);
    out[j].values = std::move(qr.q);
    out[j].col_offset = j * features;
    for (std::size_t r = 0; r < rows; ++r) out[j].rows.push_back(j * stride + r);
  }
  return BlockMatrix((blocks - 1) * stride + rows, blocks * features, std::move(out));
}

double rmt_epsilon(std::size_t ell, std::size_t K, std::size_t n) {
  const auto nd = static_cast<double>(n);
  return (1.0 + static_cast<double>(K) / (2.0 * nd)) *
         (std::sqrt(static_cast<double>(K)) + std::sqrt(static_cast<double>(ell))) / std::sqrt(nd);
}

namespace {

void check_rmt(const RmtConfig& cfg) {
  if (cfg.trials < 100) throw Error(ErrorCode::invalid_input, "random-matrix experiments need at least 100 trials");
  if (cfg.ell < 1 || cfg.K < 1 || cfg.ell > cfg.n || cfg.K > cfg.n) {
    throw Error(ErrorCode::invalid_input, "random-matrix experiments need 1 <= ell, K <= n");
  }
}

// Top-left ell x K block of a Haar matrix drawn from trial-specific streams.
DenseMatrix haar_block(const RmtConfig& cfg, RandomSource rng) {
  return haar_orthogonal(cfg.n, rng).topLeftCorner(static_cast<Eigen::Index>(cfg.ell), static_cast<Eigen::Index>(cfg.K));
}

}  // namespace

RmtFrobeniusResult rmt_frobenius_experiment(const RmtConfig& cfg, std::uint64_t seed) {
  check_rmt(cfg);
  std::vector<double> product(cfg.trials), single(cfg.trials);
  const RandomSource root(seed, 1);
  parallel_for(cfg.trials, [&](std::size_t t) {
    const DenseMatrix p1 = haar_block(cfg, root.derive(2 * t));
    const DenseMatrix q1 = haar_block(cfg, root.derive(2 * t + 1));
    product[t] = (q1.transpose() * p1).norm();
    single[t] = p1.norm();
  });
  RmtFrobeniusResult res;
  const auto trials = static_cast<double>(cfg.trials);
  for (std::size_t t = 0; t < cfg.trials; ++t) {
    res.mean_product += product[t] / trials;
    res.mean_single += single[t] / trials;
  }
  const auto n = static_cast<double>(cfg.n);
  res.bound = static_cast<double>(cfg.K) * std::sqrt(static_cast<double>(cfg.ell)) / n;
  res.slack_bound = res.bound * (1.0 + 3.0 / std::sqrt(trials));
  res.single_expected = std::sqrt(static_cast<double>(cfg.K * cfg.ell) / n);
  return res;
}

RmtSpectralResult rmt_spectral_experiment(const RmtConfig& cfg, std::uint64_t seed) {
  check_rmt(cfg);
  std::vector<double> block(cfg.trials), product(cfg.trials);
  const RandomSource root(seed, 2);
  parallel_for(cfg.trials, [&](std::size_t t) {
    const DenseMatrix p1 = haar_block(cfg, root.derive(2 * t));
    const DenseMatrix q1 = haar_block(cfg, root.derive(2 * t + 1));
    block[t] = small_spectral_norm(p1);
    product[t] = small_spectral_norm(q1.transpose() * p1);
  });
  RmtSpectralResult res;
  const auto trials = static_cast<double>(cfg.trials);
  for (std::size_t t = 0; t < cfg.trials; ++t) {
    res.mean_block += block[t] / trials;
    res.mean_product += product[t] / trials;
  }
  res.epsilon = rmt_epsilon(cfg.ell, cfg.K, cfg.n);
  res.epsilon_squared = res.epsilon * res.epsilon;
  if (2.0 * res.epsilon_squared < 1.0) res.kappa_estimate_eps2 = theorem1_bound(res.epsilon_squared);
  if (2.0 * res.epsilon < 1.0) res.kappa_estimate_eps = theorem1_bound(res.epsilon);
  return res;
}

std::vector<SweepCell> kappa_vs_overlap_sweep(const SweepConfig& cfg) {
  if (cfg.features.empty() || cfg.overlaps.empty() || cfg.seeds.empty()) {
    throw Error(ErrorCode::configuration, "sweep lists must be non-empty");
  }
  const ProblemSpec problem = oscillator_problem(cfg.omega0);
  std::vector<SweepCell> cells;
  for (const std::size_t K : cfg.features) {
    for (const double delta : cfg.overlaps) {
      SweepCell cell;
      cell.K = K;
      cell.overlap = delta;
      const Decomposition dec(problem.domain, cfg.per_dim, delta);
      for (const std::uint64_t seed : cfg.seeds) {
        const FeatureBasis basis = init_basis(dec, K, 1, Activation::tanh, RandomSource(seed));
        const GlobalSystem sys = assemble(problem, dec, basis, cfg.interior_points);
        const FilteredSystem fs = filter(sys, 0.0);
        cell.kappa_m.push_back(condition_number(sys.matrix).value);
        cell.kappa_q.push_back(condition_number(precondition(fs).matrix()).value);
      }
      cell.median_kappa_m = median(cell.kappa_m);
      cell.median_kappa_q = median(cell.kappa_q);
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

}  // namespace rfm
