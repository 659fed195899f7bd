#include "rfm/system.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <thread>

#include "rfm/error.hpp"

namespace rfm {

namespace {

std::atomic<std::size_t> g_threads{0};

// Per-row assembly output: the covering subdomains and, for each, K entries.
struct RowEntries {
  std::vector<std::size_t> subdomains;
  std::vector<double> values;
  double rhs = 0.0;
};

}  // namespace

void set_thread_count(std::size_t threads) { g_threads = threads; }

std::size_t thread_count() {
  const std::size_t t = g_threads.load();
  if (t > 0) return t;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const std::size_t threads = std::min(thread_count(), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  const std::size_t chunk = (n + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t * chunk; i < std::min(n, (t + 1) * chunk); ++i) body(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::vector<double> lattice(const Domain& domain, std::span<const std::size_t> counts, bool cell_centred) {
  const std::size_t d = domain.dims();
  if (counts.size() != d) throw Error(ErrorCode::dimension_mismatch, "lattice counts do not match domain");
  std::size_t total = 1;
  for (const std::size_t c : counts) {
    if (c < (cell_centred ? 1u : 2u)) throw Error(ErrorCode::invalid_input, "lattice has too few points per dimension");
    total *= c;
  }
  std::vector<double> out(total * d);
  std::vector<std::size_t> idx(d, 0);
  for (std::size_t p = 0; p < total; ++p) {
    for (std::size_t i = 0; i < d; ++i) {
      const double t = cell_centred ? (static_cast<double>(idx[i]) + 0.5) / static_cast<double>(counts[i])
                                    : static_cast<double>(idx[i]) / static_cast<double>(counts[i] - 1);
      out[p * d + i] = domain.lo[i] + (domain.hi[i] - domain.lo[i]) * t;
    }
    for (std::size_t i = d; i-- > 0;) {
      if (++idx[i] < counts[i]) break;
      idx[i] = 0;
    }
  }
  return out;
}

CollocationSet collocation(const ProblemSpec& problem, const Decomposition& dec, std::size_t features,
                           std::size_t interior_per_dim) {
  const std::size_t d = dec.dims();
  if (interior_per_dim == 0) {
    const double root = std::pow(static_cast<double>(features), 1.0 / static_cast<double>(d));
    // Guard against pow rounding 8^(1/3) to 2.0000000000000004.
    auto c = static_cast<std::size_t>(std::ceil(root - 1e-9));
    interior_per_dim = dec.per_dim() * std::max<std::size_t>(c, 1);
  }
  const std::vector<std::size_t> counts(d, interior_per_dim);

  CollocationSet set;
  set.dims = d;
  set.points = lattice(dec.domain(), counts, problem.hard_constrained());
  set.interior = set.points.size() / d;
  set.weights.assign(set.interior, 1.0 / std::sqrt(static_cast<double>(set.interior)));
  set.source.assign(set.interior, -1);
  for (std::size_t l = 0; l < problem.boundaries.size(); ++l) {
    const auto& bc = problem.boundaries[l];
    if (!(bc.weight > 0.0)) throw Error(ErrorCode::invalid_problem, "boundary weight must be positive");
    const double w = std::sqrt(bc.weight / static_cast<double>(bc.points.size()));
    for (const auto& x : bc.points) {
      if (x.size() != d) throw Error(ErrorCode::dimension_mismatch, "boundary point dimension");
      set.points.insert(set.points.end(), x.begin(), x.end());
      set.weights.push_back(w);
      set.source.push_back(static_cast<int>(l));
    }
  }
  return set;
}

BlockMatrix::BlockMatrix(std::size_t rows, std::size_t cols, std::vector<MatrixBlock> blocks)
    : rows_(rows), cols_(cols), blocks_(std::move(blocks)) {
  for (const auto& b : blocks_) {
    if (static_cast<std::size_t>(b.values.rows()) != b.rows.size() ||
        b.col_offset + static_cast<std::size_t>(b.values.cols()) > cols_) {
      throw Error(ErrorCode::dimension_mismatch, "block does not fit the matrix");
    }
    if (!b.rows.empty() && b.rows.back() >= rows_) throw Error(ErrorCode::dimension_mismatch, "block row out of range");
  }
}

void BlockMatrix::apply(const Vector& a, Vector& y) const {
  if (static_cast<std::size_t>(a.size()) != cols_) throw Error(ErrorCode::dimension_mismatch, "apply: vector length");
  y.setZero(static_cast<Eigen::Index>(rows_));
  const std::size_t threads = std::min(thread_count(), blocks_.size());
  if (threads <= 1) {
    Vector tmp;
    for (const auto& b : blocks_) {
      tmp.noalias() = b.values * a.segment(static_cast<Eigen::Index>(b.col_offset), b.values.cols());
      for (std::size_t i = 0; i < b.rows.size(); ++i) y(static_cast<Eigen::Index>(b.rows[i])) += tmp(static_cast<Eigen::Index>(i));
    }
    return;
  }
  std::vector<Vector> partial(blocks_.size());
  parallel_for(blocks_.size(), [&](std::size_t j) {
    const auto& b = blocks_[j];
    partial[j].noalias() = b.values * a.segment(static_cast<Eigen::Index>(b.col_offset), b.values.cols());
  });
  for (std::size_t j = 0; j < blocks_.size(); ++j) {
    const auto& b = blocks_[j];
    for (std::size_t i = 0; i < b.rows.size(); ++i) y(static_cast<Eigen::Index>(b.rows[i])) += partial[j](static_cast<Eigen::Index>(i));
  }
}

void BlockMatrix::apply_transpose(const Vector& r, Vector& z) const {
  if (static_cast<std::size_t>(r.size()) != rows_) {
    throw Error(ErrorCode::dimension_mismatch, "apply_transpose: vector length");
  }
  z.setZero(static_cast<Eigen::Index>(cols_));
  // Column ranges of distinct blocks are disjoint, so blocks can be processed independently.
  parallel_for(blocks_.size(), [&](std::size_t j) {
    const auto& b = blocks_[j];
    Vector gathered(static_cast<Eigen::Index>(b.rows.size()));
    for (std::size_t i = 0; i < b.rows.size(); ++i) gathered(static_cast<Eigen::Index>(i)) = r(static_cast<Eigen::Index>(b.rows[i]));
    z.segment(static_cast<Eigen::Index>(b.col_offset), b.values.cols()).noalias() += b.values.transpose() * gathered;
  });
}

Vector BlockMatrix::apply(const Vector& a) const {
  Vector y;
  apply(a, y);
  return y;
}

Vector BlockMatrix::apply_transpose(const Vector& r) const {
  Vector z;
  apply_transpose(r, z);
  return z;
}

DenseMatrix BlockMatrix::to_dense(std::size_t cap) const {
  if (rows_ > cap || cols_ > cap) throw Error(ErrorCode::cap_exceeded, "matrix too large to materialise");
  DenseMatrix m = DenseMatrix::Zero(static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_));
  for (const auto& b : blocks_) {
    for (std::size_t i = 0; i < b.rows.size(); ++i) {
      m.row(static_cast<Eigen::Index>(b.rows[i])).segment(static_cast<Eigen::Index>(b.col_offset), b.values.cols()) +=
          b.values.row(static_cast<Eigen::Index>(i));
    }
  }
  return m;
}

std::size_t BlockMatrix::nonzeros() const {
  std::size_t n = 0;
  for (const auto& b : blocks_) n += static_cast<std::size_t>(b.values.size());
  return n;
}

namespace {

void check_basis(const Decomposition& dec, const FeatureBasis& basis) {
  if (basis.subdomains() != dec.count() || basis.dims() != dec.dims()) {
    throw Error(ErrorCode::dimension_mismatch, "feature basis does not match the decomposition");
  }
}

BlockMatrix gather_blocks(const std::vector<RowEntries>& rows, std::size_t subdomains, std::size_t features) {
  std::vector<std::size_t> counts(subdomains, 0);
  for (const auto& r : rows)
    for (const std::size_t j : r.subdomains) ++counts[j];
  std::vector<MatrixBlock> blocks(subdomains);
  for (std::size_t j = 0; j < subdomains; ++j) {
    blocks[j].col_offset = j * features;
    blocks[j].rows.reserve(counts[j]);
    blocks[j].values.resize(static_cast<Eigen::Index>(counts[j]), static_cast<Eigen::Index>(features));
  }
  for (std::size_t row = 0; row < rows.size(); ++row) {
    const auto& r = rows[row];
    for (std::size_t c = 0; c < r.subdomains.size(); ++c) {
      auto& b = blocks[r.subdomains[c]];
      const auto local = static_cast<Eigen::Index>(b.rows.size());
      b.rows.push_back(row);
      for (std::size_t k = 0; k < features; ++k) b.values(local, static_cast<Eigen::Index>(k)) = r.values[c * features + k];
    }
  }
  return BlockMatrix(rows.size(), subdomains * features, std::move(blocks));
}

}  // namespace

GlobalSystem assemble(const ProblemSpec& problem, const Decomposition& dec, const FeatureBasis& basis,
                      const CollocationSet& colloc) {
  check_basis(dec, basis);
  const std::size_t d = dec.dims();
  const std::size_t K = basis.features();
  if (problem.domain.dims() != d || colloc.dims != d) {
    throw Error(ErrorCode::dimension_mismatch, "problem, decomposition and collocation dimensions differ");
  }

  std::vector<RowEntries> rows(colloc.rows());
  parallel_for(colloc.rows(), [&](std::size_t row) {
    const auto x = colloc.point(row);
    const AxisOperator& op =
        colloc.source[row] < 0 ? problem.interior : problem.boundaries[static_cast<std::size_t>(colloc.source[row])].op;
    const PointWindows pw = point_windows(dec, x);
    std::vector<Jet2> cjet(d, Jet2::constant(1.0));
    std::vector<Jet2> gjet(d, Jet2{});
    for (std::size_t axis = 0; axis < d; ++axis) {
      if (problem.constraint_multiplier) cjet[axis] = problem.constraint_multiplier(x, axis);
      if (problem.constraint_offset) gjet[axis] = problem.constraint_offset(x, axis);
    }
    double target = 0.0;
    if (colloc.source[row] < 0) {
      target = problem.forcing ? problem.forcing(x) : 0.0;
    } else {
      const auto& bc = problem.boundaries[static_cast<std::size_t>(colloc.source[row])];
      target = bc.data ? bc.data(x) : 0.0;
    }
    if (problem.constraint_offset) target -= op.apply(gjet);

    RowEntries& out = rows[row];
    out.rhs = colloc.weights[row] * target;
    out.subdomains = pw.subdomains;
    out.values.assign(pw.subdomains.size() * K, 0.0);
    std::vector<Jet2> phi(d * K);
    std::vector<Jet2> psi(d);
    for (std::size_t c = 0; c < pw.subdomains.size(); ++c) {
      const std::size_t j = pw.subdomains[c];
      for (std::size_t axis = 0; axis < d; ++axis) {
        basis.jets(j, x, axis, std::span<Jet2>(phi.data() + axis * K, K));
      }
      for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t axis = 0; axis < d; ++axis) {
          psi[axis] = cjet[axis] * pw.jets[c * d + axis] * phi[axis * K + k];
        }
        out.values[c * K + k] = colloc.weights[row] * op.apply(psi);
      }
    }
  });

  GlobalSystem sys;
  sys.matrix = gather_blocks(rows, dec.count(), K);
  sys.rhs.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) sys.rhs(static_cast<Eigen::Index>(r)) = rows[r].rhs;
  sys.collocation = colloc;
  sys.features = K;
  sys.dims = d;
  sys.per_dim = dec.per_dim();
  sys.overlap = dec.overlap();
  return sys;
}

GlobalSystem assemble(const ProblemSpec& problem, const Decomposition& dec, const FeatureBasis& basis,
                      std::size_t interior_per_dim) {
  return assemble(problem, dec, basis, collocation(problem, dec, basis.features(), interior_per_dim));
}

Vector EvaluationOperator::evaluate(const Vector& a) const {
  Vector u = matrix.apply(a);
  u += offset;
  return u;
}

EvaluationOperator evaluation_operator(const ProblemSpec& problem, const Decomposition& dec,
                                       const FeatureBasis& basis, std::span<const double> points) {
  check_basis(dec, basis);
  const std::size_t d = dec.dims();
  const std::size_t K = basis.features();
  if (points.size() % d != 0) throw Error(ErrorCode::dimension_mismatch, "point array length");
  const std::size_t n = points.size() / d;

  std::vector<RowEntries> rows(n);
  parallel_for(n, [&](std::size_t p) {
    const auto x = points.subspan(p * d, d);
    const PointWindows pw = point_windows(dec, x);
    const double cval = problem.constraint_multiplier ? problem.constraint_multiplier(x, 0).value : 1.0;
    RowEntries& out = rows[p];
    out.rhs = problem.constraint_offset ? problem.constraint_offset(x, 0).value : 0.0;
    out.subdomains = pw.subdomains;
    out.values.resize(pw.subdomains.size() * K);
    for (std::size_t c = 0; c < pw.subdomains.size(); ++c) {
      basis.values(pw.subdomains[c], x, std::span<double>(out.values.data() + c * K, K));
      const double w = cval * pw.jets[c * d].value;
      for (std::size_t k = 0; k < K; ++k) out.values[c * K + k] *= w;
    }
  });

  EvaluationOperator op;
  op.matrix = gather_blocks(rows, dec.count(), K);
  op.offset.resize(static_cast<Eigen::Index>(n));
  for (std::size_t p = 0; p < n; ++p) op.offset(static_cast<Eigen::Index>(p)) = rows[p].rhs;
  return op;
}

Vector evaluate_solution(const ProblemSpec& problem, const Decomposition& dec, const FeatureBasis& basis,
                         const Vector& a, std::span<const double> points) {
  return evaluation_operator(problem, dec, basis, points).evaluate(a);
}

Jet2 constrained_jet(const ProblemSpec& problem, const Decomposition& dec, const FeatureBasis& basis,
                     const Vector& a, std::span<const double> x, std::size_t axis) {
  check_basis(dec, basis);
  const std::size_t d = dec.dims();
  const std::size_t K = basis.features();
  const PointWindows pw = point_windows(dec, x);
  std::vector<Jet2> phi(K);
  Jet2 u{};
  for (std::size_t c = 0; c < pw.subdomains.size(); ++c) {
    const std::size_t j = pw.subdomains[c];
    basis.jets(j, x, axis, phi);
    Jet2 inner{};
    for (std::size_t k = 0; k < K; ++k) inner += a(static_cast<Eigen::Index>(j * K + k)) * phi[k];
    u += pw.jets[c * d + axis] * inner;
  }
  if (problem.constraint_multiplier) u = problem.constraint_multiplier(x, axis) * u;
  return u;
}

TestSet make_test_set(std::vector<double> points, std::size_t dims, Vector truth) {
  TestSet t;
  t.dims = dims;
  t.points = std::move(points);
  t.truth = std::move(truth);
  if (t.truth.size() == 0 || t.points.size() != t.size() * dims) {
    throw Error(ErrorCode::degenerate_test_set, "test set is empty or inconsistent");
  }
  const double mean = t.truth.mean();
  t.sigma = std::sqrt((t.truth.array() - mean).square().mean());
  if (!(t.sigma > 0.0)) throw Error(ErrorCode::degenerate_test_set, "true values have zero standard deviation");
  return t;
}

TestSet make_test_set(const ProblemSpec& problem, const Decomposition& dec) {
  if (!problem.has_truth()) throw Error(ErrorCode::degenerate_test_set, problem.name + " has no reference solution");
  const std::size_t d = dec.dims();
  const std::vector<std::size_t> counts(d, problem.test_points_per_subdomain * dec.per_dim());
  auto points = lattice(dec.domain(), counts);
  const std::size_t n = points.size() / d;
  Vector truth(static_cast<Eigen::Index>(n));
  for (std::size_t p = 0; p < n; ++p) {
    truth(static_cast<Eigen::Index>(p)) = problem.truth(std::span<const double>(points.data() + p * d, d));
  }
  return make_test_set(std::move(points), d, std::move(truth));
}

double l1_error(const TestSet& test, const Vector& predicted) {
  if (predicted.size() != test.truth.size()) throw Error(ErrorCode::dimension_mismatch, "prediction length");
  if (!(test.sigma > 0.0)) throw Error(ErrorCode::degenerate_test_set, "true values have zero standard deviation");
  return (predicted - test.truth).cwiseAbs().mean() / test.sigma;
}

void export_coo(const GlobalSystem& sys, const std::filesystem::path& stem, std::size_t max_nonzeros) {
  if (sys.matrix.nonzeros() > max_nonzeros) throw Error(ErrorCode::cap_exceeded, "matrix too large to export");
  std::filesystem::path coo = stem;
  coo += ".coo";
  std::filesystem::path rhs = stem;
  rhs += ".rhs";
  std::ofstream m(coo);
  if (!m) throw Error(ErrorCode::io, "cannot write " + coo.string());
  m << std::setprecision(17);
  m << "% " << sys.rows() << ' ' << sys.cols() << ' ' << sys.matrix.nonzeros() << '\n';
  for (const auto& b : sys.matrix.blocks()) {
    for (std::size_t i = 0; i < b.rows.size(); ++i) {
      for (Eigen::Index k = 0; k < b.values.cols(); ++k) {
        m << b.rows[i] << ' ' << b.col_offset + static_cast<std::size_t>(k) << ' '
          << b.values(static_cast<Eigen::Index>(i), k) << '\n';
      }
    }
  }
  std::ofstream h(rhs);
  if (!h) throw Error(ErrorCode::io, "cannot write " + rhs.string());
  h << std::setprecision(17);
  for (Eigen::Index i = 0; i < sys.rhs.size(); ++i) h << sys.rhs(i) << '\n';
}

}  // namespace rfm
