#include "rfm/solvers.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "rfm/error.hpp"

namespace rfm {

LinearOperator make_operator(const BlockMatrix& m) {
  return {m.rows(), m.cols(), [&m](const Vector& x, Vector& y) { m.apply(x, y); },
          [&m](const Vector& r, Vector& z) { m.apply_transpose(r, z); }};
}

LinearOperator make_operator(const DenseMatrix& m) {
  return {static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()),
          [&m](const Vector& x, Vector& y) { y.noalias() = m * x; },
          [&m](const Vector& r, Vector& z) { z.noalias() = m.transpose() * r; }};
}

namespace {

void check(const LinearOperator& a, const Vector& h, const SolveConfig& cfg) {
  if (static_cast<std::size_t>(h.size()) != a.rows) throw Error(ErrorCode::dimension_mismatch, "rhs length");
  if (cfg.max_iters < 1) throw Error(ErrorCode::configuration, "max_iters must be at least 1");
  if (cfg.eval_stride < 1) throw Error(ErrorCode::configuration, "eval_stride must be at least 1");
}

// Shared bookkeeping: residual/error history and best-iterate retention.
class Recorder {
 public:
  Recorder(const LinearOperator& a, const Vector& h, const SolveConfig& cfg, const ErrorCallback& cb, SolveResult& out)
      : a_(a), h_(h), cfg_(cfg), cb_(cb), out_(out), h_norm_(h.norm()) {}

  bool due(std::size_t it) const { return it % cfg_.eval_stride == 0 || it == cfg_.max_iters; }

  /// Records iteration `it`; returns true when the rtol stopping rule fires.
  bool record(std::size_t it, const Vector& x) {
    if (!x.allFinite()) throw Error(ErrorCode::divergence, "non-finite iterate at iteration " + std::to_string(it));
    a_.apply(x, ax_);
    IterationRecord rec;
    rec.iteration = it;
    rec.residual = (ax_ - h_).norm();
    if (cb_) {
      rec.error = cb_(x);
      if (std::isnan(out_.best_error) || rec.error < out_.best_error) {
        out_.best_error = rec.error;
        out_.best_iteration = it;
        out_.best_x = x;
      }
    }
    out_.history.push_back(rec);
    return cfg_.rtol > 0.0 && rec.residual <= cfg_.rtol * h_norm_;
  }

  void finish(std::size_t it, const Vector& x) {
    if (out_.history.empty() || out_.history.back().iteration != it) record(it, x);
    out_.iterations = it;
    out_.x = x;
    if (!cb_) {
      out_.best_x = x;
      out_.best_iteration = it;
    }
  }

 private:
  const LinearOperator& a_;
  const Vector& h_;
  const SolveConfig& cfg_;
  const ErrorCallback& cb_;
  SolveResult& out_;
  double h_norm_;
  Vector ax_;
};

}  // namespace

SolveResult lsqr(const LinearOperator& a, const Vector& h, const SolveConfig& cfg, const ErrorCallback& callback) {
  check(a, h, cfg);
  SolveResult result;
  Recorder rec(a, h, cfg, callback, result);
  const auto n = static_cast<Eigen::Index>(a.cols);
  Vector x = Vector::Zero(n);
  rec.record(0, x);

  Vector u = h;
  double beta = u.norm();
  Vector v(n), w(n), tmp;
  double alpha = 0.0;
  if (beta > 0.0) {
    u /= beta;
    a.apply_transpose(u, v);
    alpha = v.norm();
  } else {
    v.setZero();
  }
  if (alpha > 0.0) v /= alpha;
  w = v;
  double phibar = beta;
  double rhobar = alpha;

  std::size_t it = 0;
  if (alpha == 0.0) {
    result.note = "rhs is orthogonal to the range; zero solution is optimal";
    rec.finish(0, x);
    return result;
  }
  while (it < cfg.max_iters) {
    ++it;
    a.apply(v, tmp);
    u = tmp - alpha * u;
    beta = u.norm();
    if (beta > 0.0) u /= beta;
    a.apply_transpose(u, tmp);
    v = tmp - beta * v;
    alpha = v.norm();
    if (alpha > 0.0) v /= alpha;

    const double rho = std::hypot(rhobar, beta);
    if (rho == 0.0) {
      result.note = "rho vanished at iteration " + std::to_string(it);
      break;
    }
    const double c = rhobar / rho;
    const double s = beta / rho;
    const double theta = s * alpha;
    rhobar = -c * alpha;
    const double phi = c * phibar;
    phibar = s * phibar;
    x += (phi / rho) * w;
    w = v - (theta / rho) * w;

    if (rec.due(it) && rec.record(it, x)) break;
    if (alpha == 0.0 || beta == 0.0) {
      result.note = "exact convergence at iteration " + std::to_string(it);
      break;
    }
  }
  rec.finish(it, x);
  return result;
}

SolveResult cg_normal(const LinearOperator& a, const Vector& h, const SolveConfig& cfg, const ErrorCallback& callback,
                      const Preconditioner& preconditioner) {
  check(a, h, cfg);
  SolveResult result;
  Recorder rec(a, h, cfg, callback, result);
  const auto n = static_cast<Eigen::Index>(a.cols);
  Vector x = Vector::Zero(n);
  rec.record(0, x);

  Vector r, z, q, atq;
  a.apply_transpose(h, r);
  auto precond = [&](const Vector& in, Vector& out) {
    if (preconditioner) {
      preconditioner(in, out);
    } else {
      out = in;
    }
  };
  precond(r, z);
  Vector p = z;
  double rz = r.dot(z);

  std::size_t it = 0;
  if (rz == 0.0) {
    result.note = "normal-equation residual is zero at the start";
    rec.finish(0, x);
    return result;
  }
  while (it < cfg.max_iters) {
    a.apply(p, q);
    const double qq = q.squaredNorm();
    if (!(qq > 0.0) || !(rz > 0.0)) {
      result.breakdown = true;
      result.note = "zero-curvature direction at iteration " + std::to_string(it + 1);
      break;
    }
    ++it;
    const double step = rz / qq;
    x += step * p;
    a.apply_transpose(q, atq);
    r -= step * atq;
    precond(r, z);
    const double rz_next = r.dot(z);
    p = z + (rz_next / rz) * p;
    rz = rz_next;

    if (rec.due(it) && rec.record(it, x)) break;
    if (rz == 0.0) {
      result.note = "exact convergence at iteration " + std::to_string(it);
      break;
    }
  }
  rec.finish(it, x);
  return result;
}

void AdditiveSchwarz::apply(const Vector& r, Vector& z) const {
  if (static_cast<std::size_t>(r.size()) != cols) throw Error(ErrorCode::dimension_mismatch, "preconditioner input");
  z.setZero(static_cast<Eigen::Index>(cols));
  for (std::size_t j = 0; j < factors.size(); ++j) {
    const DenseMatrix& b = factors[j];
    const auto off = static_cast<Eigen::Index>(offsets[j]);
    const Vector t = b.transpose() * r.segment(off, b.rows());
    z.segment(off, b.rows()).noalias() = b * t;
  }
}

Preconditioner AdditiveSchwarz::as_function() const {
  return [this](const Vector& r, Vector& z) { apply(r, z); };
}

BlockMatrix AdditiveSchwarz::scaled_matrix(const BlockMatrix& m) const {
  std::vector<MatrixBlock> blocks(m.blocks().size());
  std::size_t col = 0;
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    blocks[j].rows = m.block(j).rows;
    blocks[j].col_offset = col;
    blocks[j].values = m.block(j).values * factors[j];
    col += static_cast<std::size_t>(factors[j].cols());
  }
  return BlockMatrix(m.rows(), col, std::move(blocks));
}

AdditiveSchwarz as_preconditioner(const GlobalSystem& sys) {
  AdditiveSchwarz as;
  as.cols = sys.cols();
  const auto& blocks = sys.matrix.blocks();
  as.factors.resize(blocks.size());
  as.offsets.resize(blocks.size());
  std::vector<char> truncated(blocks.size(), 0);
  parallel_for(blocks.size(), [&](std::size_t j) {
    const DenseMatrix gram = blocks[j].values.transpose() * blocks[j].values;
    Eigen::SelfAdjointEigenSolver<DenseMatrix> eig(gram);
    const Vector& lambda = eig.eigenvalues();  // ascending
    const double top = lambda.size() > 0 ? lambda(lambda.size() - 1) : 0.0;
    Eigen::Index first = 0;
    while (first < lambda.size() && !(lambda(first) > AdditiveSchwarz::kCutoff * top)) ++first;
    truncated[j] = first > 0;
    const Eigen::Index keep = lambda.size() - first;
    DenseMatrix b = eig.eigenvectors().rightCols(keep);
    for (Eigen::Index c = 0; c < keep; ++c) b.col(c) /= std::sqrt(lambda(first + c));
    as.factors[j] = std::move(b);
    as.offsets[j] = blocks[j].col_offset;
  });
  for (const char t : truncated) as.truncated_blocks += t ? 1 : 0;
  return as;
}

}  // namespace rfm
