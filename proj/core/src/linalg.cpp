#include "rfm/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "rfm/error.hpp"

namespace rfm {

void require_finite(const DenseMatrix& a, const char* what) {
  if (!a.allFinite()) {
    throw Error(ErrorCode::invalid_input, std::string(what) + " has non-finite entries");
  }
}

PivotedQR qr_column_pivot(const DenseMatrix& a, double sigma_rel) {
  if (a.cols() < 1 || a.rows() < 1) {
    throw Error(ErrorCode::invalid_input, "qr_column_pivot needs a non-empty matrix");
  }
  if (!(sigma_rel >= 0.0) || !std::isfinite(sigma_rel)) {
    throw Error(ErrorCode::invalid_input, "sigma_rel must be finite and >= 0");
  }
  require_finite(a, "qr_column_pivot input");

  const Eigen::Index m = a.rows();
  const Eigen::Index n = a.cols();
  const Eigen::Index steps = std::min(m, n);

  DenseMatrix work = a;
  std::vector<std::size_t> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), std::size_t{0});

  // Householder vectors, stored with v(0) = 1 implicitly scaled by tau.
  std::vector<Vector> reflectors;
  std::vector<double> taus;
  std::vector<double> diag;
  reflectors.reserve(static_cast<std::size_t>(steps));

  double leading = 0.0;
  Eigen::Index rank = 0;
  for (Eigen::Index t = 0; t < steps; ++t) {
    // Residual norms are recomputed each step; downdating is not worth the
    // cancellation hazard at the block sizes used here.
    Eigen::Index pivot = t;
    double best = -1.0;
    for (Eigen::Index j = t; j < n; ++j) {
      const double norm = work.col(j).tail(m - t).norm();
      if (norm > best) {
        best = norm;
        pivot = j;
      }
    }
    if (t == 0) {
      leading = best;
      if (leading == 0.0) break;
    }
    if (best < sigma_rel * leading) break;

    if (pivot != t) {
      work.col(t).swap(work.col(pivot));
      std::swap(perm[static_cast<std::size_t>(t)], perm[static_cast<std::size_t>(pivot)]);
    }

    auto x = work.col(t).tail(m - t);
    const double alpha = x(0) >= 0.0 ? -best : best;
    Vector v = x;
    v(0) -= alpha;
    const double vnorm2 = v.squaredNorm();
    double tau = 0.0;
    if (vnorm2 > 0.0) {
      tau = 2.0 / vnorm2;
      for (Eigen::Index j = t + 1; j < n; ++j) {
        auto col = work.col(j).tail(m - t);
        const double s = tau * v.dot(col);
        col.noalias() -= s * v;
      }
    }
    x.setZero();
    x(0) = alpha;
    reflectors.push_back(std::move(v));
    taus.push_back(tau);
    diag.push_back(alpha);
    ++rank;
  }

  PivotedQR out;
  out.kept.assign(perm.begin(), perm.begin() + rank);
  out.dropped.assign(perm.begin() + rank, perm.end());
  out.q = DenseMatrix::Zero(m, rank);
  out.r_factor = DenseMatrix::Zero(rank, rank);
  if (rank == 0) return out;

  for (Eigen::Index i = 0; i < rank; ++i) {
    for (Eigen::Index j = i; j < rank; ++j) out.r_factor(i, j) = work(i, j);
  }

  // q = H_0 H_1 ... H_{r-1} [I_r; 0], applied right to left.
  for (Eigen::Index i = 0; i < rank; ++i) out.q(i, i) = 1.0;
  for (Eigen::Index t = rank - 1; t >= 0; --t) {
    const Vector& v = reflectors[static_cast<std::size_t>(t)];
    const double tau = taus[static_cast<std::size_t>(t)];
    if (tau == 0.0) continue;
    for (Eigen::Index j = t; j < rank; ++j) {
      auto col = out.q.col(j).tail(m - t);
      const double s = tau * v.dot(col);
      col.noalias() -= s * v;
    }
  }

  for (Eigen::Index i = 0; i < rank; ++i) {
    if (out.r_factor(i, i) < 0.0) {
      out.r_factor.row(i) *= -1.0;
      out.q.col(i) *= -1.0;
    }
  }
  return out;
}

void back_substitute_in_place(const DenseMatrix& r, Eigen::Ref<Vector> y) {
  if (r.rows() != r.cols() || r.rows() != y.size()) {
    throw Error(ErrorCode::dimension_mismatch, "back_substitute needs square r matching y");
  }
  const Eigen::Index n = r.rows();
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    const double d = r(i, i);
    if (d == 0.0) {
      throw Error(ErrorCode::singular_factor, "zero diagonal at row " + std::to_string(i));
    }
    double s = y(i);
    for (Eigen::Index j = i + 1; j < n; ++j) s -= r(i, j) * y(j);
    y(i) = s / d;
  }
}

Vector back_substitute(const DenseMatrix& r, const Vector& y) {
  Vector x = y;
  back_substitute_in_place(r, x);
  return x;
}

std::vector<double> singular_values(const DenseMatrix& a, std::size_t cap) {
  if (static_cast<std::size_t>(a.rows()) > cap || static_cast<std::size_t>(a.cols()) > cap) {
    throw Error(ErrorCode::cap_exceeded,
                std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " exceeds SVD cap " +
                    std::to_string(cap));
  }
  require_finite(a, "singular_values input");
  const auto k = static_cast<std::size_t>(std::min(a.rows(), a.cols()));
  std::vector<double> s(k);
  if (k == 0) return s;

  // Divide-and-conquer SVD from Eigen. The OpenBLAS dgesdd/dgesvd shipped with
  // some distributions returns wrong small singular values on AVX-512 kernels,
  // so the condition numbers here do not go through LAPACK.
  Eigen::BDCSVD<DenseMatrix> svd(a);
  const Vector& values = svd.singularValues();
  for (std::size_t i = 0; i < k; ++i) s[i] = values(static_cast<Eigen::Index>(i));
  return s;
}

double spectral_norm(const DenseMatrix& a) {
  if (a.size() == 0) return 0.0;
  return singular_values(a).front();
}

DenseMatrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, RandomSource& rng) {
  DenseMatrix g(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) g(i, j) = rng.normal();
  return g;
}

DenseMatrix haar_orthogonal(std::size_t n, RandomSource& rng) {
  const auto size = static_cast<Eigen::Index>(n);
  const DenseMatrix x = gaussian_matrix(size, size, rng);
  Eigen::HouseholderQR<DenseMatrix> qr(x);
  DenseMatrix q = qr.householderQ();
  const DenseMatrix& packed = qr.matrixQR();
  for (Eigen::Index i = 0; i < size; ++i) {
    if (packed(i, i) < 0.0) q.col(i) *= -1.0;
  }
  return q;
}

double orthonormality_error(const DenseMatrix& q) {
  if (q.cols() == 0) return 0.0;
  const DenseMatrix gram = q.transpose() * q;
  return (gram - DenseMatrix::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
}

}  // namespace rfm
