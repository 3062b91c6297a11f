#pragma once

// Dense complex linear algebra used throughout the toolkit: a one-sided
// Jacobi SVD with a fixed phase convention, Hermitian positive definite
// solves and seeded circular complex Gaussian sampling.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "mumimo/error.hpp"

namespace mumimo {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Thin SVD in the m = uᴴ·diag(s)·v convention: u and v hold singular
/// vectors as rows, s is sorted descending.
struct SvdResult {
  ComplexMatrix u;
  RealVector s;
  ComplexMatrix v;

  ComplexMatrix reconstruct() const { return u.adjoint() * s.asDiagonal() * v; }
};

namespace numerics {

inline constexpr double kSvdTolerance = 1e-12;
inline constexpr double kRankThreshold = 1e-12;
inline constexpr double kHermitianTolerance = 1e-10;

inline double relative_error(const ComplexMatrix& a, const ComplexMatrix& b) {
  const double denom = b.norm();
  return denom > 0.0 ? (a - b).norm() / denom : (a - b).norm();
}

inline void require_finite(const ComplexMatrix& m, const char* what) {
  if (!m.allFinite()) throw Error(ErrorKind::NumericalFailure, std::string(what) + " has non-finite entries");
}

namespace detail {

using RowMajorMatrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct WideSvd {
  RowMajorMatrix u;
  RealVector s;
  RowMajorMatrix v;
};

// Hestenes one-sided Jacobi on the rows of a matrix with rows <= cols.
// Rotations applied from the left until all row pairs are orthogonal; the
// accumulated unitary is the left factor.
inline WideSvd jacobi_wide(const ComplexMatrix& m) {
  const Index rows = m.rows();
  const Index cols = m.cols();
  RowMajorMatrix a = m;
  RowMajorMatrix acc = RowMajorMatrix::Identity(rows, rows);

  const Index max_sweeps = 100 * std::min(rows, cols);
  bool converged = rows < 2;
  for (Index sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    bool rotated = false;
    for (Index p = 0; p + 1 < rows; ++p) {
      for (Index q = p + 1; q < rows; ++q) {
        const double alpha = a.row(p).squaredNorm();
        const double beta = a.row(q).squaredNorm();
        // conj-linear in the first argument: sum_t a_pt * conj(a_qt)
        const Complex gamma = a.row(q).dot(a.row(p));
        const double g = std::abs(gamma);
        if (alpha == 0.0 || beta == 0.0 || g <= kSvdTolerance * std::sqrt(alpha * beta)) continue;
        rotated = true;

        const Complex phase = gamma / g;
        const double zeta = (beta - alpha) / (2.0 * g);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;

        Eigen::RowVectorXcd ap = a.row(p);
        Eigen::RowVectorXcd bq = phase * a.row(q);
        a.row(p) = c * ap - s * bq;
        a.row(q) = s * ap + c * bq;

        Eigen::RowVectorXcd up = acc.row(p);
        Eigen::RowVectorXcd uq = phase * acc.row(q);
        acc.row(p) = c * up - s * uq;
        acc.row(q) = s * up + c * uq;
      }
    }
    converged = !rotated;
  }
  if (!converged) throw Error(ErrorKind::NumericalFailure, "Jacobi SVD did not converge");

  RealVector norms(rows);
  for (Index i = 0; i < rows; ++i) norms(i) = a.row(i).norm();

  // Stable: equal singular values keep the orthogonalized row order.
  std::vector<Index> order(static_cast<std::size_t>(rows));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index x, Index y) { return norms(x) > norms(y); });

  WideSvd out;
  out.u.resize(rows, rows);
  out.s.resize(rows);
  out.v.resize(rows, cols);
  const double s_max = rows > 0 ? norms(order.front()) : 0.0;
  for (Index i = 0; i < rows; ++i) {
    const Index src = order[static_cast<std::size_t>(i)];
    out.s(i) = norms(src);
    out.u.row(i) = acc.row(src);
    if (norms(src) > 1e-15 * s_max && norms(src) > 0.0) {
      out.v.row(i) = a.row(src) / norms(src);
    } else {
      out.v.row(i).setZero();
    }
  }

  // Complete the basis for numerically null rows with Gram-Schmidt over e_j.
  Index next_unit = 0;
  for (Index i = 0; i < rows; ++i) {
    if (out.v.row(i).squaredNorm() > 0.0) continue;
    while (next_unit < cols) {
      Eigen::RowVectorXcd cand = Eigen::RowVectorXcd::Zero(cols);
      cand(next_unit++) = 1.0;
      for (Index j = 0; j < rows; ++j) {
        if (j == i || out.v.row(j).squaredNorm() == 0.0) continue;
        cand -= out.v.row(j).dot(cand) * out.v.row(j);
      }
      const double n = cand.norm();
      if (n > 1e-6) {
        out.v.row(i) = cand / n;
        break;
      }
    }
  }
  return out;
}

}  // namespace detail

/// Top-`keep` singular triplets of m. Each pair is rotated so the largest
/// magnitude entry of its v row is real and positive.
inline SvdResult reduced_svd(const ComplexMatrix& m, Index keep) {
  const Index p = std::min(m.rows(), m.cols());
  if (keep < 1 || keep > p) {
    throw Error(ErrorKind::Dimension, "reduced_svd: keep=" + std::to_string(keep) + " outside [1, " +
                                          std::to_string(p) + "]");
  }
  require_finite(m, "reduced_svd input");

  SvdResult full;
  if (m.rows() <= m.cols()) {
    auto w = detail::jacobi_wide(m);
    full.u = w.u;
    full.s = w.s;
    full.v = w.v;
  } else {
    // mᴴ = u'ᴴ S v'  =>  m = v'ᴴ S u'
    auto w = detail::jacobi_wide(m.adjoint());
    full.u = w.v;
    full.s = w.s;
    full.v = w.u;
  }

  SvdResult out;
  out.u = full.u.topRows(keep);
  out.s = full.s.head(keep);
  out.v = full.v.topRows(keep);
  for (Index i = 0; i < keep; ++i) {
    Index arg = 0;
    double best = -1.0;
    for (Index j = 0; j < out.v.cols(); ++j) {
      const double mag = std::abs(out.v(i, j));
      if (mag > best) {
        best = mag;
        arg = j;
      }
    }
    if (best <= 0.0) continue;
    const Complex rot = std::conj(out.v(i, arg)) / best;
    out.v.row(i) *= rot;
    out.u.row(i) *= rot;
  }
  return out;
}

/// Solves a·x = b for Hermitian positive definite a via Cholesky.
inline ComplexMatrix solve_hpd(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.rows() != a.cols()) throw Error(ErrorKind::Dimension, "solve_hpd: matrix is not square");
  if (a.rows() != b.rows()) throw Error(ErrorKind::Dimension, "solve_hpd: right-hand side has wrong row count");
  require_finite(a, "solve_hpd matrix");
  require_finite(b, "solve_hpd right-hand side");
  const double scale = a.norm();
  if ((a - a.adjoint()).norm() > kHermitianTolerance * scale) {
    throw Error(ErrorKind::NotHpd, "solve_hpd: matrix is not Hermitian");
  }
  Eigen::LLT<ComplexMatrix> llt(a);
  if (llt.info() != Eigen::Success) throw Error(ErrorKind::NotHpd, "solve_hpd: non-positive pivot in Cholesky");
  return llt.solve(b);
}

/// i.i.d. CN(0, variance). Real and imaginary parts each carry variance/2.
/// Entries are drawn in row-major order.
template <class Engine>
ComplexMatrix complex_gaussian(Engine& engine, Index rows, Index cols, double variance) {
  if (!(variance > 0.0)) throw Error(ErrorKind::Config, "complex_gaussian: variance must be positive");
  std::normal_distribution<double> normal(0.0, std::sqrt(variance / 2.0));
  ComplexMatrix out(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      const double re = normal(engine);
      const double im = normal(engine);
      out(r, c) = Complex(re, im);
    }
  }
  return out;
}

inline ComplexMatrix complex_gaussian(std::uint64_t seed, Index rows, Index cols, double variance) {
  std::mt19937_64 engine(seed);
  return complex_gaussian(engine, rows, cols, variance);
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

}  // namespace numerics
}  // namespace mumimo
