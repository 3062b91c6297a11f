#pragma once

// Reference implementations used only by tests. They avoid the library's
// code paths: SVD via Eigen's BDCSVD, inverses via full-pivot LU, SINR via
// explicit loops over the full effective matrix.

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "mumimo/mumimo.hpp"

namespace oracle {

using mumimo::ComplexMatrix;
using mumimo::Index;
using mumimo::RealVector;
using Complex = std::complex<double>;

inline ComplexMatrix random_matrix(std::mt19937_64& rng, Index rows, Index cols) {
  std::normal_distribution<double> n(0.0, std::sqrt(0.5));
  ComplexMatrix m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) m(r, c) = Complex(n(rng), n(rng));
  }
  return m;
}

inline double rel(const ComplexMatrix& a, const ComplexMatrix& b) { return (a - b).norm() / b.norm(); }

inline ComplexMatrix inverse(const ComplexMatrix& a) { return a.fullPivLu().inverse(); }

inline Eigen::VectorXd singular_values(const ComplexMatrix& m) {
  Eigen::BDCSVD<ComplexMatrix> svd(m);
  return svd.singularValues();
}

/// Best rank-k approximation from a full SVD.
inline ComplexMatrix truncate(const ComplexMatrix& m, Index k) {
  Eigen::BDCSVD<ComplexMatrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  return svd.matrixU().leftCols(k) * s.head(k).cast<Complex>().asDiagonal() * svd.matrixV().leftCols(k).adjoint();
}

/// Projector onto the row space spanned by the rows of v.
inline ComplexMatrix row_projector(const ComplexMatrix& v) { return v.adjoint() * inverse(v * v.adjoint()) * v; }

inline ComplexMatrix zf(const ComplexMatrix& b) { return b.adjoint() * inverse(b * b.adjoint()); }

inline ComplexMatrix rzf(const ComplexMatrix& b, const RealVector& reg) {
  ComplexMatrix a = b * b.adjoint();
  for (Index i = 0; i < a.rows(); ++i) a(i, i) += reg(i);
  return b.adjoint() * inverse(a);
}

inline ComplexMatrix per_antenna(const ComplexMatrix& w, double power) {
  double mx = 0.0;
  for (Index t = 0; t < w.rows(); ++t) {
    double row = 0.0;
    for (Index l = 0; l < w.cols(); ++l) row += std::norm(w(t, l));
    mx = std::max(mx, row);
  }
  return w * std::sqrt(power / static_cast<double>(w.rows()) / mx);
}

inline std::vector<ComplexMatrix> mmse(const mumimo::ChannelSet& ch, const ComplexMatrix& w, double sigma2) {
  std::vector<ComplexMatrix> g;
  for (int k = 0; k < ch.dims.num_users; ++k) {
    const ComplexMatrix b = ch.h(k) * w.middleCols(ch.dims.layer_offset(k), ch.dims.layers_of(k));
    const ComplexMatrix m =
        b * b.adjoint() + sigma2 * ComplexMatrix::Identity(b.rows(), b.rows());
    g.push_back(b.adjoint() * inverse(m));
  }
  return g;
}

/// Per-layer SINRs by explicit summation.
inline std::vector<double> layer_sinrs(const mumimo::ChannelSet& ch, const ComplexMatrix& w,
                                       const std::vector<ComplexMatrix>& g, double sigma2) {
  std::vector<double> out;
  for (int k = 0; k < ch.dims.num_users; ++k) {
    const ComplexMatrix e = g[static_cast<std::size_t>(k)] * ch.h(k) * w;
    for (int i = 0; i < ch.dims.layers_of(k); ++i) {
      const int l = ch.dims.layer_offset(k) + i;
      double interf = 0.0;
      for (Index j = 0; j < e.cols(); ++j) {
        if (j != l) interf += std::norm(e(i, j));
      }
      double gnorm = 0.0;
      for (Index r = 0; r < g[static_cast<std::size_t>(k)].cols(); ++r) gnorm += std::norm(g[static_cast<std::size_t>(k)](i, r));
      out.push_back(std::norm(e(i, l)) / (interf + sigma2 * gnorm));
    }
  }
  return out;
}

struct SeOut {
  double sum = 0.0;
  double min = 0.0;
  std::vector<double> per_user;
};

inline SeOut spectral_efficiency(const mumimo::ChannelSet& ch, const std::vector<double>& sinr) {
  SeOut out;
  out.min = 1e300;
  for (int k = 0; k < ch.dims.num_users; ++k) {
    double prod = 1.0;
    const int lk = ch.dims.layers_of(k);
    for (int i = 0; i < lk; ++i) prod *= sinr[static_cast<std::size_t>(ch.dims.layer_offset(k) + i)];
    const double se = lk * std::log2(1.0 + std::pow(prod, 1.0 / lk));
    out.per_user.push_back(se);
    out.sum += se;
    out.min = std::min(out.min, se);
  }
  return out;
}

/// Sum-SE of Vᴴ(VVᴴ+diag(reg))⁻¹ under per-antenna normalization and MMSE detection.
inline double sum_se_of_reg(const mumimo::ChannelSet& ch, const ComplexMatrix& v, const RealVector& reg, double sigma2,
                            double power) {
  const ComplexMatrix w = per_antenna(rzf(v, reg), power);
  return spectral_efficiency(ch, layer_sinrs(ch, w, mmse(ch, w, sigma2), sigma2)).sum;
}

}  // namespace oracle
