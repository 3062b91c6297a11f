#pragma once

// Linear precoders on the stacked decomposition H = Uᴴ S V. The raw_*
// functions return the un-normalized ansatz W⁰; the named builders scale it
// to the power constraint.

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

#include "mumimo/channel.hpp"
#include "mumimo/numerics.hpp"

namespace mumimo {

enum class Method { MRT, ZF, RZF, WRZF, ARZF, OPT };
enum class Basis { V, F };
enum class NormMode { TotalPower, PerAntenna };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::MRT: return "MRT";
    case Method::ZF: return "ZF";
    case Method::RZF: return "RZF";
    case Method::WRZF: return "WRZF";
    case Method::ARZF: return "ARZF";
    case Method::OPT: return "OPT";
  }
  return "?";
}
inline const char* to_string(Basis b) { return b == Basis::V ? "V" : "F"; }
inline const char* to_string(NormMode n) { return n == NormMode::TotalPower ? "total_power" : "per_antenna"; }

struct Precoder {
  ComplexMatrix w;  // T x L
  Method method = Method::MRT;
  Basis basis = Basis::V;
  RealVector regularization;  // diagonal of R, length L
  NormMode norm_mode = NormMode::PerAntenna;
  double mu = 1.0;

  ComplexMatrix raw() const { return w / mu; }
};

struct Normalized {
  ComplexMatrix w;
  double mu;
};

namespace precoding {

inline constexpr double kGramThreshold = 1e-12;

/// Index of the antenna row with the largest norm; lowest index on ties.
inline Index max_power_row(const ComplexMatrix& w) {
  Index best = 0;
  double best_sq = -1.0;
  for (Index t = 0; t < w.rows(); ++t) {
    const double sq = w.row(t).squaredNorm();
    if (sq > best_sq) {
      best_sq = sq;
      best = t;
    }
  }
  return best;
}

inline Normalized normalize(const ComplexMatrix& raw, double power, NormMode mode) {
  if (!(power > 0.0)) throw Error(ErrorKind::Config, "normalize: power must be positive");
  numerics::require_finite(raw, "precoder");
  double mu = 0.0;
  if (mode == NormMode::TotalPower) {
    const double n = raw.norm();
    if (n == 0.0) throw Error(ErrorKind::ZeroMatrix, "normalize: zero precoder");
    mu = std::sqrt(power) / n;
  } else {
    const double n = raw.row(max_power_row(raw)).norm();
    if (n == 0.0) throw Error(ErrorKind::ZeroMatrix, "normalize: zero precoder");
    mu = std::sqrt(power / static_cast<double>(raw.rows())) / n;
  }
  return Normalized{mu * raw, mu};
}

inline ComplexMatrix basis_matrix(const ChannelDecomposition& decomp, Basis basis) {
  return basis == Basis::V ? decomp.v : decomp.f();
}

/// Throws unless the Gram matrix B·Bᴴ has its smallest eigenvalue above
/// kGramThreshold times its largest.
inline void require_invertible_gram(const ComplexMatrix& gram) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(gram, Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  if (eig.info() != Eigen::Success || !(ev.maxCoeff() > 0.0) || ev.minCoeff() <= kGramThreshold * ev.maxCoeff()) {
    throw Error(ErrorKind::SingularGram, "Gram matrix is singular or ill-conditioned; use a regularized precoder");
  }
}

/// Bᴴ(BBᴴ + diag(reg))⁻¹ computed as (A⁻¹B)ᴴ.
inline ComplexMatrix regularized_inverse(const ComplexMatrix& b, const RealVector& reg) {
  ComplexMatrix a = b * b.adjoint();
  a = 0.5 * (a + a.adjoint());
  a.diagonal() += reg.cast<Complex>();
  return numerics::solve_hpd(a, b).adjoint();
}

inline ComplexMatrix raw_mrt(const ChannelDecomposition& decomp) { return decomp.v.adjoint(); }

inline ComplexMatrix raw_zf(const ChannelDecomposition& decomp, Basis basis) {
  const ComplexMatrix b = basis_matrix(decomp, basis);
  require_invertible_gram(b * b.adjoint());
  return regularized_inverse(b, RealVector::Zero(b.rows()));
}

inline ComplexMatrix raw_rzf(const ChannelDecomposition& decomp, Basis basis, double lambda) {
  if (!(lambda >= 0.0)) throw Error(ErrorKind::Config, "rzf: lambda must be nonnegative");
  if (lambda == 0.0) return raw_zf(decomp, basis);
  const ComplexMatrix b = basis_matrix(decomp, basis);
  return regularized_inverse(b, RealVector::Constant(b.rows(), lambda));
}

/// Vᴴ(VVᴴ + diag(reg))⁻¹.
inline ComplexMatrix raw_parametric(const ChannelDecomposition& decomp, const RealVector& reg) {
  if (reg.size() != decomp.v.rows()) throw Error(ErrorKind::Dimension, "regularization length must equal L");
  if ((reg.array() < 0.0).any() || !reg.allFinite()) {
    throw Error(ErrorKind::Config, "regularization must be finite and nonnegative");
  }
  return regularized_inverse(decomp.v, reg);
}

/// λ·S⁻² diagonal.
inline RealVector arzf_regularization(const ChannelDecomposition& decomp, double lambda) {
  if ((decomp.s.array() <= 0.0).any()) throw Error(ErrorKind::RankDeficient, "arzf: zero singular value");
  return lambda * decomp.s.array().square().inverse().matrix();
}

inline ComplexMatrix raw_arzf(const ChannelDecomposition& decomp, double lambda) {
  return raw_parametric(decomp, arzf_regularization(decomp, lambda));
}

/// λ = Lσ²/P, shared by RZF and ARZF.
inline double default_lambda(const ChannelDecomposition& decomp, double sigma2, double power) {
  return decomp.total_layers() * sigma2 / power;
}

/// λ = (σ²/P)·tr(S⁻²).
inline double wrzf_lambda(const ChannelDecomposition& decomp, double sigma2, double power) {
  if ((decomp.s.array() <= 0.0).any()) throw Error(ErrorKind::RankDeficient, "wrzf: zero singular value");
  return sigma2 / power * decomp.s.array().square().inverse().sum();
}

inline Precoder finish(ComplexMatrix raw, Method method, Basis basis, RealVector reg, double power, NormMode mode) {
  auto n = normalize(raw, power, mode);
  return Precoder{std::move(n.w), method, basis, std::move(reg), mode, n.mu};
}

}  // namespace precoding

inline Precoder mrt(const ChannelDecomposition& decomp, double power, NormMode mode = NormMode::PerAntenna) {
  return precoding::finish(precoding::raw_mrt(decomp), Method::MRT, Basis::V,
                           RealVector::Zero(decomp.total_layers()), power, mode);
}

inline Precoder zf(const ChannelDecomposition& decomp, Basis basis, double power,
                   NormMode mode = NormMode::PerAntenna) {
  return precoding::finish(precoding::raw_zf(decomp, basis), Method::ZF, basis,
                           RealVector::Zero(decomp.total_layers()), power, mode);
}

inline Precoder rzf(const ChannelDecomposition& decomp, Basis basis, double lambda, double power,
                    NormMode mode = NormMode::PerAntenna) {
  return precoding::finish(precoding::raw_rzf(decomp, basis, lambda), Method::RZF, basis,
                           RealVector::Constant(decomp.total_layers(), lambda), power, mode);
}

inline Precoder wrzf(const ChannelDecomposition& decomp, double sigma2, double power,
                     NormMode mode = NormMode::PerAntenna) {
  const double lambda = precoding::wrzf_lambda(decomp, sigma2, power);
  auto p = rzf(decomp, Basis::V, lambda, power, mode);
  p.method = Method::WRZF;
  return p;
}

inline Precoder arzf(const ChannelDecomposition& decomp, double sigma2, double power,
                     NormMode mode = NormMode::PerAntenna) {
  RealVector reg = precoding::arzf_regularization(decomp, precoding::default_lambda(decomp, sigma2, power));
  ComplexMatrix raw = precoding::raw_parametric(decomp, reg);
  return precoding::finish(std::move(raw), Method::ARZF, Basis::V, std::move(reg), power, mode);
}

inline Precoder parametric_rzf(const ChannelDecomposition& decomp, const RealVector& reg, double power,
                               NormMode mode = NormMode::PerAntenna) {
  return precoding::finish(precoding::raw_parametric(decomp, reg), Method::OPT, Basis::V, reg, power, mode);
}

}  // namespace mumimo
