#pragma once

#include <vector>

#include "mumimo/channel.hpp"
#include "mumimo/numerics.hpp"

namespace mumimo {

enum class DetectionKind { Conjugate, Mmse };

inline const char* to_string(DetectionKind k) { return k == DetectionKind::Conjugate ? "conjugate" : "mmse"; }

/// Block-diagonal receive filters; per_user[k] is L_k x R_k.
struct DetectionSet {
  std::vector<ComplexMatrix> per_user;
  DetectionKind kind = DetectionKind::Mmse;

  const ComplexMatrix& g(int k) const { return per_user[static_cast<std::size_t>(k)]; }

  /// Assembled L x R block-diagonal matrix.
  ComplexMatrix assembled() const {
    Index rows = 0;
    Index cols = 0;
    for (const auto& gk : per_user) {
      rows += gk.rows();
      cols += gk.cols();
    }
    ComplexMatrix out = ComplexMatrix::Zero(rows, cols);
    Index r = 0;
    Index c = 0;
    for (const auto& gk : per_user) {
      out.block(r, c, gk.rows(), gk.cols()) = gk;
      r += gk.rows();
      c += gk.cols();
    }
    return out;
  }
};

/// G_k = S_k⁻¹ U_k. Idealized: reduces user k's channel to its V_k rows.
inline DetectionSet conjugate_detection(const ChannelDecomposition& decomp) {
  DetectionSet out;
  out.kind = DetectionKind::Conjugate;
  for (const auto& uf : decomp.users) {
    if ((uf.s.array() <= 0.0).any()) throw Error(ErrorKind::RankDeficient, "conjugate detection: zero singular value");
    out.per_user.push_back(uf.s.array().inverse().matrix().asDiagonal() * uf.u);
  }
  return out;
}

/// G_k = (H_k W_k)ᴴ (H_k W_k (H_k W_k)ᴴ + σ² I)⁻¹ with W_k the user's
/// column block of the precoder.
inline DetectionSet mmse_detection(const ChannelSet& channels, const ComplexMatrix& w, double sigma2) {
  if (!(sigma2 > 0.0)) throw Error(ErrorKind::Config, "mmse detection: noise variance must be positive");
  if (w.rows() != channels.dims.tx_antennas || w.cols() != channels.dims.total_layers()) {
    throw Error(ErrorKind::Dimension, "mmse detection: precoder shape does not match dims");
  }
  DetectionSet out;
  out.kind = DetectionKind::Mmse;
  for (int k = 0; k < channels.dims.num_users; ++k) {
    const ComplexMatrix b = channels.h(k) * w.middleCols(channels.dims.layer_offset(k), channels.dims.layers_of(k));
    ComplexMatrix m = b * b.adjoint();
    m = 0.5 * (m + m.adjoint());
    m.diagonal().array() += sigma2;
    // G = Bᴴ M⁻¹ = (M⁻¹ B)ᴴ since M is Hermitian
    out.per_user.push_back(numerics::solve_hpd(m, b).adjoint());
  }
  return out;
}

}  // namespace mumimo
