#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "mumimo/channel.hpp"
#include "mumimo/detection.hpp"
#include "mumimo/numerics.hpp"
#include "mumimo/precoding.hpp"

namespace mumimo {

struct MetricsReport {
  std::vector<double> per_layer_sinr;
  std::vector<double> per_user_eff_sinr;
  std::vector<double> per_user_se;
  double sum_se = 0.0;
  double min_se = 0.0;
  std::vector<double> susinr_per_user;
  double av_susinr = 0.0;
  DetectionKind detection_kind = DetectionKind::Mmse;
};

struct AvSusinr {
  std::vector<double> per_user;
  double average = 0.0;
};

namespace metrics {

namespace detail {

inline double leakage_ratio(const Eigen::RowVectorXcd& a, int layer, double noise) {
  double interference = 0.0;
  for (Index i = 0; i < a.size(); ++i) {
    if (i != layer) interference += std::norm(a(i));
  }
  return std::norm(a(layer)) / (interference + noise);
}

}  // namespace detail

/// SINR of global layer l (zero-based): useful power over the leakage from
/// every other layer plus detected noise.
inline double layer_sinr(const ChannelSet& channels, const ComplexMatrix& w, const DetectionSet& detection,
                         double sigma2, int layer) {
  const int total = channels.dims.total_layers();
  if (layer < 0 || layer >= total) throw Error(ErrorKind::Dimension, "layer index out of range");
  int k = 0;
  while (layer >= channels.dims.layer_offset(k) + channels.dims.layers_of(k)) ++k;
  const auto g = detection.g(k).row(layer - channels.dims.layer_offset(k));
  const Eigen::RowVectorXcd a = g * channels.h(k) * w;
  return detail::leakage_ratio(a, layer, sigma2 * g.squaredNorm());
}

/// Closed form under conjugate detection: |v_l w_l|² / (Σ_{i≠l}|v_l w_i|² + σ²/s_l²).
inline double layer_sinr_conjugate(const ChannelDecomposition& decomp, const ComplexMatrix& w, double sigma2,
                                   int layer) {
  const Eigen::RowVectorXcd a = decomp.v.row(layer) * w;
  const double s = decomp.s(layer);
  return detail::leakage_ratio(a, layer, sigma2 / (s * s));
}

/// Geometric mean of per-layer SINRs, in the log domain.
inline double effective_sinr(std::span<const double> per_layer) {
  if (per_layer.empty()) throw Error(ErrorKind::Dimension, "effective_sinr: no layers");
  double acc = 0.0;
  for (double x : per_layer) {
    if (!(x > 0.0)) throw Error(ErrorKind::ZeroSinr, "effective_sinr: non-positive layer SINR");
    acc += std::log(x);
  }
  return std::exp(acc / static_cast<double>(per_layer.size()));
}

/// L_k·log₂(1 + SINR_eff) with SINR in linear units.
inline double user_se(double eff_sinr, int layers) {
  if (!(eff_sinr >= 0.0)) throw Error(ErrorKind::Config, "user_se: negative SINR");
  return layers * std::log2(1.0 + eff_sinr);
}

inline AvSusinr av_susinr(const ChannelDecomposition& decomp, double sigma2, double power) {
  AvSusinr out;
  double log_sum = 0.0;
  for (const auto& uf : decomp.users) {
    const auto lk = static_cast<double>(uf.s.size());
    double log_prod = 0.0;
    for (Index i = 0; i < uf.s.size(); ++i) log_prod += std::log(uf.s(i) * uf.s(i));
    const double su = power / (lk * sigma2) * std::exp(log_prod / lk);
    out.per_user.push_back(su);
    log_sum += std::log(su);
  }
  out.average = std::exp(log_sum / static_cast<double>(out.per_user.size()));
  return out;
}

inline MetricsReport report(const ChannelSet& channels, const ChannelDecomposition& decomp, const Precoder& precoder,
                            const DetectionSet& detection, double sigma2, double power) {
  MetricsReport r;
  r.detection_kind = detection.kind;
  const int total = channels.dims.total_layers();
  r.per_layer_sinr.reserve(static_cast<std::size_t>(total));
  for (int l = 0; l < total; ++l) r.per_layer_sinr.push_back(layer_sinr(channels, precoder.w, detection, sigma2, l));

  r.min_se = std::numeric_limits<double>::infinity();
  for (int k = 0; k < channels.dims.num_users; ++k) {
    const auto off = static_cast<std::size_t>(channels.dims.layer_offset(k));
    const auto lk = static_cast<std::size_t>(channels.dims.layers_of(k));
    const double eff = effective_sinr(std::span<const double>(r.per_layer_sinr).subspan(off, lk));
    const double se = user_se(eff, static_cast<int>(lk));
    r.per_user_eff_sinr.push_back(eff);
    r.per_user_se.push_back(se);
    r.sum_se += se;
    r.min_se = std::min(r.min_se, se);
  }
  auto su = av_susinr(decomp, sigma2, power);
  r.susinr_per_user = std::move(su.per_user);
  r.av_susinr = su.average;
  return r;
}

}  // namespace metrics
}  // namespace mumimo
