#pragma once

// Self-check suite behind `mumimo verify`: closed-form identities,
// stationarity, asymptotic decay, effective-noise statistics, gradient
// agreement and normalization on seeded random instances.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "mumimo/channel.hpp"
#include "mumimo/detection.hpp"
#include "mumimo/metrics.hpp"
#include "mumimo/optimizer.hpp"
#include "mumimo/precoding.hpp"

namespace mumimo::verify {

inline std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Random full-rank ChannelSet with i.i.d. CN(0,1) entries and per-user gains.
inline ChannelSet random_channels(std::mt19937_64& rng, const SystemDims& dims, double gain_spread_db = 0.0) {
  std::uniform_real_distribution<double> pl(-gain_spread_db / 2.0, gain_spread_db / 2.0);
  ChannelSet c;
  c.dims = dims;
  for (int k = 0; k < dims.num_users; ++k) {
    const double db = gain_spread_db > 0.0 ? pl(rng) : 0.0;
    c.per_user.push_back(std::pow(10.0, db / 20.0) * numerics::complex_gaussian(rng, dims.rx(k), dims.tx_antennas, 1.0));
    c.path_loss_db.push_back(db);
  }
  return c;
}

/// Small instance with K≤4, T≤16, L≤8 and L_k ≤ R_k.
inline SystemDims random_dims(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> users(1, 4);
  SystemDims d;
  d.num_users = users(rng);
  const int max_lk = std::max(1, 8 / d.num_users);
  std::uniform_int_distribution<int> lk(1, max_lk);
  for (int k = 0; k < d.num_users; ++k) {
    const int l = lk(rng);
    std::uniform_int_distribution<int> rk(l, l + 2);
    d.layers.push_back(l);
    d.rx_antennas.push_back(rk(rng));
  }
  const int max_rk = *std::max_element(d.rx_antennas.begin(), d.rx_antennas.end());
  std::uniform_int_distribution<int> tx(std::max({d.total_layers(), max_rk, 8}), 16);
  d.tx_antennas = tx(rng);
  return d;
}

/// Replaces all singular values by one common value, keeping U and V.
inline ChannelDecomposition with_equal_singular_values(const ChannelDecomposition& d, double value) {
  std::vector<UserFactors> users = d.users;
  for (auto& u : users) u.s.setConstant(value);
  return ChannelDecomposition::from_factors(d.dims, std::move(users));
}

inline ComplexMatrix direction(const ComplexMatrix& w) { return w / w.norm(); }

struct Summary {
  double worst = 0.0;
  int instances = 0;
};

inline CheckResult threshold_check(const std::string& name, const Summary& s, double tol) {
  return CheckResult{name, s.worst <= tol,
                     "worst " + num(s.worst) + " over " + std::to_string(s.instances) + " instances (tol " +
                         num(tol) + ")"};
}

inline std::vector<CheckResult> identity_checks(std::uint64_t seed, int instances = 100) {
  std::mt19937_64 rng(seed);
  Summary zf_s, arzf_s, cd_s, collapse_s;
  std::uniform_real_distribution<double> lam(0.01, 2.0);
  for (int n = 0; n < instances; ++n) {
    const auto ch = random_channels(rng, random_dims(rng), 20.0);
    const auto d = decompose(ch);
    const RealVector s = d.s;
    const ComplexMatrix sd = s.cast<Complex>().asDiagonal();

    const ComplexMatrix zv = precoding::raw_zf(d, Basis::V);
    zf_s.worst = std::max(zf_s.worst, numerics::relative_error(precoding::raw_zf(d, Basis::F) * sd, zv));

    const double lambda = lam(rng);
    const ComplexMatrix a = precoding::raw_arzf(d, lambda);
    arzf_s.worst = std::max(arzf_s.worst, numerics::relative_error(precoding::raw_rzf(d, Basis::F, lambda) * sd, a));

    const ComplexMatrix gh = conjugate_detection(d).assembled() * ch.stacked();
    cd_s.worst = std::max(cd_s.worst, numerics::relative_error(gh, d.v));

    const auto eq = with_equal_singular_values(d, s(0));
    const double sigma2 = lambda;
    collapse_s.worst =
        std::max(collapse_s.worst, numerics::relative_error(arzf(eq, sigma2, 1.0).w, wrzf(eq, sigma2, 1.0).w));
    zf_s.instances = arzf_s.instances = cd_s.instances = collapse_s.instances = n + 1;
  }
  return {threshold_check("zf(F)*S == zf(V)", zf_s, 1e-10), threshold_check("arzf == rzf(F)*S", arzf_s, 1e-10),
          threshold_check("G^C * H == V", cd_s, 1e-10), threshold_check("equal-s arzf == wrzf", collapse_s, 1e-10)};
}

/// ‖B W − I‖²_Σ + λ‖W‖² with Σ = diag(weight²).
inline double weighted_mse(const ComplexMatrix& b, const ComplexMatrix& w, const RealVector& weight, double lambda) {
  const ComplexMatrix r = b * w - ComplexMatrix::Identity(b.rows(), b.rows());
  return (weight.cast<Complex>().asDiagonal() * r).squaredNorm() + lambda * w.squaredNorm();
}

/// Bᴴ Σ (B W − I) + λ W.
inline ComplexMatrix weighted_mse_gradient(const ComplexMatrix& b, const ComplexMatrix& w, const RealVector& weight,
                                           double lambda) {
  const ComplexMatrix r = b * w - ComplexMatrix::Identity(b.rows(), b.rows());
  return b.adjoint() * weight.array().square().matrix().cast<Complex>().asDiagonal() * r + lambda * w;
}

inline std::vector<CheckResult> stationarity_checks(std::uint64_t seed, int instances = 20, int perturbations = 100) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> lam(0.05, 2.0);
  Summary rzf_res, arzf_res;
  int rzf_fail = 0, arzf_fail = 0;
  for (int n = 0; n < instances; ++n) {
    const auto ch = random_channels(rng, random_dims(rng), 20.0);
    const auto d = decompose(ch);
    const double lambda = lam(rng);
    const RealVector ones = RealVector::Ones(d.total_layers());

    const ComplexMatrix wr = precoding::raw_rzf(d, Basis::V, lambda);
    const ComplexMatrix wa = precoding::raw_arzf(d, lambda);
    const double scale_r = d.v.norm() * (d.v.norm() * wr.norm() + 1.0) + lambda * wr.norm();
    const double scale_a = d.s.maxCoeff() * d.s.maxCoeff() * d.v.norm() * (d.v.norm() * wa.norm() + 1.0) +
                           lambda * wa.norm();
    rzf_res.worst = std::max(rzf_res.worst, weighted_mse_gradient(d.v, wr, ones, lambda).norm() / scale_r);
    arzf_res.worst = std::max(arzf_res.worst, weighted_mse_gradient(d.v, wa, d.s, lambda).norm() / scale_a);
    rzf_res.instances = arzf_res.instances = n + 1;

    const double jr = weighted_mse(d.v, wr, ones, lambda);
    const double ja = weighted_mse(d.v, wa, d.s, lambda);
    for (int p = 0; p < perturbations; ++p) {
      ComplexMatrix delta = numerics::complex_gaussian(rng, wr.rows(), wr.cols(), 1.0);
      delta *= 1e-3 / delta.norm();
      if (!(weighted_mse(d.v, wr + delta, ones, lambda) > jr)) ++rzf_fail;
      if (!(weighted_mse(d.v, wa + delta, d.s, lambda) > ja)) ++arzf_fail;
    }
  }
  auto out = std::vector<CheckResult>{threshold_check("rzf stationarity residual", rzf_res, 1e-9),
                                      threshold_check("arzf weighted stationarity residual", arzf_res, 1e-9)};
  out.push_back({"rzf perturbations increase J", rzf_fail == 0, std::to_string(rzf_fail) + " non-increasing"});
  out.push_back({"arzf perturbations increase J_S", arzf_fail == 0, std::to_string(arzf_fail) + " non-increasing"});
  return out;
}

/// Successive distance ratios of the normalized ARZF direction to its
/// small- and large-λ limits.
struct AsymptoticRatios {
  std::vector<double> small;
  std::vector<double> large;
  bool degenerate = false;  // both limits coincide (e.g. L=1); ratios left empty
};

inline AsymptoticRatios asymptotic_ratios(const ChannelDecomposition& d) {
  AsymptoticRatios out;
  const ComplexMatrix zf_dir = direction(precoding::raw_zf(d, Basis::V));
  const ComplexMatrix mrt_s2 =
      direction(d.v.adjoint() * d.s.array().square().matrix().cast<Complex>().asDiagonal());
  if ((zf_dir - mrt_s2).norm() <= 1e-8) {
    out.degenerate = true;
    return out;
  }
  std::vector<double> small_d, large_d;
  for (double lam : {1e-2, 1e-3, 1e-4}) small_d.push_back((direction(precoding::raw_arzf(d, lam)) - zf_dir).norm());
  for (double lam : {1e2, 1e3, 1e4}) large_d.push_back((direction(precoding::raw_arzf(d, lam)) - mrt_s2).norm());
  for (std::size_t i = 0; i + 1 < small_d.size(); ++i) out.small.push_back(small_d[i] / small_d[i + 1]);
  for (std::size_t i = 0; i + 1 < large_d.size(); ++i) out.large.push_back(large_d[i] / large_d[i + 1]);
  return out;
}

inline std::vector<CheckResult> asymptotic_checks(std::uint64_t seed, int instances = 20) {
  std::mt19937_64 rng(seed);
  int bad_small = 0, bad_large = 0;
  double lo = 1e300, hi = 0.0;
  int skipped = 0;
  for (int n = 0; n < instances;) {
    const auto d = decompose(random_channels(rng, random_dims(rng), 10.0));
    const auto r = asymptotic_ratios(d);
    if (r.degenerate) {
      ++skipped;
      continue;
    }
    ++n;
    for (double x : r.small) {
      bad_small += !(x >= 5.0 && x <= 20.0);
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
    for (double x : r.large) {
      bad_large += !(x >= 5.0 && x <= 20.0);
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  }
  const std::string range =
      "ratios in [" + num(lo) + ", " + num(hi) + "], " + std::to_string(skipped) + " degenerate instances skipped";
  return {{"arzf -> zf as lambda -> 0", bad_small == 0, std::to_string(bad_small) + " out of band; " + range},
          {"arzf -> mrt*S^2 as lambda -> inf", bad_large == 0, std::to_string(bad_large) + " out of band; " + range}};
}

/// Monte Carlo covariance of G^C n for n ~ CN(0, σ² I).
struct NoiseStats {
  ComplexMatrix covariance;
  RealVector expected_diagonal;
  int draws = 0;
};

inline NoiseStats effective_noise_stats(const ChannelDecomposition& d, double sigma2, int draws, std::uint64_t seed) {
  const ComplexMatrix g = conjugate_detection(d).assembled();
  std::mt19937_64 rng(seed);
  const Index l = g.rows();
  ComplexMatrix acc = ComplexMatrix::Zero(l, l);
  for (int n = 0; n < draws; ++n) {
    const ComplexMatrix noise = numerics::complex_gaussian(rng, g.cols(), 1, sigma2);
    const ComplexMatrix y = g * noise;
    acc.noalias() += y * y.adjoint();
  }
  NoiseStats out;
  out.covariance = acc / static_cast<double>(draws);
  out.expected_diagonal = sigma2 * d.s.array().square().inverse().matrix();
  out.draws = draws;
  return out;
}

inline CheckResult effective_noise_check(std::uint64_t seed, int draws = 100000) {
  std::mt19937_64 rng(seed);
  const auto d = decompose(random_channels(rng, SystemDims::uniform(2, 8, 3, 2), 10.0));
  const double sigma2 = 0.5;
  const auto st = effective_noise_stats(d, sigma2, draws, seed + 1);
  double worst_diag = 0.0;
  double worst_off = 0.0;
  for (Index i = 0; i < st.covariance.rows(); ++i) {
    worst_diag = std::max(worst_diag, std::abs(st.covariance(i, i).real() / st.expected_diagonal(i) - 1.0));
    for (Index j = 0; j < st.covariance.cols(); ++j) {
      if (i == j) continue;
      // std of a sample mean of y_i y_j* with independent CN components
      const double se = std::sqrt(st.expected_diagonal(i) * st.expected_diagonal(j) / draws);
      worst_off = std::max(worst_off, std::abs(st.covariance(i, j)) / se);
    }
  }
  return {"effective noise covariance sigma2*S^-2", worst_diag <= 0.03 && worst_off <= 3.0,
          "diag rel err " + num(worst_diag) + ", off-diag " + num(worst_off) + " SE"};
}

/// Max per-component relative error between analytic and central-difference
/// gradients, with a floor at 1e-3 of the largest component.
inline double gradient_relative_error(const RealVector& analytic, const RealVector& numeric) {
  const double floor = 1e-3 * std::max(numeric.cwiseAbs().maxCoeff(), 1e-300);
  double worst = 0.0;
  for (Index i = 0; i < analytic.size(); ++i) {
    worst = std::max(worst, std::abs(analytic(i) - numeric(i)) / std::max(std::abs(numeric(i)), floor));
  }
  return worst;
}

inline CheckResult gradient_check(std::uint64_t seed, int instances = 20, double fd_step = 1e-6) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> snr_db(0.0, 30.0);
  std::normal_distribution<double> jitter(0.0, 0.5);
  double worst = 0.0;
  int used = 0;
  int skipped = 0;
  while (used < instances && skipped < 10 * instances) {
    const auto ch = random_channels(rng, SystemDims::uniform(2, 8, 2, 2), 10.0);
    const auto d = decompose(ch);
    const double sigma2 = calibrate_noise(d, 1.0, snr_db(rng));
    const SumSeObjective obj(ch, d, sigma2, 1.0);
    RealVector u = obj.initial_regularization().array().log().matrix();
    for (Index i = 0; i < u.size(); ++i) u(i) += jitter(rng);
    if (obj.antenna_tie_ratio(u.array().exp().matrix()) > 1.0 - 1e-6) {
      ++skipped;
      continue;
    }
    const RealVector ga = obj.gradient_log(u, GradientMode::Analytic);
    const RealVector gn = obj.gradient_log(u, GradientMode::CentralDifference, fd_step);
    worst = std::max(worst, gradient_relative_error(ga, gn));
    ++used;
  }
  return {"analytic gradient vs central difference", used == instances && worst <= 1e-4,
          "worst " + num(worst) + " over " + std::to_string(used) + " instances"};
}

inline CheckResult normalization_check(std::uint64_t seed, int instances = 20) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int n = 0; n < instances; ++n) {
    const ComplexMatrix raw = numerics::complex_gaussian(rng, 64, 8, 1.0);
    const auto pa = precoding::normalize(raw, 1.0, NormMode::PerAntenna);
    double max_row = 0.0;
    for (Index t = 0; t < pa.w.rows(); ++t) max_row = std::max(max_row, pa.w.row(t).squaredNorm());
    worst = std::max(worst, std::abs(max_row * 64.0 - 1.0));
    const auto tp = precoding::normalize(raw, 2.0, NormMode::TotalPower);
    worst = std::max(worst, std::abs(tp.w.squaredNorm() / 2.0 - 1.0));
  }
  return {"power normalization", worst <= 1e-12, "worst rel dev " + num(worst)};
}

inline std::vector<CheckResult> run_all(std::uint64_t seed = 1) {
  std::vector<CheckResult> out;
  const auto guard = [&](const std::string& name, const std::function<std::vector<CheckResult>()>& f) {
    try {
      auto r = f();
      out.insert(out.end(), r.begin(), r.end());
    } catch (const Error& e) {
      out.push_back({name, false, e.what()});
    }
  };
  guard("identities", [&] { return identity_checks(seed); });
  guard("stationarity", [&] { return stationarity_checks(seed + 1); });
  guard("asymptotics", [&] { return asymptotic_checks(seed + 2); });
  guard("effective noise", [&] { return std::vector<CheckResult>{effective_noise_check(seed + 3)}; });
  guard("gradient", [&] { return std::vector<CheckResult>{gradient_check(seed + 4)}; });
  guard("normalization", [&] { return std::vector<CheckResult>{normalization_check(seed + 5)}; });
  return out;
}

}  // namespace mumimo::verify
