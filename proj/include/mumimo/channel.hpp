#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "mumimo/error.hpp"
#include "mumimo/numerics.hpp"

namespace mumimo {

struct SystemDims {
  int num_users = 0;
  int tx_antennas = 0;
  std::vector<int> rx_antennas;
  std::vector<int> layers;

  static SystemDims uniform(int users, int tx, int rx, int layers_per_user) {
    return SystemDims{users, tx, std::vector<int>(static_cast<std::size_t>(users), rx),
                      std::vector<int>(static_cast<std::size_t>(users), layers_per_user)};
  }

  int total_rx() const {
    int r = 0;
    for (int x : rx_antennas) r += x;
    return r;
  }
  int total_layers() const {
    int l = 0;
    for (int x : layers) l += x;
    return l;
  }
  /// Index of the first global layer owned by user k.
  int layer_offset(int k) const {
    int off = 0;
    for (int i = 0; i < k; ++i) off += layers[static_cast<std::size_t>(i)];
    return off;
  }
  int rx(int k) const { return rx_antennas[static_cast<std::size_t>(k)]; }
  int layers_of(int k) const { return layers[static_cast<std::size_t>(k)]; }

  void validate() const {
    if (num_users < 1 || tx_antennas < 1) throw Error(ErrorKind::Config, "dims: need K >= 1 and T >= 1");
    if (rx_antennas.size() != static_cast<std::size_t>(num_users) ||
        layers.size() != static_cast<std::size_t>(num_users)) {
      throw Error(ErrorKind::Config, "dims: per-user lists must have K entries");
    }
    for (int k = 0; k < num_users; ++k) {
      const int l = layers_of(k);
      const int r = rx(k);
      if (l < 1 || l > r || r > tx_antennas) {
        throw Error(ErrorKind::Config, "dims: user " + std::to_string(k) + " violates 1 <= L_k <= R_k <= T");
      }
    }
  }
};

struct ChannelSet {
  SystemDims dims;
  std::vector<ComplexMatrix> per_user;  // R_k x T
  std::vector<double> path_loss_db;

  void validate() const {
    dims.validate();
    if (per_user.size() != static_cast<std::size_t>(dims.num_users) ||
        path_loss_db.size() != static_cast<std::size_t>(dims.num_users)) {
      throw Error(ErrorKind::Dimension, "channel set: user count mismatch");
    }
    for (int k = 0; k < dims.num_users; ++k) {
      const auto& h = per_user[static_cast<std::size_t>(k)];
      if (h.rows() != dims.rx(k) || h.cols() != dims.tx_antennas) {
        throw Error(ErrorKind::Dimension, "channel set: H_" + std::to_string(k) + " has wrong shape");
      }
      numerics::require_finite(h, "channel matrix");
    }
  }

  const ComplexMatrix& h(int k) const { return per_user[static_cast<std::size_t>(k)]; }

  /// Stacked R x T channel [H_1; ...; H_K].
  ComplexMatrix stacked() const {
    ComplexMatrix out(dims.total_rx(), dims.tx_antennas);
    Index row = 0;
    for (const auto& hk : per_user) {
      out.middleRows(row, hk.rows()) = hk;
      row += hk.rows();
    }
    return out;
  }
};

/// Truncated per-user SVD factors of one user: H_k ≈ uᴴ·diag(s)·v.
struct UserFactors {
  ComplexMatrix u;  // L_k x R_k
  RealVector s;     // L_k
  ComplexMatrix v;  // L_k x T
};

/// Stacked decomposition H = Uᴴ S V with user-major layer order.
struct ChannelDecomposition {
  SystemDims dims;
  std::vector<UserFactors> users;
  ComplexMatrix v;  // L x T
  RealVector s;     // L
  std::vector<int> layer_owner;

  static ChannelDecomposition from_factors(SystemDims dims, std::vector<UserFactors> users) {
    dims.validate();
    if (users.size() != static_cast<std::size_t>(dims.num_users)) {
      throw Error(ErrorKind::Dimension, "decomposition: user count mismatch");
    }
    ChannelDecomposition d;
    const int layers = dims.total_layers();
    d.v.resize(layers, dims.tx_antennas);
    d.s.resize(layers);
    d.layer_owner.reserve(static_cast<std::size_t>(layers));
    for (int k = 0; k < dims.num_users; ++k) {
      const auto& uf = users[static_cast<std::size_t>(k)];
      const int lk = dims.layers_of(k);
      if (uf.v.rows() != lk || uf.v.cols() != dims.tx_antennas || uf.s.size() != lk || uf.u.rows() != lk ||
          uf.u.cols() != dims.rx(k)) {
        throw Error(ErrorKind::Dimension, "decomposition: factors of user " + std::to_string(k) + " have wrong shape");
      }
      const int off = dims.layer_offset(k);
      d.v.middleRows(off, lk) = uf.v;
      d.s.segment(off, lk) = uf.s;
      for (int i = 0; i < lk; ++i) d.layer_owner.push_back(k);
    }
    d.dims = std::move(dims);
    d.users = std::move(users);
    return d;
  }

  int total_layers() const { return static_cast<int>(s.size()); }

  /// F = S·V, the un-normalized layer channel.
  ComplexMatrix f() const { return s.asDiagonal() * v; }

  /// C = V·Vᴴ − I.
  ComplexMatrix correlation() const {
    return v * v.adjoint() - ComplexMatrix::Identity(v.rows(), v.rows());
  }
};

/// Per-user truncated SVD with L_k kept layers, stacked user-major.
inline ChannelDecomposition decompose(const ChannelSet& channels) {
  channels.validate();
  std::vector<UserFactors> users;
  users.reserve(channels.per_user.size());
  for (int k = 0; k < channels.dims.num_users; ++k) {
    const int lk = channels.dims.layers_of(k);
    auto svd = numerics::reduced_svd(channels.h(k), lk);
    if (!(svd.s(0) > 0.0) || svd.s(lk - 1) < numerics::kRankThreshold * svd.s(0)) {
      throw Error(ErrorKind::RankDeficient, "user " + std::to_string(k) + " has numerical rank below L_k=" +
                                                std::to_string(lk));
    }
    users.push_back(UserFactors{std::move(svd.u), std::move(svd.s), std::move(svd.v)});
  }
  return ChannelDecomposition::from_factors(channels.dims, std::move(users));
}

enum class Scenario { EqualPathloss, VariedPathloss };

inline const char* to_string(Scenario s) { return s == Scenario::EqualPathloss ? "equal" : "varied"; }

/// Transmit steering model: uniform on the complex unit sphere, or the
/// response of a half-wavelength linear array at angles clustered per user.
enum class Steering { Isotropic, Array };

/// Single: each path is one rank-one term. Dual: antennas come in
/// cross-polarized pairs and each path is spread over both polarizations by
/// a 2x2 matrix with cross-polar power ratio xpr_db.
enum class Polarization { Single, Dual };

inline const char* to_string(Polarization p) { return p == Polarization::Single ? "single" : "dual"; }

inline const char* to_string(Steering s) { return s == Steering::Isotropic ? "isotropic" : "array"; }

struct ScenarioConfig {
  SystemDims dims = SystemDims::uniform(4, 64, 4, 2);
  Scenario scenario = Scenario::VariedPathloss;
  double pathloss_low_db = -10.0;
  double pathloss_high_db = 10.0;
  int num_paths = 6;
  /// Power step between consecutive multipath components, dB.
  double path_decay_db = 1.0;
  Steering steering = Steering::Isotropic;
  /// Array steering: users uniform over this sector, paths spread around the user angle.
  double sector_deg = 120.0;
  double angular_spread_deg = 10.0;
  /// Horizontal elements per row of the planar array; 0 means a single row.
  int array_columns = 8;
  double elevation_low_deg = -15.0;
  double elevation_high_deg = 0.0;
  Polarization polarization = Polarization::Single;
  double xpr_db = 8.0;
  double correlation_threshold = 0.3;
  int candidate_pool = 64;
  std::uint64_t seed = 0;
  int max_retries = 100;

  void validate() const {
    dims.validate();
    for (int k = 1; k < dims.num_users; ++k) {
      if (dims.rx(k) != dims.rx(0) || dims.layers_of(k) != dims.layers_of(0)) {
        throw Error(ErrorKind::Config, "scenario generation needs identical R_k and L_k across users");
      }
    }
    if (pathloss_low_db > pathloss_high_db) throw Error(ErrorKind::Config, "path-loss range is inverted");
    if (!(correlation_threshold > 0.0 && correlation_threshold <= 1.0)) {
      throw Error(ErrorKind::Config, "correlation threshold must lie in (0, 1]");
    }
    if (polarization == Polarization::Dual && (dims.rx(0) % 2 != 0 || dims.tx_antennas % 2 != 0)) {
      throw Error(ErrorKind::Config, "dual polarization needs even R_k and T");
    }
    if (num_paths < 1) throw Error(ErrorKind::Config, "num_paths must be >= 1");
    if (candidate_pool < dims.num_users) throw Error(ErrorKind::Config, "candidate pool smaller than K");
    if (max_retries < 0) throw Error(ErrorKind::Config, "max_retries must be >= 0");
  }
};

namespace detail {

template <class Engine>
Eigen::VectorXcd random_unit_vector(Engine& engine, Index n) {
  for (;;) {
    Eigen::VectorXcd x = numerics::complex_gaussian(engine, n, 1, 1.0).col(0);
    const double norm = x.norm();
    if (norm > 0.0) return x / norm;
  }
}

template <class Engine>
double uniform01(Engine& engine) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(engine);
}

template <class Engine>
double standard_normal(Engine& engine) {
  return std::normal_distribution<double>(0.0, 1.0)(engine);
}

/// Unit-norm response of a half-wavelength planar array with `columns`
/// horizontal elements per row (column-major element order), angles in degrees.
inline Eigen::VectorXcd array_response(Index n, Index columns, double azimuth_deg, double elevation_deg) {
  const double deg = std::numbers::pi / 180.0;
  const double ph = std::numbers::pi * std::sin(azimuth_deg * deg) * std::cos(elevation_deg * deg);
  const double pv = std::numbers::pi * std::sin(elevation_deg * deg);
  Eigen::VectorXcd a(n);
  for (Index t = 0; t < n; ++t) {
    a(t) = std::polar(1.0, ph * static_cast<double>(t % columns) + pv * static_cast<double>(t / columns));
  }
  return a / std::sqrt(static_cast<double>(n));
}

}  // namespace detail

/// Candidate pool for one draw: each user is a sum of multipath components,
/// normalized to ‖H‖² = R and scaled by its path loss.
inline ChannelSet draw_candidates(const ScenarioConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 engine(seed);
  std::uniform_real_distribution<double> pathloss(config.pathloss_low_db, config.pathloss_high_db);

  const int rx = config.dims.rx(0);
  const int tx = config.dims.tx_antennas;
  const bool dual = config.polarization == Polarization::Dual;
  const int rx_pos = dual ? rx / 2 : rx;
  const int tx_pos = dual ? tx / 2 : tx;
  const double cross = std::pow(10.0, -config.xpr_db / 20.0);
  const Index columns = config.array_columns > 0 ? config.array_columns : tx_pos;
  const double spread = config.angular_spread_deg;
  ChannelSet out;
  out.dims = SystemDims::uniform(config.candidate_pool, tx, rx, config.dims.layers_of(0));
  for (int c = 0; c < config.candidate_pool; ++c) {
    // drawn in both scenarios so that equal and varied share channel shapes
    const double pl_draw = pathloss(engine);
    const double user_az = config.sector_deg * (detail::uniform01(engine) - 0.5);
    const double user_el =
        config.elevation_low_deg + (config.elevation_high_deg - config.elevation_low_deg) * detail::uniform01(engine);
    ComplexMatrix h = ComplexMatrix::Zero(rx, tx);
    for (int p = 0; p < config.num_paths; ++p) {
      const double power = std::pow(10.0, -config.path_decay_db * p / 10.0);
      const Complex gain = numerics::complex_gaussian(engine, 1, 1, power)(0, 0);
      const Eigen::VectorXcd recv = detail::random_unit_vector(engine, rx_pos);
      const Eigen::VectorXcd steer = config.steering == Steering::Isotropic
                                          ? detail::random_unit_vector(engine, tx_pos)
                                          : detail::array_response(
                                                tx_pos, columns, user_az + spread * detail::standard_normal(engine),
                                                user_el + spread * detail::standard_normal(engine));
      const ComplexMatrix term = gain * recv * steer.transpose();
      if (!dual) {
        h += term;
        continue;
      }
      // rows and columns are polarization-major
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
          const double amp = a == b ? 1.0 : cross;
          const Complex phase = std::polar(amp, 2.0 * std::numbers::pi * detail::uniform01(engine));
          h.block(a * rx_pos, b * tx_pos, rx_pos, tx_pos) += phase * term;
        }
      }
    }
    h *= std::sqrt(static_cast<double>(rx)) / h.norm();
    const double pl = config.scenario == Scenario::VariedPathloss ? pl_draw : 0.0;
    h *= std::pow(10.0, pl / 20.0);
    out.per_user.push_back(std::move(h));
    out.path_loss_db.push_back(pl);
  }
  return out;
}

/// |v_i,1 · v_j,1ᴴ|² between principal right singular vectors.
inline double principal_correlation(const ComplexMatrix& hi, const ComplexMatrix& hj) {
  const auto vi = numerics::reduced_svd(hi, 1).v;
  const auto vj = numerics::reduced_svd(hj, 1).v;
  return std::norm(vi.row(0).dot(vj.row(0)));
}

/// Greedy first-fit scheduler simulation: scans candidates in order and keeps
/// a user if its principal direction correlates with every kept user by at
/// most `threshold`.
inline ChannelSet select_users(const ChannelSet& candidates, int count, double threshold) {
  candidates.validate();
  if (count < 1 || count > candidates.dims.num_users) {
    throw Error(ErrorKind::Config, "select_users: K must lie in [1, candidate count]");
  }
  if (!(threshold > 0.0 && threshold <= 1.0)) throw Error(ErrorKind::Config, "select_users: threshold outside (0,1]");

  std::vector<Eigen::RowVectorXcd> principal;
  principal.reserve(candidates.per_user.size());
  for (const auto& h : candidates.per_user) principal.push_back(numerics::reduced_svd(h, 1).v.row(0));

  std::vector<int> chosen;
  for (int c = 0; c < candidates.dims.num_users && static_cast<int>(chosen.size()) < count; ++c) {
    bool ok = true;
    for (int j : chosen) {
      if (std::norm(principal[static_cast<std::size_t>(c)].dot(principal[static_cast<std::size_t>(j)])) > threshold) {
        ok = false;
        break;
      }
    }
    if (ok) chosen.push_back(c);
  }
  if (static_cast<int>(chosen.size()) < count) {
    throw Error(ErrorKind::SelectionFailure, "only " + std::to_string(chosen.size()) + " of " +
                                                 std::to_string(count) + " users satisfy the correlation threshold");
  }

  ChannelSet out;
  out.dims.num_users = count;
  out.dims.tx_antennas = candidates.dims.tx_antennas;
  for (int c : chosen) {
    out.dims.rx_antennas.push_back(candidates.dims.rx(c));
    out.dims.layers.push_back(candidates.dims.layers_of(c));
    out.per_user.push_back(candidates.h(c));
    out.path_loss_db.push_back(candidates.path_loss_db[static_cast<std::size_t>(c)]);
  }
  return out;
}

/// Draws a candidate pool and selects K users; on selection failure the pool
/// is re-drawn with seed+1, up to max_retries times.
inline ChannelSet generate_scenario(const ScenarioConfig& config) {
  config.validate();
  for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
    const auto pool = draw_candidates(config, config.seed + static_cast<std::uint64_t>(attempt));
    try {
      auto selected = select_users(pool, config.dims.num_users, config.correlation_threshold);
      selected.dims = config.dims;
      return selected;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::SelectionFailure) throw;
    }
  }
  throw Error(ErrorKind::SelectionFailure, "no user subset met the correlation threshold after " +
                                               std::to_string(config.max_retries) + " retries");
}

/// Noise variance that places the decomposition at the requested average
/// single-user SINR for transmit power P.
inline double calibrate_noise(const ChannelDecomposition& decomp, double power, double target_av_susinr_db) {
  if (!(power > 0.0)) throw Error(ErrorKind::Config, "calibrate_noise: power must be positive");
  double log_sum = 0.0;
  for (int k = 0; k < decomp.dims.num_users; ++k) {
    const auto& s = decomp.users[static_cast<std::size_t>(k)].s;
    const int lk = static_cast<int>(s.size());
    double log_prod = 0.0;
    for (int i = 0; i < lk; ++i) {
      if (!(s(i) > 0.0)) throw Error(ErrorKind::RankDeficient, "calibrate_noise: zero singular value");
      log_prod += 2.0 * std::log(s(i));
    }
    log_sum += log_prod / lk - std::log(static_cast<double>(lk));
  }
  const double target = numerics::db_to_linear(target_av_susinr_db);
  return power / target * std::exp(log_sum / decomp.dims.num_users);
}

}  // namespace mumimo
