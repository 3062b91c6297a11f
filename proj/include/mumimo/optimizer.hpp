#pragma once

// Gradient search over the diagonal regularization R of the parametric
// precoder W(R) = μ·Vᴴ(VVᴴ + R)⁻¹, maximizing sum spectral efficiency under
// MMSE detection and the per-antenna power constraint.
//
// The search variable is u = log(r), so r stays positive without any
// projection. Gradients are exact forward-mode tangents through the whole
// chain solve -> normalize -> MMSE -> SINR -> SE; central differences are
// available as a fallback and serve as the oracle in tests.

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "mumimo/channel.hpp"
#include "mumimo/detection.hpp"
#include "mumimo/metrics.hpp"
#include "mumimo/numerics.hpp"
#include "mumimo/precoding.hpp"

namespace mumimo {

enum class GradientMode { Analytic, CentralDifference };

enum class TerminationReason { GradientTolerance, ChangeTolerance, MaxIterations, LineSearchFailure };

inline const char* to_string(TerminationReason r) {
  switch (r) {
    case TerminationReason::GradientTolerance: return "gradient_tolerance";
    case TerminationReason::ChangeTolerance: return "change_tolerance";
    case TerminationReason::MaxIterations: return "max_iterations";
    case TerminationReason::LineSearchFailure: return "line_search_failure";
  }
  return "?";
}

struct LineSearchConfig {
  double initial_step = 1.0;
  double contraction = 0.5;
  double sufficient_increase = 1e-4;
  int max_backtracks = 30;
};

struct OptConfig {
  int max_iters = 100;
  double grad_tol = 1e-5;
  double change_tol = 1e-9;
  int history_size = 10;
  LineSearchConfig line_search;
  GradientMode gradient_mode = GradientMode::Analytic;
  double fd_step = 1e-6;

  void validate() const {
    if (max_iters < 1) throw Error(ErrorKind::Config, "optimizer: max_iters must be >= 1");
    if (!(grad_tol > 0.0) || !(change_tol > 0.0) || !(fd_step > 0.0)) {
      throw Error(ErrorKind::Config, "optimizer: tolerances must be positive");
    }
    if (history_size < 1) throw Error(ErrorKind::Config, "optimizer: history_size must be >= 1");
    if (!(line_search.contraction > 0.0 && line_search.contraction < 1.0) || !(line_search.initial_step > 0.0) ||
        line_search.max_backtracks < 1) {
      throw Error(ErrorKind::Config, "optimizer: invalid line search parameters");
    }
  }
};

struct TrajectoryPoint {
  int iteration = 0;
  double objective = 0.0;
  double grad_norm = 0.0;  // infinity norm, w.r.t. log r
};

struct OptResult {
  RealVector reg_diag;
  Precoder precoder;
  std::vector<TrajectoryPoint> trajectory;
  bool converged = false;
  TerminationReason termination_reason = TerminationReason::MaxIterations;
  int iterations = 0;
  double initial_objective = 0.0;
  double final_objective = 0.0;
};

/// Sum-SE of W(R) with MMSE detection, plus its gradient w.r.t. log R.
class SumSeObjective {
 public:
  SumSeObjective(const ChannelSet& channels, const ChannelDecomposition& decomp, double sigma2, double power)
      : channels_(channels), decomp_(decomp), sigma2_(sigma2), power_(power) {
    if (!(sigma2 > 0.0) || !(power > 0.0)) throw Error(ErrorKind::Config, "objective: σ² and P must be positive");
    if (channels.dims.total_layers() != decomp.total_layers()) {
      throw Error(ErrorKind::Dimension, "objective: channels and decomposition disagree on L");
    }
  }

  int size() const { return decomp_.total_layers(); }

  /// Initial point R₀ = (Lσ²/P)·S⁻².
  RealVector initial_regularization() const {
    return precoding::arzf_regularization(decomp_, precoding::default_lambda(decomp_, sigma2_, power_));
  }

  /// Same code path as evaluating any other precoder: build, detect, report.
  double value(const RealVector& reg) const {
    const Precoder p = parametric_rzf(decomp_, reg, power_, NormMode::PerAntenna);
    const DetectionSet det = mmse_detection(channels_, p.w, sigma2_);
    return metrics::report(channels_, decomp_, p, det, sigma2_, power_).sum_se;
  }

  double value_log(const RealVector& log_reg) const { return value(log_reg.array().exp().matrix()); }

  /// ∂J/∂(log r_j) for every j.
  RealVector gradient_log(const RealVector& log_reg, GradientMode mode = GradientMode::Analytic,
                          double fd_step = 1e-6) const {
    if (mode == GradientMode::CentralDifference) return central_difference(log_reg, fd_step);
    return analytic_gradient(log_reg.array().exp().matrix());
  }

  RealVector central_difference(const RealVector& log_reg, double fd_step) const {
    RealVector g(log_reg.size());
    for (Index j = 0; j < log_reg.size(); ++j) {
      const double h = fd_step * std::max(1.0, std::abs(log_reg(j)));
      RealVector up = log_reg;
      RealVector dn = log_reg;
      up(j) += h;
      dn(j) -= h;
      g(j) = (value_log(up) - value_log(dn)) / (2.0 * h);
    }
    return g;
  }

  /// Ratio of the second-largest to the largest precoder row norm. Values
  /// near 1 mark points where the per-antenna max is not differentiable.
  double antenna_tie_ratio(const RealVector& reg) const {
    const ComplexMatrix w = precoding::raw_parametric(decomp_, reg);
    double first = 0.0;
    double second = 0.0;
    for (Index t = 0; t < w.rows(); ++t) {
      const double n = w.row(t).norm();
      if (n > first) {
        second = first;
        first = n;
      } else if (n > second) {
        second = n;
      }
    }
    return first > 0.0 ? second / first : 1.0;
  }

 private:
  struct UserState {
    Index offset = 0;
    Index layers = 0;
    ComplexMatrix e;      // H_k W, R_k x L
    ComplexMatrix m_inv;  // (B Bᴴ + σ² I)⁻¹
    ComplexMatrix g;      // L_k x R_k
    std::vector<Eigen::RowVectorXcd> a;
    std::vector<double> sinr;
    double eff = 0.0;
  };

  struct State {
    ComplexMatrix a_inv;  // (VVᴴ + R)⁻¹
    ComplexMatrix w_hat;  // T x L
    Index t_star = 0;
    double rho = 0.0;
    double mu = 0.0;
    ComplexMatrix w;
    std::vector<UserState> users;
    double sum_se = 0.0;
  };

  State evaluate(const RealVector& reg) const {
    const int total = size();
    if (reg.size() != total) throw Error(ErrorKind::Dimension, "objective: regularization length must equal L");
    State st;
    ComplexMatrix a = decomp_.v * decomp_.v.adjoint();
    a = 0.5 * (a + a.adjoint());
    a.diagonal() += reg.cast<Complex>();
    st.a_inv = numerics::solve_hpd(a, ComplexMatrix::Identity(total, total));
    st.w_hat = decomp_.v.adjoint() * st.a_inv;
    st.t_star = precoding::max_power_row(st.w_hat);
    st.rho = st.w_hat.row(st.t_star).norm();
    if (!(st.rho > 0.0)) throw Error(ErrorKind::ZeroMatrix, "objective: zero precoder");
    st.mu = std::sqrt(power_ / static_cast<double>(st.w_hat.rows())) / st.rho;
    st.w = st.mu * st.w_hat;

    for (int k = 0; k < channels_.dims.num_users; ++k) {
      UserState us;
      us.offset = channels_.dims.layer_offset(k);
      us.layers = channels_.dims.layers_of(k);
      us.e = channels_.h(k) * st.w;
      const ComplexMatrix b = us.e.middleCols(us.offset, us.layers);
      ComplexMatrix m = b * b.adjoint();
      m = 0.5 * (m + m.adjoint());
      m.diagonal().array() += sigma2_;
      us.m_inv = numerics::solve_hpd(m, ComplexMatrix::Identity(m.rows(), m.rows()));
      us.g = b.adjoint() * us.m_inv;
      double log_acc = 0.0;
      for (Index i = 0; i < us.layers; ++i) {
        const Index l = us.offset + i;
        Eigen::RowVectorXcd row = us.g.row(i) * us.e;
        double interference = 0.0;
        for (Index j = 0; j < row.size(); ++j) {
          if (j != l) interference += std::norm(row(j));
        }
        const double sinr = std::norm(row(l)) / (interference + sigma2_ * us.g.row(i).squaredNorm());
        if (!(sinr > 0.0)) throw Error(ErrorKind::ZeroSinr, "objective: zero layer SINR");
        log_acc += std::log(sinr);
        us.sinr.push_back(sinr);
        us.a.push_back(std::move(row));
      }
      us.eff = std::exp(log_acc / static_cast<double>(us.layers));
      st.sum_se += static_cast<double>(us.layers) * std::log2(1.0 + us.eff);
      st.users.push_back(std::move(us));
    }
    return st;
  }

  RealVector analytic_gradient(const RealVector& reg) const {
    const State st = evaluate(reg);
    const int total = size();
    RealVector grad(total);
    for (int j = 0; j < total; ++j) {
      // dA = r_j e_j e_jᵀ  =>  dŴ = −r_j Ŵ[:, j] A⁻¹[j, :]
      const ComplexMatrix dw_hat = -reg(j) * st.w_hat.col(j) * st.a_inv.row(j);
      const double drho = st.w_hat.row(st.t_star).dot(dw_hat.row(st.t_star)).real() / st.rho;
      const double dmu = -st.mu * drho / st.rho;
      const ComplexMatrix dw = dmu * st.w_hat + st.mu * dw_hat;

      double dj = 0.0;
      for (int k = 0; k < channels_.dims.num_users; ++k) {
        const UserState& us = st.users[static_cast<std::size_t>(k)];
        const ComplexMatrix de = channels_.h(k) * dw;
        const ComplexMatrix b = us.e.middleCols(us.offset, us.layers);
        const ComplexMatrix db = de.middleCols(us.offset, us.layers);
        const ComplexMatrix dm = db * b.adjoint() + b * db.adjoint();
        const ComplexMatrix dg = db.adjoint() * us.m_inv - us.g * dm * us.m_inv;

        double dlog_eff = 0.0;
        for (Index i = 0; i < us.layers; ++i) {
          const Index l = us.offset + i;
          const Eigen::RowVectorXcd& a = us.a[static_cast<std::size_t>(i)];
          const Eigen::RowVectorXcd da = dg.row(i) * us.e + us.g.row(i) * de;
          const double signal = std::norm(a(l));
          const double dsignal = 2.0 * (std::conj(a(l)) * da(l)).real();
          double interference = 0.0;
          double dinterference = 0.0;
          for (Index m = 0; m < a.size(); ++m) {
            if (m == l) continue;
            interference += std::norm(a(m));
            dinterference += 2.0 * (std::conj(a(m)) * da(m)).real();
          }
          const double noise = sigma2_ * us.g.row(i).squaredNorm();
          const double dnoise = 2.0 * sigma2_ * us.g.row(i).dot(dg.row(i)).real();
          const double denom = interference + noise;
          const double dsinr = (dsignal * denom - signal * (dinterference + dnoise)) / (denom * denom);
          dlog_eff += dsinr / us.sinr[static_cast<std::size_t>(i)];
        }
        dlog_eff /= static_cast<double>(us.layers);
        dj += static_cast<double>(us.layers) / std::numbers::ln2 * us.eff * dlog_eff / (1.0 + us.eff);
      }
      grad(j) = dj;
    }
    return grad;
  }

  const ChannelSet& channels_;
  const ChannelDecomposition& decomp_;
  double sigma2_;
  double power_;
};

inline double objective(const RealVector& reg, const ChannelSet& channels, const ChannelDecomposition& decomp,
                        double sigma2, double power) {
  return SumSeObjective(channels, decomp, sigma2, power).value(reg);
}

inline RealVector gradient(const RealVector& reg, const ChannelSet& channels, const ChannelDecomposition& decomp,
                           double sigma2, double power, GradientMode mode = GradientMode::Analytic,
                           double fd_step = 1e-6) {
  return SumSeObjective(channels, decomp, sigma2, power).gradient_log(reg.array().log().matrix(), mode, fd_step);
}

/// Limited-memory quasi-Newton ascent from the ARZF point with Armijo
/// backtracking. Accepted iterates never decrease the objective.
inline OptResult optimize(const ChannelSet& channels, const ChannelDecomposition& decomp, double sigma2, double power,
                          const OptConfig& config = {}) {
  config.validate();
  const SumSeObjective obj(channels, decomp, sigma2, power);
  const auto grad_of = [&](const RealVector& u) { return obj.gradient_log(u, config.gradient_mode, config.fd_step); };
  const auto safe_value = [&](const RealVector& u) {
    try {
      const double v = obj.value_log(u);
      return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
    } catch (const Error&) {
      return -std::numeric_limits<double>::infinity();
    }
  };

  RealVector u = obj.initial_regularization().array().log().matrix();
  double f = obj.value_log(u);
  RealVector g = grad_of(u);

  OptResult result;
  result.initial_objective = f;
  result.trajectory.push_back({0, f, g.lpNorm<Eigen::Infinity>()});

  struct Pair {
    RealVector s;
    RealVector y;  // y for the minimization of −J
    double rho;
  };
  std::deque<Pair> history;
  double last_df = std::numeric_limits<double>::infinity();
  double last_du = std::numeric_limits<double>::infinity();

  const auto direction = [&](const RealVector& grad) {
    // two-loop recursion on ∇(−J) = −grad, returning the ascent direction
    RealVector q = -grad;
    std::vector<double> alpha(history.size());
    for (std::size_t i = history.size(); i-- > 0;) {
      alpha[i] = history[i].rho * history[i].s.dot(q);
      q -= alpha[i] * history[i].y;
    }
    if (!history.empty()) {
      const auto& last = history.back();
      q *= last.s.dot(last.y) / last.y.squaredNorm();
    }
    for (std::size_t i = 0; i < history.size(); ++i) {
      const double beta = history[i].rho * history[i].y.dot(q);
      q += (alpha[i] - beta) * history[i].s;
    }
    return RealVector(-q);
  };

  result.termination_reason = TerminationReason::MaxIterations;
  int n = 0;
  for (; n < config.max_iters; ++n) {
    if (g.lpNorm<Eigen::Infinity>() <= config.grad_tol) {
      result.termination_reason = TerminationReason::GradientTolerance;
      result.converged = true;
      break;
    }
    if (std::abs(last_df) <= config.change_tol && last_du <= config.change_tol) {
      result.termination_reason = TerminationReason::ChangeTolerance;
      result.converged = true;
      break;
    }

    bool accepted = false;
    RealVector trial;
    double f_trial = f;
    // First attempt uses the quasi-Newton direction; on failure fall back to
    // the gradient once with fresh memory.
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      if (attempt == 1) {
        if (history.empty()) break;
        history.clear();
      }
      RealVector d = direction(g);
      double slope = d.dot(g);
      if (!(slope > 0.0)) {
        history.clear();
        d = g;
        slope = d.dot(g);
      }
      double step = config.line_search.initial_step;
      if (history.empty()) step = std::min(step, 1.0 / d.lpNorm<Eigen::Infinity>());
      for (int b = 0; b <= config.line_search.max_backtracks; ++b) {
        trial = u + step * d;
        f_trial = safe_value(trial);
        if (f_trial >= f + config.line_search.sufficient_increase * step * slope && f_trial > f) {
          accepted = true;
          break;
        }
        step *= config.line_search.contraction;
      }
    }
    if (!accepted) {
      result.termination_reason = TerminationReason::LineSearchFailure;
      break;
    }

    const RealVector g_trial = grad_of(trial);
    RealVector s = trial - u;
    RealVector y = -(g_trial - g);
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      history.push_back(Pair{s, y, 1.0 / sy});
      if (static_cast<int>(history.size()) > config.history_size) history.pop_front();
    }
    last_df = f_trial - f;
    last_du = s.lpNorm<Eigen::Infinity>();
    u = trial;
    f = f_trial;
    g = g_trial;
    result.trajectory.push_back({n + 1, f, g.lpNorm<Eigen::Infinity>()});
  }

  result.iterations = n;
  result.final_objective = f;
  result.reg_diag = u.array().exp().matrix();
  result.precoder = parametric_rzf(decomp, result.reg_diag, power, NormMode::PerAntenna);
  return result;
}

}  // namespace mumimo
