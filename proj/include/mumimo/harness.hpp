#pragma once

// Experiment runner: per-seed scenario generation, σ² calibration to each
// SU-SINR grid point, evaluation of every method under MMSE detection, and
// aggregation into CSV rows and plot series.

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "mumimo/channel.hpp"
#include "mumimo/channel_io.hpp"
#include "mumimo/detection.hpp"
#include "mumimo/metrics.hpp"
#include "mumimo/optimizer.hpp"
#include "mumimo/precoding.hpp"

namespace mumimo::harness {

struct MethodSpec {
  Method method = Method::MRT;
  Basis basis = Basis::V;

  bool operator==(const MethodSpec&) const = default;
};

inline std::string method_name(const MethodSpec& m) {
  return std::string(to_string(m.method)) + "(" + to_string(m.basis) + ")";
}

inline std::vector<MethodSpec> default_methods() {
  return {{Method::MRT, Basis::V},  {Method::ZF, Basis::V},   {Method::ZF, Basis::F},   {Method::RZF, Basis::V},
          {Method::RZF, Basis::F},  {Method::WRZF, Basis::V}, {Method::ARZF, Basis::V}, {Method::OPT, Basis::V}};
}

/// Accepts canonical names such as "RZF(F)" case-insensitively, plus the
/// short forms "rzf" (basis V) and "rzf_f".
inline MethodSpec parse_method(const std::string& text) {
  std::string t;
  for (char c : text) {
    if (c != ' ') t.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  }
  Basis basis = Basis::V;
  std::string head = t;
  if (t.size() > 3 && t.back() == ')' && t[t.size() - 3] == '(') {
    head = t.substr(0, t.size() - 3);
    const char b = t[t.size() - 2];
    if (b != 'V' && b != 'F') throw Error(ErrorKind::Config, "unknown basis in method '" + text + "'");
    basis = b == 'V' ? Basis::V : Basis::F;
  } else if (t.size() > 2 && t[t.size() - 2] == '_') {
    head = t.substr(0, t.size() - 2);
    const char b = t.back();
    if (b != 'V' && b != 'F') throw Error(ErrorKind::Config, "unknown basis in method '" + text + "'");
    basis = b == 'V' ? Basis::V : Basis::F;
  }
  Method m;
  if (head == "MRT") m = Method::MRT;
  else if (head == "ZF") m = Method::ZF;
  else if (head == "RZF") m = Method::RZF;
  else if (head == "WRZF") m = Method::WRZF;
  else if (head == "ARZF") m = Method::ARZF;
  else if (head == "OPT") m = Method::OPT;
  else throw Error(ErrorKind::Config, "unknown method '" + text + "'");
  const bool f_allowed = m == Method::ZF || m == Method::RZF;
  if (basis == Basis::F && !f_allowed) throw Error(ErrorKind::Config, "method '" + text + "' has no F-basis variant");
  return MethodSpec{m, basis};
}

/// "start:stop:step" (inclusive of stop within half a step) or "a,b,c".
inline std::vector<double> parse_susinr_grid(const std::string& text) {
  const auto num = [&](const std::string& s) {
    double x = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(x)) {
      throw Error(ErrorKind::Config, "bad SU-SINR value '" + s + "' in '" + text + "'");
    }
    return x;
  };
  const auto split = [](const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
      if (c == sep) {
        parts.push_back(cur);
        cur.clear();
      } else if (c != ' ') {
        cur.push_back(c);
      }
    }
    parts.push_back(cur);
    return parts;
  };
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    const auto p = split(text, ':');
    if (p.size() != 3) throw Error(ErrorKind::Config, "SU-SINR range must be start:stop:step");
    const double a = num(p[0]), b = num(p[1]), step = num(p[2]);
    if (!(step > 0.0) || b < a) throw Error(ErrorKind::Config, "SU-SINR range needs step > 0 and stop >= start");
    const auto n = static_cast<long>(std::floor((b - a) / step + 0.5));
    if (n > 100000) throw Error(ErrorKind::Config, "SU-SINR range too long");
    for (long i = 0; i <= n; ++i) out.push_back(a + static_cast<double>(i) * step);
  } else {
    for (const auto& s : split(text, ',')) out.push_back(num(s));
  }
  return out;
}

inline std::vector<MethodSpec> parse_method_list(const std::string& text) {
  std::vector<MethodSpec> out;
  std::string cur;
  for (char c : text + ",") {
    if (c == ',') {
      if (cur.empty()) throw Error(ErrorKind::Config, "empty entry in method list '" + text + "'");
      out.push_back(parse_method(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  return out;
}

struct SweepConfig {
  ScenarioConfig scenario;
  std::vector<double> susinr_grid_db{0, 4, 8, 12, 16, 20, 24, 28, 32, 36, 40};
  int seeds = 40;
  std::uint64_t seed_base = 0;
  std::vector<MethodSpec> methods = default_methods();
  double power = 1.0;
  OptConfig opt;
  bool skip_opt = false;
  int threads = 0;  // 0: hardware concurrency
  /// When non-empty, each dump file is one realization and replaces the generator.
  std::vector<std::string> channel_files;

  void validate() const {
    if (susinr_grid_db.empty()) throw Error(ErrorKind::Config, "sweep: empty SU-SINR grid");
    if (channel_files.empty()) {
      if (seeds < 1) throw Error(ErrorKind::Config, "sweep: seeds must be >= 1");
      scenario.validate();
    }
    if (methods.empty()) throw Error(ErrorKind::Config, "sweep: no methods selected");
    if (!(power > 0.0)) throw Error(ErrorKind::Config, "sweep: power must be positive");
    if (threads < 0) throw Error(ErrorKind::Config, "sweep: threads must be >= 0");
    opt.validate();
  }

  std::string scenario_name() const { return channel_files.empty() ? to_string(scenario.scenario) : "replay"; }

  /// Generator seed of realization i; spaced so retries never overlap.
  std::uint64_t realization_seed(int i) const { return seed_base + 1000u * static_cast<std::uint64_t>(i); }

  std::vector<MethodSpec> active_methods() const {
    std::vector<MethodSpec> out;
    for (const auto& m : methods) {
      if (skip_opt && m.method == Method::OPT) continue;
      if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
    }
    return out;
  }

  std::vector<double> sorted_grid() const {
    auto g = susinr_grid_db;
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    return g;
  }
};

struct SweepRow {
  std::string scenario;
  double susinr_db = 0.0;
  std::string method;
  double avg_sum_se = 0.0;
  double se_std = 0.0;
  double avg_min_se = 0.0;
  double min_se_std = 0.0;
  int seeds = 0;
  std::string detection = "mmse";
  int users = 0;  // K, not part of the CSV; 0 when unknown
};

struct SweepFailure {
  int seed = 0;
  std::optional<double> susinr_db;  // empty: whole realization failed
  std::string method;
  std::string message;
};

/// Per-seed values behind each row; NaN marks a failed cell.
struct SweepSamples {
  std::vector<double> grid;
  std::vector<MethodSpec> methods;
  int seeds = 0;
  std::vector<double> sum_se;  // [grid][method][seed]
  std::vector<double> min_se;

  std::size_t index(std::size_t g, std::size_t m, std::size_t s) const {
    return (g * methods.size() + m) * static_cast<std::size_t>(seeds) + s;
  }
  double sum(std::size_t g, std::size_t m, std::size_t s) const { return sum_se[index(g, m, s)]; }
  double min(std::size_t g, std::size_t m, std::size_t s) const { return min_se[index(g, m, s)]; }
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<SweepFailure> failures;
  SweepSamples samples;
};

/// Builds one method's precoder for a calibrated realization.
inline Precoder build_precoder(const ChannelSet& channels, const ChannelDecomposition& decomp, const MethodSpec& spec,
                               double sigma2, double power, const OptConfig& opt) {
  switch (spec.method) {
    case Method::MRT: return mrt(decomp, power);
    case Method::ZF: return zf(decomp, spec.basis, power);
    case Method::RZF: return rzf(decomp, spec.basis, precoding::default_lambda(decomp, sigma2, power), power);
    case Method::WRZF: return wrzf(decomp, sigma2, power);
    case Method::ARZF: return arzf(decomp, sigma2, power);
    case Method::OPT: return optimize(channels, decomp, sigma2, power, opt).precoder;
  }
  throw Error(ErrorKind::Config, "unhandled method");
}

inline MetricsReport evaluate_method(const ChannelSet& channels, const ChannelDecomposition& decomp,
                                     const MethodSpec& spec, double sigma2, double power, const OptConfig& opt) {
  const Precoder p = build_precoder(channels, decomp, spec, sigma2, power, opt);
  const DetectionSet det = mmse_detection(channels, p.w, sigma2);
  return metrics::report(channels, decomp, p, det, sigma2, power);
}

namespace detail {

struct Stats {
  double mean = 0.0;
  double std = 0.0;
  int count = 0;
};

inline Stats stats(const std::vector<double>& xs) {
  Stats s;
  double acc = 0.0;
  for (double x : xs) {
    if (std::isnan(x)) continue;
    acc += x;
    ++s.count;
  }
  if (s.count == 0) return s;
  s.mean = acc / s.count;
  if (s.count > 1) {
    double sq = 0.0;
    for (double x : xs) {
      if (!std::isnan(x)) sq += (x - s.mean) * (x - s.mean);
    }
    s.std = std::sqrt(sq / (s.count - 1));
  }
  return s;
}

}  // namespace detail

inline SweepResult run_sweep(const SweepConfig& config) {
  config.validate();
  const auto grid = config.sorted_grid();
  const auto methods = config.active_methods();
  const int realizations = config.channel_files.empty() ? config.seeds : static_cast<int>(config.channel_files.size());
  const double nan = std::numeric_limits<double>::quiet_NaN();

  SweepResult result;
  auto& samples = result.samples;
  samples.grid = grid;
  samples.methods = methods;
  samples.seeds = realizations;
  samples.sum_se.assign(grid.size() * methods.size() * static_cast<std::size_t>(realizations), nan);
  samples.min_se = samples.sum_se;

  std::vector<std::vector<SweepFailure>> failures(static_cast<std::size_t>(realizations));
  std::atomic<int> users{0};

  const auto work = [&](int seed) {
    auto& fails = failures[static_cast<std::size_t>(seed)];
    ChannelSet channels;
    ChannelDecomposition decomp;
    try {
      if (config.channel_files.empty()) {
        ScenarioConfig sc = config.scenario;
        sc.seed = config.realization_seed(seed);
        channels = generate_scenario(sc);
      } else {
        channels = io::read_channel_dump(config.channel_files[static_cast<std::size_t>(seed)]);
      }
      decomp = decompose(channels);
      users.store(channels.dims.num_users);
    } catch (const Error& e) {
      fails.push_back({seed, std::nullopt, "", e.what()});
      return;
    }
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const double sigma2 = calibrate_noise(decomp, config.power, grid[g]);
      for (std::size_t m = 0; m < methods.size(); ++m) {
        try {
          const auto rep = evaluate_method(channels, decomp, methods[m], sigma2, config.power, config.opt);
          const auto idx = samples.index(g, m, static_cast<std::size_t>(seed));
          samples.sum_se[idx] = rep.sum_se;
          samples.min_se[idx] = rep.min_se;
        } catch (const Error& e) {
          fails.push_back({seed, grid[g], method_name(methods[m]), e.what()});
        }
      }
    }
  };

  int threads = config.threads == 0 ? static_cast<int>(std::thread::hardware_concurrency()) : config.threads;
  threads = std::clamp(threads, 1, std::max(1, realizations));
  if (threads == 1) {
    for (int s = 0; s < realizations; ++s) work(s);
  } else {
    std::atomic<int> next{0};
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (int s = next++; s < realizations; s = next++) work(s);
      });
    }
  }

  for (auto& f : failures) result.failures.insert(result.failures.end(), f.begin(), f.end());

  const std::string scenario = config.scenario_name();
  for (std::size_t g = 0; g < grid.size(); ++g) {
    for (std::size_t m = 0; m < methods.size(); ++m) {
      std::vector<double> sums;
      std::vector<double> mins;
      for (int s = 0; s < realizations; ++s) {
        sums.push_back(samples.sum(g, m, static_cast<std::size_t>(s)));
        mins.push_back(samples.min(g, m, static_cast<std::size_t>(s)));
      }
      const auto a = detail::stats(sums);
      const auto b = detail::stats(mins);
      if (a.count == 0) continue;
      result.rows.push_back(SweepRow{scenario, grid[g], method_name(methods[m]), a.mean, a.std, b.mean, b.std, a.count,
                                     "mmse", users.load()});
    }
  }
  return result;
}

/// Shortest decimal representation that round-trips to the same double.
inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
  double x = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw Error(ErrorKind::Io, "cannot parse number '" + s + "'");
  }
  return x;
}

inline constexpr const char* kCsvHeader =
    "scenario,susinr_db,method,avg_sum_se,se_std,avg_min_se,min_se_std,seeds,detection";

inline std::string format_csv(const std::vector<SweepRow>& rows) {
  std::string out = kCsvHeader;
  out += '\n';
  for (const auto& r : rows) {
    out += r.scenario + ',' + format_double(r.susinr_db) + ',' + r.method + ',' + format_double(r.avg_sum_se) + ',' +
           format_double(r.se_std) + ',' + format_double(r.avg_min_se) + ',' + format_double(r.min_se_std) + ',' +
           std::to_string(r.seeds) + ',' + r.detection + '\n';
  }
  return out;
}

inline std::vector<SweepRow> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw Error(ErrorKind::Io, "CSV header mismatch");
  std::vector<SweepRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 9) throw Error(ErrorKind::Io, "CSV row has " + std::to_string(f.size()) + " fields");
    rows.push_back(SweepRow{f[0], parse_double(f[1]), f[2], parse_double(f[3]), parse_double(f[4]),
                            parse_double(f[5]), parse_double(f[6]), std::stoi(f[7]), f[8]});
  }
  return rows;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::Io, "cannot open " + path + " for writing");
  os << content;
  if (!os) throw Error(ErrorKind::Io, "failed writing " + path);
}

inline void emit_csv(const std::vector<SweepRow>& rows, const std::string& path) {
  if (rows.empty()) throw Error(ErrorKind::Io, "emit_csv: no rows to write");
  write_text_file(path, format_csv(rows));
}

/// One series per (scenario, method): x = SU-SINR in dB ascending,
/// y = mean sum-SE, plus per-user and min-SE companions.
inline nlohmann::json plotdata_json(const std::vector<SweepRow>& rows) {
  nlohmann::json series = nlohmann::json::array();
  std::vector<std::pair<std::string, std::string>> keys;
  for (const auto& r : rows) {
    std::pair<std::string, std::string> key{r.scenario, r.method};
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
  }
  for (const auto& [scenario, method] : keys) {
    std::vector<const SweepRow*> pts;
    for (const auto& r : rows) {
      if (r.scenario == scenario && r.method == method) pts.push_back(&r);
    }
    std::stable_sort(pts.begin(), pts.end(), [](const SweepRow* a, const SweepRow* b) { return a->susinr_db < b->susinr_db; });
    nlohmann::json s;
    s["scenario"] = scenario;
    s["method"] = method;
    s["x"] = nlohmann::json::array();
    s["y"] = nlohmann::json::array();
    s["y_per_user"] = nlohmann::json::array();
    s["y_min_se"] = nlohmann::json::array();
    s["seeds"] = nlohmann::json::array();
    for (const auto* p : pts) {
      s["x"].push_back(p->susinr_db);
      s["y"].push_back(p->avg_sum_se);
      if (p->users > 0) {
        s["y_per_user"].push_back(p->avg_sum_se / p->users);
      } else {
        s["y_per_user"].push_back(nullptr);
      }
      s["y_min_se"].push_back(p->avg_min_se);
      s["seeds"].push_back(p->seeds);
    }
    series.push_back(std::move(s));
  }
  return nlohmann::json{{"format", "mumimo-plotdata"}, {"version", 1}, {"x_label", "av_susinr_db"},
                        {"y_label", "avg_sum_se"}, {"series", std::move(series)}};
}

inline void emit_plotdata(const std::vector<SweepRow>& rows, const std::string& path) {
  if (rows.empty()) throw Error(ErrorKind::Io, "emit_plotdata: no rows to write");
  write_text_file(path, plotdata_json(rows).dump(2) + "\n");
}

inline nlohmann::json precoder_to_json(const Precoder& p) {
  nlohmann::json w = nlohmann::json::array();
  for (Index t = 0; t < p.w.rows(); ++t) {
    nlohmann::json row = nlohmann::json::array();
    for (Index l = 0; l < p.w.cols(); ++l) row.push_back({p.w(t, l).real(), p.w(t, l).imag()});
    w.push_back(std::move(row));
  }
  std::vector<double> reg(p.regularization.data(), p.regularization.data() + p.regularization.size());
  return nlohmann::json{{"method", to_string(p.method)}, {"basis", to_string(p.basis)},
                        {"norm_mode", to_string(p.norm_mode)}, {"mu", p.mu}, {"regularization", reg},
                        {"rows", p.w.rows()}, {"cols", p.w.cols()}, {"w", std::move(w)}};
}

inline std::string format_trajectory_csv(const OptResult& r) {
  std::string out = "iteration,objective,grad_norm\n";
  for (const auto& p : r.trajectory) {
    out += std::to_string(p.iteration) + ',' + format_double(p.objective) + ',' + format_double(p.grad_norm) + '\n';
  }
  return out;
}

}  // namespace mumimo::harness
