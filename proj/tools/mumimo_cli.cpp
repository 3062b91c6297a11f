// Command-line front end: run | verify | export-channels | trace.
// Exit codes: 0 success, 1 verification failure, 2 configuration error.

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "mumimo/mumimo.hpp"

namespace {

using namespace mumimo;

constexpr int kExitOk = 0;
constexpr int kExitVerify = 1;
constexpr int kExitConfig = 2;

Scenario parse_scenario(const std::string& s) {
  if (s == "equal") return Scenario::EqualPathloss;
  if (s == "varied") return Scenario::VariedPathloss;
  throw Error(ErrorKind::Config, "scenario must be 'equal' or 'varied'");
}

struct ScenarioFlags {
  std::string scenario = "varied";
  int users = 4;
  int tx = 64;
  int rx = 4;
  int layers = 2;
  double pl_low = -10.0;
  double pl_high = 10.0;
  int paths = 6;
  double path_decay = 1.0;
  double threshold = 0.3;
  int pool = 64;

  void attach(CLI::App* app) {
    app->add_option("--scenario", scenario, "equal | varied")->check(CLI::IsMember({"equal", "varied"}));
    app->add_option("--users", users, "number of users K");
    app->add_option("--tx", tx, "base-station antennas T");
    app->add_option("--rx", rx, "receive antennas per user");
    app->add_option("--layers", layers, "layers per user");
    app->add_option("--pathloss-low", pl_low, "varied scenario: lowest path loss, dB");
    app->add_option("--pathloss-high", pl_high, "varied scenario: highest path loss, dB");
    app->add_option("--paths", paths, "multipath components per user");
    app->add_option("--path-decay", path_decay, "power step between paths, dB");
    app->add_option("--corr-threshold", threshold, "max squared cosine between selected users");
    app->add_option("--pool", pool, "candidate users per draw");
  }

  ScenarioConfig build() const {
    ScenarioConfig c;
    c.dims = SystemDims::uniform(users, tx, rx, layers);
    c.scenario = parse_scenario(scenario);
    c.pathloss_low_db = pl_low;
    c.pathloss_high_db = pl_high;
    c.num_paths = paths;
    c.path_decay_db = path_decay;
    c.correlation_threshold = threshold;
    c.candidate_pool = pool;
    return c;
  }
};

struct OptFlags {
  int max_iters = 100;
  double grad_tol = 1e-5;
  double change_tol = 1e-9;

  void attach(CLI::App* app) {
    app->add_option("--opt-max-iters", max_iters, "OPT iteration cap");
    app->add_option("--opt-grad-tol", grad_tol, "OPT gradient tolerance");
    app->add_option("--opt-change-tol", change_tol, "OPT change tolerance");
  }

  OptConfig build() const {
    OptConfig c;
    c.max_iters = max_iters;
    c.grad_tol = grad_tol;
    c.change_tol = change_tol;
    return c;
  }
};

void print_failures(const harness::SweepResult& r) {
  for (const auto& f : r.failures) {
    std::cerr << "warning: seed " << f.seed;
    if (f.susinr_db) std::cerr << " at " << *f.susinr_db << " dB, " << f.method;
    std::cerr << ": " << f.message << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-user MIMO downlink precoding simulator"};
  app.set_config("--config", "", "TOML/INI file mirroring the command-line flags");
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "sweep SU-SINR and write aggregated spectral efficiency");
  ScenarioFlags run_scn;
  OptFlags run_opt;
  run_scn.attach(run);
  run_opt.attach(run);
  std::string susinr = "0:40:4";
  std::string methods = "MRT(V),ZF(V),ZF(F),RZF(V),RZF(F),WRZF(V),ARZF(V),OPT(V)";
  int seeds = 40;
  double power = 1.0;
  std::string out_path;
  std::string plot_path;
  std::string precoder_path;
  bool skip_opt = false;
  std::uint64_t seed_base = 0;
  int threads = 0;
  std::vector<std::string> channel_files;
  run->add_option("--susinr", susinr, "start:stop:step or comma list, dB");
  run->add_option("--seeds", seeds, "number of realizations");
  run->add_option("--methods", methods, "comma-separated methods, e.g. ARZF(V),RZF(F)");
  run->add_option("--power", power, "total transmit power P");
  run->add_option("--out", out_path, "CSV output path")->required();
  run->add_option("--plotdata", plot_path, "plot-data JSON output path");
  run->add_option("--precoders", precoder_path, "JSON dump of every precoder for the first realization and grid point");
  run->add_flag("--skip-opt", skip_opt, "omit the OPT method");
  run->add_option("--seed-base", seed_base, "base generator seed");
  run->add_option("--threads", threads, "worker threads, 0 = all cores");
  run->add_option("--channels", channel_files, "channel dump files to replay instead of generating");

  // verify
  auto* ver = app.add_subcommand("verify", "run the identity and property self-checks");
  std::uint64_t verify_seed = 1;
  ver->add_option("--seed", verify_seed, "seed for random instances");

  // export-channels
  auto* exp = app.add_subcommand("export-channels", "write one generated realization as a channel dump");
  ScenarioFlags exp_scn;
  exp_scn.attach(exp);
  std::uint64_t exp_seed = 0;
  std::string exp_out;
  exp->add_option("--seed", exp_seed, "generator seed");
  exp->add_option("--out", exp_out, "dump path")->required();

  // trace
  auto* tr = app.add_subcommand("trace", "run OPT on one realization and write its trajectory CSV");
  ScenarioFlags tr_scn;
  OptFlags tr_opt;
  tr_scn.attach(tr);
  tr_opt.attach(tr);
  std::uint64_t tr_seed = 0;
  double tr_susinr = 20.0;
  double tr_power = 1.0;
  std::string tr_out;
  tr->add_option("--seed", tr_seed, "generator seed");
  tr->add_option("--susinr", tr_susinr, "AvSUSINR target, dB");
  tr->add_option("--power", tr_power, "total transmit power P");
  tr->add_option("--out", tr_out, "trajectory CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*run) {
      harness::SweepConfig cfg;
      cfg.scenario = run_scn.build();
      cfg.susinr_grid_db = harness::parse_susinr_grid(susinr);
      cfg.seeds = seeds;
      cfg.seed_base = seed_base;
      cfg.methods = harness::parse_method_list(methods);
      cfg.power = power;
      cfg.opt = run_opt.build();
      cfg.skip_opt = skip_opt;
      cfg.threads = threads;
      cfg.channel_files = channel_files;
      cfg.validate();

      const auto result = harness::run_sweep(cfg);
      print_failures(result);
      if (result.rows.empty()) {
        std::cerr << "error: every evaluation failed; nothing to write\n";
        return kExitConfig;
      }
      harness::emit_csv(result.rows, out_path);
      if (!plot_path.empty()) harness::emit_plotdata(result.rows, plot_path);
      if (!precoder_path.empty()) {
        ChannelSet ch;
        if (cfg.channel_files.empty()) {
          ScenarioConfig sc = cfg.scenario;
          sc.seed = cfg.realization_seed(0);
          ch = generate_scenario(sc);
        } else {
          ch = io::read_channel_dump(cfg.channel_files.front());
        }
        const auto d = decompose(ch);
        const double grid0 = cfg.sorted_grid().front();
        const double sigma2 = calibrate_noise(d, cfg.power, grid0);
        nlohmann::json doc{{"susinr_db", grid0}, {"sigma2", sigma2}, {"precoders", nlohmann::json::array()}};
        for (const auto& m : cfg.active_methods()) {
          auto j = harness::precoder_to_json(harness::build_precoder(ch, d, m, sigma2, cfg.power, cfg.opt));
          j["name"] = harness::method_name(m);
          doc["precoders"].push_back(std::move(j));
        }
        harness::write_text_file(precoder_path, doc.dump(2) + "\n");
      }
      std::cout << "wrote " << result.rows.size() << " rows to " << out_path << "\n";
      return kExitOk;
    }
    if (*ver) {
      const auto checks = verify::run_all(verify_seed);
      bool ok = true;
      for (const auto& c : checks) {
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
        ok = ok && c.passed;
      }
      return ok ? kExitOk : kExitVerify;
    }
    if (*exp) {
      ScenarioConfig sc = exp_scn.build();
      sc.seed = exp_seed;
      io::write_channel_dump(exp_out, generate_scenario(sc));
      return kExitOk;
    }
    if (*tr) {
      ScenarioConfig sc = tr_scn.build();
      sc.seed = tr_seed;
      const auto ch = generate_scenario(sc);
      const auto d = decompose(ch);
      const double sigma2 = calibrate_noise(d, tr_power, tr_susinr);
      const auto r = optimize(ch, d, sigma2, tr_power, tr_opt.build());
      harness::write_text_file(tr_out, harness::format_trajectory_csv(r));
      std::cout << "OPT " << r.initial_objective << " -> " << r.final_objective << " in " << r.iterations
                << " iterations (" << to_string(r.termination_reason) << ")\n";
      return kExitOk;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (e.kind() == ErrorKind::Config || e.kind() == ErrorKind::Io) return kExitConfig;
    return kExitVerify;
  }
  return kExitConfig;
}
