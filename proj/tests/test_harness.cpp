#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "mumimo/harness.hpp"
#include "oracles.hpp"

using namespace mumimo;
using namespace mumimo::harness;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("mumimo_harness_" + name)).string();
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

SweepConfig small_config() {
  SweepConfig c;
  c.scenario.dims = SystemDims::uniform(3, 16, 2, 2);
  c.susinr_grid_db = {0.0, 10.0, 20.0};
  c.seeds = 4;
  c.methods = parse_method_list("MRT(V),RZF(V),WRZF(V),ARZF(V)");
  c.threads = 1;
  return c;
}

}  // namespace

TEST(ParseMethod, CanonicalAndShortForms) {
  EXPECT_EQ(parse_method("RZF(F)"), (MethodSpec{Method::RZF, Basis::F}));
  EXPECT_EQ(parse_method("rzf"), (MethodSpec{Method::RZF, Basis::V}));
  EXPECT_EQ(parse_method("zf_f"), (MethodSpec{Method::ZF, Basis::F}));
  EXPECT_EQ(parse_method(" arzf(v) "), (MethodSpec{Method::ARZF, Basis::V}));
  EXPECT_THROW(parse_method("ARZF(F)"), Error);
  EXPECT_THROW(parse_method("MRT(X)"), Error);
  EXPECT_THROW(parse_method("DPC"), Error);
  for (const auto& m : default_methods()) EXPECT_EQ(parse_method(method_name(m)), m);
  EXPECT_EQ(default_methods().size(), 8u);
}

TEST(ParseMethodList, SplitsAndRejectsEmpty) {
  const auto l = parse_method_list("MRT(V),ZF(F),OPT");
  ASSERT_EQ(l.size(), 3u);
  EXPECT_EQ(l[2].method, Method::OPT);
  EXPECT_THROW(parse_method_list("MRT,,ZF"), Error);
  EXPECT_THROW(parse_method_list(""), Error);
}

TEST(ParseSusinrGrid, RangesAndLists) {
  EXPECT_EQ(parse_susinr_grid("0:40:4").size(), 11u);
  EXPECT_EQ(parse_susinr_grid("0:40:4").back(), 40.0);
  EXPECT_EQ(parse_susinr_grid("0:10:3"), (std::vector<double>{0, 3, 6, 9}));
  EXPECT_EQ(parse_susinr_grid("5"), (std::vector<double>{5}));
  EXPECT_EQ(parse_susinr_grid("-2.5, 7,12"), (std::vector<double>{-2.5, 7, 12}));
  EXPECT_THROW(parse_susinr_grid("0:10:0"), Error);
  EXPECT_THROW(parse_susinr_grid("10:0:1"), Error);
  EXPECT_THROW(parse_susinr_grid("0:10"), Error);
  EXPECT_THROW(parse_susinr_grid("a,b"), Error);
  EXPECT_THROW(parse_susinr_grid("1,,2"), Error);
}

TEST(SweepConfig, ValidationAndHelpers) {
  SweepConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.sorted_grid().size(), 11u);
  c.susinr_grid_db = {8, 0, 8, 4};
  EXPECT_EQ(c.sorted_grid(), (std::vector<double>{0, 4, 8}));
  c.skip_opt = true;
  EXPECT_EQ(c.active_methods().size(), 7u);
  c.methods = parse_method_list("MRT,MRT(V),ZF");
  EXPECT_EQ(c.active_methods().size(), 2u);
  EXPECT_EQ(c.realization_seed(3), 3000u);
  c.seeds = 0;
  EXPECT_THROW(c.validate(), Error);
  c.seeds = 1;
  c.susinr_grid_db.clear();
  EXPECT_THROW(c.validate(), Error);
  c.susinr_grid_db = {0};
  c.power = 0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(RunSweep, OneSeedOnePointOneMethodIsOneRow) {
  SweepConfig c;
  c.susinr_grid_db = {10.0};
  c.seeds = 1;
  c.methods = {MethodSpec{Method::MRT, Basis::V}};
  const auto r = run_sweep(c);
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.rows[0].seeds, 1);
  EXPECT_EQ(r.rows[0].method, "MRT(V)");
  EXPECT_EQ(r.rows[0].scenario, "varied");
  EXPECT_EQ(r.rows[0].se_std, 0.0);
  EXPECT_EQ(r.rows[0].detection, "mmse");
}

TEST(RunSweep, RowOrderAndSampleConsistency) {
  const auto c = small_config();
  const auto r = run_sweep(c);
  ASSERT_EQ(r.rows.size(), 12u);
  EXPECT_TRUE(r.failures.empty());
  for (std::size_t g = 0; g < 3; ++g) {
    for (std::size_t m = 0; m < 4; ++m) {
      const auto& row = r.rows[g * 4 + m];
      EXPECT_EQ(row.susinr_db, c.susinr_grid_db[g]);
      EXPECT_EQ(row.method, method_name(c.methods[m]));
      double acc = 0.0;
      for (std::size_t s = 0; s < 4; ++s) acc += r.samples.sum(g, m, s);
      EXPECT_NEAR(row.avg_sum_se, acc / 4.0, 1e-12 * acc);
      EXPECT_LE(row.avg_min_se * 3.0, row.avg_sum_se + 1e-12);
    }
  }
}

TEST(RunSweep, SamplesMatchDirectEvaluation) {
  const auto c = small_config();
  const auto r = run_sweep(c);
  ScenarioConfig sc = c.scenario;
  sc.seed = c.realization_seed(2);
  const auto ch = generate_scenario(sc);
  const auto d = decompose(ch);
  const double sigma2 = calibrate_noise(d, 1.0, 10.0);
  const auto w = arzf(d, sigma2, 1.0).w;
  const auto ref = oracle::spectral_efficiency(ch, oracle::layer_sinrs(ch, w, oracle::mmse(ch, w, sigma2), sigma2));
  EXPECT_NEAR(r.samples.sum(1, 3, 2), ref.sum, 1e-10 * ref.sum);
  EXPECT_NEAR(r.samples.min(1, 3, 2), ref.min, 1e-10 * ref.sum);
}

TEST(RunSweep, DeterministicAndThreadInvariant) {
  auto c = small_config();
  const std::string a = format_csv(run_sweep(c).rows);
  EXPECT_EQ(a, format_csv(run_sweep(c).rows));
  c.threads = 3;
  EXPECT_EQ(a, format_csv(run_sweep(c).rows));
  c.seed_base = 17;
  EXPECT_NE(a, format_csv(run_sweep(c).rows));
}

TEST(RunSweep, EqualSingularValueReplayCollapsesWrzfOntoArzf) {
  std::mt19937_64 rng(81);
  std::vector<std::string> files;
  for (int n = 0; n < 3; ++n) {
    ChannelSet ch;
    ch.dims = SystemDims::uniform(3, 8, 2, 2);
    for (int k = 0; k < 3; ++k) {
      const ComplexMatrix q = oracle::random_matrix(rng, 8, 2).householderQr().householderQ() *
                              ComplexMatrix::Identity(8, 2);
      ch.per_user.push_back(1.5 * q.transpose());
      ch.path_loss_db.push_back(0.0);
    }
    files.push_back(temp_path("eq" + std::to_string(n) + ".bin"));
    io::write_channel_dump(files.back(), ch);
  }
  SweepConfig c;
  c.channel_files = files;
  c.methods = parse_method_list("WRZF(V),ARZF(V)");
  c.threads = 1;
  const auto r = run_sweep(c);
  ASSERT_EQ(r.rows.size(), 2 * c.susinr_grid_db.size());
  for (std::size_t i = 0; i < r.rows.size(); i += 2) {
    EXPECT_EQ(r.rows[i].scenario, "replay");
    EXPECT_EQ(r.rows[i].seeds, 3);
    EXPECT_NEAR(r.rows[i].avg_sum_se, r.rows[i + 1].avg_sum_se, 1e-6 * r.rows[i].avg_sum_se);
  }
  for (const auto& f : files) std::filesystem::remove(f);
}

TEST(RunSweep, FailuresReduceSeedCounts) {
  // the second dump has two identical users, so ZF cannot invert its Gram
  std::mt19937_64 rng(82);
  std::vector<std::string> files;
  for (int n = 0; n < 3; ++n) {
    ChannelSet ch;
    ch.dims = SystemDims::uniform(2, 6, 2, 2);
    const ComplexMatrix h = oracle::random_matrix(rng, 2, 6);
    ch.per_user = {h, n == 1 ? h : oracle::random_matrix(rng, 2, 6)};
    ch.path_loss_db = {0.0, 0.0};
    files.push_back(temp_path("fail" + std::to_string(n) + ".bin"));
    io::write_channel_dump(files.back(), ch);
  }
  SweepConfig c;
  c.channel_files = files;
  c.susinr_grid_db = {0.0, 10.0};
  c.methods = parse_method_list("ZF(V),ARZF(V)");
  const auto r = run_sweep(c);
  int total = 0;
  for (const auto& row : r.rows) {
    total += row.seeds;
    if (row.method == "ZF(V)") {
      EXPECT_EQ(row.seeds, 2);
    }
  }
  const int configured = 3 * 2 * 2;
  EXPECT_EQ(total, configured - static_cast<int>(r.failures.size()));
  ASSERT_FALSE(r.failures.empty());
  for (const auto& f : r.failures) {
    EXPECT_EQ(f.seed, 1);
    EXPECT_EQ(f.method, "ZF(V)");
  }
  for (const auto& f : files) std::filesystem::remove(f);
}

TEST(RunSweep, UnreadableDumpIsRecordedAsRealizationFailure) {
  SweepConfig c;
  c.channel_files = {temp_path("missing.bin")};
  c.susinr_grid_db = {0.0};
  c.methods = parse_method_list("MRT");
  const auto r = run_sweep(c);
  EXPECT_TRUE(r.rows.empty());
  ASSERT_EQ(r.failures.size(), 1u);
  EXPECT_FALSE(r.failures[0].susinr_db.has_value());
}

TEST(Csv, HeaderAndRoundTrip) {
  const auto rows = run_sweep(small_config()).rows;
  const std::string text = format_csv(rows);
  EXPECT_EQ(text.substr(0, text.find('\n')),
            "scenario,susinr_db,method,avg_sum_se,se_std,avg_min_se,min_se_std,seeds,detection");
  EXPECT_EQ(text.find('\r'), std::string::npos);
  const auto back = parse_csv(text);
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back[i].scenario, rows[i].scenario);
    EXPECT_EQ(back[i].susinr_db, rows[i].susinr_db);
    EXPECT_EQ(back[i].method, rows[i].method);
    EXPECT_EQ(back[i].avg_sum_se, rows[i].avg_sum_se);
    EXPECT_EQ(back[i].se_std, rows[i].se_std);
    EXPECT_EQ(back[i].avg_min_se, rows[i].avg_min_se);
    EXPECT_EQ(back[i].min_se_std, rows[i].min_se_std);
    EXPECT_EQ(back[i].seeds, rows[i].seeds);
  }
  EXPECT_THROW(parse_csv("bad header\n"), Error);
}

TEST(Csv, OneRowIsTwoLines) {
  const std::string path = temp_path("one.csv");
  emit_csv({SweepRow{"equal", 4.0, "MRT(V)", 1.5, 0.1, 0.5, 0.05, 1, "mmse"}}, path);
  const std::string text = slurp(path);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
  EXPECT_EQ(text, std::string(kCsvHeader) + "\nequal,4,MRT(V),1.5,0.1,0.5,0.05,1,mmse\n");
  std::filesystem::remove(path);
}

TEST(Csv, EmptyRowsCreateNoFile) {
  const std::string path = temp_path("empty.csv");
  std::filesystem::remove(path);
  EXPECT_THROW(emit_csv({}, path), Error);
  EXPECT_FALSE(std::filesystem::exists(path));
  EXPECT_THROW(emit_plotdata({}, path), Error);
  EXPECT_FALSE(std::filesystem::exists(path));
}

TEST(FormatDouble, RoundTripsExactly) {
  std::mt19937_64 rng(83);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  for (int n = 0; n < 1000; ++n) {
    const double x = u(rng);
    EXPECT_EQ(parse_double(format_double(x)), x);
  }
  EXPECT_THROW(parse_double("1.5x"), Error);
}

TEST(Plotdata, SeriesMatchRows) {
  auto c = small_config();
  c.methods = parse_method_list("MRT,ARZF");
  c.susinr_grid_db = {20.0, 0.0, 10.0};
  const auto rows = run_sweep(c).rows;
  const auto j = plotdata_json(rows);
  EXPECT_EQ(j["format"], "mumimo-plotdata");
  ASSERT_EQ(j["series"].size(), 2u);
  for (const auto& s : j["series"]) {
    ASSERT_EQ(s["x"].size(), 3u);
    ASSERT_EQ(s["y_per_user"].size(), 3u);
    for (std::size_t i = 1; i < 3; ++i) EXPECT_LT(s["x"][i - 1].get<double>(), s["x"][i].get<double>());
    for (std::size_t i = 0; i < 3; ++i) {
      const auto row = std::find_if(rows.begin(), rows.end(), [&](const SweepRow& r) {
        return r.method == s["method"].get<std::string>() && r.susinr_db == s["x"][i].get<double>();
      });
      ASSERT_NE(row, rows.end());
      EXPECT_EQ(s["y"][i].get<double>(), row->avg_sum_se);
      EXPECT_EQ(s["y_min_se"][i].get<double>(), row->avg_min_se);
      EXPECT_EQ(s["y_per_user"][i].get<double>(), row->avg_sum_se / 3.0);
    }
  }
  // emitted file parses back to the same document
  const std::string path = temp_path("plot.json");
  emit_plotdata(rows, path);
  EXPECT_EQ(nlohmann::json::parse(slurp(path)), j);
  std::filesystem::remove(path);
}

TEST(PrecoderJson, CarriesAllFields) {
  ScenarioConfig sc;
  const auto ch = generate_scenario(sc);
  const auto d = decompose(ch);
  const auto p = arzf(d, 0.1, 1.0);
  const auto j = precoder_to_json(p);
  EXPECT_EQ(j["method"], "ARZF");
  EXPECT_EQ(j["basis"], "V");
  EXPECT_EQ(j["norm_mode"], "per_antenna");
  EXPECT_EQ(j["rows"], 64);
  EXPECT_EQ(j["cols"], 8);
  EXPECT_EQ(j["regularization"].size(), 8u);
  EXPECT_EQ(j["mu"].get<double>(), p.mu);
  EXPECT_EQ(j["w"][5][3][0].get<double>(), p.w(5, 3).real());
  EXPECT_EQ(j["w"][5][3][1].get<double>(), p.w(5, 3).imag());
}

TEST(Trajectory, CsvShape) {
  ScenarioConfig sc;
  sc.dims = SystemDims::uniform(2, 8, 2, 2);
  const auto ch = generate_scenario(sc);
  const auto d = decompose(ch);
  const auto r = optimize(ch, d, calibrate_noise(d, 1.0, 10.0), 1.0);
  const std::string text = format_trajectory_csv(r);
  EXPECT_EQ(text.substr(0, text.find('\n')), "iteration,objective,grad_norm");
  EXPECT_EQ(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')), r.trajectory.size() + 1);
}
