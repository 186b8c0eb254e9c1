#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "qprobe/config.hpp"
#include "qprobe/csv.hpp"
#include "qprobe/sweep.hpp"

using namespace qprobe;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct RunResult {
  int code = -1;
  std::string out;
};

// Runs the CLI with stdout captured to a file; stderr is discarded.
RunResult run_cli(const std::string& args, const std::string& env = "") {
  static int counter = 0;
  const fs::path out = fs::temp_directory_path() / ("qprobe_cli_test_" + std::to_string(::getpid()) + "_" +
                                                    std::to_string(counter++) + ".txt");
  const std::string cmd = env + " " + QPROBE_CLI_PATH + " " + args + " > " + out.string() + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(out);
  fs::remove(out);
  return r;
}

fs::path temp_path(const std::string& name) {
  return fs::temp_directory_path() / ("qprobe_" + std::to_string(::getpid()) + "_" + name);
}

}  // namespace

TEST(Config, ParsesKeyValueLinesWithComments) {
  std::istringstream in("# ring setup\nmodel = ring\n  L=24 \nxin = 12 # start\n\nmean = 0.6\n");
  const auto cfg = parse_config(in);
  EXPECT_EQ(cfg.at("model"), "ring");
  EXPECT_EQ(cfg.at("L"), "24");
  EXPECT_EQ(cfg.at("xin"), "12");
  EXPECT_EQ(get_double(cfg, "mean", 0.0), 0.6);
  EXPECT_EQ(get_integer(cfg, "xd", 3), 3);
}

TEST(Config, RejectsMalformedInput) {
  std::istringstream no_eq("model ring\n");
  EXPECT_THROW(parse_config(no_eq), ConfigError);
  std::istringstream empty_key(" = 3\n");
  EXPECT_THROW(parse_config(empty_key), ConfigError);
  ConfigMap cfg{{"L", "7x"}, {"mean", "abc"}};
  EXPECT_THROW(get_integer(cfg, "L", 0), ConfigError);
  EXPECT_THROW(get_double(cfg, "mean", 0.0), ConfigError);
  EXPECT_THROW(load_config_file("/nonexistent/qprobe.cfg"), ConfigError);
}

TEST(Config, BuildsModelsAndDistributions) {
  const auto ring = model_from_config({{"L", "6"}, {"xin", "1"}, {"xd", "0"}});
  EXPECT_EQ(ring.dim(), 6);
  const auto tls = model_from_config({{"model", "tls"}, {"gamma", "2"}});
  EXPECT_EQ(tls.hamiltonian(0, 1), cplx(-2.0));
  EXPECT_TRUE(tls.is_return());
  const auto dense = model_from_config(
      {{"model", "dense"}, {"hamiltonian", "0 0  1 0  1 0  0 0"}, {"psi_in", "1 0 1 0"}, {"xd", "1"}});
  EXPECT_NEAR(dense.psi_in.norm(), 1.0, 1e-15);
  EXPECT_NEAR(std::abs(dense.psi_in(0)), std::sqrt(0.5), 1e-15);
  EXPECT_THROW(model_from_config({{"model", "dense"}, {"hamiltonian", "0 0 1 0 2 0"}}), ConfigError);
  EXPECT_THROW(model_from_config({{"model", "dense"}, {"hamiltonian", "0 0 0 1 0 1 0 0"}}), ConfigError);
  EXPECT_THROW(model_from_config({{"model", "lattice"}}), ConfigError);
  EXPECT_THROW(model_from_config({{"L", "1"}}), ConfigError);

  EXPECT_EQ(dist_from_config({{"dist", "fixed"}, {"tau", "0.7"}}).describe(), "fixed(tau=0.7)");
  EXPECT_EQ(dist_from_config({{"dist", "gamma"}, {"alpha", "5"}, {"mean", "0.6"}}).describe(),
            "gamma(alpha=5, mean=0.6)");
  EXPECT_THROW(dist_from_config({{"dist", "weibull"}}), ConfigError);
  EXPECT_THROW(dist_from_config({{"dist", "exp"}, {"mean", "-1"}}), ConfigError);
}

TEST(Config, GridParsing) {
  const auto g = parse_grid("0.5:1.5:0.25");
  ASSERT_EQ(g.size(), 5u);
  EXPECT_DOUBLE_EQ(g.back(), 1.5);
  EXPECT_EQ(parse_grid("0.1, 0.2,0.4").size(), 3u);
  EXPECT_THROW(parse_grid("0.3,0.2"), ConfigError);
  EXPECT_THROW(parse_grid("0.2,0.2"), ConfigError);
  EXPECT_THROW(parse_grid("0:1:0.5"), ConfigError);
  EXPECT_THROW(parse_grid("1:2"), ConfigError);
  EXPECT_THROW(parse_grid("1:2:-1"), ConfigError);
  EXPECT_THROW(parse_grid(""), ConfigError);
}

TEST(Csv, QuotesOnlyWhenNeeded) {
  EXPECT_EQ(csv_field("plain"), "plain");
  EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(csv_field("two\nlines"), "\"two\nlines\"");
  std::ostringstream out;
  write_csv_row(out, {"x", "error: a, b"});
  EXPECT_EQ(out.str(), "x,\"error: a, b\"\n");
}

TEST(Csv, RealsRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, 63.0, 1e-300, -2.5e17}) {
    EXPECT_EQ(std::stod(format_real(v)), v);
  }
  EXPECT_EQ(format_real(NAN), "nan");
  EXPECT_EQ(format_real(-INFINITY), "-inf");
}

TEST(Sweep, ExponentialMeanFallsMonotonically) {
  SweepSpec spec;
  spec.model = build_ring(7, 1.0, 1, 0);
  spec.grid = parse_grid("0.05:3.0:0.05");
  const auto rows = run_sweep(spec);
  ASSERT_EQ(rows.size(), spec.grid.size());
  for (size_t i = 1; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].axis_value, spec.grid[i]);
    EXPECT_LE(rows[i].values[0] - rows[i - 1].values[0], 0.0) << "mu=" << rows[i].axis_value;
  }
}

TEST(Sweep, ZenoConstantAtSmallMean) {
  // n_mean * mu^2 -> x_d (L - x_d) / (8 gamma^2) for odd rings.
  SweepSpec spec;
  spec.model = build_ring(7, 1.0, 1, 0);
  spec.grid = {1e-3, 2e-3, 4e-3};
  const auto rows = run_sweep(spec);
  for (const auto& r : rows) {
    EXPECT_NEAR(r.values[0] * r.axis_value * r.axis_value, 6.0 / 8.0, 1e-4);
  }
}

TEST(Sweep, ExceptionalFixedTauIsFlaggedAndSweepContinues) {
  SweepSpec spec;
  spec.model = build_two_level(1.0, 0, 0);
  spec.family = IntervalKind::fixed;
  spec.grid = {3.0, M_PI, 3.3};
  spec.outputs = {SweepOutput::n_mean, SweepOutput::n_sq};
  const auto rows = run_sweep(spec);
  EXPECT_EQ(rows[0].status, "ok");
  EXPECT_EQ(rows[1].status, "ill_conditioned");
  EXPECT_TRUE(std::isnan(rows[1].values[0]));
  EXPECT_GT(rows[1].j_condition, 1e12);
  EXPECT_EQ(rows[2].status, "ok");
  EXPECT_NEAR(rows[2].values[0], 2.0, 1e-10);
}

TEST(Sweep, RowOrderIndependentOfThreadCount) {
  SweepSpec spec;
  spec.model = build_ring(7, 1.0, 1, 0);
  spec.family = IntervalKind::gamma;
  spec.alpha = 25.0;
  spec.grid = parse_grid("1.0:2.0:0.05");
  spec.outputs = parse_sweep_outputs("n_mean,t_sq,lambda_max");
  const auto a = run_sweep(spec, 1);
  const auto b = run_sweep(spec, 3);
  std::ostringstream sa, sb;
  write_sweep_csv(sa, spec, a);
  write_sweep_csv(sb, spec, b);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(sa.str().substr(0, sa.str().find('\n')), "mean_tau,n_mean,t_sq,lambda_max,j_condition,status");
}

TEST(Sweep, AlphaAxisRequiresGammaFamily) {
  SweepSpec spec;
  spec.model = build_ring(5, 1.0, 0, 1);
  spec.axis = SweepAxis::alpha;
  spec.grid = {1.0, 2.0};
  EXPECT_THROW(run_sweep(spec), ConfigError);
  spec.family = IntervalKind::gamma;
  spec.mean_tau = 0.8;
  const auto rows = run_sweep(spec);
  EXPECT_EQ(rows[1].status, "ok");
  EXPECT_THROW(parse_sweep_outputs("n_mean,bogus"), ConfigError);
  EXPECT_THROW(parse_sweep_axis("sigma"), ConfigError);
}

TEST(Cli, StatsReportsPaperValueAndEchoesConfig) {
  const auto r = run_cli("stats --L 24 --xin 12 --xd 0 --dist exp --mean 0.6");
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_NEAR(j["n_mean"].get<double>(), 63.0, 1e-6);
  EXPECT_EQ(j["config"]["L"], "24");
  EXPECT_EQ(j["reduced_dim"], 13);
  EXPECT_TRUE(j["identity"]["passed"].get<bool>());
}

TEST(Cli, FlagsOverrideConfigFile) {
  const auto cfg = temp_path("ring.cfg");
  std::ofstream(cfg) << "model = ring\nL = 9\nxin = 0\nxd = 0\ndist = exp\nmean = 0.6\n";
  const auto file_only = run_cli("stats --config " + cfg.string());
  ASSERT_EQ(file_only.code, 0);
  EXPECT_NEAR(nlohmann::json::parse(file_only.out)["n_mean"].get<double>(), 5.0, 1e-7);
  const auto overridden = run_cli("stats --config " + cfg.string() + " --L 7");
  ASSERT_EQ(overridden.code, 0);
  const auto j = nlohmann::json::parse(overridden.out);
  EXPECT_NEAR(j["n_mean"].get<double>(), 4.0, 1e-7);
  EXPECT_EQ(j["config"]["L"], "7");
  fs::remove(cfg);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run_cli("stats --model tls --dist fixed --tau 3.141592653589793").code, 1);
  EXPECT_EQ(run_cli("stats --model tls --dist fixed --tau 3.141592653589793 --pseudo-inverse").code, 0);
  EXPECT_EQ(run_cli("stats --L 1").code, 2);
  EXPECT_EQ(run_cli("stats --dist weibull").code, 2);
  EXPECT_EQ(run_cli("stats --unknown-flag").code, 2);
  EXPECT_EQ(run_cli("sweep --L 7").code, 2);
  EXPECT_EQ(run_cli("stats --config /nonexistent.cfg").code, 2);
  EXPECT_EQ(run_cli("").code, 2);
}

TEST(Cli, FnWritesCsvSeries) {
  const auto r = run_cli("fn --L 6 --xin 0 --xd 1 --dist exp --mean 0.6 --nmax 5");
  ASSERT_EQ(r.code, 0);
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "n,fn,cumulative");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 5);
}

TEST(Cli, SweepWritesOneRowPerGridPoint) {
  const auto r = run_cli("sweep --L 7 --xin 1 --xd 0 --dist gamma --alpha 5 --grid 0.5:1.5:0.25 --outputs n_mean,p_det");
  ASSERT_EQ(r.code, 0);
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "mean_tau,n_mean,p_det,j_condition,status");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_NE(line.find(",ok"), std::string::npos);
  }
  EXPECT_EQ(rows, 5);
}

TEST(Cli, MonteCarloIsReproducibleAcrossRunsAndThreadCounts) {
  const auto a = temp_path("mc_a.csv");
  const auto b = temp_path("mc_b.csv");
  const std::string args = "mc --L 6 --xin 0 --xd 1 --dist exp --mean 0.6 --nreal 2000 --seed 42 --nabort 20000";
  const auto ra = run_cli(args + " --out " + a.string(), "QPROBE_THREADS=1");
  const auto rb = run_cli(args + " --out " + b.string(), "QPROBE_THREADS=3");
  ASSERT_EQ(ra.code, 0);
  ASSERT_EQ(rb.code, 0);
  EXPECT_EQ(read_file(a), read_file(b));
  EXPECT_EQ(read_file(a).substr(0, 23), "realization,n,t,censore");
  const auto ja = nlohmann::json::parse(ra.out);
  EXPECT_EQ(ja["config"]["seed"], "42");
  const double censored = ja["censored"].get<double>() / 2000.0;
  EXPECT_NEAR(censored, 0.5, 4.0 * std::sqrt(0.25 / 2000.0));
  fs::remove(a);
  fs::remove(b);
}

TEST(Cli, PerRealizationSummaryHasNbarStatistics) {
  const auto out = temp_path("pr.csv");
  const auto r = run_cli("mc --model tls --dist exp --mean 0.6 --mode per_realization --nreal 4000 --ncut 150 --bins 10 --out " +
                         out.string());
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_NEAR(j["n_bar_mean"].get<double>(), 2.0, 4.0 * j["n_bar_mean_stderr"].get<double>());
  EXPECT_EQ(j["histogram"]["density"].size(), 10u);
  fs::remove(out);
}
