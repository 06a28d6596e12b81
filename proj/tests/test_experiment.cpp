#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "savnls/experiment.hpp"

using namespace savnls;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"(
problem = soliton
M = 100
p = 2
k = 2
tau = 1/10
T = 0.3
)";

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("savnls_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

std::string usage_key(const std::string& text, const ConfigOverrides& o = {},
                      Subcommand cmd = Subcommand::Run) {
  try {
    parse_config_text(text, o, cmd);
  } catch (const UsageError& e) {
    return e.key();
  }
  return "<none>";
}

}  // namespace

TEST(ParseConfig, MinimalSolitonDefaults) {
  const ExperimentConfig c = parse_config_text(kMinimal);
  EXPECT_EQ(c.problem, Problem::Soliton1D);
  EXPECT_EQ(c.M, 100);
  EXPECT_EQ(c.p, 2);
  EXPECT_EQ(c.k, 2);
  EXPECT_DOUBLE_EQ(c.tau, 0.1);
  EXPECT_DOUBLE_EQ(c.T, 0.3);
  EXPECT_EQ(c.a, -20.0);
  EXPECT_EQ(c.b, 20.0);
  EXPECT_EQ(c.c0, 1.0);
  EXPECT_EQ(c.newton_tol, 1e-10);
  EXPECT_EQ(c.kappa, 2.0);
  EXPECT_EQ(c.q, 3.0);
  EXPECT_EQ(c.bc, BoundaryCondition::Periodic);
  EXPECT_FALSE(c.full_jacobian);
}

TEST(ParseConfig, OverridesWinInOrder) {
  const ExperimentConfig c =
      parse_config_text(kMinimal, {{"tau", "0.05"}, {"M", "50"}, {"tau", "0.1"}, {"c0", "2.5"}});
  EXPECT_DOUBLE_EQ(c.tau, 0.1);
  EXPECT_EQ(c.M, 50);
  EXPECT_EQ(c.c0, 2.5);
  EXPECT_DOUBLE_EQ(parse_config_text(kMinimal, {{"tau", "0.1"}}).tau, 0.1);
}

TEST(ParseConfig, RejectsWithOffendingKey) {
  const std::string base = "problem = soliton\nM = 10\np = 1\nk = 1\n";
  EXPECT_EQ(usage_key(base + "tau = 0.3\nT = 1\n"), "tau");
  EXPECT_EQ(usage_key(std::string(kMinimal) + "flux = 3\n"), "flux");
  EXPECT_EQ(usage_key(base + "T = 1\n"), "tau");
  EXPECT_EQ(usage_key(kMinimal, {{"M", "ten"}}), "M");
  EXPECT_EQ(usage_key(kMinimal, {{"M", "2.5"}}), "M");
  EXPECT_EQ(usage_key(kMinimal, {{"p", "0"}}), "p");
  EXPECT_EQ(usage_key(kMinimal, {{"k", "0"}}), "k");
  EXPECT_EQ(usage_key(kMinimal, {{"c0", "0"}}), "c0");
  EXPECT_EQ(usage_key(kMinimal, {{"newton_tol", "-1"}}), "newton_tol");
  EXPECT_EQ(usage_key(kMinimal, {{"bc", "neumann"}}), "bc");
  EXPECT_EQ(usage_key(kMinimal, {{"problem", "kdv"}}), "problem");
  EXPECT_EQ(usage_key(kMinimal, {{"nonlinearity", "cubic_quintic"}}), "nonlinearity");
  EXPECT_EQ(usage_key(kMinimal, {{"problem", "plane_wave"}, {"bc", "dirichlet"}}), "bc");
  EXPECT_EQ(usage_key(kMinimal), "<none>");
}

TEST(ParseConfig, SubcommandRequirements) {
  const std::string time = "M = 40\np = 1\nk = 2\nT = 0.2\ntau_list = 0.1, 0.05\n";
  EXPECT_EQ(usage_key(time, {}, Subcommand::SweepTime), "<none>");
  EXPECT_EQ(usage_key(time, {}, Subcommand::Run), "tau");
  const std::string space = "p = 1\nk = 2\ntau = 0.1\nT = 0.2\nM_list = 20 40\n";
  const ExperimentConfig c = parse_config_text(space, {}, Subcommand::SweepSpace);
  EXPECT_EQ(c.M_list, (std::vector<int>{20, 40}));
  EXPECT_EQ(usage_key("p = 1\nk = 2\ntau = 0.1\nT = 0.2\n", {}, Subcommand::SweepSpace), "M_list");
  // every tau in the list has to divide T
  EXPECT_EQ(usage_key(time, {{"tau_list", "0.1 0.03"}}, Subcommand::SweepTime), "tau_list");
}

TEST(ParseConfig, FractionsCommentsAndLists) {
  EXPECT_DOUBLE_EQ(parse_real("tau", "1/20"), 0.05);
  EXPECT_DOUBLE_EQ(parse_real("tau", " 2.5e-1 "), 0.25);
  EXPECT_THROW(parse_real("tau", "1/0"), UsageError);
  EXPECT_THROW(parse_real("tau", "0.1x"), UsageError);
  EXPECT_THROW(parse_real("tau", ""), UsageError);
  const ExperimentConfig c = parse_config_text(
      "# header\nM = 40   # elements\np=1\nk=2\nT=1\ntau=1/4\n\ntau_list = 1/20, 1/25,1/30\n");
  EXPECT_DOUBLE_EQ(c.tau, 0.25);
  ASSERT_EQ(c.tau_list.size(), 3u);
  EXPECT_DOUBLE_EQ(c.tau_list[1], 1.0 / 25);
  EXPECT_THROW(read_config_text("M 40\n"), UsageError);
}

TEST(ParseConfig, ReadsFileThenOverrides) {
  const fs::path d = fresh_dir("cfgfile");
  {
    std::ofstream f(d / "a.cfg");
    f << kMinimal;
  }
  const ExperimentConfig c = parse_config(d / "a.cfg", {{"k", "3"}});
  EXPECT_EQ(c.k, 3);
  EXPECT_EQ(c.M, 100);
  EXPECT_THROW(parse_config(d / "missing.cfg", {}), UsageError);
}

TEST(MakeProblem, SolitonAndPlaneWaveInitialData) {
  const ExperimentConfig c = parse_config_text(kMinimal);
  const ProblemSetup s = make_problem(c, 64);
  ASSERT_TRUE(s.exact);
  EXPECT_NEAR(std::abs(s.u0(0.0) - Complex(1.0, 0.0)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(s.exact->value(1.0, 0.5) -
                       std::exp(Complex(0, 2 * 1.0 + 3 * 0.5)) / std::cosh(1.0 + 2.0)),
              0.0, 1e-15);
  // a soliton with other parameters has no closed form here
  EXPECT_FALSE(make_problem(parse_config_text(kMinimal, {{"kappa", "1"}}), 64).exact);

  const ExperimentConfig pw = parse_config_text(
      kMinimal, {{"problem", "plane_wave"}, {"a", "0"}, {"b", "2"}, {"amplitude", "0.5"}, {"mode", "2"}});
  const ProblemSetup w = make_problem(pw, 64);
  ASSERT_TRUE(w.exact);
  const double xi = 2 * std::numbers::pi, omega = 2.0 * 0.25 - xi * xi;
  const double x = 0.3, t = 0.7;
  EXPECT_NEAR(std::abs(w.exact->value(x, t) - 0.5 * std::exp(Complex(0, xi * x - omega * t))), 0.0,
              1e-13);
  EXPECT_NEAR(std::abs(w.exact->gradient(x, t) - Complex(0, xi) * w.exact->value(x, t)), 0.0, 1e-13);
}

TEST(RunSingle, WritesTimeseriesAndSummary) {
  const fs::path d = fresh_dir("run");
  const ExperimentConfig c = parse_config_text(kMinimal);
  const RunOutcome o = run_single(c, {d, true});
  EXPECT_EQ(o.exit_code, kExitOk);
  EXPECT_TRUE(o.converged);
  EXPECT_TRUE(o.checks_passed);
  EXPECT_LE(o.max_mass_drift, 1e-10);
  EXPECT_LE(o.max_newton_iters, 10);

  const auto ts = read_csv(d / "timeseries.csv");
  ASSERT_EQ(ts.size(), 1u + 4u);
  EXPECT_EQ(ts[0], (std::vector<std::string>{"t", "mass", "mass_drift", "sav_energy", "sav_energy_drift",
                                             "original_energy", "h1_error", "newton_iters"}));
  EXPECT_EQ(ts[1][2], format_real(0.0));
  EXPECT_EQ(ts[1][7], "0");
  for (std::size_t i = 1; i < ts.size(); ++i) {
    ASSERT_EQ(ts[i].size(), 8u);
    EXPECT_NEAR(std::stod(ts[i][0]), 0.1 * (i - 1), 1e-12);
    EXPECT_LE(std::abs(std::stod(ts[i][2])), 1e-10);
    EXPECT_FALSE(ts[i][6].empty());
    EXPECT_LE(std::stoi(ts[i][7]), 10);
  }
  const auto sum = read_csv(d / "summary.csv");
  EXPECT_EQ(sum[0], (std::vector<std::string>{"quantity", "value"}));
  bool saw_converged = false;
  for (const auto& r : sum)
    if (r[0] == "converged") {
      saw_converged = true;
      EXPECT_EQ(r[1], "true");
    }
  EXPECT_TRUE(saw_converged);
}

TEST(RunSingle, ZeroDataHasZeroDrift) {
  const fs::path d = fresh_dir("zero");
  const ExperimentConfig c =
      parse_config_text(kMinimal, {{"problem", "custom"}, {"amplitude", "0"}, {"bc", "dirichlet"}});
  const RunOutcome o = run_single(c, {d, true});
  EXPECT_EQ(o.exit_code, kExitOk);
  const auto ts = read_csv(d / "timeseries.csv");
  for (std::size_t i = 1; i < ts.size(); ++i) {
    EXPECT_LE(std::abs(std::stod(ts[i][2])), 1e-14);
    EXPECT_LE(std::abs(std::stod(ts[i][4])), 1e-14);
    EXPECT_TRUE(ts[i][6].empty());  // no exact solution
  }
}

TEST(RunSingle, NewtonFailureWritesFailedRowAndExitCode) {
  const fs::path d = fresh_dir("fail");
  const ExperimentConfig c =
      parse_config_text(kMinimal, {{"max_newton_iters", "1"}, {"newton_tol", "1e-14"}});
  const RunOutcome o = run_single(c, {d, false});
  EXPECT_EQ(o.exit_code, kExitNumerical);
  EXPECT_FALSE(o.converged);
  EXPECT_FALSE(o.message.empty());
  const auto ts = read_csv(d / "timeseries.csv");
  ASSERT_GE(ts.size(), 3u);
  EXPECT_EQ(ts.back().back(), "failed");
  EXPECT_EQ(ts.back()[1], "nan");
  EXPECT_NEAR(std::stod(ts.back()[0]), 0.1, 1e-12);
}

TEST(RunSingle, ByteIdenticalReruns) {
  const fs::path d1 = fresh_dir("rep1"), d2 = fresh_dir("rep2");
  const ExperimentConfig c = parse_config_text(kMinimal);
  run_single(c, {d1, false});
  run_single(c, {d2, false});
  EXPECT_EQ(slurp(d1 / "timeseries.csv"), slurp(d2 / "timeseries.csv"));
  EXPECT_EQ(slurp(d1 / "summary.csv"), slurp(d2 / "summary.csv"));
  EXPECT_FALSE(slurp(d1 / "timeseries.csv").empty());
}

TEST(Sweeps, SingleTauGivesOneRowWithoutRate) {
  const fs::path d = fresh_dir("sweep1");
  const ExperimentConfig c = parse_config_text(kMinimal, {{"tau_list", "0.1"}}, Subcommand::SweepTime);
  const SweepOutcome o = run_time_sweep(c, {d, false});
  EXPECT_EQ(o.exit_code, kExitOk);
  ASSERT_EQ(o.table.rows.size(), 1u);
  EXPECT_FALSE(o.table.rows[0].eoc);
  const auto rows = read_csv(d / "time_convergence.csv");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"k", "tau", "linf_h1_error", "eoc"}));
  EXPECT_EQ(rows[1][0], "2");
  EXPECT_TRUE(rows[1][3].empty());
}

TEST(Sweeps, TimeSweepSortsAndMatchesSingleRuns) {
  const fs::path d = fresh_dir("sweep2");
  const ExperimentConfig c =
      parse_config_text(kMinimal, {{"tau_list", "0.05 0.1 0.1"}}, Subcommand::SweepTime);
  const SweepOutcome o = run_time_sweep(c, {d, false});
  ASSERT_EQ(o.table.rows.size(), 2u);
  EXPECT_DOUBLE_EQ(o.table.rows[0].param, 0.1);
  EXPECT_EQ(o.table.rows[1].error, run_error(c, 100, 0.05));
  ASSERT_TRUE(o.table.rows[1].eoc);
  EXPECT_NEAR(*o.table.rows[1].eoc,
              std::log(o.table.rows[0].error / o.table.rows[1].error) / std::log(2.0), 1e-12);
}

TEST(Sweeps, SpaceSweepUsesMeshWidth) {
  const fs::path d = fresh_dir("sweep3");
  const ExperimentConfig c = parse_config_text(
      "p = 1\nk = 2\ntau = 0.1\nT = 0.2\nM_list = 400, 200\n", {}, Subcommand::SweepSpace);
  const SweepOutcome o = run_space_sweep(c, {d, false});
  ASSERT_EQ(o.table.rows.size(), 2u);
  EXPECT_DOUBLE_EQ(o.table.rows[0].param, 40.0 / 200);
  EXPECT_GT(*o.table.rows[1].eoc, 0.5);
  const auto rows = read_csv(d / "space_convergence.csv");
  EXPECT_EQ(rows[0], (std::vector<std::string>{"p", "M", "linf_h1_error", "eoc"}));
  EXPECT_EQ(rows[1][1], "200");
  EXPECT_EQ(rows[2][1], "400");
}

TEST(Sweeps, FailedPointIsMarked) {
  const fs::path d = fresh_dir("sweep4");
  const ExperimentConfig c = parse_config_text(
      kMinimal, {{"tau_list", "0.1 0.05"}, {"max_newton_iters", "1"}, {"newton_tol", "1e-14"}},
      Subcommand::SweepTime);
  const SweepOutcome o = run_time_sweep(c, {d, false});
  EXPECT_EQ(o.exit_code, kExitNumerical);
  EXPECT_EQ(o.failures.size(), 2u);
  const auto rows = read_csv(d / "time_convergence.csv");
  EXPECT_EQ(rows[1][2], "failed");
  EXPECT_TRUE(rows[2][3].empty());
}

TEST(Format, TenDigitScientific) {
  EXPECT_EQ(format_real(0.0), "0.0000000000e+00");
  EXPECT_EQ(format_real(-1.5e-7), "-1.5000000000e-07");
}

#ifdef SAV_NLS_EXE
namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SAV_NLS_EXE) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Cli, ExitCodes) {
  const fs::path d = fresh_dir("cli");
  {
    std::ofstream f(d / "min.cfg");
    f << kMinimal;
  }
  const std::string cfg = "--config " + (d / "min.cfg").string() + " --out-dir " + d.string();
  EXPECT_EQ(run_cli("run " + cfg + " --check"), kExitOk);
  EXPECT_TRUE(fs::exists(d / "timeseries.csv"));
  EXPECT_EQ(run_cli("run " + cfg + " --tau=0.3 --T 1"), kExitUsage);
  EXPECT_EQ(run_cli("run " + cfg + " --flux 1"), kExitUsage);
  EXPECT_EQ(run_cli("frobnicate"), kExitUsage);
  EXPECT_EQ(run_cli("run " + cfg + " --max_newton_iters 1 --newton_tol 1e-14"), kExitNumerical);
  EXPECT_EQ(run_cli("sweep-time " + cfg + " --tau_list 0.1"), kExitOk);
  EXPECT_TRUE(fs::exists(d / "time_convergence.csv"));
}
#endif
