// sav-nls run|sweep-time|sweep-space --config <file> [--key value ...] [--check] [--out-dir <dir>]

#include <cmath>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "savnls/errors.hpp"
#include "savnls/experiment.hpp"

namespace {

using savnls::ConfigOverrides;
using savnls::UsageError;

// Leftover arguments must come in `--key value` (or `--key=value`) form.
ConfigOverrides collect_overrides(const std::vector<std::string>& extras) {
  ConfigOverrides out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& arg = extras[i];
    if (arg.rfind("--", 0) != 0 || arg.size() < 3)
      throw UsageError("", "unexpected argument '" + arg + "'");
    std::string key = arg.substr(2);
    if (const auto eq = key.find('='); eq != std::string::npos) {
      out.emplace_back(key.substr(0, eq), key.substr(eq + 1));
      continue;
    }
    if (i + 1 >= extras.size()) throw UsageError(key, "missing value");
    out.emplace_back(key, extras[++i]);
  }
  return out;
}

void print_table(const savnls::SweepOutcome& outcome, const char* param) {
  std::cout << param << "  error  eoc\n";
  for (const auto& row : outcome.table.rows) {
    std::cout << savnls::format_real(row.param) << "  "
              << (std::isnan(row.error) ? std::string("failed") : savnls::format_real(row.error))
              << "  " << (row.eoc ? savnls::format_real(*row.eoc) : std::string("-")) << '\n';
  }
  for (const auto& f : outcome.failures) std::cerr << "run failed: " << f << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SAV Gauss collocation solver for the 1D nonlinear Schrodinger equation"};
  app.require_subcommand(1);

  std::optional<std::string> config;
  std::optional<std::string> out_dir;
  bool check = false;
  std::vector<CLI::App*> subs;
  for (const char* name : {"run", "sweep-time", "sweep-space"}) {
    auto* sub = app.add_subcommand(name);
    sub->allow_extras();
    sub->add_option("--config", config, "key = value configuration file");
    sub->add_option("--out-dir", out_dir, "output directory (default: out_dir key or .)");
    sub->add_flag("--check", check, "fail on conservation or internal-mass violations");
    subs.push_back(sub);
  }
  subs[0]->description("single trajectory: timeseries.csv, summary.csv");
  subs[1]->description("temporal convergence over tau_list: time_convergence.csv");
  subs[2]->description("spatial convergence over M_list: space_convergence.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? savnls::kExitOk : savnls::kExitUsage;
  }

  try {
    savnls::Subcommand cmd = savnls::Subcommand::Run;
    CLI::App* active = subs[0];
    if (subs[1]->parsed()) cmd = savnls::Subcommand::SweepTime, active = subs[1];
    if (subs[2]->parsed()) cmd = savnls::Subcommand::SweepSpace, active = subs[2];

    const ConfigOverrides overrides = collect_overrides(active->remaining());
    std::optional<std::filesystem::path> file;
    if (config) file = *config;
    const savnls::ExperimentConfig cfg = savnls::parse_config(file, overrides, cmd);

    savnls::RunOptions options;
    if (out_dir) options.out_dir = *out_dir;
    options.check = check;

    switch (cmd) {
      case savnls::Subcommand::Run: {
        const auto outcome = savnls::run_single(cfg, options);
        std::cout << "converged " << (outcome.converged ? "yes" : "no") << "\nmax mass drift "
                  << savnls::format_real(outcome.max_mass_drift) << "\nmax SAV energy drift "
                  << savnls::format_real(outcome.max_sav_energy_drift) << "\nL^inf(H1) error "
                  << savnls::format_real(outcome.linf_h1_error) << "\nmax Newton iterations "
                  << outcome.max_newton_iters << '\n';
        if (!outcome.message.empty()) std::cerr << outcome.message << '\n';
        return outcome.exit_code;
      }
      case savnls::Subcommand::SweepTime: {
        const auto outcome = savnls::run_time_sweep(cfg, options);
        print_table(outcome, "tau");
        return outcome.exit_code;
      }
      case savnls::Subcommand::SweepSpace: {
        const auto outcome = savnls::run_space_sweep(cfg, options);
        print_table(outcome, "h");
        return outcome.exit_code;
      }
    }
  } catch (const std::invalid_argument& e) {
    // UsageError, ConfigError, InputError
    std::cerr << "usage error: " << e.what() << '\n';
    return savnls::kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return savnls::kExitNumerical;
  }
  return savnls::kExitOk;
}
