#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "savnls/diagnostics.hpp"
#include "savnls/fem1d.hpp"
#include "savnls/sav_model.hpp"

namespace savnls {

/// Bad configuration text or flags; `key()` names the offending key.
class UsageError : public std::invalid_argument {
 public:
  UsageError(const std::string& key, const std::string& what)
      : std::invalid_argument(key.empty() ? what : key + ": " + what), key_(key) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

enum class Problem { Soliton1D, PlaneWave1D, Custom };

enum class Subcommand { Run, SweepTime, SweepSpace };

/// Exit codes of the command line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;

struct ExperimentConfig {
  Problem problem = Problem::Soliton1D;
  double a = -20.0;
  double b = 20.0;
  int M = 0;
  int p = 0;
  int k = 0;
  double tau = 0.0;
  double T = 0.0;
  double kappa = 2.0;
  double q = 3.0;
  double c0 = 1.0;
  BoundaryCondition bc = BoundaryCondition::Periodic;
  double newton_tol = 1e-10;
  int max_newton_iters = 25;
  bool full_jacobian = false;
  int nq = 0;  // Gauss points per element for nonlinear terms; 0 means p + 2

  // plane wave: amplitude * exp(i (2 pi mode x / (b - a) - omega t))
  // custom: amplitude * exp(-((x - center) / width)^2) * exp(i wavenumber x)
  double amplitude = 1.0;
  int mode = 1;
  double center = 0.0;
  double width = 1.0;
  double wavenumber = 0.0;

  std::vector<double> tau_list;
  std::vector<int> M_list;

  std::filesystem::path out_dir = ".";

  /// Throws UsageError when the fields are inconsistent for `cmd`.
  void validate(Subcommand cmd) const;
};

using ConfigOverrides = std::vector<std::pair<std::string, std::string>>;

/// Flat `key = value` text with `#` comments.
ConfigOverrides read_config_text(const std::string& text);

/// File values first, then `overrides` in order. Unknown keys, bad values and
/// keys missing for `cmd` raise UsageError.
ExperimentConfig parse_config(const std::optional<std::filesystem::path>& file,
                              const ConfigOverrides& overrides, Subcommand cmd = Subcommand::Run);
ExperimentConfig parse_config_text(const std::string& text, const ConfigOverrides& overrides = {},
                                   Subcommand cmd = Subcommand::Run);

/// Parses "0.05", "1e-2" or "1/20".
double parse_real(const std::string& key, const std::string& text);

/// Space, initial value, nonlinearity and (when known) exact solution.
struct ProblemSetup {
  FemSpace space;
  Nonlinearity nl;
  ScalarField u0;
  std::optional<ExactSolution> exact;
};
ProblemSetup make_problem(const ExperimentConfig& cfg, int num_elements);

StepperConfig stepper_config(const ExperimentConfig& cfg, double tau);

/// Scientific notation with 10 digits after the point.
std::string format_real(double value);

struct RunOptions {
  std::optional<std::filesystem::path> out_dir;  // overrides cfg.out_dir
  bool check = false;
};

struct RunOutcome {
  int exit_code = kExitOk;
  bool converged = true;
  bool checks_passed = true;
  double linf_h1_error = 0.0;
  double max_mass_drift = 0.0;
  double max_sav_energy_drift = 0.0;
  bool internal_mass_ok = true;
  int max_newton_iters = 0;
  std::string message;
};

/// Single trajectory; writes timeseries.csv and summary.csv.
RunOutcome run_single(const ExperimentConfig& cfg, const RunOptions& options);

struct SweepOutcome {
  int exit_code = kExitOk;
  ConvergenceTable table;
  std::vector<std::string> failures;
};

/// One run per tau in tau_list; writes time_convergence.csv.
SweepOutcome run_time_sweep(const ExperimentConfig& cfg, const RunOptions& options);
/// One run per M in M_list; EOC with respect to h = (b - a) / M; writes space_convergence.csv.
SweepOutcome run_space_sweep(const ExperimentConfig& cfg, const RunOptions& options);

/// L-infinity(0,T; H1) error of one run; NaN when the run fails (message in `failure`).
double run_error(const ExperimentConfig& cfg, int num_elements, double tau,
                 std::string* failure = nullptr);

/// Worker count for sweeps: SAV_NLS_THREADS if set, else the hardware concurrency.
int sweep_threads();

}  // namespace savnls
