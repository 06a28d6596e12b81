#include "savnls/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include "savnls/errors.hpp"
#include "savnls/slab_stepper.hpp"

namespace savnls {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

double parse_plain_real(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t.empty()) throw UsageError(key, "expected a number, got nothing");
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size() || errno == ERANGE || !std::isfinite(v))
    throw UsageError(key, "expected a number, got '" + t + "'");
  return v;
}

int parse_int(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  int v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
    throw UsageError(key, "expected an integer, got '" + t + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  const std::string t = lower(trim(text));
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw UsageError(key, "expected true or false, got '" + t + "'");
}

std::vector<std::string> split_list(const std::string& text) {
  std::string s = text;
  std::replace(s.begin(), s.end(), ',', ' ');
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string item; in >> item;) out.push_back(item);
  return out;
}

Problem parse_problem(const std::string& text) {
  const std::string t = lower(trim(text));
  if (t == "soliton" || t == "soliton1d") return Problem::Soliton1D;
  if (t == "plane_wave" || t == "planewave" || t == "planewave1d") return Problem::PlaneWave1D;
  if (t == "custom") return Problem::Custom;
  throw UsageError("problem", "unknown problem '" + t + "' (soliton, plane_wave, custom)");
}

BoundaryCondition parse_bc(const std::string& text) {
  const std::string t = lower(trim(text));
  if (t == "periodic") return BoundaryCondition::Periodic;
  if (t == "dirichlet") return BoundaryCondition::Dirichlet;
  throw UsageError("bc", "unknown boundary condition '" + t + "' (periodic, dirichlet)");
}

void apply(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "problem") cfg.problem = parse_problem(value);
  else if (key == "a") cfg.a = parse_real(key, value);
  else if (key == "b") cfg.b = parse_real(key, value);
  else if (key == "M") cfg.M = parse_int(key, value);
  else if (key == "p") cfg.p = parse_int(key, value);
  else if (key == "k") cfg.k = parse_int(key, value);
  else if (key == "tau") cfg.tau = parse_real(key, value);
  else if (key == "T") cfg.T = parse_real(key, value);
  else if (key == "nonlinearity") {
    if (lower(trim(value)) != "power")
      throw UsageError(key, "only 'power' is supported, got '" + trim(value) + "'");
  } else if (key == "kappa") cfg.kappa = parse_real(key, value);
  else if (key == "q") cfg.q = parse_real(key, value);
  else if (key == "c0") cfg.c0 = parse_real(key, value);
  else if (key == "bc") cfg.bc = parse_bc(value);
  else if (key == "newton_tol") cfg.newton_tol = parse_real(key, value);
  else if (key == "max_newton_iters") cfg.max_newton_iters = parse_int(key, value);
  else if (key == "full_jacobian") cfg.full_jacobian = parse_bool(key, value);
  else if (key == "nq") cfg.nq = parse_int(key, value);
  else if (key == "amplitude") cfg.amplitude = parse_real(key, value);
  else if (key == "mode") cfg.mode = parse_int(key, value);
  else if (key == "center") cfg.center = parse_real(key, value);
  else if (key == "width") cfg.width = parse_real(key, value);
  else if (key == "wavenumber") cfg.wavenumber = parse_real(key, value);
  else if (key == "tau_list") {
    cfg.tau_list.clear();
    for (const auto& item : split_list(value)) cfg.tau_list.push_back(parse_real(key, item));
  } else if (key == "M_list") {
    cfg.M_list.clear();
    for (const auto& item : split_list(value)) cfg.M_list.push_back(parse_int(key, item));
  } else if (key == "out_dir") {
    if (trim(value).empty()) throw UsageError(key, "empty path");
    cfg.out_dir = trim(value);
  } else {
    throw UsageError(key, "unknown key");
  }
}

std::vector<std::string> required_keys(Subcommand cmd) {
  switch (cmd) {
    case Subcommand::Run: return {"M", "p", "k", "tau", "T"};
    case Subcommand::SweepTime: return {"M", "p", "k", "T", "tau_list"};
    case Subcommand::SweepSpace: return {"p", "k", "tau", "T", "M_list"};
  }
  return {};
}

void check_steps(const std::string& key, double T, double tau) {
  try {
    slab_count(T, tau);
  } catch (const ConfigError&) {
    throw UsageError(key, "T / tau is not a positive integer (T = " + format_real(T) +
                              ", tau = " + format_real(tau) + ")");
  }
}

}  // namespace

double parse_real(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  const auto slash = t.find('/');
  if (slash == std::string::npos) return parse_plain_real(key, t);
  const double num = parse_plain_real(key, t.substr(0, slash));
  const double den = parse_plain_real(key, t.substr(slash + 1));
  if (den == 0.0) throw UsageError(key, "zero denominator in '" + t + "'");
  return num / den;
}

void ExperimentConfig::validate(Subcommand cmd) const {
  if (!(a < b)) throw UsageError("a", "need a < b");
  if (p < 1 || p > 4) throw UsageError("p", "degree must be in 1..4");
  if (k < 1 || k > kMaxGaussPoints) throw UsageError("k", "stage count must be in 1..8");
  if (!(T > 0.0)) throw UsageError("T", "must be positive");
  if (!(newton_tol > 0.0)) throw UsageError("newton_tol", "must be positive");
  if (max_newton_iters < 1) throw UsageError("max_newton_iters", "must be at least 1");
  if (nq < 0) throw UsageError("nq", "must be positive (or 0 for the default)");
  if (!(q > 1.0)) throw UsageError("q", "need q > 1");
  if (!(c0 > 0.0)) throw UsageError("c0", "need c0 > 0");
  if (problem == Problem::PlaneWave1D && bc != BoundaryCondition::Periodic)
    throw UsageError("bc", "plane_wave needs periodic boundary conditions");
  if (problem == Problem::Custom && !(width > 0.0)) throw UsageError("width", "must be positive");

  if (cmd != Subcommand::SweepSpace && M < 2) throw UsageError("M", "need at least 2 elements");
  if (cmd != Subcommand::SweepTime) {
    if (!(tau > 0.0)) throw UsageError("tau", "must be positive");
    check_steps("tau", T, tau);
  }
  if (cmd == Subcommand::SweepTime) {
    if (tau_list.empty()) throw UsageError("tau_list", "empty");
    for (double t : tau_list) {
      if (!(t > 0.0)) throw UsageError("tau_list", "entries must be positive");
      check_steps("tau_list", T, t);
    }
  }
  if (cmd == Subcommand::SweepSpace) {
    if (M_list.empty()) throw UsageError("M_list", "empty");
    for (int m : M_list)
      if (m < 2) throw UsageError("M_list", "entries must be at least 2");
  }
}

ConfigOverrides read_config_text(const std::string& text) {
  ConfigOverrides out;
  std::istringstream in(text);
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError("", "line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw UsageError("", "line " + std::to_string(line_no) + ": missing key");
    out.emplace_back(key, trim(line.substr(eq + 1)));
  }
  return out;
}

ExperimentConfig parse_config_text(const std::string& text, const ConfigOverrides& overrides,
                                   Subcommand cmd) {
  ConfigOverrides all = read_config_text(text);
  all.insert(all.end(), overrides.begin(), overrides.end());

  ExperimentConfig cfg;
  std::set<std::string> seen;
  for (const auto& [key, value] : all) {
    apply(cfg, key, value);
    seen.insert(key);
  }
  for (const auto& key : required_keys(cmd))
    if (!seen.count(key)) throw UsageError(key, "missing required key");
  cfg.validate(cmd);
  return cfg;
}

ExperimentConfig parse_config(const std::optional<std::filesystem::path>& file,
                              const ConfigOverrides& overrides, Subcommand cmd) {
  std::string text;
  if (file) {
    std::ifstream in(*file);
    if (!in) throw UsageError("config", "cannot read '" + file->string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    text = buf.str();
  }
  return parse_config_text(text, overrides, cmd);
}

namespace {
constexpr Complex I(0.0, 1.0);
}  // namespace

ProblemSetup make_problem(const ExperimentConfig& cfg, int num_elements) {
  FemSpace space = build_space(cfg.a, cfg.b, num_elements, cfg.p, cfg.bc);
  Nonlinearity nl = Nonlinearity::power_law(cfg.kappa, cfg.q, cfg.c0);
  ScalarField u0;
  std::optional<ExactSolution> exact;

  switch (cfg.problem) {
    case Problem::Soliton1D: {
      // sech(x + 4t) exp(i(2x + 3t)) solves the cubic case kappa = 2.
      auto value = [](double x, double t) {
        return std::exp(I * (2.0 * x + 3.0 * t)) / std::cosh(x + 4.0 * t);
      };
      u0 = [value](double x) { return value(x, 0.0); };
      if (cfg.kappa == 2.0 && cfg.q == 3.0) {
        exact = ExactSolution{value, [value](double x, double t) {
                                return (2.0 * I - std::tanh(x + 4.0 * t)) * value(x, t);
                              }};
      }
      break;
    }
    case Problem::PlaneWave1D: {
      const double A = cfg.amplitude;
      const double xi = 2.0 * std::numbers::pi * cfg.mode / (cfg.b - cfg.a);
      const double omega = nl.f(A * A) - xi * xi;
      auto value = [A, xi, omega](double x, double t) {
        return A * std::exp(I * (xi * x - omega * t));
      };
      u0 = [value](double x) { return value(x, 0.0); };
      exact = ExactSolution{value, [value, xi](double x, double t) { return I * xi * value(x, t); }};
      break;
    }
    case Problem::Custom: {
      const double A = cfg.amplitude, x0 = cfg.center, w = cfg.width, kw = cfg.wavenumber;
      u0 = [A, x0, w, kw](double x) {
        const double z = (x - x0) / w;
        return A * std::exp(-z * z) * std::exp(I * kw * x);
      };
      break;
    }
  }
  return ProblemSetup{std::move(space), std::move(nl), std::move(u0), std::move(exact)};
}

StepperConfig stepper_config(const ExperimentConfig& cfg, double tau) {
  StepperConfig sc;
  sc.tau = tau;
  sc.newton_tol = cfg.newton_tol;
  sc.max_newton_iters = cfg.max_newton_iters;
  sc.k = cfg.k;
  sc.full_jacobian = cfg.full_jacobian;
  return sc;
}

std::string format_real(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10e", value);
  return buf;
}

namespace {

struct Trajectory {
  std::unique_ptr<Nonlinearity> nl;
  std::unique_ptr<Assemblies> assemblies;
  std::unique_ptr<RunMonitor> monitor;
  bool converged = true;
  long failed_slab = -1;
  std::string message;
};

// Runs one integration; numerical failures are caught and reported.
Trajectory integrate_problem(const ExperimentConfig& cfg, int num_elements, double tau) {
  ProblemSetup setup = make_problem(cfg, num_elements);
  Trajectory out;
  const int nq = cfg.nq > 0 ? cfg.nq : default_nonlinear_points(setup.space);
  out.assemblies = std::make_unique<Assemblies>(setup.space, nq);
  out.nl = std::make_unique<Nonlinearity>(std::move(setup.nl));
  out.monitor = std::make_unique<RunMonitor>(*out.assemblies, *out.nl, cfg.k, setup.exact);
  try {
    integrate(setup.u0, stepper_config(cfg, tau), *out.assemblies, *out.nl, cfg.T,
              {out.monitor.get()});
  } catch (const StepError& e) {
    out.converged = false;
    out.failed_slab = e.slab();
    out.message = e.what();
  } catch (const ModelError& e) {
    out.converged = false;
    out.failed_slab = 0;
    out.message = e.what();
  } catch (const SolverError& e) {
    out.converged = false;
    out.message = e.what();
  }
  return out;
}

std::filesystem::path output_dir(const ExperimentConfig& cfg, const RunOptions& options) {
  std::filesystem::path dir = options.out_dir ? *options.out_dir : cfg.out_dir;
  std::filesystem::create_directories(dir);
  return dir;
}

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

std::string problem_name(Problem p) {
  switch (p) {
    case Problem::Soliton1D: return "soliton";
    case Problem::PlaneWave1D: return "plane_wave";
    case Problem::Custom: return "custom";
  }
  return "";
}

std::string csv_quote(std::string s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    if (c == '\n') c = ' ';
    out += c;
  }
  return out + "\"";
}

}  // namespace

RunOutcome run_single(const ExperimentConfig& cfg, const RunOptions& options) {
  cfg.validate(Subcommand::Run);
  const auto dir = output_dir(cfg, options);
  Trajectory run = integrate_problem(cfg, cfg.M, cfg.tau);
  const RunMonitor& mon = *run.monitor;
  const auto& records = mon.records();

  RunOutcome outcome;
  outcome.converged = run.converged;
  outcome.message = run.message;
  outcome.linf_h1_error = mon.linf_h1_error();
  outcome.max_mass_drift = mon.max_mass_drift();
  outcome.max_sav_energy_drift = mon.max_sav_energy_drift();
  outcome.internal_mass_ok = mon.internal_mass_ok();
  outcome.max_newton_iters = mon.max_newton_iters();

  const bool have_exact = !records.empty() && records.front().h1_error.has_value();
  const double mass0 = records.empty() ? 0.0 : records.front().mass;
  const double energy0 = records.empty() ? 0.0 : records.front().sav_energy;
  {
    auto out = open_csv(dir / "timeseries.csv");
    out << "t,mass,mass_drift,sav_energy,sav_energy_drift,original_energy,h1_error,newton_iters\n";
    for (const auto& r : records) {
      out << format_real(r.t) << ',' << format_real(r.mass) << ',' << format_real(r.mass - mass0)
          << ',' << format_real(r.sav_energy) << ',' << format_real(r.sav_energy - energy0) << ','
          << format_real(r.original_energy) << ','
          << (r.h1_error ? format_real(*r.h1_error) : std::string()) << ',' << r.newton_iters
          << '\n';
    }
    if (!run.converged) {
      const double t_fail = records.empty() ? 0.0 : records.back().t + cfg.tau;
      out << format_real(t_fail) << ",nan,nan,nan,nan,nan,nan,failed\n";
    }
  }

  if (options.check && run.converged) {
    const double mass_tol = 1e-10 * std::max(1.0, mass0);
    outcome.checks_passed = outcome.max_mass_drift <= mass_tol &&
                            outcome.max_sav_energy_drift <= 1e-9 && outcome.internal_mass_ok;
    if (!outcome.checks_passed) outcome.message = "conservation check failed";
  }

  {
    auto out = open_csv(dir / "summary.csv");
    out << "quantity,value\n";
    out << "problem," << problem_name(cfg.problem) << '\n';
    out << "M," << cfg.M << "\np," << cfg.p << "\nk," << cfg.k << '\n';
    out << "tau," << format_real(cfg.tau) << "\nT," << format_real(cfg.T) << '\n';
    out << "slabs_completed," << (records.empty() ? 0 : records.size() - 1) << '\n';
    out << "converged," << (run.converged ? "true" : "false") << '\n';
    out << "linf_h1_error," << (have_exact ? format_real(outcome.linf_h1_error) : "") << '\n';
    out << "final_h1_error,"
        << (have_exact ? format_real(*records.back().h1_error) : std::string()) << '\n';
    out << "max_mass_drift," << format_real(outcome.max_mass_drift) << '\n';
    out << "max_sav_energy_drift," << format_real(outcome.max_sav_energy_drift) << '\n';
    out << "final_mass," << (records.empty() ? "" : format_real(records.back().mass)) << '\n';
    out << "final_sav_energy,"
        << (records.empty() ? "" : format_real(records.back().sav_energy)) << '\n';
    out << "max_internal_mass," << format_real(mon.max_internal_mass()) << '\n';
    out << "internal_mass_ok," << (outcome.internal_mass_ok ? "true" : "false") << '\n';
    out << "max_newton_iters," << mon.max_newton_iters() << '\n';
    out << "total_newton_iters," << mon.total_newton_iters() << '\n';
    if (options.check) out << "checks_passed," << (outcome.checks_passed ? "true" : "false") << '\n';
    if (!outcome.message.empty()) out << "message," << csv_quote(outcome.message) << '\n';
  }

  outcome.exit_code = (run.converged && outcome.checks_passed) ? kExitOk : kExitNumerical;
  return outcome;
}

double run_error(const ExperimentConfig& cfg, int num_elements, double tau, std::string* failure) {
  Trajectory run = integrate_problem(cfg, num_elements, tau);
  if (!run.converged) {
    if (failure) *failure = run.message;
    return std::numeric_limits<double>::quiet_NaN();
  }
  return run.monitor->linf_h1_error();
}

int sweep_threads() {
  if (const char* env = std::getenv("SAV_NLS_THREADS")) {
    int n = 0;
    const std::string s = env;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
    if (ec == std::errc() && ptr == s.data() + s.size() && n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

struct SweepPoint {
  int M;
  double tau;
};

// Evaluates all points on a pool of workers; results keep the input order.
std::vector<std::pair<double, std::string>> evaluate_points(const ExperimentConfig& cfg,
                                                            const std::vector<SweepPoint>& points) {
  std::vector<std::pair<double, std::string>> results(points.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < points.size();) {
      std::string failure;
      try {
        const double err = run_error(cfg, points[i].M, points[i].tau, &failure);
        results[i] = {err, failure};
      } catch (const std::exception& e) {
        results[i] = {std::numeric_limits<double>::quiet_NaN(), e.what()};
      }
    }
  };
  const int n = std::min<int>(sweep_threads(), static_cast<int>(points.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  return results;
}

SweepOutcome finish_sweep(std::vector<double> params, std::vector<double> errors,
                          std::vector<std::string> failures) {
  SweepOutcome outcome;
  outcome.table = ConvergenceTable::build(params, errors);
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (std::isnan(errors[i])) {
      outcome.failures.push_back(failures[i]);
      // an EOC touching a failed row is meaningless
      outcome.table.rows[i].eoc.reset();
      if (i + 1 < errors.size()) outcome.table.rows[i + 1].eoc.reset();
    }
  }
  outcome.exit_code = outcome.failures.empty() ? kExitOk : kExitNumerical;
  return outcome;
}

std::string error_cell(double e) { return std::isnan(e) ? std::string("failed") : format_real(e); }

std::string eoc_cell(const std::optional<double>& v) { return v ? format_real(*v) : std::string(); }

}  // namespace

SweepOutcome run_time_sweep(const ExperimentConfig& cfg, const RunOptions& options) {
  cfg.validate(Subcommand::SweepTime);
  const auto dir = output_dir(cfg, options);
  std::vector<double> taus = cfg.tau_list;
  std::sort(taus.begin(), taus.end(), std::greater<>());
  taus.erase(std::unique(taus.begin(), taus.end()), taus.end());

  std::vector<SweepPoint> points;
  for (double t : taus) points.push_back({cfg.M, t});
  const auto results = evaluate_points(cfg, points);

  std::vector<double> errors;
  std::vector<std::string> failures;
  for (const auto& [e, f] : results) {
    errors.push_back(e);
    failures.push_back(f);
  }
  SweepOutcome outcome = finish_sweep(taus, errors, failures);

  auto out = open_csv(dir / "time_convergence.csv");
  out << "k,tau,linf_h1_error,eoc\n";
  for (const auto& row : outcome.table.rows)
    out << cfg.k << ',' << format_real(row.param) << ',' << error_cell(row.error) << ','
        << eoc_cell(row.eoc) << '\n';
  return outcome;
}

SweepOutcome run_space_sweep(const ExperimentConfig& cfg, const RunOptions& options) {
  cfg.validate(Subcommand::SweepSpace);
  const auto dir = output_dir(cfg, options);
  std::vector<int> Ms = cfg.M_list;
  std::sort(Ms.begin(), Ms.end());
  Ms.erase(std::unique(Ms.begin(), Ms.end()), Ms.end());

  std::vector<SweepPoint> points;
  std::vector<double> hs;
  for (int m : Ms) {
    points.push_back({m, cfg.tau});
    hs.push_back((cfg.b - cfg.a) / m);
  }
  const auto results = evaluate_points(cfg, points);

  std::vector<double> errors;
  std::vector<std::string> failures;
  for (const auto& [e, f] : results) {
    errors.push_back(e);
    failures.push_back(f);
  }
  SweepOutcome outcome = finish_sweep(hs, errors, failures);

  auto out = open_csv(dir / "space_convergence.csv");
  out << "p,M,linf_h1_error,eoc\n";
  for (std::size_t i = 0; i < Ms.size(); ++i) {
    const auto& row = outcome.table.rows[i];
    out << cfg.p << ',' << Ms[i] << ',' << error_cell(row.error) << ',' << eoc_cell(row.eoc)
        << '\n';
  }
  return outcome;
}

}  // namespace savnls
