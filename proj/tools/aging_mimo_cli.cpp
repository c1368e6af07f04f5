// aging-mimo: sweeps, bound tables and oracle checks from the command line.
//
// Exit codes: 0 ok, 1 validation failure, 2 usage/config error, 3 numerical error.

#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>
#include <chrono>
#include <ctime>

#include <CLI11.hpp>
#include <json.hpp>

#include "aging_mimo/aging_mimo.hpp"

namespace {

using namespace aging;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Grid {
  std::vector<double> values;
  std::string text;
};

int decimals(const std::string& s) {
  const auto e = s.find_first_of("eE");
  const std::string mant = s.substr(0, e);
  const auto dot = mant.find('.');
  int d = dot == std::string::npos ? 0 : int(mant.size() - dot - 1);
  if (e != std::string::npos) d -= std::stoi(s.substr(e + 1));
  return std::max(d, 0);
}

Grid parse_grid(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  if (text.empty() || parts.size() != 3) throw UsageError("--grid expects start:stop:step, got '" + text + "'");
  double v[3];
  for (int i = 0; i < 3; ++i) {
    try {
      std::size_t used = 0;
      v[i] = std::stod(parts[std::size_t(i)], &used);
      if (used != parts[std::size_t(i)].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw UsageError("--grid: '" + parts[std::size_t(i)] + "' is not a number");
    }
  }
  const auto [start, stop, step] = std::tuple{v[0], v[1], v[2]};
  if (!(step > 0.0) || !(stop >= start)) throw UsageError("--grid needs step > 0 and stop >= start");
  const int d = std::min(15, std::max({decimals(parts[0]), decimals(parts[2])}));
  const double scale = std::pow(10.0, d);
  const long n = std::lround(std::floor((stop - start) / step + 1e-9)) + 1;
  if (n > 100000) throw UsageError("--grid has too many points");
  Grid g{{}, text};
  for (long i = 0; i < n; ++i) g.values.push_back(std::round((start + double(i) * step) * scale) / scale);
  return g;
}

std::vector<ReceiverKind> parse_receivers(const std::string& text) {
  std::vector<ReceiverKind> out;
  std::stringstream ss(text);
  for (std::string name; std::getline(ss, name, ',');) {
    const auto kind = parse_receiver(name);
    if (!kind) throw UsageError("unknown receiver '" + name + "' (expected olr, mmse, mrc, zf)");
    if (std::find(out.begin(), out.end(), *kind) != out.end()) throw UsageError("receiver '" + name + "' listed twice");
    out.push_back(*kind);
  }
  if (out.empty()) throw UsageError("--receivers is empty");
  return out;
}

std::string join(const std::vector<std::string>& v, char sep = ',') {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? std::string(1, sep) : "") + v[i];
  return s;
}

struct Globals {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  int trials = 5000;
  std::optional<std::string> out;
  int workers = std::max(1u, std::thread::hardware_concurrency());
  std::string receivers = "olr,mmse,mrc,zf";
  std::optional<std::string> grid;
  bool verbose = false;
};

// Resolved inputs shared by the sweep commands.
struct Run {
  RunConfig rc;
  TrialPlan plan;
  Grid grid;
  std::map<std::string, std::string> manifest;
};

Run prepare(const Globals& g, const std::string& command, const std::string& default_grid) {
  Run run;
  run.rc = load_config(g.config);
  if (g.seed) run.rc.scenario.seed = *g.seed;
  run.rc.validate();
  if (g.trials < 1) throw UsageError("--trials must be >= 1");
  if (g.workers < 1) throw UsageError("--workers must be >= 1");
  run.grid = parse_grid(g.grid.value_or(default_grid));
  run.plan.n_trials = g.trials;
  run.plan.workers = g.workers;
  run.plan.seed = run.rc.scenario.seed;
  run.plan.receivers = parse_receivers(g.receivers);

  run.manifest = config_snapshot(run.rc);
  run.manifest["command"] = command;
  run.manifest["version"] = AGING_MIMO_VERSION;
  run.manifest["trials"] = std::to_string(g.trials);
  run.manifest["grid"] = run.grid.text;
  std::vector<std::string> names;
  for (auto k : run.plan.receivers) names.emplace_back(to_string(k));
  run.manifest["receivers"] = join(names);
  return run;
}

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Writes the table to --out (plus a manifest next to it) or to stdout.
void emit(const Globals& g, const Run& run, const std::string& table) {
  if (!g.out) {
    std::cout << table;
    return;
  }
  std::ofstream f(*g.out, std::ios::binary);
  if (!f) throw ConfigError("cannot open output file '" + *g.out + "'");
  f << table;
  if (!f.flush()) throw ConfigError("cannot write output file '" + *g.out + "'");

  nlohmann::ordered_json m;
  m["manifest_hash"] = hex64(manifest_hash(run.manifest));
  m["version"] = AGING_MIMO_VERSION;
  m["seed"] = run.rc.scenario.seed;
  m["timestamp"] = iso_timestamp();
  m["workers"] = g.workers;
  m["outputs"] = nlohmann::json::array({*g.out});
  nlohmann::ordered_json cfg;
  for (const auto& [k, v] : run.manifest) cfg[k] = v;
  m["resolved"] = cfg;
  std::ofstream mf(*g.out + ".manifest.json", std::ios::binary);
  if (!mf) throw ConfigError("cannot write manifest next to '" + *g.out + "'");
  mf << m.dump(2) << '\n';
}

void write_meta(CsvWriter& csv, const Run& run) {
  csv.meta("manifest", hex64(manifest_hash(run.manifest)));
  csv.meta("version", AGING_MIMO_VERSION);
  csv.meta("seed", std::to_string(run.rc.scenario.seed));
  csv.meta("trials", std::to_string(run.plan.n_trials));
  csv.meta("overhead_factor", format_number(run.rc.scenario.overhead_factor()));
}

std::string opt_num(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

void progress(const Globals& g, const std::string& what) {
  if (g.verbose) std::cerr << what << std::endl;
}

struct SnrFlags {
  std::vector<double> beta_cross;
  bool no_bounds = false;
};

int cmd_sweep_snr(const Globals& g, const SnrFlags& f) {
  Run run = prepare(g, "sweep-snr", "-10:40:2");
  std::vector<double> betas = f.beta_cross.empty() ? std::vector<double>{run.rc.beta_cross} : f.beta_cross;
  if (run.rc.fading_mode == FadingMode::hexagonal && !f.beta_cross.empty())
    throw UsageError("--beta-cross applies to the uniform fading mode only");
  std::vector<std::string> bs;
  for (double b : betas) {
    if (!(b >= 0.0)) throw UsageError("--beta-cross values must be >= 0");
    bs.push_back(format_number(b));
  }
  run.manifest["beta_cross"] = join(bs);
  run.manifest["bounds"] = f.no_bounds ? "0" : "1";

  std::ostringstream table;
  CsvWriter csv(table);
  write_meta(csv, run);
  csv.row({"snr_db", "receiver", "beta_cross", "mean_R", "stderr", "de_R", "lower_bound_R", "upper_bound_R"});
  SweepOptions opt;
  opt.bounds = !f.no_bounds;
  const bool hex = run.rc.fading_mode == FadingMode::hexagonal;  // beta_cross unused
  for (double beta : betas) {
    RunConfig rc = run.rc;
    rc.beta_cross = beta;
    const auto lsf = build_fading(rc);
    for (double x : run.grid.values) {
      progress(g, "sweep-snr beta_cross=" + format_number(beta) + " snr_db=" + format_number(x));
      const auto pt = evaluate_point(apply_axis(rc.scenario, SweepAxis::snr_db, x), lsf, run.plan, opt, x);
      for (std::size_t r = 0; r < pt.results.size(); ++r) {
        const bool olr = pt.results[r].kind == ReceiverKind::olr;
        csv.row({format_number(x), std::string(to_string(pt.results[r].kind)), hex ? "" : format_number(beta),
                 format_number(pt.spectral_efficiency[r]), format_number(pt.spectral_std_error[r]),
                 olr ? opt_num(pt.de_rate) : "", olr ? opt_num(pt.lower_rate) : "",
                 olr ? opt_num(pt.upper_rate) : ""});
      }
      if (pt.jittered) progress(g, "note: tied bound inputs were jittered");
    }
  }
  emit(g, run, table.str());
  return kExitOk;
}

int cmd_sweep_doppler(const Globals& g, const std::vector<int>& antennas_flag) {
  Run run = prepare(g, "sweep-doppler", "0:0.45:0.01");
  std::vector<int> antennas = antennas_flag.empty() ? std::vector<int>{50, 100} : antennas_flag;
  std::vector<std::string> ns;
  for (int n : antennas) ns.push_back(std::to_string(n));
  run.manifest["antennas"] = join(ns);
  const auto lsf = build_fading(run.rc);

  std::ostringstream table;
  CsvWriter csv(table);
  write_meta(csv, run);
  csv.row({"fD_Ts", "alpha", "receiver", "N", "mean_R", "stderr", "de_R", "degenerate"});
  for (int n : antennas) {
    RunConfig rc = run.rc;
    rc.scenario.antennas = n;
    try {
      rc.validate();
    } catch (const ConfigError& e) {
      throw UsageError(std::string("--antennas: ") + e.what());
    }
    for (double x : run.grid.values) {
      progress(g, "sweep-doppler N=" + std::to_string(n) + " fD_Ts=" + format_number(x));
      const auto pt = evaluate_point(apply_axis(rc.scenario, SweepAxis::doppler, x), lsf, run.plan, {}, x);
      for (std::size_t r = 0; r < pt.results.size(); ++r) {
        const bool olr = pt.results[r].kind == ReceiverKind::olr;
        csv.row({format_number(x), format_number(pt.alpha), std::string(to_string(pt.results[r].kind)),
                 std::to_string(n), format_number(pt.spectral_efficiency[r]),
                 format_number(pt.spectral_std_error[r]), olr ? opt_num(pt.de_rate) : "",
                 pt.degenerate ? "1" : "0"});
      }
    }
  }
  emit(g, run, table.str());
  return kExitOk;
}

struct BoundsFlags {
  std::string second_term = "corrected";
  std::string lower = "corrected";
  std::string t_variant = "summed";
  double tolerance_se = 2.0;
};

int cmd_bounds(Globals g, const BoundsFlags& f) {
  g.receivers = "olr";
  Run run = prepare(g, "bounds", "-10:30:5");
  SweepOptions opt;
  opt.bounds = true;
  if (f.second_term == "printed") opt.bound_options.second_term = SecondTermVariant::printed;
  else if (f.second_term != "corrected") throw UsageError("--second-term must be corrected or printed");
  if (f.lower == "printed") opt.bound_options.lower = LowerBoundVariant::printed;
  else if (f.lower != "corrected") throw UsageError("--lower-form must be corrected or printed");
  if (f.t_variant == "squared") opt.t_variant = EffectiveTVariant::squared;
  else if (f.t_variant != "summed") throw UsageError("--t-variant must be summed or squared");
  run.manifest["second_term"] = f.second_term;
  run.manifest["lower_form"] = f.lower;
  run.manifest["t_variant"] = f.t_variant;
  run.manifest["tolerance_se"] = format_number(f.tolerance_se);
  const auto lsf = build_fading(run.rc);

  std::ostringstream table;
  CsvWriter csv(table);
  write_meta(csv, run);
  csv.row({"snr_db", "mc_R", "mc_stderr", "lower_R", "upper_R", "de_R", "sandwich_ok"});
  std::vector<std::string> violations;
  for (double x : run.grid.values) {
    progress(g, "bounds snr_db=" + format_number(x));
    const auto pt = evaluate_point(apply_axis(run.rc.scenario, SweepAxis::snr_db, x), lsf, run.plan, opt, x);
    const double mc = pt.spectral_efficiency.at(0);
    const double se = pt.spectral_std_error.at(0);
    const double slack = f.tolerance_se * se;
    const bool ok = *pt.lower_rate <= mc + slack && mc - slack <= *pt.upper_rate;
    if (!ok) violations.push_back("snr_db=" + format_number(x) + " lower=" + format_number(*pt.lower_rate) +
                                  " mc=" + format_number(mc) + " upper=" + format_number(*pt.upper_rate));
    csv.row({format_number(x), format_number(mc), format_number(se), opt_num(pt.lower_rate),
             opt_num(pt.upper_rate), opt_num(pt.de_rate), ok ? "1" : "0"});
  }
  emit(g, run, table.str());
  if (violations.empty()) return kExitOk;
  std::cerr << "bound sandwich violated at " << violations.size() << " row(s):\n";
  for (const auto& v : violations) std::cerr << "  " << v << '\n';
  return kExitValidation;
}

int cmd_validate(const Globals& g, const std::vector<std::string>& suites, bool force_ties) {
  for (const auto& s : suites)
    if (std::find(validation_suites().begin(), validation_suites().end(), s) == validation_suites().end())
      throw UsageError("unknown suite '" + s + "' (expected " + join(validation_suites()) + ")");
  ValidationOptions opt;
  opt.seed = g.seed.value_or(1);
  opt.force_ties = force_ties;
  opt.log = &std::cerr;
  const auto checks = run_validation(suites, opt);
  bool all = true;
  for (const auto& c : checks) {
    all = all && c.passed;
    std::cout << (c.passed ? "PASS" : "FAIL") << "  [" << c.suite << "] " << c.name
              << "  measured=" << format_number(c.measured) << "  threshold=" << format_number(c.threshold)
              << '\n';
  }
  std::cout << (all ? "all checks passed" : "some checks FAILED") << '\n';
  return all ? kExitOk : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-cell uplink receivers under channel aging and pilot contamination"};
  app.set_version_flag("--version", std::string(AGING_MIMO_VERSION));
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "INI config file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "master seed (overrides the config)");
  app.add_option("--trials", g.trials, "Monte-Carlo trials per grid point")->capture_default_str();
  app.add_option("--out", g.out, "output CSV path (stdout when omitted)");
  app.add_option("--workers", g.workers, "worker threads")->capture_default_str();
  app.add_option("--receivers", g.receivers, "comma-separated subset of olr,mmse,mrc,zf")->capture_default_str();
  app.add_option("--grid", g.grid, "sweep grid start:stop:step");
  app.add_flag("-v,--verbose", g.verbose, "progress on stderr");

  SnrFlags snr;
  auto* s_snr = app.add_subcommand("sweep-snr", "sum spectral efficiency versus SNR (dB)");
  s_snr->add_option("--beta-cross", snr.beta_cross, "cross-cell gains to sweep (uniform mode)")->delimiter(',');
  s_snr->add_flag("--no-bounds", snr.no_bounds, "skip the analytic bounds");

  std::vector<int> dop_antennas;
  auto* s_dop = app.add_subcommand("sweep-doppler", "sum spectral efficiency versus normalized Doppler");
  s_dop->add_option("--antennas", dop_antennas, "antenna counts (default 50,100)")->delimiter(',');

  BoundsFlags bf;
  auto* s_bounds = app.add_subcommand("bounds", "OLR Monte-Carlo rate against the analytic bounds");
  s_bounds->add_option("--second-term", bf.second_term, "corrected|printed")->capture_default_str();
  s_bounds->add_option("--lower-form", bf.lower, "corrected|printed")->capture_default_str();
  s_bounds->add_option("--t-variant", bf.t_variant, "summed|squared")->capture_default_str();
  s_bounds->add_option("--tolerance-se", bf.tolerance_se, "allowed standard errors")->capture_default_str();

  std::vector<std::string> suites;
  bool force_ties = false;
  auto* s_val = app.add_subcommand("validate", "run the oracle suites");
  s_val->add_option("--suite", suites, "suite(s) to run: " + join(validation_suites()))->delimiter(',');
  s_val->add_flag("--force-ties", force_ties, "eigen-PDF suite with tied loads");

  for (auto* sub : {s_snr, s_dop, s_bounds, s_val}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (s_snr->parsed()) return cmd_sweep_snr(g, snr);
    if (s_dop->parsed()) return cmd_sweep_doppler(g, dop_antennas);
    if (s_bounds->parsed()) return cmd_bounds(g, bf);
    if (s_val->parsed()) return cmd_validate(g, suites, force_ties);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const DomainError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitUsage;
}
