#pragma once

// Oracle suites behind `aging-mimo validate`. Each check compares the library
// against an independent route (Boost special functions, adaptive quadrature,
// sampled spectra, simulated symbols) and reports the measured error.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/expint.hpp>

#include "aging_mimo/analysis.hpp"
#include "aging_mimo/channel.hpp"
#include "aging_mimo/receivers.hpp"
#include "aging_mimo/scenario.hpp"
#include "aging_mimo/specfun.hpp"

namespace aging {

struct Check {
  std::string suite;
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double threshold = 0.0;
};

struct ValidationOptions {
  std::uint64_t seed = 1;
  bool force_ties = false;      // eigen-PDF suite on identical t values
  std::ostream* log = nullptr;  // warnings
};

inline const std::vector<std::string>& validation_suites() {
  static const std::vector<std::string> s{"specfun", "eigenpdf", "eigensplit", "symbol", "optimality"};
  return s;
}

namespace detail {

inline double rel_err(double a, double b) { return std::fabs(a - b) / std::max(std::fabs(b), 1e-300); }

inline Check make_check(std::string suite, std::string name, double measured, double threshold) {
  return {std::move(suite), std::move(name), measured <= threshold, measured, threshold};
}

inline std::vector<Check> suite_specfun() {
  std::vector<Check> out;
  double worst = 0.0;
  for (double x : {-1e-6, -0.01, -0.5, -1.0, -2.0, -5.0, -6.0, -10.0, -20.0, -50.0, -200.0})
    worst = std::max(worst, rel_err(expint_ei(x), boost::math::expint(x)));
  out.push_back(make_check("specfun", "Ei vs Boost.Math", worst, 1e-12));

  worst = 0.0;
  double rec = 0.0;
  for (int n = 1; n <= 60; ++n)
    for (double z : {0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 25.0, 50.0}) {
      const double en = expint_en(n, z);
      worst = std::max(worst, rel_err(en, boost::math::expint(n, z)));
      // n E_{n+1} = e^{-z} - z E_n, compared on the e^{-z} scale
      rec = std::max(rec, std::fabs(n * expint_en(n + 1, z) + z * en - std::exp(-z)) / std::exp(-z));
    }
  out.push_back(make_check("specfun", "E_n vs Boost.Math", worst, 1e-12));
  out.push_back(make_check("specfun", "E_n recurrence residual", rec, 1e-12));

  worst = 0.0;
  for (double x = 0.0; x <= 60.0; x += 0.37) worst = std::max(worst, std::fabs(bessel_j0(x) - std::cyl_bessel_j(0.0, x)));
  out.push_back(make_check("specfun", "J0 vs std::cyl_bessel_j", worst, 1e-10));
  return out;
}

// Spectrum test: one uniformly chosen nonzero eigenvalue of S_k per draw,
// binned into equiprobable cells of the analytic cdf.
inline std::vector<Check> suite_eigenpdf(const ValidationOptions& opt) {
  ScenarioConfig c;
  c.cells = 2;
  c.users = 5;
  c.antennas = 16;
  c.p = c.p_p = 10.0;
  c.seed = opt.seed;
  const auto lsf = uniform_interference_profile(c, 0.5, opt.force_ties ? 0.0 : 6.0);
  const auto stats = estimation_params(lsf, 0.9, c.p, c.p_p);
  const int k = 0;
  auto in = make_bound_inputs(stats, lsf, c.antennas, k);
  if (in.jittered && opt.log)
    *opt.log << "warning: tied eigenvalue loads; applied multiplicative jitter of " << kTieJitter << "\n";
  const EigenDensity density(in);

  std::vector<Check> out;
  using boost::math::quadrature::gauss_kronrod;
  const double inf = std::numeric_limits<double>::infinity();
  const double mass = gauss_kronrod<double, 61>::integrate([&](double x) { return density.pdf(x); }, 0.0, inf, 12, 1e-12);
  out.push_back(make_check("eigenpdf", "density integrates to 1", std::fabs(mass - 1.0), 1e-8));

  const double s = in.sigma2;
  const double q_inv = gauss_kronrod<double, 61>::integrate(
      [&](double x) { return density.pdf(x) / (x + s); }, 0.0, inf, 12, 1e-12);
  out.push_back(make_check("eigenpdf", "E[1/(lambda+s)] vs quadrature", rel_err(density.expected_inverse(s), q_inv), 1e-8));
  const double q_log = gauss_kronrod<double, 61>::integrate(
      [&](double x) { return density.pdf(x) * std::log(x + s); }, 0.0, inf, 12, 1e-12);
  out.push_back(make_check("eigenpdf", "E[ln(lambda+s)] vs quadrature", rel_err(density.expected_log(s), q_log), 1e-8));

  constexpr int kBins = 20;
  constexpr int kDraws = 10000;
  std::vector<double> edges{0.0};
  double hi = 1.0;
  while (density.cdf(hi) < 1.0 - 1e-9) hi *= 2.0;
  for (int b = 1; b < kBins; ++b) {
    const double target = double(b) / kBins;
    double lo = edges.back(), up = hi;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + up);
      (density.cdf(mid) < target ? lo : up) = mid;
    }
    edges.push_back(0.5 * (lo + up));
  }
  std::vector<int> counts(kBins, 0);
  Rng rng(substream_seed(opt.seed, 0x51ec, 0));
  std::uniform_int_distribution<int> pick(0, c.users - 2);
  for (int d = 0; d < kDraws; ++d) {
    const auto draw = sample_estimate(stats, lsf, c.antennas, rng);
    const auto ev = interference_spectrum(draw, lsf, k);
    const double x = ev[std::size_t(pick(rng))];
    const auto bin = std::upper_bound(edges.begin(), edges.end(), x) - edges.begin() - 1;
    ++counts[std::size_t(std::clamp<long>(bin, 0, kBins - 1))];
  }
  double chi2 = 0.0;
  const double expect = double(kDraws) / kBins;
  for (int n : counts) chi2 += (n - expect) * (n - expect) / expect;
  const double p = boost::math::cdf(boost::math::complement(boost::math::chi_squared(kBins - 1), chi2));
  Check chk{"eigenpdf", "chi-squared goodness of fit (p-value)", p > 0.01, p, 0.01};
  out.push_back(chk);
  return out;
}

inline std::vector<Check> suite_eigensplit(const ValidationOptions& opt) {
  ScenarioConfig c;
  c.cells = 2;
  c.users = 4;
  c.antennas = 12;
  c.seed = opt.seed;
  const auto lsf = uniform_interference_profile(c, 0.6, 4.0);
  const auto stats = estimation_params(lsf, 0.95, 10.0, 10.0);
  Rng rng(substream_seed(opt.seed, 0xe195, 0));
  double worst = 0.0;
  for (int d = 0; d < 1000; ++d) {
    const auto draw = sample_estimate(stats, lsf, c.antennas, rng);
    for (int k = 0; k < c.users; ++k)
      worst = std::max(worst, rel_err(olr_sinr_eigen(draw, stats, lsf, k).value(),
                                      olr_quadratic_form(draw, stats, lsf, k)));
  }
  return {make_check("eigensplit", "direct vs eigen-split quadratic form", worst, 1e-8)};
}

inline std::vector<Check> suite_symbol(const ValidationOptions& opt) {
  ScenarioConfig c;
  c.cells = 2;
  c.users = 2;
  c.antennas = 8;
  c.seed = opt.seed;
  const auto lsf = uniform_interference_profile(c, 0.5, 3.0);
  const double alpha = 0.9;
  const double p = 10.0;
  const auto stats = estimation_params(lsf, alpha, p, p);
  Rng rng(substream_seed(opt.seed, 0x5e1b, 0));
  const auto draw = sample_estimate(stats, lsf, c.antennas, rng);
  std::vector<Check> out;
  constexpr int kSymbols = 100000;
  for (auto kind : kAllReceivers) {
    const auto set = build_combiners(kind, draw, stats, lsf);
    const auto analytic = sinr_all(set, draw, stats, lsf);
    std::vector<std::complex<double>> cross(std::size_t(c.users));
    std::vector<double> power(std::size_t(c.users), 0.0);
    Rng sym(substream_seed(opt.seed, 0x5e1c + std::uint64_t(kind), 0));
    for (int n = 0; n < kSymbols; ++n) {
      // fresh aging/estimation error per symbol; the estimate stays fixed
      const auto state = sample_true_state(draw, stats, lsf, alpha, sym);
      const auto s = simulate_symbol(state, set.w, p, sym);
      for (int k = 0; k < c.users; ++k) {
        cross[std::size_t(k)] += s.r(k) * std::conj(s.x[std::size_t(draw.reference_cell)](k));
        power[std::size_t(k)] += std::norm(s.r(k));
      }
    }
    double worst = 0.0;
    for (int k = 0; k < c.users; ++k) {
      const double sig = std::norm(cross[std::size_t(k)] / double(kSymbols));
      const double tot = power[std::size_t(k)] / kSymbols;
      worst = std::max(worst, rel_err(sig / (tot - sig), analytic[std::size_t(k)]));
    }
    out.push_back(make_check("symbol", std::string(to_string(kind)) + " empirical vs analytic SINR", worst, 0.05));
  }
  return out;
}

inline std::vector<Check> suite_optimality(const ValidationOptions& opt) {
  ScenarioConfig c;
  c.cells = 3;
  c.users = 5;
  c.antennas = 20;
  c.seed = opt.seed;
  const auto lsf = uniform_interference_profile(c, 1.0);
  const auto stats = estimation_params(lsf, 0.9, 10.0, 10.0);
  Rng rng(substream_seed(opt.seed, 0x0b71, 0));
  double worst = -std::numeric_limits<double>::infinity();  // max relative excess of a baseline over OLR
  for (int d = 0; d < 1000; ++d) {
    const auto draw = sample_estimate(stats, lsf, c.antennas, rng);
    const auto olr = sinr_all(build_combiners(ReceiverKind::olr, draw, stats, lsf), draw, stats, lsf);
    for (auto kind : {ReceiverKind::mmse, ReceiverKind::mrc, ReceiverKind::zf}) {
      const auto other = sinr_all(build_combiners(kind, draw, stats, lsf), draw, stats, lsf);
      for (int k = 0; k < c.users; ++k)
        worst = std::max(worst, (other[std::size_t(k)] - olr[std::size_t(k)]) / olr[std::size_t(k)]);
    }
  }
  return {make_check("optimality", "max relative SINR excess of MMSE/MRC/ZF over OLR", std::max(worst, 0.0), 1e-9)};
}

}  // namespace detail

/// Runs the named suites (all when `only` is empty).
inline std::vector<Check> run_validation(const std::vector<std::string>& only, const ValidationOptions& opt) {
  std::vector<Check> out;
  auto wanted = [&](const std::string& s) { return only.empty() || std::find(only.begin(), only.end(), s) != only.end(); };
  auto add = [&](std::vector<Check> v) { out.insert(out.end(), v.begin(), v.end()); };
  if (wanted("specfun")) add(detail::suite_specfun());
  if (wanted("eigenpdf")) add(detail::suite_eigenpdf(opt));
  if (wanted("eigensplit")) add(detail::suite_eigensplit(opt));
  if (wanted("symbol")) add(detail::suite_symbol(opt));
  if (wanted("optimality")) add(detail::suite_optimality(opt));
  return out;
}

}  // namespace aging
