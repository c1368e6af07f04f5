#pragma once

// Trial loops: draw estimates, build combiners, evaluate SINR and aggregate
// ergodic rates. Every trial owns an RNG substream derived from (seed, trial)
// and the reduction runs in trial order, so results do not depend on the
// number of workers.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "aging_mimo/analysis.hpp"
#include "aging_mimo/channel.hpp"
#include "aging_mimo/errors.hpp"
#include "aging_mimo/receivers.hpp"
#include "aging_mimo/rng.hpp"
#include "aging_mimo/scenario.hpp"

namespace aging {

/// |alpha| below this is treated as a zero of J0.
inline constexpr double kDegenerateAlpha = 1e-12;

struct TrialPlan {
  int n_trials = 5000;
  std::vector<ReceiverKind> receivers{kAllReceivers.begin(), kAllReceivers.end()};
  int reference_cell = 0;
  std::uint64_t seed = 1;
  int workers = 1;
  std::uint64_t config_hash = 0;  // carried into results for traceability

  std::uint64_t trial_seed(int trial) const {
    return substream_seed(seed, std::uint64_t(trial), std::uint64_t(reference_cell));
  }

  void validate() const {
    if (n_trials < 1) throw ConfigError("trial count must be >= 1");
    if (workers < 1) throw ConfigError("worker count must be >= 1");
    if (receivers.empty()) throw ConfigError("at least one receiver is required");
    if (reference_cell < 0 || reference_cell > 255) throw ConfigError("reference cell out of range");
    for (std::size_t i = 0; i < receivers.size(); ++i)
      for (std::size_t j = i + 1; j < receivers.size(); ++j)
        if (receivers[i] == receivers[j]) throw ConfigError("receiver listed twice");
  }
};

struct RateResult {
  ReceiverKind kind = ReceiverKind::olr;
  int trials = 0;
  std::uint64_t config_hash = 0;
  std::vector<double> rate;       // per-user mean log2(1 + SINR)
  std::vector<double> std_error;  // per-user standard error of `rate`
  std::vector<double> mean_sinr;  // per-user mean SINR
  double sum_rate = 0.0;          // sum_k rate[k]
  double sum_std_error = 0.0;     // standard error of the per-trial sum
};

/// (1 - tau/T) sum_k R_k.
inline double sum_spectral_efficiency(const RateResult& r, int tau, int coherence) {
  if (tau < 0 || coherence <= tau) throw DomainError("need 0 <= tau < T");
  double s = 0.0;
  for (double v : r.rate) s += v;
  return (1.0 - double(tau) / double(coherence)) * s;
}

namespace detail {

// Runs body(trial) for every trial on `workers` threads. The first failure by
// trial index is rethrown with the index attached.
template <class Body>
void for_each_trial(int n_trials, int workers, Body&& body) {
  std::atomic<int> next{0};
  std::mutex mu;
  int failed_trial = -1;
  std::exception_ptr failure;
  auto run = [&] {
    for (int t = next++; t < n_trials; t = next++) {
      try {
        body(t);
      } catch (...) {
        std::lock_guard lock(mu);
        if (failed_trial < 0 || t < failed_trial) {
          failed_trial = t;
          failure = std::current_exception();
        }
      }
    }
  };
  const int n = std::max(1, std::min(workers, n_trials));
  if (n == 1) {
    run();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < n; ++w) pool.emplace_back(run);
  }
  if (!failure) return;
  try {
    std::rethrow_exception(failure);
  } catch (const TrialError&) {
    throw;
  } catch (const std::exception& e) {
    throw TrialError(failed_trial, e.what());
  }
}

}  // namespace detail

/// Monte-Carlo ergodic rates of every requested receiver, given estimation
/// statistics already derived for this operating point.
inline std::vector<RateResult> estimate_rates(const EstimationStats& stats, const LargeScaleFading& lsf,
                                              int antennas, const TrialPlan& plan) {
  plan.validate();
  const int K = lsf.users();
  const int R = static_cast<int>(plan.receivers.size());
  const std::size_t stride = std::size_t(R) * K;
  std::vector<double> sinr_store(std::size_t(plan.n_trials) * stride);

  detail::for_each_trial(plan.n_trials, plan.workers, [&](int t) {
    Rng rng(plan.trial_seed(t));
    const ChannelDraw draw = sample_estimate(stats, lsf, antennas, rng, plan.reference_cell);
    for (int r = 0; r < R; ++r) {
      const auto set = build_combiners(plan.receivers[std::size_t(r)], draw, stats, lsf);
      const auto s = sinr_all(set, draw, stats, lsf);
      for (int k = 0; k < K; ++k) {
        if (!std::isfinite(s[std::size_t(k)]) || s[std::size_t(k)] < 0.0)
          throw NumericalError("non-finite SINR");
        sinr_store[std::size_t(t) * stride + std::size_t(r) * K + k] = s[std::size_t(k)];
      }
    }
  });

  // Sequential reduction in trial order keeps the floating-point sums fixed.
  std::vector<RateResult> out;
  const double n = plan.n_trials;
  for (int r = 0; r < R; ++r) {
    RateResult res;
    res.kind = plan.receivers[std::size_t(r)];
    res.trials = plan.n_trials;
    res.config_hash = plan.config_hash;
    std::vector<double> sum(std::size_t(K), 0.0), sum2(std::size_t(K), 0.0), ssum(std::size_t(K), 0.0);
    double tot = 0.0, tot2 = 0.0;
    for (int t = 0; t < plan.n_trials; ++t) {
      double trial_sum = 0.0;
      for (int k = 0; k < K; ++k) {
        const double s = sinr_store[std::size_t(t) * stride + std::size_t(r) * K + k];
        const double rate = std::log2(1.0 + s);
        sum[std::size_t(k)] += rate;
        sum2[std::size_t(k)] += rate * rate;
        ssum[std::size_t(k)] += s;
        trial_sum += rate;
      }
      tot += trial_sum;
      tot2 += trial_sum * trial_sum;
    }
    auto std_err = [n](double s, double s2) {
      if (n < 2) return 0.0;
      const double var = std::max(0.0, (s2 - s * s / n) / (n - 1));
      return std::sqrt(var / n);
    };
    for (int k = 0; k < K; ++k) {
      res.rate.push_back(sum[std::size_t(k)] / n);
      res.std_error.push_back(std_err(sum[std::size_t(k)], sum2[std::size_t(k)]));
      res.mean_sinr.push_back(ssum[std::size_t(k)] / n);
      res.sum_rate += res.rate.back();
    }
    res.sum_std_error = std_err(tot, tot2);
    out.push_back(std::move(res));
  }
  return out;
}

/// Convenience overload deriving alpha and the statistics from the config.
inline std::vector<RateResult> estimate_rates(const ScenarioConfig& config, const LargeScaleFading& lsf,
                                              const TrialPlan& plan) {
  config.validate();
  const double alpha = aging_coefficient(config.doppler);
  const auto stats = estimation_params(lsf, alpha, config.p, config.p_p);
  return estimate_rates(stats, lsf, config.antennas, plan);
}

enum class SweepAxis { snr_db, doppler, antennas };

struct SweepOptions {
  bool monte_carlo = true;
  bool deterministic_equivalent = true;
  bool bounds = false;
  BoundOptions bound_options{};
  EffectiveTVariant t_variant = EffectiveTVariant::summed;
  DEOptions de_options{};
};

/// One grid point. Rates are sum spectral efficiencies (bits/s/Hz).
struct SweepPoint {
  double x = 0.0;
  double alpha = 1.0;
  int antennas = 0;
  bool degenerate = false;        // alpha at a zero of J0: everything reported as 0
  std::vector<RateResult> results;
  std::vector<double> spectral_efficiency;  // per receiver, (1 - tau/T) sum_k R_k
  std::vector<double> spectral_std_error;
  std::optional<double> de_rate;
  std::optional<double> de_mean_sinr;  // mean over users of the per-user SINR equivalent
  std::optional<double> lower_rate;
  std::optional<double> upper_rate;
  bool jittered = false;  // tie policy applied to some bound input
};

/// Applies grid value x on the given axis. SNR values are in dB and set both
/// the data and the pilot power, keeping their ratio.
inline ScenarioConfig apply_axis(ScenarioConfig c, SweepAxis axis, double x) {
  switch (axis) {
    case SweepAxis::snr_db: {
      const double ratio = c.p_p / c.p;
      c.p = db_to_linear(x);
      c.p_p = ratio * c.p;
      break;
    }
    case SweepAxis::doppler:
      c.doppler = DopplerParams::normalized(x);
      break;
    case SweepAxis::antennas:
      if (x != std::floor(x)) throw ConfigError("antenna grid values must be integers");
      c.antennas = static_cast<int>(x);
      break;
  }
  return c;
}

/// Evaluates one operating point with the frozen large-scale fading.
inline SweepPoint evaluate_point(const ScenarioConfig& config, const LargeScaleFading& lsf,
                                 const TrialPlan& plan, const SweepOptions& opt, double x = 0.0) {
  config.validate();
  SweepPoint pt;
  pt.x = x;
  pt.antennas = config.antennas;
  pt.alpha = aging_coefficient(config.doppler);
  const double overhead = config.overhead_factor();
  const int K = lsf.users();
  if (std::fabs(pt.alpha) < kDegenerateAlpha) {
    pt.degenerate = true;
    for (auto kind : plan.receivers) {
      RateResult r;
      r.kind = kind;
      r.trials = 0;
      r.config_hash = plan.config_hash;
      r.rate.assign(std::size_t(K), 0.0);
      r.std_error.assign(std::size_t(K), 0.0);
      r.mean_sinr.assign(std::size_t(K), 0.0);
      pt.results.push_back(std::move(r));
      pt.spectral_efficiency.push_back(0.0);
      pt.spectral_std_error.push_back(0.0);
    }
    if (opt.deterministic_equivalent) {
      pt.de_rate = 0.0;
      pt.de_mean_sinr = 0.0;
    }
    if (opt.bounds) {
      pt.lower_rate = 0.0;
      pt.upper_rate = 0.0;
    }
    return pt;
  }
  const auto stats = estimation_params(lsf, pt.alpha, config.p, config.p_p);
  const int l = plan.reference_cell;
  if (opt.monte_carlo) {
    pt.results = estimate_rates(stats, lsf, config.antennas, plan);
    for (const auto& r : pt.results) {
      pt.spectral_efficiency.push_back(overhead * r.sum_rate);
      pt.spectral_std_error.push_back(overhead * r.sum_std_error);
    }
  }
  if (opt.deterministic_equivalent) {
    double rate = 0.0, sinr = 0.0;
    for (int k = 0; k < K; ++k) {
      const auto de = de_sinr(stats, lsf, config.antennas, k, opt.de_options, l);
      rate += std::log2(1.0 + de.sinr);
      sinr += de.sinr;
    }
    pt.de_rate = overhead * rate;
    pt.de_mean_sinr = sinr / K;
  }
  if (opt.bounds) {
    double lo = 0.0, hi = 0.0;
    for (int k = 0; k < K; ++k) {
      const auto in = make_bound_inputs(stats, lsf, config.antennas, k, l, opt.t_variant);
      pt.jittered = pt.jittered || in.jittered;
      hi += rate_upper_bound(in, opt.bound_options);
      lo += K >= 2 ? rate_lower_bound(in, opt.bound_options) : 0.0;
    }
    pt.lower_rate = overhead * lo;
    pt.upper_rate = overhead * hi;
  }
  return pt;
}

/// Sweeps one axis over a strictly increasing grid, re-deriving the
/// estimation statistics at each point.
inline std::vector<SweepPoint> sweep(const ScenarioConfig& config, const LargeScaleFading& lsf,
                                     SweepAxis axis, const std::vector<double>& grid,
                                     const TrialPlan& plan, const SweepOptions& opt = {}) {
  if (grid.empty()) throw ConfigError("sweep grid is empty");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw ConfigError("sweep grid must be strictly increasing");
  if (lsf.cells() != config.cells || lsf.users() != config.users)
    throw ConfigError("fading tensor does not match the configuration");
  std::vector<SweepPoint> out;
  for (double x : grid) out.push_back(evaluate_point(apply_axis(config, axis, x), lsf, plan, opt, x));
  return out;
}

}  // namespace aging
