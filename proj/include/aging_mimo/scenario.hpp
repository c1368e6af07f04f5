#pragma once

// System configuration, large-scale fading and the per-scenario statistics
// derived from it (estimate variances, aging-error powers, effective noise).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "aging_mimo/errors.hpp"
#include "aging_mimo/rng.hpp"
#include "aging_mimo/specfun.hpp"

namespace aging {

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double linear) { return 10.0 * std::log10(linear); }

/// Mobility description. The normalized product f_D * T_s is canonical; the
/// physical triple (velocity, carrier, sampling period) is converted with
/// f_D = v f_c / c.
class DopplerParams {
 public:
  static constexpr double kSpeedOfLight = 3e8;

  static DopplerParams normalized(double fd_ts) {
    if (!(fd_ts >= 0.0) || !std::isfinite(fd_ts))
      throw DomainError("normalized Doppler must be finite and >= 0");
    return DopplerParams(fd_ts);
  }

  static DopplerParams physical(double velocity_mps, double carrier_hz, double ts_s) {
    if (!(velocity_mps > 0.0 && carrier_hz > 0.0 && ts_s > 0.0))
      throw DomainError("Doppler velocity, carrier frequency and sampling period must be positive");
    return DopplerParams(velocity_mps * carrier_hz / kSpeedOfLight * ts_s);
  }

  DopplerParams() = default;

  double normalized_value() const noexcept { return fd_ts_; }

 private:
  explicit DopplerParams(double fd_ts) : fd_ts_(fd_ts) {}
  double fd_ts_ = 0.0;
};

/// Scalar system parameters. Powers are linear; cell/user indices in the
/// library are zero-based.
struct ScenarioConfig {
  int cells = 7;
  int users = 10;
  int antennas = 50;
  double p = 10.0;    // average uplink power per user (= SNR)
  double p_p = 10.0;  // pilot power
  int tau = 10;
  int coherence = 196;
  DopplerParams doppler{};
  std::uint64_t seed = 1;

  void validate() const {
    if (cells < 1) throw ConfigError("cells must be positive");
    if (users < 1) throw ConfigError("users must be positive");
    if (antennas <= users) throw ConfigError("antennas must exceed users per cell (N > K)");
    if (tau < 1) throw ConfigError("pilot length must be >= 1");
    if (coherence <= tau) throw ConfigError("coherence interval must exceed the pilot length");
    if (!(p > 0.0)) throw ConfigError("uplink power must be positive");
    if (!(p_p > 0.0)) throw ConfigError("pilot power must be positive");
  }

  /// Pilot-overhead factor 1 - tau/T.
  double overhead_factor() const { return 1.0 - double(tau) / double(coherence); }
};

/// Large-scale gains beta[l][i][k]: BS l <- user k of cell i.
class LargeScaleFading {
 public:
  LargeScaleFading(int cells, int users)
      : cells_(cells), users_(users), beta_(std::size_t(cells) * cells * users, 0.0) {
    if (cells < 1 || users < 1) throw ConfigError("fading tensor dimensions must be positive");
  }

  int cells() const noexcept { return cells_; }
  int users() const noexcept { return users_; }

  double beta(int l, int i, int k) const { return beta_[index(l, i, k)]; }
  void set_beta(int l, int i, int k, double value) {
    if (!(value >= 0.0) || !std::isfinite(value))
      throw DomainError("large-scale gain must be finite and nonnegative");
    beta_[index(l, i, k)] = value;
  }

  /// [R_li]_kk = beta_lik / beta_llk.
  double ratio(int l, int i, int k) const { return beta(l, i, k) / beta(l, l, k); }

  /// sum_{i != l} (beta_lik / beta_llk)^2: weight of the pilot-contaminating
  /// copies of user k's estimate seen at BS l.
  double contamination(int l, int k) const {
    double c = 0.0;
    for (int i = 0; i < cells_; ++i)
      if (i != l) c += ratio(l, i, k) * ratio(l, i, k);
    return c;
  }

  void validate() const {
    for (int l = 0; l < cells_; ++l)
      for (int k = 0; k < users_; ++k)
        if (!(beta(l, l, k) > 0.0)) throw ConfigError("own-cell large-scale gains must be positive");
  }

  bool operator==(const LargeScaleFading&) const = default;

 private:
  std::size_t index(int l, int i, int k) const {
    if (l < 0 || l >= cells_ || i < 0 || i >= cells_ || k < 0 || k >= users_)
      throw std::out_of_range("large-scale fading index out of range");
    return (std::size_t(l) * cells_ + i) * users_ + k;
  }

  int cells_;
  int users_;
  std::vector<double> beta_;
};

class EstimationStats;
inline EstimationStats estimation_params(const LargeScaleFading& lsf, double alpha, double p,
                                         double p_p);

/// Channel-estimation statistics for one (fading, aging, powers) tuple.
class EstimationStats {
 public:
  int cells() const noexcept { return cells_; }
  int users() const noexcept { return users_; }
  double alpha() const noexcept { return alpha_; }
  double p() const noexcept { return p_; }
  double p_p() const noexcept { return p_p_; }

  /// Estimate variance beta_hat_lik.
  double hat_beta(int l, int i, int k) const { return hat_beta_[(std::size_t(l) * cells_ + i) * users_ + k]; }
  /// e_tilde_li = sum_k (beta_lik - alpha^2 beta_hat_lik).
  double e_tilde(int l, int i) const { return e_tilde_[std::size_t(l) * cells_ + i]; }
  /// sigma^2_l = (sum_i e_tilde_li + 1/p) / alpha^2.
  double sigma2(int l) const { return sigma2_.at(std::size_t(l)); }
  /// sum_i e_tilde_li: the scalar of the aggregated error covariance R_E = (.) I.
  double error_power(int l) const {
    double s = 0.0;
    for (int i = 0; i < cells_; ++i) s += e_tilde(l, i);
    return s;
  }

 private:
  friend EstimationStats estimation_params(const LargeScaleFading&, double, double, double);

  int cells_ = 0;
  int users_ = 0;
  double alpha_ = 1.0;
  double p_ = 1.0;
  double p_p_ = 1.0;
  std::vector<double> hat_beta_;
  std::vector<double> e_tilde_;
  std::vector<double> sigma2_;
};

/// alpha = J0(2 pi f_D T_s).
inline double aging_coefficient(const DopplerParams& doppler) {
  const double fd_ts = doppler.normalized_value();
  if (fd_ts < 0.0) throw DomainError("normalized Doppler must be >= 0");
  return bessel_j0(2.0 * std::numbers::pi * fd_ts);
}

/// MMSE estimate statistics under pilot reuse and AR(1) aging.
inline EstimationStats estimation_params(const LargeScaleFading& lsf, double alpha, double p,
                                         double p_p) {
  if (alpha == 0.0)
    throw DegenerateAgingError("aging coefficient is zero: SINR vanishes identically");
  if (!(std::fabs(alpha) <= 1.0)) throw DomainError("aging coefficient must satisfy |alpha| <= 1");
  if (!(p > 0.0) || !(p_p > 0.0)) throw DomainError("uplink and pilot powers must be positive");
  lsf.validate();

  const int L = lsf.cells();
  const int K = lsf.users();
  EstimationStats s;
  s.cells_ = L;
  s.users_ = K;
  s.alpha_ = alpha;
  s.p_ = p;
  s.p_p_ = p_p;
  s.hat_beta_.resize(std::size_t(L) * L * K);
  s.e_tilde_.assign(std::size_t(L) * L, 0.0);
  s.sigma2_.resize(std::size_t(L));
  const double a2 = alpha * alpha;
  for (int l = 0; l < L; ++l) {
    for (int k = 0; k < K; ++k) {
      double denom = 1.0 / p_p;
      for (int j = 0; j < L; ++j) denom += lsf.beta(l, j, k);
      for (int i = 0; i < L; ++i) {
        const double b = lsf.beta(l, i, k);
        const double bh = b * b / denom;
        s.hat_beta_[(std::size_t(l) * L + i) * K + k] = bh;
        s.e_tilde_[std::size_t(l) * L + i] += std::max(0.0, b - a2 * bh);
      }
    }
    s.sigma2_[std::size_t(l)] = (s.error_power(l) + 1.0 / p) / a2;
  }
  return s;
}

/// beta_llk = 1 on every own-cell link, beta_lik = beta_cross * c_lik across
/// cells, with c_lik = 1 or a log-normal multiplier drawn from config.seed.
inline LargeScaleFading uniform_interference_profile(const ScenarioConfig& config, double beta_cross,
                                                     double shadow_db_sigma = 0.0) {
  if (!(beta_cross >= 0.0)) throw DomainError("beta_cross must be >= 0");
  if (!(shadow_db_sigma >= 0.0)) throw DomainError("shadowing deviation must be >= 0");
  LargeScaleFading lsf(config.cells, config.users);
  Rng rng(splitmix64(config.seed ^ 0x756e69666f726dULL));
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int l = 0; l < config.cells; ++l)
    for (int i = 0; i < config.cells; ++i)
      for (int k = 0; k < config.users; ++k) {
        if (i == l) {
          lsf.set_beta(l, i, k, 1.0);
          continue;
        }
        double c = 1.0;
        if (shadow_db_sigma > 0.0) c = db_to_linear(shadow_db_sigma * gauss(rng));
        lsf.set_beta(l, i, k, beta_cross * c);
      }
  return lsf;
}

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// One user drop over a hexagonal layout.
struct HexagonalDrop {
  LargeScaleFading fading;
  std::vector<Point2> base_stations;      // per cell
  std::vector<Point2> users;              // [cell * K + k]
  double normalization = 1.0;             // multiplier applied to every raw gain
};

namespace detail {

// Flat-top hexagons of circumradius R; neighbour centres are sqrt(3) R apart.
inline std::vector<Point2> hex_centers(int cells, double radius) {
  std::vector<Point2> c{{0.0, 0.0}};
  if (cells == 1) return c;
  if (cells != 7 && cells != 19)
    throw LayoutError("hexagonal layout supports 1, 7 or 19 cells, got " + std::to_string(cells));
  const double d = std::sqrt(3.0) * radius;
  std::vector<Point2> ring;
  for (int j = 0; j < 6; ++j) {
    const double a = std::numbers::pi / 6.0 + j * std::numbers::pi / 3.0;
    ring.push_back({d * std::cos(a), d * std::sin(a)});
  }
  c.insert(c.end(), ring.begin(), ring.end());
  if (cells == 19) {
    for (int j = 0; j < 6; ++j) {
      c.push_back({2.0 * ring[j].x, 2.0 * ring[j].y});
      const auto& b = ring[(j + 1) % 6];
      c.push_back({ring[j].x + b.x, ring[j].y + b.y});
    }
  }
  return c;
}

inline bool inside_hexagon(double x, double y, double radius) {
  const double s3 = std::sqrt(3.0);
  x = std::fabs(x);
  y = std::fabs(y);
  return y <= 0.5 * s3 * radius && s3 * x + y <= s3 * radius;
}

}  // namespace detail

/// Minimum user-BS distance as a fraction of the cell radius.
inline constexpr double kMinDistanceFraction = 0.1;

/// Distance-based gain z * (r / r_ref)^(-exponent), r clamped at r_min.
inline double path_gain(double distance, double cell_radius, double pathloss_exp,
                        double shadow_factor = 1.0) {
  const double r = std::max(distance, kMinDistanceFraction * cell_radius);
  return shadow_factor * std::pow(r / cell_radius, -pathloss_exp);
}

/// Drops K users uniformly in each of L hexagonal cells (L in {1, 7, 19}),
/// applies distance path loss and log-normal shadowing, then rescales so the
/// median own-cell gain is 1.
inline HexagonalDrop hexagonal_large_scale(const ScenarioConfig& config, double cell_radius,
                                           double pathloss_exp, double shadow_db_sigma, Rng& rng) {
  if (!(pathloss_exp > 2.0)) throw DomainError("path-loss exponent must exceed 2");
  if (!(cell_radius > 0.0)) throw DomainError("cell radius must be positive");
  if (!(shadow_db_sigma >= 0.0)) throw DomainError("shadowing deviation must be >= 0");
  const int L = config.cells;
  const int K = config.users;
  HexagonalDrop drop{LargeScaleFading(L, K), detail::hex_centers(L, cell_radius), {}, 1.0};

  std::uniform_real_distribution<double> ux(-cell_radius, cell_radius);
  std::uniform_real_distribution<double> uy(-0.5 * std::sqrt(3.0) * cell_radius,
                                            0.5 * std::sqrt(3.0) * cell_radius);
  const double r_min = kMinDistanceFraction * cell_radius;
  for (int i = 0; i < L; ++i) {
    for (int k = 0; k < K; ++k) {
      double x = 0.0;
      double y = 0.0;
      do {
        x = ux(rng);
        y = uy(rng);
      } while (!detail::inside_hexagon(x, y, cell_radius) || std::hypot(x, y) < r_min);
      drop.users.push_back({drop.base_stations[i].x + x, drop.base_stations[i].y + y});
    }
  }

  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> raw(std::size_t(L) * L * K);
  std::vector<double> own;
  for (int l = 0; l < L; ++l)
    for (int i = 0; i < L; ++i)
      for (int k = 0; k < K; ++k) {
        const auto& u = drop.users[std::size_t(i) * K + k];
        const double r = std::hypot(u.x - drop.base_stations[l].x, u.y - drop.base_stations[l].y);
        const double z = shadow_db_sigma > 0.0 ? db_to_linear(shadow_db_sigma * gauss(rng)) : 1.0;
        const double g = path_gain(r, cell_radius, pathloss_exp, z);
        raw[(std::size_t(l) * L + i) * K + k] = g;
        if (i == l) own.push_back(g);
      }

  std::sort(own.begin(), own.end());
  const std::size_t n = own.size();
  const double median = n % 2 ? own[n / 2] : 0.5 * (own[n / 2 - 1] + own[n / 2]);
  drop.normalization = 1.0 / median;
  for (int l = 0; l < L; ++l)
    for (int i = 0; i < L; ++i)
      for (int k = 0; k < K; ++k)
        drop.fading.set_beta(l, i, k, raw[(std::size_t(l) * L + i) * K + k] * drop.normalization);
  return drop;
}

}  // namespace aging
