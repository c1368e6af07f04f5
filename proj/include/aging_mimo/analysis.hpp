#pragma once

// Closed-form analysis of the OLR: the unordered-eigenvalue density of the
// interference Gram S_k, its inverse and log moments, the ergodic-rate upper
// and lower bounds, and the large-antenna deterministic equivalent.
//
// The eigenvalue density is a cofactor-weighted mixture of Gamma kernels
// whose weights blow up as the t values approach each other. All sums over
// the weights run in a multiprecision tier sized for the expected loss.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <numeric>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>

#include "aging_mimo/errors.hpp"
#include "aging_mimo/precision.hpp"
#include "aging_mimo/scenario.hpp"
#include "aging_mimo/specfun.hpp"

namespace aging {

inline constexpr double kEulerGamma = std::numbers::egamma_v<double>;

/// Relative gap below which two t values count as tied, and the jitter step.
inline constexpr double kTieGap = 1e-8;
inline constexpr double kTieJitter = 1e-7;

enum class EffectiveTVariant {
  summed,   // t_v = sum_i beta_hat_liv: column variances of the Gram factor
  squared,  // t_v = sum_i beta_hat_liv^2
};

/// Inputs of the rate bounds for one user k at the reference BS.
struct BoundInputs {
  int N = 0;
  int K = 0;
  double sigma2 = 1.0;
  std::vector<double> t;       // K-1 loads of the interfering columns
  double signal_scale = 1.0;   // beta_hat_llk, the variance of g_k's entries
  double contamination = 0.0;  // c_k = sum_{i != l} (beta_lik / beta_llk)^2
  bool jittered = false;       // tie policy was applied to t

  void validate() const {
    if (K < 1 || N <= K) throw DomainError("bounds need N > K >= 1");
    if (t.size() != std::size_t(K - 1)) throw DomainError("t must have K-1 entries");
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw DomainError("sigma^2 must be positive");
    if (!(signal_scale > 0.0)) throw DomainError("signal scale must be positive");
    if (!(contamination >= 0.0)) throw DomainError("contamination weight must be >= 0");
    for (double v : t)
      if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("t entries must be positive");
  }
};

/// Smallest pairwise relative gap |t_i - t_j| / max(t_i, t_j); +inf for < 2 entries.
inline double min_relative_gap(const std::vector<double>& t) {
  std::vector<double> s(t);
  std::sort(s.begin(), s.end());
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < s.size(); ++i) gap = std::min(gap, (s[i] - s[i - 1]) / s[i]);
  return gap;
}

/// Tie policy: within each run of values closer than kTieGap, the m-th
/// duplicate (m = 1, 2, ...) is scaled by (1 + m kTieJitter). Returns whether
/// anything moved.
inline bool apply_tie_jitter(std::vector<double>& t) {
  bool changed = false;
  for (int pass = 0; pass < 8 && min_relative_gap(t) < kTieGap; ++pass) {
    std::vector<std::size_t> order(t.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return t[a] < t[b]; });
    std::size_t run_start = 0;
    for (std::size_t r = 1; r < order.size(); ++r) {
      const double base = t[order[run_start]];
      if ((t[order[r]] - base) / t[order[r]] < kTieGap) {
        t[order[r]] = base * (1.0 + double(r - run_start) * kTieJitter);
        changed = true;
      } else {
        run_start = r;
      }
    }
  }
  if (min_relative_gap(t) < kTieGap) throw NumericalError("tie jitter could not separate the t values");
  return changed;
}

/// Diagonal of the effective covariance of S_k's factor, user k removed.
inline std::vector<double> effective_t(const EstimationStats& stats, int k, int l = 0,
                                       EffectiveTVariant variant = EffectiveTVariant::summed) {
  if (k < 0 || k >= stats.users()) throw std::out_of_range("user index out of range");
  std::vector<double> t;
  for (int v = 0; v < stats.users(); ++v) {
    if (v == k) continue;
    double s = 0.0;
    for (int i = 0; i < stats.cells(); ++i) {
      const double b = stats.hat_beta(l, i, v);
      s += variant == EffectiveTVariant::squared ? b * b : b;
    }
    t.push_back(s);
  }
  return t;
}

inline BoundInputs make_bound_inputs(const EstimationStats& stats, const LargeScaleFading& lsf, int N,
                                     int k, int l = 0,
                                     EffectiveTVariant variant = EffectiveTVariant::summed) {
  BoundInputs in;
  in.N = N;
  in.K = stats.users();
  in.sigma2 = stats.sigma2(l);
  in.t = effective_t(stats, k, l, variant);
  in.signal_scale = stats.hat_beta(l, l, k);
  in.contamination = lsf.contamination(l, k);
  in.jittered = apply_tie_jitter(in.t);
  in.validate();
  return in;
}

namespace detail {

// Elementary symmetric polynomials e_0..e_n of the values, skipping index `skip`.
template <class Real>
std::vector<Real> elementary_symmetric(const std::vector<Real>& x, std::size_t skip) {
  std::vector<Real> e(x.size() + 1, Real(0));
  e[0] = 1;
  std::size_t count = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (i == skip) continue;
    ++count;
    for (std::size_t j = count; j >= 1; --j) e[j] += x[i] * e[j - 1];
  }
  return e;
}

}  // namespace detail

/// Signed (v, u) cofactor (zero-based) of the m x m matrix D_ij = t_i^j.
/// A Vandermonde minor with column u removed equals the Vandermonde product
/// of the remaining nodes times e_{m-1-u} of those nodes.
inline double vandermonde_cofactor(const std::vector<double>& t, int v, int u) {
  const int m = static_cast<int>(t.size());
  if (v < 0 || v >= m || u < 0 || u >= m) throw std::out_of_range("cofactor index out of range");
  double vp = 1.0;
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j)
      if (i != v && j != v) vp *= t[j] - t[i];
  const auto e = detail::elementary_symmetric(t, std::size_t(v));
  return ((v + u) % 2 ? -1.0 : 1.0) * vp * e[std::size_t(m - 1 - u)];
}

enum class InverseMomentForm {
  automatic,         // Ei/factorial form unless it needs more than the top tier
  ei_factorial,      // Ei(-s/t) plus the finite factorial sum
  incomplete_gamma,  // e^{s/t} E_{n+1}(s/t); no cancellation in s/t
};

namespace detail {

// Decimal digits lost to the cofactor sums.
inline double cofactor_loss_digits(const std::vector<double>& t) {
  if (t.size() < 2) return 0.0;
  const double gap = min_relative_gap(t);
  return double(t.size() - 1) * std::max(0.0, -std::log10(gap));
}

// Extra loss of the Ei/factorial form: max_n (z^n / n!) with z = s/min t.
inline double ei_form_loss_digits(int N, int K, const std::vector<double>& t, double s) {
  if (t.empty()) return 0.0;
  const double z = s / *std::min_element(t.begin(), t.end());
  double worst = 0.0;
  for (int n = N - K + 1; n <= N - 1; ++n)
    worst = std::max(worst, n * std::log10(z) - std::lgamma(n + 1.0) / std::numbers::ln10);
  return worst;
}

inline constexpr int kBaseDigits = 30;

class DensityImpl {
 public:
  virtual ~DensityImpl() = default;
  virtual double pdf(double lambda) const = 0;
  virtual double cdf(double x) const = 0;
  virtual double expected_inverse(double s, bool ei_form) const = 0;
  virtual double expected_log(double s) const = 0;
};

template <class Real>
class DensityImplT final : public DensityImpl {
 public:
  DensityImplT(int N, int K, const std::vector<double>& t) : N_(N), K_(K), m_(K - 1) {
    using std::log;
    for (double v : t) {
      t_.emplace_back(v);
      log_t_.push_back(log(Real(v)));
    }
    // w_vu = C_vu / (m Pi) = (-1)^{m-1-u} e_{m-1-u}(t without t_v) / (m prod_{j != v}(t_v - t_j))
    w_.resize(std::size_t(m_) * m_);
    for (int v = 0; v < m_; ++v) {
      Real denom = m_;
      for (int j = 0; j < m_; ++j)
        if (j != v) denom *= t_[v] - t_[j];
      const auto e = elementary_symmetric(t_, std::size_t(v));
      for (int u = 0; u < m_; ++u) {
        const Real sign = (m_ - 1 - u) % 2 ? -1 : 1;
        w_[std::size_t(v) * m_ + u] = sign * e[std::size_t(m_ - 1 - u)] / denom;
      }
    }
    log_fact_.resize(std::size_t(N) + 2);
    log_fact_[0] = 0;
    for (std::size_t i = 1; i < log_fact_.size(); ++i) log_fact_[i] = log_fact_[i - 1] + log(Real(i));
  }

  // u is zero-based here, so the Gamma order is n = N - K + u + 1.
  int order(int u) const { return N_ - K_ + u + 1; }
  const Real& w(int v, int u) const { return w_[std::size_t(v) * m_ + u]; }

  double pdf(double lambda) const override {
    using std::exp;
    using std::log;
    if (lambda <= 0.0) return 0.0;
    const Real x(lambda);
    const Real lx = log(x);
    Real sum = 0;
    for (int v = 0; v < m_; ++v)
      for (int u = 0; u < m_; ++u) {
        const int n = order(u);
        sum += w(v, u) * exp(n * lx - x / t_[v] + (K_ - N_ - 2) * log_t_[v] - log_fact_[std::size_t(n)]);
      }
    return static_cast<double>(sum);
  }

  double cdf(double x) const override {
    using std::exp;
    if (x <= 0.0) return 0.0;
    Real sum = 0;
    for (int v = 0; v < m_; ++v)
      for (int u = 0; u < m_; ++u)
        sum += w(v, u) * exp(u * log_t_[v]) * gamma_p_int(order(u) + 1, Real(x) / t_[v]);
    return static_cast<double>(sum);
  }

  double expected_inverse(double s_in, bool ei_form) const override {
    using std::exp;
    const Real s(s_in);
    Real sum = 0;
    for (int v = 0; v < m_; ++v) {
      const Real z = s / t_[v];
      const auto f = scaled_en_table(z, order(m_ - 1) + 1);
      for (int u = 0; u < m_; ++u) {
        const int n = order(u);
        if (!ei_form) {
          // t^{u-1} e^z E_{n+1}(z); u here is zero-based so the power is u - 1.
          sum += w(v, u) * exp((u - 1) * log_t_[v]) * f[std::size_t(n + 1)];
          continue;
        }
        // t^{K-N-2} / n! [ (-1)^{n-1} s^n e^z Ei(-z) + sum_{r=1}^n (r-1)! (-s)^{n-r} t^r ],
        // with e^z Ei(-z) = -f_1. Both pieces are scaled by t^n first.
        Real acc = (n % 2 ? Real(1) : Real(-1)) * Real(-1) * pow_int(z, n) * f[1];
        Real fact = 1;
        for (int r = 1; r <= n; ++r) {
          if (r > 1) fact *= r - 1;
          acc += fact * pow_int(-z, n - r);
        }
        sum += w(v, u) * exp((K_ - N_ - 2 + n) * log_t_[v] - log_fact_[std::size_t(n)]) * acc;
      }
    }
    return static_cast<double>(sum);
  }

  double expected_log(double s_in) const override {
    using std::exp;
    using std::log;
    const Real s(s_in);
    const Real ls = log(s);
    Real sum = 0;
    for (int v = 0; v < m_; ++v) {
      const Real z = s / t_[v];
      const auto f = scaled_en_table(z, order(m_ - 1) + 1);
      Real partial = 0;  // sum_{r=0}^{n} e^z E_{r+1}(z), extended as n grows with u
      int filled = 0;
      for (int u = 0; u < m_; ++u) {
        const int n = order(u);
        for (; filled <= n; ++filled) partial += f[std::size_t(filled + 1)];
        sum += w(v, u) * exp(u * log_t_[v]) * (ls + partial);
      }
    }
    return static_cast<double>(sum);
  }

 private:
  static Real pow_int(const Real& x, int n) {
    Real r = 1;
    for (int i = 0; i < n; ++i) r *= x;
    return r;
  }

  // Regularized P(a, y) for integer a >= 1, from sums of positive terms.
  static Real gamma_p_int(int a, const Real& y) {
    using std::exp;
    const Real eps = std::numeric_limits<Real>::epsilon();
    if (y < a) {
      // P = e^{-y} sum_{j >= a} y^j / j!
      Real term = exp(-y);
      for (int j = 1; j <= a; ++j) term *= y / j;
      Real sum = term;
      for (int j = a + 1; j < a + 100000; ++j) {
        term *= y / j;
        sum += term;
        if (term < sum * eps) break;
      }
      return sum;
    }
    Real term = exp(-y);  // Q = e^{-y} sum_{j < a} y^j / j!
    Real q = term;
    for (int j = 1; j < a; ++j) {
      term *= y / j;
      q += term;
    }
    return 1 - q;
  }

  // f[r] = e^z E_r(z), r = 1..top. Recurrences run away from r ~ z in the
  // direction where each step contracts errors.
  static std::vector<Real> scaled_en_table(const Real& z, int top) {
    std::vector<Real> f(std::size_t(top) + 1, Real(0));
    int r0 = static_cast<int>(std::clamp(static_cast<double>(z), 1.0, double(top)));
    f[std::size_t(r0)] = expint_en_scaled(r0, z);
    for (int r = r0; r < top; ++r) f[std::size_t(r + 1)] = (1 - z * f[std::size_t(r)]) / r;
    for (int r = r0 - 1; r >= 1; --r) f[std::size_t(r)] = (1 - r * f[std::size_t(r + 1)]) / z;
    return f;
  }

  int N_;
  int K_;
  int m_;
  std::vector<Real> t_;
  std::vector<Real> log_t_;
  std::vector<Real> w_;
  std::vector<Real> log_fact_;
};

inline std::shared_ptr<const DensityImpl> make_density(int N, int K, const std::vector<double>& t,
                                                       int digits) {
  return with_working_precision(digits, [&]<class Real>() -> std::shared_ptr<const DensityImpl> {
    return std::make_shared<DensityImplT<Real>>(N, K, t);
  });
}

}  // namespace detail

/// Unordered-eigenvalue law of S_k = G[k] D G[k]^H with G[k] an N x (K-1)
/// i.i.d. CN(0,1) matrix and D = diag(t), t pairwise distinct:
///   f(x) = 1/((K-1) Pi) sum_v sum_u C_vu x^n e^{-x/t_v} t_v^{K-N-2} / n!,
/// n = N-K+u, u = 1..K-1, Pi = prod_{i<j} (t_j - t_i), C the cofactors of t_i^{j-1}.
class EigenDensity {
 public:
  EigenDensity(int N, int K, std::vector<double> t) : N_(N), K_(K), t_(std::move(t)) {
    if (K < 2 || N <= K) throw DomainError("eigenvalue density needs N > K >= 2");
    if (t_.size() != std::size_t(K - 1)) throw DomainError("t must have K-1 entries");
    for (double v : t_)
      if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("t entries must be positive");
    if (min_relative_gap(t_) < kTieGap) throw DomainError("t values must be pairwise distinct");
    base_digits_ = detail::kBaseDigits + static_cast<int>(std::ceil(detail::cofactor_loss_digits(t_)));
    impl_ = detail::make_density(N_, K_, t_, base_digits_);
  }

  explicit EigenDensity(const BoundInputs& in) : EigenDensity(in.N, in.K, in.t) {}

  int working_digits() const noexcept { return base_digits_; }

  double pdf(double lambda) const { return impl_->pdf(lambda); }
  double cdf(double x) const { return std::clamp(impl_->cdf(x), 0.0, 1.0); }

  /// E[1/(lambda + s)].
  double expected_inverse(double s, InverseMomentForm form = InverseMomentForm::automatic) const {
    if (!(s > 0.0)) throw DomainError("shift must be positive");
    if (form == InverseMomentForm::incomplete_gamma) return impl_->expected_inverse(s, false);
    const int need = base_digits_ + static_cast<int>(std::ceil(detail::ei_form_loss_digits(N_, K_, t_, s)));
    if (need > kMaxWorkingDigits) {
      if (form == InverseMomentForm::ei_factorial)
        throw NumericalError("Ei/factorial form needs more precision than available");
      return impl_->expected_inverse(s, false);
    }
    if (working_tier(need) == working_tier(base_digits_)) return impl_->expected_inverse(s, true);
    return detail::make_density(N_, K_, t_, need)->expected_inverse(s, true);
  }

  /// E[ln(lambda + s)].
  double expected_log(double s) const {
    if (!(s > 0.0)) throw DomainError("shift must be positive");
    return impl_->expected_log(s);
  }

 private:
  int N_;
  int K_;
  std::vector<double> t_;
  int base_digits_ = 0;
  std::shared_ptr<const detail::DensityImpl> impl_;
};

inline double eigen_pdf(double lambda, const BoundInputs& in) {
  if (!(lambda >= 0.0)) throw DomainError("eigenvalue must be >= 0");
  return EigenDensity(in).pdf(lambda);
}

inline double eigen_cdf(double x, const BoundInputs& in) { return EigenDensity(in).cdf(x); }

/// E[I2] numerator: N-K+1 unit-mean terms, or the N-K-1 count as printed in
/// the original derivation (kept for comparison; it undershoots).
enum class SecondTermVariant { corrected, printed };

/// Lower-bound chain: `corrected` applies AM-GM to I1 + I2 and Jensen to each
/// log term; `printed` uses log2(1 + 2(K-1) exp(-2 gamma - E ln(lambda+sigma^2)/2)).
enum class LowerBoundVariant { corrected, printed };

struct BoundOptions {
  SecondTermVariant second_term = SecondTermVariant::corrected;
  LowerBoundVariant lower = LowerBoundVariant::corrected;
  InverseMomentForm form = InverseMomentForm::automatic;
};

/// E[q] for q = g_k^H Xi_k^{-1} g_k, in units where g_k has unit-variance entries.
inline double expected_quadratic_form(const BoundInputs& in, const BoundOptions& opt = {}) {
  in.validate();
  const double b = in.signal_scale;
  const double s = in.sigma2 / b;
  const int extra = opt.second_term == SecondTermVariant::corrected ? in.N - in.K + 1 : in.N - in.K - 1;
  double u = extra / s;
  if (in.K >= 2) {
    std::vector<double> t(in.t);
    for (double& v : t) v /= b;
    u += (in.K - 1) * EigenDensity(in.N, in.K, std::move(t)).expected_inverse(s, opt.form);
  }
  return u;
}

/// Upper bound on E[log2(1 + SINR_k)] of the OLR.
inline double rate_upper_bound(const BoundInputs& in, const BoundOptions& opt = {}) {
  const double u = expected_quadratic_form(in, opt);
  return std::log2(1.0 + u / (1.0 + in.contamination * u));
}

/// Lower bound on E[log2(1 + SINR_k)] of the OLR; needs K >= 2.
inline double rate_lower_bound(const BoundInputs& in, const BoundOptions& opt = {}) {
  in.validate();
  if (in.K < 2) throw DomainError("lower bound needs K >= 2");
  const double b = in.signal_scale;
  const double s = in.sigma2 / b;
  std::vector<double> t(in.t);
  for (double& v : t) v /= b;
  const EigenDensity density(in.N, in.K, std::move(t));
  const double e_log = density.expected_log(s);
  const double k1 = in.K - 1;

  double log_q = 0.0;  // lower bound on E ln q
  if (opt.lower == LowerBoundVariant::corrected) {
    log_q = 0.5 * (std::log(4.0 * k1) - kEulerGamma + boost::math::digamma(double(in.N - in.K + 1)) -
                   e_log - std::log(s));
  } else {
    log_q = std::log(2.0 * k1) - 2.0 * kEulerGamma - 0.5 * e_log;
  }
  double penalty = 0.0;  // E ln(1 + c q) <= ln(1 + c E q)
  if (in.contamination > 0.0) {
    BoundOptions exact = opt;
    exact.second_term = SecondTermVariant::corrected;
    penalty = std::log1p(in.contamination * expected_quadratic_form(in, exact));
  }
  return std::log2(1.0 + std::exp(log_q - penalty));
}

/// Fixed-point state of the deterministic equivalent for one user k.
struct DEState {
  std::vector<double> delta;           // per user; entry k unused (0)
  int iterations = 0;
  double residual = 0.0;               // last max relative change
  std::vector<double> residual_history;
  double q_bar = 0.0;                  // deterministic equivalent of g_k^H Xi_k^{-1} g_k
  double sinr = 0.0;                   // q_bar / (1 + c_k q_bar)
};

struct DEOptions {
  double tol = 1e-12;
  int max_iter = 10000;
  double init_scale = 1.0;  // delta^(0) = init_scale / sigma^2
};

/// Iterates delta_v = N t_v / (sum_{j != k} t_j / (1 + delta_j) + sigma^2) over
/// the interfering users v != k, where t_j = sum_i beta_hat_lij, and returns
/// q_bar = N beta_hat_llk / (same denominator).
inline DEState de_sinr(const EstimationStats& stats, const LargeScaleFading& lsf, int N, int k,
                       const DEOptions& opt = {}, int l = 0) {
  if (!(opt.tol > 0.0)) throw DomainError("tolerance must be positive");
  if (opt.max_iter < 1) throw DomainError("max_iter must be positive");
  if (N < 1) throw DomainError("antenna count must be positive");
  if (k < 0 || k >= stats.users()) throw std::out_of_range("user index out of range");
  if (stats.alpha() == 0.0) throw DegenerateAgingError("aging coefficient is zero");
  const int K = stats.users();
  const double s2 = stats.sigma2(l);
  std::vector<double> t(std::size_t(K), 0.0);
  for (int v = 0; v < K; ++v)
    for (int i = 0; i < stats.cells(); ++i) t[std::size_t(v)] += stats.hat_beta(l, i, v);

  DEState st;
  st.delta.assign(std::size_t(K), 0.0);
  for (int v = 0; v < K; ++v)
    if (v != k) st.delta[std::size_t(v)] = opt.init_scale / s2;

  auto denominator = [&] {
    double d = s2;
    for (int j = 0; j < K; ++j)
      if (j != k) d += t[std::size_t(j)] / (1.0 + st.delta[std::size_t(j)]);
    return d;
  };

  bool converged = K == 1;
  while (!converged && st.iterations < opt.max_iter) {
    const double d = denominator();
    double change = 0.0;
    for (int v = 0; v < K; ++v) {
      if (v == k) continue;
      const double next = N * t[std::size_t(v)] / d;
      const double old = st.delta[std::size_t(v)];
      change = std::max(change, std::fabs(next - old) / std::max(next, std::numeric_limits<double>::min()));
      st.delta[std::size_t(v)] = next;
    }
    ++st.iterations;
    st.residual = change;
    st.residual_history.push_back(change);
    converged = change < opt.tol;
  }
  if (!converged) throw ConvergenceError("deterministic-equivalent iteration did not converge", st.residual,
                                         st.iterations);
  st.q_bar = N * stats.hat_beta(l, l, k) / denominator();
  st.sinr = st.q_bar / (1.0 + lsf.contamination(l, k) * st.q_bar);
  return st;
}

}  // namespace aging
