#pragma once

// Special functions used by the aging model and the rate bounds: the Bessel
// function J0, the exponential integral Ei on the negative axis and the
// generalized exponential integrals E_n. The E_n/Ei routines are templates so
// the bound evaluators can run them in multiprecision.

#include <cmath>
#include <limits>
#include <string>

#include <boost/math/constants/constants.hpp>

#include "aging_mimo/errors.hpp"

namespace aging {

namespace detail {

// Power-series / continued-fraction switch point for E_n. For double this is
// the classic z = 1; wide types move it out so the series (whose cancellation
// costs ~0.87 z digits) is used while it is still cheaper than the fraction.
template <class Real>
Real expint_series_limit() {
  constexpr int digits = std::numeric_limits<Real>::digits10;
  return digits <= 20 ? Real(1) : Real(digits / 20);
}

template <class Real>
Real expint_en_series(int n, const Real& z) {
  using std::abs;
  using std::log;
  const Real eps = std::numeric_limits<Real>::epsilon();
  const Real euler = boost::math::constants::euler<Real>();
  const int nm1 = n - 1;
  Real ans = nm1 != 0 ? Real(1) / nm1 : Real(-log(z) - euler);
  Real fact = 1;
  for (int i = 1; i < 100000; ++i) {
    fact *= -z / i;
    Real del;
    if (i != nm1) {
      del = -fact / (i - nm1);
    } else {
      Real psi = -euler;
      for (int ii = 1; ii <= nm1; ++ii) psi += Real(1) / ii;
      del = fact * (-log(z) + psi);
    }
    ans += del;
    if (abs(del) < abs(ans) * eps) return ans;
  }
  throw ConvergenceError("E_n power series did not converge", 0.0, 100000);
}

// Returns e^z E_n(z).
template <class Real>
Real expint_en_fraction_scaled(int n, const Real& z) {
  using std::abs;
  const Real eps = std::numeric_limits<Real>::epsilon();
  const Real tiny = std::numeric_limits<Real>::min() / eps;
  // Modified Lentz evaluation of e^z E_n(z) = 1/(z+n- 1*n/(z+n+2- 2(n+1)/(z+n+4- ...)))
  Real b = z + n;
  Real c = Real(1) / tiny;
  Real d = Real(1) / b;
  Real h = d;
  for (int i = 1; i < 1000000; ++i) {
    const Real a = -Real(i) * Real(n - 1 + i);
    b += 2;
    d = Real(1) / (a * d + b);
    c = b + a / c;
    const Real del = c * d;
    h *= del;
    if (abs(del - 1) < eps) return h;
  }
  throw ConvergenceError("E_n continued fraction did not converge", 0.0, 1000000);
}

}  // namespace detail

/// Generalized exponential integral E_n(z) = \int_1^\infty e^{-zt} t^{-n} dt,
/// n >= 1, z > 0. Satisfies n E_{n+1}(z) = e^{-z} - z E_n(z).
template <class Real>
Real expint_en(int n, const Real& z) {
  if (n < 1) throw DomainError("expint_en: order must be >= 1, got " + std::to_string(n));
  if (!(z > 0)) throw DomainError("expint_en: argument must be positive");
  if (z > detail::expint_series_limit<Real>()) {
    using std::exp;
    return detail::expint_en_fraction_scaled(n, z) * exp(-z);
  }
  return detail::expint_en_series(n, z);
}

/// e^z E_n(z); stays finite for large z where E_n underflows.
template <class Real>
Real expint_en_scaled(int n, const Real& z) {
  using std::exp;
  if (n < 1) throw DomainError("expint_en: order must be >= 1, got " + std::to_string(n));
  if (!(z > 0)) throw DomainError("expint_en: argument must be positive");
  if (z > detail::expint_series_limit<Real>()) return detail::expint_en_fraction_scaled(n, z);
  return exp(z) * detail::expint_en_series(n, z);
}

/// Exponential integral Ei(x) for x < 0, where Ei(x) = -E_1(-x).
template <class Real>
Real expint_ei(const Real& x) {
  if (!(x < 0)) throw DomainError("expint_ei: only negative arguments are supported");
  return -expint_en(1, Real(-x));
}

/// Bessel function of the first kind, order zero.
/// Power series for |x| <= 8, Miller backward recurrence beyond.
inline double bessel_j0(double x) {
  x = std::fabs(x);
  if (!std::isfinite(x)) throw DomainError("bessel_j0: non-finite argument");
  if (x <= 8.0) {
    const double q = -0.25 * x * x;
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k < 200; ++k) {
      term *= q / (double(k) * double(k));
      sum += term;
      if (std::fabs(term) < 1e-18 * std::fabs(sum) && std::fabs(term) < 1e-18) break;
    }
    return sum;
  }
  // J_{k-1} = (2k/x) J_k - J_{k+1}; normalization 1 = J_0 + 2 sum_k J_{2k}.
  int top = 2 * ((static_cast<int>(x) + 40 + static_cast<int>(std::sqrt(160.0 * x))) / 2);
  double jp1 = 0.0;
  double j = 1.0;
  double norm = 0.0;
  for (int k = top; k > 0; --k) {
    const double jm1 = (2.0 * k / x) * j - jp1;
    jp1 = j;
    j = jm1;
    if ((k - 1) % 2 == 0 && k - 1 > 0) norm += 2.0 * j;
    if (std::fabs(j) > 1e250) {
      j *= 1e-250;
      jp1 *= 1e-250;
      norm *= 1e-250;
    }
  }
  norm += j;
  return j / norm;
}

}  // namespace aging
