#pragma once

// Working-precision selection for the closed-form eigenvalue expectations.
// Near-equal t values make the cofactor sums cancel catastrophically, so the
// evaluators run in a multiprecision type wide enough for the estimated loss.

#include <string>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "aging_mimo/errors.hpp"

namespace aging {

template <unsigned Digits>
using mp_real = boost::multiprecision::number<boost::multiprecision::cpp_bin_float<Digits>,
                                              boost::multiprecision::et_off>;

/// Largest number of decimal digits the tiers can provide.
inline constexpr int kMaxWorkingDigits = 800;

/// Digits actually provided for a request of `digits`; 0 when unsupported.
inline constexpr int working_tier(int digits) {
  for (int tier : {50, 100, 200, 400, kMaxWorkingDigits})
    if (digits <= tier) return tier;
  return 0;
}

/// Invokes `f.template operator()<Real>()` with the narrowest tier that holds
/// `digits` decimal digits.
template <class F>
auto with_working_precision(int digits, F&& f) {
  if (digits <= 50) return f.template operator()<mp_real<50>>();
  if (digits <= 100) return f.template operator()<mp_real<100>>();
  if (digits <= 200) return f.template operator()<mp_real<200>>();
  if (digits <= 400) return f.template operator()<mp_real<400>>();
  if (digits <= kMaxWorkingDigits) return f.template operator()<mp_real<kMaxWorkingDigits>>();
  throw NumericalError("required working precision of " + std::to_string(digits) +
                       " digits exceeds the supported maximum");
}

}  // namespace aging
