// Special functions, scenario, channel sampling, receivers, config and CSV.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <unistd.h>

#include <gtest/gtest.h>

#include <Eigen/LU>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/expint.hpp>

#include "aging_mimo/channel.hpp"
#include "aging_mimo/precision.hpp"
#include "aging_mimo/config.hpp"
#include "aging_mimo/receivers.hpp"
#include "aging_mimo/report.hpp"
#include "aging_mimo/scenario.hpp"
#include "aging_mimo/specfun.hpp"

using namespace aging;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// \int_1^\infty e^{-z t} t^{-n} dt by adaptive Gauss-Kronrod.
double en_quadrature(int n, double z) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      [=](double t) { return std::exp(-z * t) / std::pow(t, n); }, 1.0, kInf, 15, 1e-14);
}

double rel(double a, double b) { return std::fabs(a - b) / std::fabs(b); }

ScenarioConfig small_config(int L, int K, int N, std::uint64_t seed = 3) {
  ScenarioConfig c;
  c.cells = L;
  c.users = K;
  c.antennas = N;
  c.p = c.p_p = 10.0;
  c.seed = seed;
  return c;
}

}  // namespace

// ---------------------------------------------------------------- specfun

TEST(SpecialFunctions, EiMatchesQuadrature) {
  EXPECT_NEAR(expint_ei(-1.0), -0.2193839344, 1e-10);
  EXPECT_NEAR(expint_ei(-1.0), -en_quadrature(1, 1.0), 1e-12);
  EXPECT_LT(rel(expint_ei(-20.0), -en_quadrature(1, 20.0)), 1e-10);
  EXPECT_NEAR(expint_ei(-20.0) / -9.8355e-11, 1.0, 1e-4);
}

TEST(SpecialFunctions, EiAgreesWithBoostAcrossRegimes) {
  for (double x = -1e-4; x > -300.0; x *= 1.7) EXPECT_LT(rel(expint_ei(x), boost::math::expint(x)), 1e-12) << x;
}

TEST(SpecialFunctions, EiDivergesAtZero) {
  double prev = expint_ei(-1.0);
  for (double x = -0.1; x < -1e-12; x *= 0.1) {
    const double v = expint_ei(x);
    EXPECT_LT(v, prev);
    prev = v;
  }
  EXPECT_LT(prev, -24.0);
  EXPECT_THROW(expint_ei(0.0), DomainError);
  EXPECT_THROW(expint_ei(1.0), DomainError);
}

TEST(SpecialFunctions, EnMatchesQuadrature) {
  for (int n : {1, 2, 3, 5, 8, 12})
    for (double z : {0.05, 0.5, 1.0, 3.0, 10.0, 40.0})
      EXPECT_LT(rel(expint_en(n, z), en_quadrature(n, z)), 1e-10) << n << ' ' << z;
  EXPECT_NEAR(expint_en(1, 1.0), 0.2193839344, 1e-10);
}

TEST(SpecialFunctions, EnRecurrenceResidual) {
  double worst = 0.0;
  for (int n = 1; n <= 60; ++n)
    for (double z = 0.01; z <= 50.0; z *= 1.3) {
      const double lhs = n * expint_en(n + 1, z);
      const double rhs = std::exp(-z) - z * expint_en(n, z);
      worst = std::max(worst, std::fabs(lhs - rhs) / std::exp(-z));
    }
  EXPECT_LT(worst, 1e-12);
}

TEST(SpecialFunctions, EnTailBoundAndDomain) {
  for (double z : {20.0, 60.0, 200.0})
    for (int n : {1, 4, 30}) EXPECT_LE(expint_en(n, z), std::exp(-z) / z);
  EXPECT_THROW(expint_en(0, 1.0), DomainError);
  EXPECT_THROW(expint_en(2, 0.0), DomainError);
  EXPECT_THROW(expint_en(2, -1.0), DomainError);
}

TEST(SpecialFunctions, ScaledEnIsConsistent) {
  for (int n : {1, 3, 20})
    for (double z : {0.3, 2.0, 30.0}) EXPECT_LT(rel(expint_en_scaled(n, z), std::exp(z) * expint_en(n, z)), 1e-13);
  EXPECT_TRUE(std::isfinite(expint_en_scaled(3, 2000.0)));
  EXPECT_NEAR(expint_en_scaled(3, 2000.0) * 2000.0, 1.0, 2e-3);
}

TEST(SpecialFunctions, EnInMultiprecision) {
  using R = boost::multiprecision::number<boost::multiprecision::cpp_bin_float<60>>;
  for (int n : {1, 2, 7})
    for (double z : {0.25, 1.5, 4.0, 30.0}) {
      const mp_real<60> got = expint_en(n, mp_real<60>(z));
      const R want = boost::math::expint(n, R(z));
      EXPECT_LT(static_cast<double>(abs(R(got) - want) / want), 1e-50) << n << ' ' << z;
    }
}

TEST(SpecialFunctions, BesselJ0) {
  EXPECT_EQ(bessel_j0(0.0), 1.0);
  for (double x = 0.0; x <= 80.0; x += 0.173) EXPECT_NEAR(bessel_j0(x), std::cyl_bessel_j(0.0, x), 1e-10) << x;
  EXPECT_NEAR(bessel_j0(2.404825557695773), 0.0, 1e-12);
  EXPECT_EQ(bessel_j0(-3.0), bessel_j0(3.0));
}

// ---------------------------------------------------------------- scenario

TEST(Scenario, DopplerConversions) {
  const auto d = DopplerParams::physical(30.0, 2e9, 1e-4);
  EXPECT_NEAR(d.normalized_value(), 0.02, 1e-15);
  EXPECT_THROW(DopplerParams::normalized(-0.1), DomainError);
  EXPECT_THROW(DopplerParams::physical(0.0, 2e9, 1e-4), DomainError);
  EXPECT_EQ(aging_coefficient(DopplerParams::normalized(0.0)), 1.0);
  EXPECT_NEAR(aging_coefficient(DopplerParams::normalized(0.1)), std::cyl_bessel_j(0.0, 0.2 * M_PI), 1e-14);
}

TEST(Scenario, OverheadFactor) {
  ScenarioConfig c;
  EXPECT_NEAR(c.overhead_factor(), 0.94898, 5e-6);
  EXPECT_EQ(c.overhead_factor(), 1.0 - 10.0 / 196.0);
}

TEST(Scenario, ConfigValidation) {
  ScenarioConfig c;
  c.antennas = c.users;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.coherence = c.tau;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.p = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_NO_THROW(ScenarioConfig{}.validate());
}

TEST(Scenario, FadingTensorAccess) {
  LargeScaleFading f(2, 3);
  EXPECT_THROW(f.beta(2, 0, 0), std::out_of_range);
  EXPECT_THROW(f.set_beta(0, 0, 0, -1.0), DomainError);
  EXPECT_THROW(f.validate(), ConfigError);  // own-cell gains still zero
  EXPECT_THROW(LargeScaleFading(0, 1), ConfigError);
}

TEST(Scenario, SingleCellEstimationClosedForm) {
  LargeScaleFading f(1, 1);
  f.set_beta(0, 0, 0, 2.0);
  const double alpha = 0.8, p = 5.0, pp = 10.0;
  const auto s = estimation_params(f, alpha, p, pp);
  const double bh = 4.0 / (2.0 + 0.1);
  EXPECT_NEAR(s.hat_beta(0, 0, 0), bh, 1e-15);
  EXPECT_NEAR(s.e_tilde(0, 0), 2.0 - 0.64 * bh, 1e-15);
  EXPECT_NEAR(s.sigma2(0), (2.0 - 0.64 * bh + 0.2) / 0.64, 1e-14);
}

TEST(Scenario, EstimationInvariants) {
  const auto c = small_config(3, 4, 16);
  const auto f = uniform_interference_profile(c, 0.7, 5.0);
  const auto s = estimation_params(f, 0.9, c.p, c.p_p);
  const auto s_fresh = estimation_params(f, 0.99, c.p, c.p_p);
  for (int l = 0; l < 3; ++l) {
    for (int i = 0; i < 3; ++i) {
      EXPECT_GE(s.e_tilde(l, i), 0.0);
      EXPECT_LT(s_fresh.e_tilde(l, i), s.e_tilde(l, i));  // less aging, less error
      for (int k = 0; k < 4; ++k) {
        // consistency of the estimates across cells sharing a pilot
        const double r = f.beta(l, i, k) / f.beta(l, l, k);
        EXPECT_NEAR(s.hat_beta(l, i, k), s.hat_beta(l, l, k) * r * r, 1e-14);
        EXPECT_LE(s.hat_beta(l, i, k), f.beta(l, i, k));
      }
    }
    EXPECT_GT(s.sigma2(l), 0.0);
  }
  EXPECT_THROW(estimation_params(f, 0.0, 1.0, 1.0), DegenerateAgingError);
  EXPECT_THROW(estimation_params(f, 1.2, 1.0, 1.0), DomainError);
  EXPECT_THROW(estimation_params(f, 0.5, 0.0, 1.0), DomainError);
}

TEST(Scenario, UniformProfile) {
  const auto c = small_config(3, 2, 8);
  const auto f = uniform_interference_profile(c, 4.0);
  for (int l = 0; l < 3; ++l)
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 2; ++k) EXPECT_EQ(f.beta(l, i, k), i == l ? 1.0 : 4.0);
  EXPECT_NEAR(f.contamination(0, 0), 2 * 16.0, 1e-12);
  const auto a = uniform_interference_profile(c, 1.0, 6.0);
  const auto b = uniform_interference_profile(c, 1.0, 6.0);
  EXPECT_EQ(a, b);
  EXPECT_NE(a.beta(0, 1, 0), a.beta(0, 2, 0));
}

TEST(Scenario, HexagonalLayout) {
  const auto c = small_config(7, 5, 16);
  Rng rng(11);
  const auto drop = hexagonal_large_scale(c, 500.0, 3.8, 8.0, rng);
  ASSERT_EQ(drop.base_stations.size(), 7u);
  for (int j = 1; j < 7; ++j)
    EXPECT_NEAR(std::hypot(drop.base_stations[j].x, drop.base_stations[j].y), std::sqrt(3.0) * 500.0, 1e-9);
  for (int i = 0; i < 7; ++i)
    for (int k = 0; k < 5; ++k) {
      const auto& u = drop.users[std::size_t(i) * 5 + k];
      const double dx = u.x - drop.base_stations[i].x, dy = u.y - drop.base_stations[i].y;
      EXPECT_GE(std::hypot(dx, dy), kMinDistanceFraction * 500.0);
      EXPECT_LE(std::hypot(dx, dy), 500.0 + 1e-9);
    }
  std::vector<double> own;
  for (int l = 0; l < 7; ++l)
    for (int k = 0; k < 5; ++k) own.push_back(drop.fading.beta(l, l, k));
  std::nth_element(own.begin(), own.begin() + 17, own.end());
  EXPECT_NEAR(own[17], 1.0, 1e-12);  // 35 gains: median is the 18th

  Rng again(11);
  EXPECT_EQ(hexagonal_large_scale(c, 500.0, 3.8, 8.0, again).fading, drop.fading);
  auto bad = c;
  bad.cells = 5;
  EXPECT_THROW(hexagonal_large_scale(bad, 500.0, 3.8, 8.0, rng), LayoutError);
  EXPECT_THROW(hexagonal_large_scale(c, 500.0, 2.0, 8.0, rng), DomainError);
}

TEST(Scenario, PathGainClampsNearField) {
  EXPECT_EQ(path_gain(0.0, 100.0, 3.0), path_gain(10.0, 100.0, 3.0));
  EXPECT_NEAR(path_gain(100.0, 100.0, 3.0), 1.0, 1e-15);
  EXPECT_NEAR(path_gain(200.0, 100.0, 3.0), 0.125, 1e-15);
}

// ---------------------------------------------------------------- channel

TEST(Channel, SubstreamSeedsAreDistinct) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t t = 0; t < 2000; ++t)
    for (std::uint64_t bs = 0; bs < 4; ++bs) seen.insert(substream_seed(42, t, bs));
  EXPECT_EQ(seen.size(), 8000u);
  EXPECT_NE(substream_seed(1, 0), substream_seed(2, 0));
}

TEST(Channel, EstimateStatistics) {
  const auto c = small_config(2, 3, 8);
  const auto f = uniform_interference_profile(c, 0.5, 4.0);
  const auto s = estimation_params(f, 0.9, c.p, c.p_p);
  Rng rng(5);
  Eigen::VectorXd power = Eigen::VectorXd::Zero(3);
  const int draws = 4000;
  for (int d = 0; d < draws; ++d) power += sample_estimate(s, f, 8, rng).g_hat_own.colwise().squaredNorm().transpose();
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(power(k) / (draws * 8.0) / s.hat_beta(0, 0, k), 1.0, 0.03);

  Rng a(9), b(9);
  EXPECT_EQ(sample_estimate(s, f, 8, a).g_hat_own, sample_estimate(s, f, 8, b).g_hat_own);
  EXPECT_THROW(sample_estimate(s, f, 0, a), DomainError);
}

TEST(Channel, CrossCellEstimateScalesColumns) {
  const auto c = small_config(3, 2, 6);
  const auto f = uniform_interference_profile(c, 0.3, 6.0);
  const auto s = estimation_params(f, 0.9, c.p, c.p_p);
  Rng rng(1);
  const auto d = sample_estimate(s, f, 6, rng, 1);
  const auto g = cross_cell_estimate(d, f, 1, 2);
  for (int k = 0; k < 2; ++k) EXPECT_TRUE(g.col(k).isApprox(d.g_hat_own.col(k) * f.ratio(1, 2, k)));
  EXPECT_EQ(cross_cell_estimate(d, f, 1, 1), d.g_hat_own);
  EXPECT_THROW(cross_cell_estimate(d, f, 0, 1), std::out_of_range);
}

TEST(Channel, TrueStateAndSymbol) {
  const auto c = small_config(2, 2, 4);
  const auto f = uniform_interference_profile(c, 0.5);
  const double alpha = 0.7;
  const auto s = estimation_params(f, alpha, c.p, c.p_p);
  Rng rng(2);
  const auto d = sample_estimate(s, f, 4, rng);
  double err_power = 0.0;
  const int draws = 3000;
  for (int n = 0; n < draws; ++n) {
    const auto st = sample_true_state(d, s, f, alpha, rng);
    ASSERT_EQ(st.g_true.size(), 2u);
    for (int i = 0; i < 2; ++i)
      EXPECT_TRUE(st.g_true[i].isApprox(alpha * cross_cell_estimate(d, f, 0, i) + st.e_tilde[i]));
    err_power += st.e_tilde[0].squaredNorm() + st.e_tilde[1].squaredNorm();
  }
  EXPECT_NEAR(err_power / draws / 4.0 / s.error_power(0), 1.0, 0.03);

  const auto st = sample_true_state(d, s, f, alpha, rng);
  const ComplexMatrix w = ComplexMatrix::Random(4, 2);
  const auto sym = simulate_symbol(st, w, 3.0, rng);
  ComplexVector y = sym.z;
  for (int i = 0; i < 2; ++i) y += std::sqrt(3.0) * st.g_true[i] * sym.x[i];
  EXPECT_TRUE(sym.y.isApprox(y, 1e-13));
  EXPECT_TRUE(sym.r.isApprox(w.adjoint() * sym.y, 1e-13));
  EXPECT_THROW(simulate_symbol(st, ComplexMatrix::Zero(3, 2), 1.0, rng), DomainError);
}

TEST(Channel, MatrixDump) {
  ComplexMatrix m(2, 3);
  m << std::complex<double>(1, 2), 3, 4, 5, std::complex<double>(0, -1), 0.125;
  std::ostringstream bin;
  write_matrix(bin, m, true);
  EXPECT_EQ(bin.str().size(), 16u + 16u * 6u);
  std::ostringstream txt;
  write_matrix(txt, m, false);
  std::istringstream in(txt.str());
  int r = 0, cc = 0;
  in >> r >> cc;
  EXPECT_EQ(r, 2);
  EXPECT_EQ(cc, 3);
  double re = 0, im = 0;
  in >> re >> im;
  EXPECT_EQ(re, 1.0);
  EXPECT_EQ(im, 2.0);
}

// ---------------------------------------------------------------- receivers

namespace {

struct Fixture {
  ScenarioConfig c;
  LargeScaleFading f;
  EstimationStats s;
  ChannelDraw d;
};

Fixture make_fixture(int L, int K, int N, double beta, double shadow, double alpha, std::uint64_t seed) {
  auto c = small_config(L, K, N, seed);
  auto f = uniform_interference_profile(c, beta, shadow);
  auto s = estimation_params(f, alpha, c.p, c.p_p);
  Rng rng(seed);
  auto d = sample_estimate(s, f, N, rng);
  return {c, f, s, d};
}

// Xi_k assembled from the per-cell estimates directly.
ComplexMatrix xi_from_cells(const Fixture& x, int k) {
  const int N = x.d.antennas();
  ComplexMatrix xi = x.s.sigma2(0) * ComplexMatrix::Identity(N, N);
  for (int i = 0; i < x.f.cells(); ++i) {
    ComplexMatrix g = cross_cell_estimate(x.d, x.f, 0, i);
    for (int j = 0; j < x.d.users(); ++j)
      if (j != k) xi += g.col(j) * g.col(j).adjoint();
  }
  return xi;
}

}  // namespace

TEST(Receivers, OlrSolvesXi) {
  const auto x = make_fixture(3, 4, 10, 0.6, 4.0, 0.9, 7);
  for (int k = 0; k < 4; ++k) {
    const ComplexVector w = xi_from_cells(x, k).fullPivLu().solve(x.d.g_hat_own.col(k));
    EXPECT_TRUE(olr_combiner(x.d, x.s, x.f, k).isApprox(w, 1e-10));
    EXPECT_NEAR(olr_quadratic_form(x.d, x.s, x.f, k), x.d.g_hat_own.col(k).dot(w).real(), 1e-10);
  }
}

TEST(Receivers, BatchedCombinersMatchPerUser) {
  const auto x = make_fixture(3, 5, 12, 1.0, 6.0, 0.85, 8);
  const auto olr = build_combiners(ReceiverKind::olr, x.d, x.s, x.f);
  const auto mmse = build_combiners(ReceiverKind::mmse, x.d, x.s, x.f);
  const auto mrc = build_combiners(ReceiverKind::mrc, x.d, x.s, x.f);
  const auto zf = build_combiners(ReceiverKind::zf, x.d, x.s, x.f);
  for (int k = 0; k < 5; ++k) {
    EXPECT_TRUE(olr.w.col(k).isApprox(olr_combiner(x.d, x.s, x.f, k), 1e-10));
    EXPECT_TRUE(mmse.w.col(k).isApprox(mmse_combiner(x.d, x.s, x.f, k), 1e-10));
    EXPECT_TRUE(mrc.w.col(k).isApprox(mrc_combiner(x.d, x.s, k), 1e-14));
    EXPECT_TRUE(zf.w.col(k).isApprox(zf_combiner(x.d, k), 1e-10));
  }
  const auto all = sinr_all(olr, x.d, x.s, x.f);
  for (int k = 0; k < 5; ++k) EXPECT_NEAR(all[k], sinr(olr.w.col(k), x.d, x.s, x.f, k).sinr(), 1e-12 * all[k]);
}

TEST(Receivers, MmseAndMrcFormulas) {
  const auto x = make_fixture(2, 3, 8, 0.5, 0.0, 0.8, 9);
  const double a = 0.8;
  double z = 0.0;
  for (int k = 0; k < 3; ++k) z += x.f.beta(0, 0, k) - a * a * x.s.hat_beta(0, 0, k) + x.f.beta(0, 1, k);
  EXPECT_NEAR(mmse_loading(x.s, x.f, 0), z, 1e-13);
  ComplexMatrix m = x.d.g_hat_own * x.d.g_hat_own.adjoint();
  m.diagonal().array() += (z + 1.0 / x.c.p) / (a * a);
  const ComplexVector w = a * m.fullPivLu().solve(x.d.g_hat_own.col(1));
  EXPECT_TRUE(mmse_combiner(x.d, x.s, x.f, 1).isApprox(w, 1e-10));
  EXPECT_TRUE(mrc_combiner(x.d, x.s, 2).isApprox(a * x.d.g_hat_own.col(2)));
}

TEST(Receivers, ZeroForcingNullsInterference) {
  const auto x = make_fixture(2, 4, 9, 0.5, 0.0, 0.9, 10);
  const auto zf = build_combiners(ReceiverKind::zf, x.d, x.s, x.f);
  const ComplexMatrix p = zf.w.adjoint() * x.d.g_hat_own;
  EXPECT_TRUE(p.isApprox(ComplexMatrix::Identity(4, 4), 1e-10));

  auto dup = x.d;
  dup.g_hat_own.col(3) = dup.g_hat_own.col(0);
  EXPECT_THROW(zf_combiner(dup, 0), SingularityError);
}

TEST(Receivers, SinrIdentityWithContamination) {
  // sinr(OLR) = q / (1 + c q) = g^H (Xi_k + c g g^H)^{-1} g
  const auto x = make_fixture(3, 4, 12, 0.8, 5.0, 0.9, 12);
  for (int k = 0; k < 4; ++k) {
    const double q = olr_quadratic_form(x.d, x.s, x.f, k);
    const double c = x.f.contamination(0, k);
    const double got = sinr(olr_combiner(x.d, x.s, x.f, k), x.d, x.s, x.f, k).sinr();
    EXPECT_NEAR(got, q / (1.0 + c * q), 1e-11 * got);
    const ComplexVector g = x.d.g_hat_own.col(k);
    const ComplexMatrix full = xi_from_cells(x, k) + c * g * g.adjoint();
    EXPECT_NEAR(got, g.dot(full.fullPivLu().solve(g)).real(), 1e-10 * got);
  }
}

TEST(Receivers, SingleCellEigenSplitEqualsSinr) {
  const auto x = make_fixture(1, 4, 10, 0.0, 0.0, 0.9, 13);
  for (int k = 0; k < 4; ++k) {
    const double s = sinr(olr_combiner(x.d, x.s, x.f, k), x.d, x.s, x.f, k).sinr();
    EXPECT_NEAR(olr_sinr_eigen(x.d, x.s, x.f, k).value(), s, 1e-10 * s);
  }
}

TEST(Receivers, EigenSplitMatchesDirectForm) {
  const auto x = make_fixture(2, 4, 12, 0.7, 4.0, 0.95, 14);
  for (int k = 0; k < 4; ++k) {
    const auto split = olr_sinr_eigen(x.d, x.s, x.f, k);
    const double q = olr_quadratic_form(x.d, x.s, x.f, k);
    EXPECT_NEAR(split.value(), q, 1e-10 * q);
    EXPECT_EQ(split.eigenvalues.size(), 3u);
    EXPECT_TRUE(std::is_sorted(split.eigenvalues.rbegin(), split.eigenvalues.rend()));
    const auto ev = interference_spectrum(x.d, x.f, k);
    for (std::size_t j = 3; j < ev.size(); ++j) EXPECT_LT(std::fabs(ev[j]), 1e-10 * ev[0]);
  }
}

TEST(Receivers, BreakdownAndScaleInvariance) {
  const auto x = make_fixture(3, 3, 8, 1.0, 0.0, 0.9, 15);
  for (auto kind : kAllReceivers) {
    const auto set = build_combiners(kind, x.d, x.s, x.f);
    for (int k = 0; k < 3; ++k) {
      const auto b = sinr(set.w.col(k), x.d, x.s, x.f, k);
      EXPECT_GT(b.signal, 0.0);
      EXPECT_GT(b.aging, 0.0);
      EXPECT_GT(b.inter, 0.0);
      EXPECT_NEAR(b.signal / (b.intra + b.aging + b.inter + b.noise), b.sinr(), 1e-12 * b.sinr());
      const auto scaled = sinr(ComplexVector(std::complex<double>(0.0, -3.5) * set.w.col(k)), x.d, x.s, x.f, k);
      EXPECT_NEAR(scaled.sinr(), b.sinr(), 1e-12 * b.sinr());
    }
  }
  EXPECT_THROW(sinr(ComplexVector::Zero(8), x.d, x.s, x.f, 0), DomainError);
  EXPECT_THROW(sinr(ComplexVector::Ones(7), x.d, x.s, x.f, 0), DomainError);
}

TEST(Receivers, OlrDominatesPerDraw) {
  auto c = small_config(3, 5, 20, 21);
  const auto f = uniform_interference_profile(c, 1.0);
  const auto s = estimation_params(f, 0.9, 10.0, 10.0);
  Rng rng(21);
  for (int d = 0; d < 200; ++d) {
    const auto draw = sample_estimate(s, f, 20, rng);
    const auto olr = sinr_all(build_combiners(ReceiverKind::olr, draw, s, f), draw, s, f);
    for (auto kind : {ReceiverKind::mmse, ReceiverKind::mrc, ReceiverKind::zf}) {
      const auto o = sinr_all(build_combiners(kind, draw, s, f), draw, s, f);
      for (int k = 0; k < 5; ++k) EXPECT_GE(olr[k] * (1 + 1e-9), o[k]);
    }
  }
}

TEST(Receivers, NoiseLimitedReceiversAgree) {
  // single cell, heavy aging: sigma^2 dwarfs the interference and all
  // receivers collapse onto matched filtering
  auto x = make_fixture(1, 2, 64, 0.0, 0.0, 0.01, 16);
  double lo = 1e300, hi = 0.0;
  for (auto kind : {ReceiverKind::olr, ReceiverKind::mmse, ReceiverKind::mrc}) {
    const auto v = sinr_all(build_combiners(kind, x.d, x.s, x.f), x.d, x.s, x.f)[0];
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  EXPECT_LT((hi - lo) / hi, 1e-3);
}

TEST(Receivers, NamesRoundTrip) {
  for (auto k : kAllReceivers) EXPECT_EQ(parse_receiver(to_string(k)), k);
  EXPECT_FALSE(parse_receiver("olr2").has_value());
}

// ---------------------------------------------------------------- config and CSV

namespace {

std::string write_temp(const std::string& body) {
  static int counter = 0;
  const auto path = std::filesystem::temp_directory_path() /
                    ("aging_cfg_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) + ".ini");
  std::ofstream(path) << body;
  return path.string();
}

std::optional<std::string> no_env(const std::string&) { return std::nullopt; }

}  // namespace

TEST(Config, ParsesIniWithSections) {
  const auto path = write_temp(
      "cells = 3\nusers = 4\nantennas = 32\nsnr_db = 20\npilot_len = 4\ncoherence_len = 100\nseed = 99\n"
      "[doppler]\nnormalized = 0.05\n[fading]\nmode = uniform\nbeta_cross = 4\nshadow_db = 2\n");
  const auto rc = load_config(path, no_env);
  EXPECT_EQ(rc.scenario.cells, 3);
  EXPECT_EQ(rc.scenario.users, 4);
  EXPECT_EQ(rc.scenario.antennas, 32);
  EXPECT_NEAR(rc.scenario.p, 100.0, 1e-12);
  EXPECT_NEAR(rc.scenario.p_p, 100.0, 1e-12);
  EXPECT_EQ(rc.scenario.tau, 4);
  EXPECT_EQ(rc.scenario.coherence, 100);
  EXPECT_EQ(rc.scenario.seed, 99u);
  EXPECT_EQ(rc.scenario.doppler.normalized_value(), 0.05);
  EXPECT_EQ(rc.beta_cross, 4.0);
  EXPECT_EQ(rc.shadow_db, 2.0);
  std::filesystem::remove(path);
}

TEST(Config, PhysicalDopplerAndPilotPower) {
  const auto path = write_temp("snr_db = 0\npilot_snr_db = 10\n[doppler]\nvelocity_mps = 30\ncarrier_hz = 2e9\nts_s = 1e-4\n");
  const auto rc = load_config(path, no_env);
  EXPECT_NEAR(rc.scenario.doppler.normalized_value(), 0.02, 1e-15);
  EXPECT_NEAR(rc.scenario.p_p, 10.0, 1e-12);
  EXPECT_NEAR(rc.scenario.p, 1.0, 1e-15);
  std::filesystem::remove(path);
}

TEST(Config, RejectsBadInput) {
  const auto unknown = write_temp("cels = 3\n");
  EXPECT_THROW(load_config(unknown, no_env), ConfigError);
  const auto bad = write_temp("cells = three\n");
  EXPECT_THROW(load_config(bad, no_env), ConfigError);
  const auto both = write_temp("[doppler]\nnormalized = 0.1\nvelocity_mps = 3\n");
  EXPECT_THROW(load_config(both, no_env), ConfigError);
  const auto partial = write_temp("[doppler]\nvelocity_mps = 3\n");
  EXPECT_THROW(load_config(partial, no_env), ConfigError);
  const auto mode = write_temp("[fading]\nmode = square\n");
  EXPECT_THROW(load_config(mode, no_env), ConfigError);
  EXPECT_THROW(load_config(std::string("/nonexistent/aging.ini"), no_env), ConfigError);
  for (const auto& p : {unknown, bad, both, partial, mode}) std::filesystem::remove(p);
}

TEST(Config, EnvironmentOverridesFile) {
  EXPECT_EQ(env_name("fading.beta_cross"), "AGING_MIMO_FADING__BETA_CROSS");
  EXPECT_EQ(env_name("antennas"), "AGING_MIMO_ANTENNAS");
  const auto path = write_temp("antennas = 32\n[fading]\nbeta_cross = 2\n");
  std::map<std::string, std::string> env{{"AGING_MIMO_ANTENNAS", "64"}, {"AGING_MIMO_FADING__BETA_CROSS", "0.5"}};
  const auto rc = load_config(path, [&](const std::string& k) -> std::optional<std::string> {
    auto it = env.find(k);
    if (it == env.end()) return std::nullopt;
    return it->second;
  });
  EXPECT_EQ(rc.scenario.antennas, 64);
  EXPECT_EQ(rc.beta_cross, 0.5);
  std::filesystem::remove(path);
}

TEST(Config, BuildsBothFadingModes) {
  RunConfig rc;
  rc.scenario.cells = 7;
  rc.scenario.users = 3;
  rc.scenario.antennas = 8;
  EXPECT_EQ(build_fading(rc).beta(0, 1, 0), 1.0);
  rc.fading_mode = FadingMode::hexagonal;
  rc.shadow_db = 8.0;
  const auto h = build_fading(rc);
  EXPECT_EQ(h, build_fading(rc));
  EXPECT_NO_THROW(h.validate());
  rc.scenario.cells = 4;
  EXPECT_THROW(build_fading(rc), ConfigError);
}

TEST(Report, NumberFormattingIsShortestRoundTrip) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(-0.0), "0");
  EXPECT_EQ(format_number(1e-300), "1e-300");
  for (double v : {M_PI, 1.0 / 3.0, 123456.789e10}) EXPECT_EQ(std::stod(format_number(v)), v);
}

TEST(Report, HashAndCsv) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
  RunConfig rc;
  auto m = config_snapshot(rc);
  const auto h = manifest_hash(m);
  m["seed"] = "2";
  EXPECT_NE(manifest_hash(m), h);

  std::ostringstream out;
  CsvWriter csv(out);
  csv.meta("k", "v");
  csv.row({"a", "b,c", "say \"hi\""});
  EXPECT_EQ(out.str(), "# k=v\na,\"b,c\",\"say \"\"hi\"\"\"\n");
}
