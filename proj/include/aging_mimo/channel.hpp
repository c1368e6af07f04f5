#pragma once

// Small-scale fading realizations seen from one reference BS: estimated
// channels, aged true channels and a symbol-level transmission oracle.

#include <bit>
#include <complex>
#include <cstdint>
#include <cstring>
#include <ostream>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "aging_mimo/errors.hpp"
#include "aging_mimo/rng.hpp"
#include "aging_mimo/scenario.hpp"

namespace aging {

using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

/// Estimated own-cell channel G_hat_ll[n-1] at the reference BS l. Column k
/// holds CN(0, beta_hat_llk) entries. Cross-cell estimates follow from the
/// ratio relation, see cross_cell_estimate().
struct ChannelDraw {
  int reference_cell = 0;
  ComplexMatrix g_hat_own;

  int antennas() const noexcept { return static_cast<int>(g_hat_own.rows()); }
  int users() const noexcept { return static_cast<int>(g_hat_own.cols()); }
};

inline ChannelDraw sample_estimate(const EstimationStats& stats, const LargeScaleFading& lsf,
                                   int antennas, Rng& rng, int reference_cell = 0) {
  if (antennas < 1) throw DomainError("antenna count must be positive");
  if (stats.cells() != lsf.cells() || stats.users() != lsf.users())
    throw DomainError("estimation statistics do not match the fading tensor");
  if (reference_cell < 0 || reference_cell >= lsf.cells())
    throw std::out_of_range("reference cell out of range");
  const int K = lsf.users();
  const int l = reference_cell;
  ChannelDraw draw{l, ComplexMatrix(antennas, K)};
  ComplexNormal cn;
  for (int k = 0; k < K; ++k) {
    const double var = stats.hat_beta(l, l, k);
    for (int a = 0; a < antennas; ++a) draw.g_hat_own(a, k) = cn(rng, var);
  }
  return draw;
}

/// G_hat_li = G_hat_ll R_li; returns G_hat_ll itself for i == l.
inline ComplexMatrix cross_cell_estimate(const ChannelDraw& draw, const LargeScaleFading& lsf, int l,
                                         int i) {
  if (l != draw.reference_cell)
    throw std::out_of_range("draw only materializes the reference BS");
  if (i < 0 || i >= lsf.cells()) throw std::out_of_range("cell index out of range");
  if (i == l) return draw.g_hat_own;
  ComplexMatrix out = draw.g_hat_own;
  for (int k = 0; k < draw.users(); ++k) out.col(k) *= lsf.ratio(l, i, k);
  return out;
}

/// Estimate plus the aged true channels G_li[n] = alpha G_hat_li[n-1] + E_li[n]
/// for every cell i, as seen at the reference BS.
struct FullState {
  ChannelDraw draw;
  double alpha = 1.0;
  std::vector<ComplexMatrix> g_true;   // per cell i
  std::vector<ComplexMatrix> e_tilde;  // per cell i
};

inline FullState sample_true_state(const ChannelDraw& draw, const EstimationStats& stats,
                                   const LargeScaleFading& lsf, double alpha, Rng& rng) {
  if (!(std::fabs(alpha) <= 1.0)) throw DomainError("aging coefficient must satisfy |alpha| <= 1");
  const int l = draw.reference_cell;
  const int N = draw.antennas();
  const int K = draw.users();
  FullState s{draw, alpha, {}, {}};
  ComplexNormal cn;
  for (int i = 0; i < lsf.cells(); ++i) {
    ComplexMatrix err(N, K);
    for (int k = 0; k < K; ++k) {
      const double var =
          std::max(0.0, lsf.beta(l, i, k) - alpha * alpha * stats.hat_beta(l, i, k));
      for (int a = 0; a < N; ++a) err(a, k) = var > 0.0 ? cn(rng, var) : std::complex<double>{};
    }
    s.g_true.push_back(alpha * cross_cell_estimate(draw, lsf, l, i) + err);
    s.e_tilde.push_back(std::move(err));
  }
  return s;
}

/// One received symbol at the reference BS.
struct TransmissionSample {
  std::vector<ComplexVector> x;  // per cell, K unit-power symbols
  ComplexVector z;               // N x 1 AWGN
  ComplexVector y;               // N x 1 received vector
  ComplexVector r;               // K x 1 detector outputs W^H y
};

/// y = sqrt(p) sum_i G_li x_i + z, r = W^H y with Gaussian symbols.
inline TransmissionSample simulate_symbol(const FullState& state, const ComplexMatrix& w, double p,
                                          Rng& rng) {
  const int N = state.draw.antennas();
  const int K = state.draw.users();
  if (w.rows() != N) throw DomainError("combiner has the wrong number of rows");
  if (!w.allFinite()) throw DomainError("combiner entries must be finite");
  if (!(p >= 0.0)) throw DomainError("transmit power must be >= 0");
  ComplexNormal cn;
  TransmissionSample s;
  s.y = ComplexVector::Zero(N);
  const double amp = std::sqrt(p);
  for (const auto& g : state.g_true) {
    ComplexVector x(K);
    for (int k = 0; k < K; ++k) x(k) = cn(rng);
    if (amp > 0.0) s.y.noalias() += amp * (g * x);
    s.x.push_back(std::move(x));
  }
  s.z.resize(N);
  for (int a = 0; a < N; ++a) s.z(a) = cn(rng);
  s.y += s.z;
  s.r = w.adjoint() * s.y;
  return s;
}

/// Debug dump of a matrix: rows, cols, then row-major (re, im) pairs. Binary
/// output uses little-endian int64 dimensions and IEEE-754 doubles.
inline void write_matrix(std::ostream& out, const ComplexMatrix& m, bool binary) {
  if (!binary) {
    out << m.rows() << ' ' << m.cols() << '\n';
    out.precision(17);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        out << (c ? " " : "") << m(r, c).real() << ' ' << m(r, c).imag();
      out << '\n';
    }
    return;
  }
  auto put = [&out](auto value) {
    unsigned char bytes[sizeof(value)];
    std::memcpy(bytes, &value, sizeof(value));
    if constexpr (std::endian::native == std::endian::big)
      for (std::size_t b = 0; b < sizeof(value) / 2; ++b) std::swap(bytes[b], bytes[sizeof(value) - 1 - b]);
    out.write(reinterpret_cast<const char*>(bytes), sizeof(value));
  };
  put(static_cast<std::int64_t>(m.rows()));
  put(static_cast<std::int64_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      put(m(r, c).real());
      put(m(r, c).imag());
    }
}

}  // namespace aging
