#pragma once

// Linear combiners at the reference BS (OLR, MMSE, MRC, ZF) and the achievable
// per-user uplink SINR under pilot contamination and channel aging.
//
// Notation: g_k is column k of G_hat_ll, r_ik = beta_lik / beta_llk, and
// Xi_k = sum_i G_hat_li[k] G_hat_li[k]^H + sigma^2 I, where [k] removes
// column k. The SINR below keeps the coherent contamination term of the
// users sharing pilot k in other cells, so for the OLR
//   sinr = q / (1 + c_k q),  q = g_k^H Xi_k^{-1} g_k,  c_k = sum_{i != l} r_ik^2.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "aging_mimo/channel.hpp"
#include "aging_mimo/errors.hpp"
#include "aging_mimo/scenario.hpp"

namespace aging {

enum class ReceiverKind { olr, mmse, mrc, zf };

inline constexpr std::array<ReceiverKind, 4> kAllReceivers{ReceiverKind::olr, ReceiverKind::mmse,
                                                          ReceiverKind::mrc, ReceiverKind::zf};

inline std::string_view to_string(ReceiverKind kind) {
  switch (kind) {
    case ReceiverKind::olr: return "olr";
    case ReceiverKind::mmse: return "mmse";
    case ReceiverKind::mrc: return "mrc";
    case ReceiverKind::zf: return "zf";
  }
  return "?";
}

inline std::optional<ReceiverKind> parse_receiver(std::string_view name) {
  for (auto kind : kAllReceivers)
    if (to_string(kind) == name) return kind;
  return std::nullopt;
}

/// N x K combiner matrix; column k detects user k of the reference cell.
struct CombinerSet {
  ComplexMatrix w;
  ReceiverKind kind;
};

/// Received power terms of one user's detector output.
struct SinrBreakdown {
  double signal = 0.0;  // alpha^2 p |w^H g_k|^2
  double intra = 0.0;   // alpha^2 p sum_{j != k} |w^H g_j|^2
  double aging = 0.0;   // p w^H R_E w  (estimation error + aging innovation)
  double inter = 0.0;   // alpha^2 p sum_{i != l} ||w^H G_hat_li||^2
  double noise = 0.0;   // ||w||^2

  double interference_plus_noise() const { return intra + aging + inter + noise; }
  double sinr() const { return signal / interference_plus_noise(); }
};

namespace detail {

// Diagonal of R_l = sum_i R_li^2 (own cell included).
inline Eigen::VectorXd ratio_square_sums(const LargeScaleFading& lsf, int l) {
  Eigen::VectorXd c(lsf.users());
  for (int k = 0; k < lsf.users(); ++k) c(k) = 1.0 + lsf.contamination(l, k);
  return c;
}

inline void check_user(const ChannelDraw& draw, int k) {
  if (k < 0 || k >= draw.users()) throw std::out_of_range("user index out of range");
}

inline Eigen::LLT<ComplexMatrix> factor_hpd(const ComplexMatrix& m, const char* what) {
  Eigen::LLT<ComplexMatrix> llt(m);
  if (llt.info() != Eigen::Success) throw SingularityError(std::string(what) + " is not positive definite");
  return llt;
}

}  // namespace detail

/// Interference Gram S_k = sum_i G_hat_li[k] G_hat_li[k]^H, assembled as
/// G_hat_ll[k] R_l[k] G_hat_ll[k]^H.
inline ComplexMatrix interference_gram(const ChannelDraw& draw, const LargeScaleFading& lsf, int k) {
  detail::check_user(draw, k);
  Eigen::VectorXd c = detail::ratio_square_sums(lsf, draw.reference_cell);
  c(k) = 0.0;
  return draw.g_hat_own * c.asDiagonal() * draw.g_hat_own.adjoint();
}

/// Xi_k = S_k + sigma^2 I.
inline ComplexMatrix olr_covariance(const ChannelDraw& draw, const EstimationStats& stats,
                                    const LargeScaleFading& lsf, int k) {
  ComplexMatrix xi = interference_gram(draw, lsf, k);
  xi.diagonal().array() += stats.sigma2(draw.reference_cell);
  return xi;
}

/// Optimal linear receiver w = Xi_k^{-1} g_k (scale c = 1).
inline ComplexVector olr_combiner(const ChannelDraw& draw, const EstimationStats& stats,
                                  const LargeScaleFading& lsf, int k) {
  if (!(stats.sigma2(draw.reference_cell) > 0.0)) throw DomainError("sigma^2 must be positive");
  const auto llt = detail::factor_hpd(olr_covariance(draw, stats, lsf, k), "Xi_k");
  return llt.solve(draw.g_hat_own.col(k));
}

/// q = g_k^H Xi_k^{-1} g_k, the OLR quadratic form.
inline double olr_quadratic_form(const ChannelDraw& draw, const EstimationStats& stats,
                                 const LargeScaleFading& lsf, int k) {
  const ComplexVector w = olr_combiner(draw, stats, lsf, k);
  return draw.g_hat_own.col(k).dot(w).real();
}

/// Scalar z_l of the MMSE loading matrix Z_l = z_l I:
/// sum_k (beta_llk - alpha^2 beta_hat_llk) + sum_{i != l} sum_k beta_lik.
inline double mmse_loading(const EstimationStats& stats, const LargeScaleFading& lsf, int l) {
  const double a2 = stats.alpha() * stats.alpha();
  double z = 0.0;
  for (int k = 0; k < lsf.users(); ++k) {
    z += lsf.beta(l, l, k) - a2 * stats.hat_beta(l, l, k);
    for (int i = 0; i < lsf.cells(); ++i)
      if (i != l) z += lsf.beta(l, i, k);
  }
  return z;
}

namespace detail {

inline ComplexMatrix mmse_matrix(const ChannelDraw& draw, const EstimationStats& stats,
                                 const LargeScaleFading& lsf) {
  const double a2 = stats.alpha() * stats.alpha();
  ComplexMatrix m = draw.g_hat_own * draw.g_hat_own.adjoint();
  m.diagonal().array() += (mmse_loading(stats, lsf, draw.reference_cell) + 1.0 / stats.p()) / a2;
  return m;
}

}  // namespace detail

/// w = alpha (G_hat_ll G_hat_ll^H + (z_l + 1/p)/alpha^2 I)^{-1} g_k.
inline ComplexVector mmse_combiner(const ChannelDraw& draw, const EstimationStats& stats,
                                   const LargeScaleFading& lsf, int k) {
  detail::check_user(draw, k);
  const auto llt = detail::factor_hpd(detail::mmse_matrix(draw, stats, lsf), "MMSE matrix");
  return stats.alpha() * llt.solve(draw.g_hat_own.col(k));
}

/// w = alpha g_k.
inline ComplexVector mrc_combiner(const ChannelDraw& draw, const EstimationStats& stats, int k) {
  detail::check_user(draw, k);
  return stats.alpha() * draw.g_hat_own.col(k);
}

namespace detail {

inline ComplexMatrix zf_matrix(const ChannelDraw& draw) {
  const ComplexMatrix gram = draw.g_hat_own.adjoint() * draw.g_hat_own;
  Eigen::LLT<ComplexMatrix> llt(gram);
  if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-13))
    throw SingularityError("own-cell estimate is rank deficient; zero-forcing undefined");
  return draw.g_hat_own * llt.solve(ComplexMatrix::Identity(gram.rows(), gram.cols()));
}

}  // namespace detail

/// Column k of G_hat_ll (G_hat_ll^H G_hat_ll)^{-1}; w^H g_j = delta_jk.
inline ComplexVector zf_combiner(const ChannelDraw& draw, int k) {
  detail::check_user(draw, k);
  return detail::zf_matrix(draw).col(k);
}

/// All K combiners of one kind. The OLR columns share one factorization of
/// Xi = S + sigma^2 I (user k included) and are rescaled with Sherman-Morrison
/// so each equals Xi_k^{-1} g_k exactly.
inline CombinerSet build_combiners(ReceiverKind kind, const ChannelDraw& draw,
                                   const EstimationStats& stats, const LargeScaleFading& lsf) {
  const ComplexMatrix& g = draw.g_hat_own;
  switch (kind) {
    case ReceiverKind::olr: {
      const Eigen::VectorXd c = detail::ratio_square_sums(lsf, draw.reference_cell);
      ComplexMatrix xi = g * c.asDiagonal() * g.adjoint();
      xi.diagonal().array() += stats.sigma2(draw.reference_cell);
      const auto llt = detail::factor_hpd(xi, "Xi");
      ComplexMatrix w = llt.solve(g);
      for (int k = 0; k < draw.users(); ++k) {
        const double q = g.col(k).dot(w.col(k)).real();
        w.col(k) /= 1.0 - c(k) * q;
      }
      return {std::move(w), kind};
    }
    case ReceiverKind::mmse: {
      const auto llt = detail::factor_hpd(detail::mmse_matrix(draw, stats, lsf), "MMSE matrix");
      return {stats.alpha() * llt.solve(g), kind};
    }
    case ReceiverKind::mrc:
      return {stats.alpha() * g, kind};
    case ReceiverKind::zf:
      return {detail::zf_matrix(draw), kind};
  }
  throw DomainError("unknown receiver kind");
}

namespace detail {

// Eq.-(9) terms from the projections a_j = w^H g_j.
inline SinrBreakdown sinr_terms(const ComplexVector& a, double w_norm2, const EstimationStats& stats,
                                const LargeScaleFading& lsf, int l, int k) {
  const double a2p = stats.alpha() * stats.alpha() * stats.p();
  SinrBreakdown b;
  b.signal = a2p * std::norm(a(k));
  for (int j = 0; j < a.size(); ++j) {
    const double pj = std::norm(a(j));
    if (j != k) b.intra += a2p * pj;
    b.inter += a2p * lsf.contamination(l, j) * pj;
  }
  b.aging = stats.p() * stats.error_power(l) * w_norm2;
  b.noise = w_norm2;
  return b;
}

}  // namespace detail

/// Achievable SINR of user k for combiner w, with its power breakdown.
inline SinrBreakdown sinr(const ComplexVector& w, const ChannelDraw& draw, const EstimationStats& stats,
                          const LargeScaleFading& lsf, int k) {
  detail::check_user(draw, k);
  if (w.size() != draw.antennas()) throw DomainError("combiner has the wrong length");
  const double n2 = w.squaredNorm();
  if (!(n2 > 0.0)) throw DomainError("combiner must be nonzero");
  const ComplexVector a = draw.g_hat_own.adjoint() * w;  // a_j = conj(g_j^H w) has |a_j| = |w^H g_j|
  return detail::sinr_terms(a, n2, stats, lsf, draw.reference_cell, k);
}

/// Per-user SINR of every column of a combiner set.
inline std::vector<double> sinr_all(const CombinerSet& set, const ChannelDraw& draw,
                                    const EstimationStats& stats, const LargeScaleFading& lsf) {
  const ComplexMatrix proj = set.w.adjoint() * draw.g_hat_own;  // (k, j) = w_k^H g_j
  std::vector<double> out(std::size_t(draw.users()));
  for (int k = 0; k < draw.users(); ++k) {
    const double n2 = set.w.col(k).squaredNorm();
    if (!(n2 > 0.0)) throw DomainError("combiner column must be nonzero");
    out[std::size_t(k)] =
        detail::sinr_terms(proj.row(k).transpose(), n2, stats, lsf, draw.reference_cell, k).sinr();
  }
  return out;
}

/// Eigen-split form of the OLR quadratic form: with S_k = U^H B U and
/// g_bar = U g_k, q = sum_{j<K-1} |g_bar_j|^2/(lambda_j + sigma^2) + sum_rest |g_bar_j|^2/sigma^2.
struct OlrEigenSplit {
  double i1 = 0.0;
  double i2 = 0.0;
  std::vector<double> eigenvalues;  // the K-1 leading eigenvalues of S_k, descending

  double value() const { return i1 + i2; }
};

/// Eigenvalues of S_k in descending order (N values).
inline std::vector<double> interference_spectrum(const ChannelDraw& draw, const LargeScaleFading& lsf,
                                                 int k) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(interference_gram(draw, lsf, k),
                                                  Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("Hermitian eigen-solver did not converge");
  std::vector<double> ev(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  std::sort(ev.begin(), ev.end(), std::greater<>());
  return ev;
}

inline OlrEigenSplit olr_sinr_eigen(const ChannelDraw& draw, const EstimationStats& stats,
                                    const LargeScaleFading& lsf, int k) {
  const double s2 = stats.sigma2(draw.reference_cell);
  if (!(s2 > 0.0)) throw DomainError("sigma^2 must be positive");
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(interference_gram(draw, lsf, k));
  if (es.info() != Eigen::Success) throw NumericalError("Hermitian eigen-solver did not converge");
  // Eigen returns S = V diag(lambda) V^H with ascending lambda; U = V^H.
  const ComplexVector g_bar = es.eigenvectors().adjoint() * draw.g_hat_own.col(k);
  const int N = draw.antennas();
  const int rank = draw.users() - 1;
  OlrEigenSplit split;
  for (int idx = N - 1; idx >= 0; --idx) {
    const int order = N - 1 - idx;  // 0 = largest eigenvalue
    const double mag = std::norm(g_bar(idx));
    if (order < rank) {
      split.eigenvalues.push_back(es.eigenvalues()(idx));
      split.i1 += mag / (es.eigenvalues()(idx) + s2);
    } else {
      split.i2 += mag / s2;
    }
  }
  return split;
}

}  // namespace aging
