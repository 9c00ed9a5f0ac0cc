#pragma once

// Adapted delay-Doppler filters.
//
// The surveillance filter U_s minimizes
//     g1 ||U_s||^2 + g2 ||U_s - X_s||^2 + g3 ||X_s^* U_s - I||^2
// subject to X_c^* U_s = 0. With A = 2[(g1 + g2) I + g3 X_s X_s^*] the
// minimizer is
//     U_s = 2 (g2 + g3) A^-1 (I - X_c (X_c^* A^-1 X_c)^-1 X_c^* A^-1) X_s.
//
// Two independent evaluation routes exist:
//   * solve_dense: forms the T x T system literally. Test oracle, T-capped.
//   * AdaptedFilter: works in the N-dimensional Gram domain via the
//     matrix-inversion identity for A^-1 and never touches a T-length vector
//     once the cross-correlations r_s = X_s^* y, r_c = X_c^* y are known.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>
#include <string>
#include <utility>

#include "ddopt/caf.hpp"
#include "ddopt/errors.hpp"
#include "ddopt/grid.hpp"
#include "ddopt/signal.hpp"

namespace ddopt {

/// Objective weights (g1, g2, g3); nonnegative and summing to one.
struct GammaWeights {
  double gamma1 = 0.0;
  double gamma2 = 1.0;
  double gamma3 = 0.0;

  /// The one-parameter family used in practice: (0, gamma, 1 - gamma).
  static GammaWeights reduced(double gamma) {
    detail::require(gamma >= 0.0 && gamma <= 1.0, "gamma must lie in [0, 1]");
    return {0.0, gamma, 1.0 - gamma};
  }

  void validate() const {
    detail::require(gamma1 >= 0.0 && gamma2 >= 0.0 && gamma3 >= 0.0, "gamma weights must be nonnegative");
    detail::require(std::abs(gamma1 + gamma2 + gamma3 - 1.0) <= 1e-12, "gamma weights must sum to 1");
  }

  /// Coefficient of I in A / 2.
  double identity_weight() const { return gamma1 + gamma2; }
  /// Scalar in front of U_0.
  double scale() const { return 2.0 * (gamma2 + gamma3); }
};

/// Failure threshold on the reciprocal condition estimate of every factorized system.
inline constexpr double kMinRcond = 1e-12;

namespace detail {

template <typename Llt>
void check_factorization(const Llt& llt, const char* what) {
  if (llt.info() != Eigen::Success) throw NumericError(std::string(what) + ": matrix is not positive definite");
  const double rc = llt.rcond();
  if (!(rc >= kMinRcond)) {
    std::ostringstream os;
    os << what << ": ill-conditioned (reciprocal condition estimate " << rc << ")";
    throw NumericError(os.str(), rc);
  }
}

inline double a_weight(const GammaWeights& w, double ridge) {
  w.validate();
  detail::require(ridge >= 0.0, "ridge must be nonnegative");
  return w.identity_weight() + ridge;
}

}  // namespace detail

struct DenseOptions {
  Eigen::Index max_samples = 4096;
  /// Added to g1 + g2 inside A only; lets g1 + g2 = 0 be explored.
  double ridge = 0.0;
};

/// Explicit T x N_s surveillance filter.
struct DenseFilter {
  CMatrix u_s;
  GammaWeights weights;
  double ridge = 0.0;

  /// rho_hat_s = U_s^* y.
  CVector response(const ComplexSignal& y) const {
    detail::require(y.size() == u_s.rows(), "DenseFilter: capture length mismatch");
    return u_s.adjoint() * y.samples();
  }
};

/// A = 2[a I + g3 X_s X_s^*], formed explicitly.
inline CMatrix system_matrix(const CMatrix& xs, const GammaWeights& w, double ridge = 0.0) {
  const double a = detail::a_weight(w, ridge);
  CMatrix m = (2.0 * w.gamma3) * (xs * xs.adjoint());
  m.diagonal().array() += 2.0 * a;
  return m;
}

inline DenseFilter solve_dense(const ComplexSignal& x, const DDGrid& grid, const GammaWeights& w,
                               const DenseOptions& opt = {}) {
  detail::require(x.size() <= opt.max_samples, "solve_dense: T = " + std::to_string(x.size()) +
                                                   " exceeds the dense cap of " + std::to_string(opt.max_samples));
  const double a = detail::a_weight(w, opt.ridge);
  grid.check_fits(x.size());
  detail::require(grid.num_surveillance() > 0, "solve_dense: grid has no surveillance cells");
  if (a == 0.0 && x.size() > static_cast<Eigen::Index>(grid.num_surveillance()))
    throw NumericError("solve_dense: g1 + g2 = 0 makes A singular for T > N_s");

  const CMatrix xs = materialize_columns(x, grid, Subset::surveillance);
  const CMatrix xc = materialize_columns(x, grid, Subset::clutter);

  Eigen::LLT<CMatrix> a_llt(system_matrix(xs, w, opt.ridge));
  detail::check_factorization(a_llt, "solve_dense: A");
  const CMatrix ainv_xs = a_llt.solve(xs);

  CMatrix u = ainv_xs;
  if (xc.cols() > 0) {
    const CMatrix ainv_xc = a_llt.solve(xc);
    Eigen::LLT<CMatrix> m_llt(xc.adjoint() * ainv_xc);
    detail::check_factorization(m_llt, "solve_dense: X_c^* A^-1 X_c");
    u -= ainv_xc * m_llt.solve(xc.adjoint() * ainv_xs);
  }
  u *= w.scale();
  return {std::move(u), w, opt.ridge};
}

/// Gram-domain (implicit) representation of U_s. Built once per
/// (reference, grid, weights) and applied to any number of captures; all
/// state is immutable after construction.
class AdaptedFilter {
 public:
  AdaptedFilter(std::shared_ptr<const GramBlocks> gram, const GammaWeights& w, double ridge = 0.0)
      : gram_(std::move(gram)), weights_(w), ridge_(ridge) {
    detail::require(gram_ != nullptr, "AdaptedFilter: missing Gram blocks");
    const double a = detail::a_weight(w, ridge);
    const Eigen::Index ns = gram_->ss.rows();
    const Eigen::Index nc = gram_->cc.rows();
    detail::require(ns > 0, "AdaptedFilter: grid has no surveillance cells");
    if (a <= 0.0) throw NumericError("AdaptedFilter: g1 + g2 = 0 makes A singular (use a ridge)");

    if (w.gamma3 == 0.0) {
      // A = 2a I: the filter is the projection of X_s onto the clutter complement.
      scale_ = w.scale() / (2.0 * a);
      if (nc > 0) {
        s_llt_.compute(gram_->cc);
        detail::check_factorization(s_llt_, "AdaptedFilter: G_cc");
      }
      return;
    }

    scale_ = (w.gamma2 + w.gamma3) / w.gamma3;
    const double c = a / w.gamma3;
    CMatrix k = gram_->ss;
    k.diagonal().array() += c;
    k_llt_.compute(k);
    detail::check_factorization(k_llt_, "AdaptedFilter: (c I + G_ss)");
    if (nc > 0) {
      w_ = k_llt_.solve(gram_->sc);
      CMatrix schur = gram_->cc - gram_->sc.adjoint() * w_;
      schur = 0.5 * (schur + schur.adjoint()).eval();
      s_llt_.compute(schur);
      detail::check_factorization(s_llt_, "AdaptedFilter: clutter Schur complement");
    }
  }

  const GammaWeights& weights() const noexcept { return weights_; }
  Eigen::Index num_surveillance() const noexcept { return gram_->ss.rows(); }
  Eigen::Index num_clutter() const noexcept { return gram_->cc.rows(); }

  /// rho_hat_s = U_s^* y from r_s = X_s^* y and r_c = X_c^* y.
  CVector apply(const CVector& r_s, const CVector& r_c) const {
    detail::require(r_s.size() == num_surveillance() && r_c.size() == num_clutter(),
                    "AdaptedFilter: correlation vector sizes do not match the grid");
    const bool has_clutter = num_clutter() > 0;
    if (weights_.gamma3 == 0.0) {
      if (!has_clutter) return scale_ * r_s;
      return scale_ * (r_s - gram_->sc * s_llt_.solve(r_c));
    }
    CVector t = k_llt_.solve(r_s);
    if (has_clutter) t -= w_ * s_llt_.solve(r_c - gram_->sc.adjoint() * t);
    return scale_ * t;
  }

  CVector apply(const CrossCorrelations& r) const { return apply(r.surveillance, r.clutter); }

 private:
  std::shared_ptr<const GramBlocks> gram_;
  GammaWeights weights_;
  double ridge_;
  double scale_ = 1.0;
  Eigen::LLT<CMatrix> k_llt_;
  Eigen::LLT<CMatrix> s_llt_;
  CMatrix w_;  // (c I + G_ss)^-1 G_sc
};

/// Adapted surface for the reduced weights (0, gamma, 1 - gamma). Clutter
/// cells are reported as zero (U_c = 0).
inline DDSurface adapted_response_fast(const ComplexSignal& x, const ComplexSignal& y, const DDGrid& grid,
                                       double gamma, double ridge = 0.0) {
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw InvalidArgument("adapted_response_fast: gamma must lie in (0, 1]; gamma = 0 makes A singular");
  auto blocks = std::make_shared<const GramBlocks>(compute_gram_blocks(x, grid));
  const AdaptedFilter filter(blocks, GammaWeights::reduced(gamma), ridge);
  return surface_from_columns(filter.apply(cross_correlations(x, y, grid)), grid);
}

/// Value of the (unreduced) objective at U.
inline double objective(const CMatrix& u, const CMatrix& xs, const GammaWeights& w) {
  const CMatrix gram = xs.adjoint() * u - CMatrix::Identity(xs.cols(), u.cols());
  return w.gamma1 * u.squaredNorm() + w.gamma2 * (u - xs).squaredNorm() + w.gamma3 * gram.squaredNorm();
}

struct KktReport {
  double constraint = 0.0;    // ||X_c^* U_s||_F / ||X_s||_F
  double stationarity = 0.0;  // ||A U_s + X_c L - 2(g2+g3) X_s||_F / ||X_s||_F, L by least squares
};

inline KktReport kkt_residuals(const ComplexSignal& x, const DDGrid& grid, const DenseFilter& f) {
  const CMatrix xs = materialize_columns(x, grid, Subset::surveillance);
  const CMatrix xc = materialize_columns(x, grid, Subset::clutter);
  const double xs_norm = xs.norm();
  const CMatrix target = f.weights.scale() * xs;
  const CMatrix au = system_matrix(xs, f.weights, f.ridge) * f.u_s;

  KktReport rep;
  CMatrix resid = au - target;
  if (xc.cols() > 0) {
    rep.constraint = (xc.adjoint() * f.u_s).norm() / xs_norm;
    const CMatrix lambda = xc.colPivHouseholderQr().solve(target - au);
    resid += xc * lambda;
  }
  rep.stationarity = resid.norm() / xs_norm;
  return rep;
}

struct ScalarMultipleReport {
  double predicted_ratio = 1.0;  // (g2 + g3)|w1 / (g2 + g3)|w2
  double max_deviation = 0.0;    // max |U1 - c U2| / max |U1|
};

/// Checks that filters with equal g1 + g2 and equal g3 differ only by the
/// factor 2(g2 + g3).
inline ScalarMultipleReport scalar_multiple_check(const ComplexSignal& x, const DDGrid& grid,
                                                       const GammaWeights& w1, const GammaWeights& w2,
                                                       const DenseOptions& opt = {}) {
  w1.validate();
  w2.validate();
  detail::require(std::abs(w1.identity_weight() - w2.identity_weight()) <= 1e-12 &&
                      std::abs(w1.gamma3 - w2.gamma3) <= 1e-12,
                  "scalar_multiple_check: weights must share g1 + g2 and g3");
  const DenseFilter f1 = solve_dense(x, grid, w1, opt);
  const DenseFilter f2 = solve_dense(x, grid, w2, opt);
  ScalarMultipleReport rep;
  rep.predicted_ratio = (w1.gamma2 + w1.gamma3) / (w2.gamma2 + w2.gamma3);
  const double ref = f1.u_s.cwiseAbs().maxCoeff();
  rep.max_deviation = ref > 0.0 ? (f1.u_s - rep.predicted_ratio * f2.u_s).cwiseAbs().maxCoeff() / ref : 0.0;
  return rep;
}

}  // namespace ddopt
