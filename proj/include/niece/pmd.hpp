#pragma once

// Penalized matrix decomposition PMD(., L1): sequential rank-one factors
// (u_k, v_k, sigma_k) of a data matrix with an L1 budget on the right vectors,
// deflating with X^{k+1} = X^k (I - v_k v_k^T).

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "niece/error.hpp"
#include "niece/linalg.hpp"

namespace niece {

struct PmdConfig {
  double c = 1.0;          // bound on ||v||_1; meaningful range [1, sqrt(p)]
  int max_alt_iters = 200;
  double rel_tol = 1e-6;   // relative change of sigma between alternations
  double v_tol = 0.0;      // if > 0, also require ||v_new - v_old||_2 <= v_tol
  double bisect_tol = 1e-8;
  int bisect_max = 60;
};

template <typename Scalar>
struct SoftThreshold {
  Vector<Scalar> v;
  Scalar threshold = Scalar(0);
  bool zero = false;          // input was the zero vector
  bool l2_deficient = false;  // optimum has ||v||_2 < 1 (ties at max |w_i| with sqrt(m) > c)
};

template <typename Scalar>
struct PmdFactor {
  Vector<Scalar> v;      // p
  Vector<Scalar> u_vec;  // n
  Scalar sigma = Scalar(0);
  double c = 0.0;
  int iterations = 0;
  bool converged = false;
  bool zero = false;
  bool l2_deficient = false;
  bool restarted = false;
  std::vector<Scalar> objective_trace;  // sigma after each alternation
};

using PmdFactord = PmdFactor<double>;

namespace detail {

template <typename Scalar>
void soft_threshold_into(const Vector<Scalar>& w, Scalar delta, Vector<Scalar>& out) {
  out = w.unaryExpr([delta](Scalar x) {
    const Scalar a = std::abs(x) - delta;
    return a > Scalar(0) ? (x > Scalar(0) ? a : -a) : Scalar(0);
  });
}

// ||S(w, delta)||_1 / ||S(w, delta)||_2, or -1 when everything is thresholded away.
template <typename Scalar>
Scalar l1_l2_ratio(const Vector<Scalar>& w, Scalar delta, Vector<Scalar>& scratch) {
  soft_threshold_into(w, delta, scratch);
  const Scalar l2 = scratch.norm();
  if (l2 == Scalar(0)) return Scalar(-1);
  return scratch.template lpNorm<1>() / l2;
}

}  // namespace detail

/// argmax of w^T v over {||v||_2 <= 1, ||v||_1 <= c}. The unit-norm soft-thresholded
/// direction S(w, delta)/||S(w, delta)||_2 is used with delta found by bisection on
/// [0, max|w_i|]; the final level is polished by solving the L1 equation exactly on the
/// bracketed support.
template <typename Scalar>
SoftThreshold<Scalar> soft_threshold_unit(const Vector<Scalar>& w, double c,
                                          double bisect_tol = 1e-8, int bisect_max = 60) {
  if (c < 1.0) throw PreconditionError("soft_threshold_unit: L1 budget c must be >= 1");
  SoftThreshold<Scalar> out;
  const Index p = w.size();
  const Scalar wnorm = w.norm();
  if (wnorm == Scalar(0)) {
    out.v = Vector<Scalar>::Zero(p);
    out.zero = true;
    return out;
  }
  const Scalar cs = static_cast<Scalar>(c);
  out.v = w / wnorm;
  if (out.v.template lpNorm<1>() <= cs) return out;

  const Vector<Scalar> a = w.cwiseAbs();
  const Scalar amax = a.maxCoeff();
  Index ties = 0;
  for (Index i = 0; i < p; ++i) ties += a(i) == amax ? 1 : 0;
  if (std::sqrt(static_cast<Scalar>(ties)) > cs) {
    // No unit vector on the tied support fits the budget: spread c evenly over it.
    out.v.setZero();
    for (Index i = 0; i < p; ++i) {
      if (a(i) == amax) out.v(i) = (w(i) > 0 ? cs : -cs) / static_cast<Scalar>(ties);
    }
    out.threshold = amax;
    out.l2_deficient = true;
    return out;
  }

  Vector<Scalar> scratch(p);
  Scalar lo(0), hi = amax;
  Scalar ratio_hi = std::sqrt(static_cast<Scalar>(ties));  // limit as delta -> max|w|
  for (int it = 0; it < bisect_max; ++it) {
    const Scalar mid = (lo + hi) / Scalar(2);
    const Scalar r = detail::l1_l2_ratio(w, mid, scratch);
    if (r > cs) {
      lo = mid;
    } else {
      hi = mid;
      ratio_hi = r < Scalar(0) ? std::sqrt(static_cast<Scalar>(ties)) : r;
    }
    if (ratio_hi >= cs - static_cast<Scalar>(bisect_tol) && ratio_hi <= cs) break;
  }

  // Closed form on the support {a_i > hi}: (A - m d)^2 = c^2 (B - 2 A d + m d^2).
  Scalar delta = hi;
  {
    Scalar A(0), B(0);
    Index m = 0;
    for (Index i = 0; i < p; ++i) {
      if (a(i) > hi) {
        A += a(i);
        B += a(i) * a(i);
        ++m;
      }
    }
    if (m > 0) {
      const Scalar ms = static_cast<Scalar>(m);
      const Scalar qa = ms * (ms - cs * cs);
      const Scalar qb = Scalar(2) * A * (cs * cs - ms);
      const Scalar qc = A * A - cs * cs * B;
      std::vector<Scalar> roots;
      if (std::abs(qa) > std::numeric_limits<Scalar>::epsilon() * ms * ms) {
        const Scalar disc = qb * qb - Scalar(4) * qa * qc;
        if (disc >= Scalar(0)) {
          const Scalar sq = std::sqrt(disc);
          roots = {(-qb - sq) / (Scalar(2) * qa), (-qb + sq) / (Scalar(2) * qa)};
        }
      } else if (qb != Scalar(0)) {
        roots = {-qc / qb};
      }
      for (Scalar root : roots) {
        if (!(root >= lo && root <= hi)) continue;
        bool same_support = true;
        for (Index i = 0; i < p && same_support; ++i) {
          if (a(i) > root && a(i) <= hi) same_support = false;
        }
        if (!same_support) continue;
        detail::soft_threshold_into(w, root, scratch);
        const Scalar l2 = scratch.norm();
        if (l2 > Scalar(0) && scratch.template lpNorm<1>() / l2 <= cs * (Scalar(1) + Scalar(1e-13))) {
          delta = root;
          break;
        }
      }
    }
  }

  detail::soft_threshold_into(w, delta, scratch);
  const Scalar l2 = scratch.norm();
  if (l2 == Scalar(0)) {
    // Only reachable when the bracket collapsed onto max|w|: use the tied-support limit.
    out.v.setZero();
    for (Index i = 0; i < p; ++i) {
      if (a(i) == amax) out.v(i) = (w(i) > 0 ? Scalar(1) : Scalar(-1));
    }
    out.v /= out.v.norm();
  } else {
    out.v = scratch / l2;
  }
  out.threshold = delta;
  return out;
}

/// X (I - v v^T).
template <typename DX, typename DV>
Matrix<typename DX::Scalar> deflate(const Eigen::MatrixBase<DX>& x, const Eigen::MatrixBase<DV>& v) {
  if (x.cols() != v.size()) {
    throw DimensionError("deflate: matrix has " + std::to_string(x.cols()) +
                         " columns but vector has length " + std::to_string(v.size()));
  }
  using Scalar = typename DX::Scalar;
  const Vector<Scalar> xv = x * v;
  return x - xv * v.transpose();
}

namespace detail {

template <typename Scalar>
bool pmd_alternate(const Matrix<Scalar>& x, Vector<Scalar> v, const PmdConfig& cfg,
                   PmdFactor<Scalar>& f) {
  Vector<Scalar> xv = x * v;
  Scalar nrm = xv.norm();
  if (nrm == Scalar(0)) return false;
  Vector<Scalar> u = xv / nrm;
  Scalar prev = Scalar(-1);
  Vector<Scalar> v_prev = v;
  f.objective_trace.clear();
  f.converged = false;
  f.l2_deficient = false;
  for (int it = 1; it <= cfg.max_alt_iters; ++it) {
    const Vector<Scalar> w = x.transpose() * u;
    SoftThreshold<Scalar> st = soft_threshold_unit<Scalar>(w, cfg.c, cfg.bisect_tol, cfg.bisect_max);
    if (st.zero) return false;
    v = std::move(st.v);
    xv.noalias() = x * v;
    nrm = xv.norm();
    if (nrm == Scalar(0)) return false;
    u = xv / nrm;
    f.objective_trace.push_back(nrm);
    f.iterations = it;
    f.l2_deficient = st.l2_deficient;
    const bool sigma_ok = prev >= Scalar(0) && std::abs(nrm - prev) <= cfg.rel_tol * nrm;
    const bool v_ok = cfg.v_tol <= 0.0 || (v - v_prev).norm() <= cfg.v_tol;
    prev = nrm;
    v_prev = v;
    if (sigma_ok && v_ok) {
      f.converged = true;
      break;
    }
  }
  f.v = std::move(v);
  f.u_vec = std::move(u);
  f.sigma = nrm;
  return true;
}

}  // namespace detail

/// One PMD(., L1) factor of `x` by alternating v <- argmax_v u^T X v (L1/L2-constrained)
/// and u <- X v / ||X v||_2. Starts from the normalized column-norm vector.
template <typename Derived>
PmdFactor<typename Derived::Scalar> pmd_rank_one(const Eigen::MatrixBase<Derived>& xk,
                                                 const PmdConfig& cfg) {
  using Scalar = typename Derived::Scalar;
  if (cfg.c < 1.0) throw PreconditionError("PMD: L1 budget c must be >= 1");
  if (cfg.max_alt_iters < 1 || !(cfg.rel_tol > 0) || !(cfg.bisect_tol > 0) || cfg.bisect_max < 1) {
    throw PreconditionError("PMD: iteration controls must be positive");
  }
  const Matrix<Scalar> x = xk;
  PmdFactor<Scalar> f;
  f.c = cfg.c;
  Vector<Scalar> v0 = x.colwise().norm().transpose();
  const Scalar v0n = v0.norm();
  if (v0n == Scalar(0)) throw PreconditionError("PMD: input matrix is zero");
  v0 /= v0n;

  if (!detail::pmd_alternate(x, v0, cfg, f)) {
    Index arg;
    v0.maxCoeff(&arg);
    v0(arg) += Scalar(1e-6);
    v0 /= v0.norm();
    f.restarted = true;
    if (!detail::pmd_alternate(x, v0, cfg, f)) {
      f.zero = true;
      f.v = Vector<Scalar>::Zero(x.cols());
      f.u_vec = Vector<Scalar>::Zero(x.rows());
      f.sigma = Scalar(0);
      return f;
    }
  }
  Index arg = 0;
  Scalar best(-1);
  for (Index i = 0; i < f.v.size(); ++i) {
    if (std::abs(f.v(i)) > best) {
      best = std::abs(f.v(i));
      arg = i;
    }
  }
  if (f.v(arg) < Scalar(0)) {
    f.v = -f.v;
    f.u_vec = -f.u_vec;
  }
  return f;
}

/// d sequential PMD factors with multiplicative deflation. Once the deflated matrix is
/// numerically zero (Frobenius norm below 1e-9 of the input's) the remaining factors are
/// returned zero-flagged.
template <typename Derived>
std::vector<PmdFactor<typename Derived::Scalar>> pmd_decompose(const Eigen::MatrixBase<Derived>& xn,
                                                               Index d, const PmdConfig& cfg) {
  using Scalar = typename Derived::Scalar;
  if (d < 1 || d > std::min(xn.rows(), xn.cols())) {
    throw PreconditionError("pmd_decompose: d = " + std::to_string(d) +
                            " must lie in [1, min(n, p)] = [1, " +
                            std::to_string(std::min(xn.rows(), xn.cols())) + "]");
  }
  Matrix<Scalar> xk = xn;
  const Scalar base = xk.norm();
  std::vector<PmdFactor<Scalar>> out;
  out.reserve(static_cast<std::size_t>(d));
  bool exhausted = base == Scalar(0);
  for (Index k = 0; k < d; ++k) {
    if (!exhausted && xk.norm() <= Scalar(1e-9) * base) exhausted = true;
    if (exhausted) {
      PmdFactor<Scalar> z;
      z.c = cfg.c;
      z.zero = true;
      z.v = Vector<Scalar>::Zero(xn.cols());
      z.u_vec = Vector<Scalar>::Zero(xn.rows());
      out.push_back(std::move(z));
      continue;
    }
    PmdFactor<Scalar> f = pmd_rank_one(xk, cfg);
    if (f.zero) {
      exhausted = true;
    } else {
      xk = deflate(xk, f.v);
    }
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace niece
