// SPDX-License-Identifier: Apache-2.0
//
// Barzilai-Borwein stepsizes, the alternating ABB rule, the safeguard clamp
// and the adaptive reference value for the nonmonotone line search.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "feasopt/core.hpp"

namespace feasopt {

/// Secant pair from the previous step.
struct BBState {
  Matrix s_prev;  // X_k - X_{k-1}
  Matrix y_prev;  // D_k - D_{k-1}
  long k = 0;     // global iteration counter of the step being sized
  /// <S, S> from the curve's p x p factor, 4 tr(I - J^{-1}), when available.
  std::optional<double> ss_shortcut;
};

namespace detail {

inline double bb_ss(const BBState& st) {
  return st.ss_shortcut ? *st.ss_shortcut : st.s_prev.squaredNorm();
}

inline void check_pair(const BBState& st) {
  require_same_shape(st.s_prev, st.y_prev, "BBState");
  require_nonempty(st.s_prev, "BBState");
}

}  // namespace detail

/// <S,S> / |<S,Y>|, or nullopt when the denominator is degenerate.
inline std::optional<double> bb_long(const BBState& st) {
  detail::check_pair(st);
  const double sy = std::abs(inner(st.s_prev, st.y_prev));
  const double ss = detail::bb_ss(st);
  const double scale = st.s_prev.norm() * st.y_prev.norm();
  if (!(sy > 1e-16 * scale) || !(sy > 0.0)) return std::nullopt;
  const double t = ss / sy;
  return std::isfinite(t) ? std::optional<double>(t) : std::nullopt;
}

/// |<S,Y>| / <Y,Y>, or nullopt when <Y,Y> = 0. May return 0 for S orthogonal
/// to Y; the safeguard lifts it.
inline std::optional<double> bb_short(const BBState& st) {
  detail::check_pair(st);
  const double yy = st.y_prev.squaredNorm();
  if (!(yy > 0.0)) return std::nullopt;
  const double t = std::abs(inner(st.s_prev, st.y_prev)) / yy;
  return std::isfinite(t) ? std::optional<double>(t) : std::nullopt;
}

/// Short step on odd k, long step on even k.
inline std::optional<double> abb(const BBState& st) {
  if (st.k < 1) throw DomainError("abb: k must be >= 1");
  return (st.k % 2 == 1) ? bb_short(st) : bb_long(st);
}

struct SafeguardParams {
  double eps_min = 1e-8;
  double eps_max = 1e8;
  double delta_cap = 1e10;
  double sigma = 0.5;
  double delta_armijo = 1e-3;

  void validate() const {
    if (!(eps_min > 0.0 && eps_min < eps_max)) {
      throw DomainError("SafeguardParams: need 0 < eps_min < eps_max");
    }
    if (!(delta_cap > 0.0)) throw DomainError("SafeguardParams: delta_cap must be positive");
    if (!(sigma > 0.0 && sigma < 1.0)) throw DomainError("SafeguardParams: sigma not in (0,1)");
    if (!(delta_armijo > 0.0 && delta_armijo < 1.0)) {
      throw DomainError("SafeguardParams: delta_armijo not in (0,1)");
    }
  }
};

/// max{eps_min/||D||, min{tau0, min{eps_max/||D||, Delta}}}.
inline double safeguard(double tau0, double d_norm, const SafeguardParams& p) {
  if (!(d_norm > 0.0) || !std::isfinite(d_norm)) {
    throw DomainError("safeguard: d_norm must be positive and finite");
  }
  const double hi = std::min(p.eps_max / d_norm, p.delta_cap);
  const double lo = p.eps_min / d_norm;
  const double t = std::isnan(tau0) ? lo : std::min(tau0, hi);
  return std::max(lo, t);
}

/// (F_r, F_best, F_c, l, L).
struct ReferenceState {
  double f_r = std::numeric_limits<double>::infinity();
  double f_best = 0.0;
  double f_c = 0.0;
  int l = 0;
  int cap_l = 3;

  static ReferenceState start(double f0, int cap_l = 3) {
    if (cap_l < 1) throw DomainError("ReferenceState: cap_l must be >= 1");
    ReferenceState r;
    r.f_best = f0;
    r.f_c = f0;
    r.cap_l = cap_l;
    return r;
  }
};

inline ReferenceState update_reference(ReferenceState ref, double f_next) {
  if (f_next < ref.f_best) {
    ref.f_best = f_next;
    ref.f_c = f_next;
    ref.l = 0;
  } else {
    ref.f_c = std::max(ref.f_c, f_next);
    ref.l += 1;
  }
  if (ref.l == ref.cap_l) {
    ref.f_r = ref.f_c;
    ref.f_c = f_next;
    ref.l = 0;
  }
  return ref;
}

}  // namespace feasopt
