// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "feasopt/linesearch.hpp"
#include "feasopt/retraction.hpp"
#include "feasopt/stepsize.hpp"
#include "support/oracles.hpp"

using namespace feasopt;

namespace {

BBState pair(const Matrix& s, const Matrix& y, long k = 1) {
  BBState st;
  st.s_prev = s;
  st.y_prev = y;
  st.k = k;
  return st;
}

}  // namespace

TEST(BarzilaiBorwein, LongStep) {
  const Matrix y = oracle::gaussian(5, 2, 1);
  EXPECT_NEAR(*bb_long(pair(y, y)), 1.0, 1e-15);
  EXPECT_NEAR(*bb_long(pair(2.0 * y, y)), 2.0, 1e-15);
  Matrix s = Matrix::Zero(2, 1), t = Matrix::Zero(2, 1);
  s(0, 0) = 1.0;
  t(1, 0) = 1.0;
  EXPECT_FALSE(bb_long(pair(s, t)).has_value());
  EXPECT_THROW(bb_long(pair(s, Matrix::Zero(3, 1))), ShapeError);
}

TEST(BarzilaiBorwein, ShortStep) {
  const Matrix y = oracle::gaussian(5, 2, 2);
  EXPECT_NEAR(*bb_short(pair(y, y)), 1.0, 1e-15);
  Matrix s = Matrix::Zero(2, 1), t = Matrix::Zero(2, 1);
  s(0, 0) = 1.0;
  t(1, 0) = 1.0;
  EXPECT_EQ(*bb_short(pair(s, t)), 0.0);
  EXPECT_FALSE(bb_short(pair(s, Matrix::Zero(2, 1))).has_value());
  for (std::uint64_t k = 0; k < 20; ++k) {
    const auto st = pair(oracle::gaussian(6, 3, 10 + k), oracle::gaussian(6, 3, 40 + k));
    EXPECT_LE(*bb_short(st), *bb_long(st) * (1.0 + 1e-14));
  }
}

TEST(BarzilaiBorwein, AlternationByParity) {
  const Matrix s = oracle::gaussian(4, 2, 3);
  const Matrix y = s + 0.3 * oracle::gaussian(4, 2, 4);
  const double sh = *bb_short(pair(s, y));
  const double lo = *bb_long(pair(s, y));
  ASSERT_NE(sh, lo);
  for (long k = 1; k <= 6; ++k) EXPECT_EQ(*abb(pair(s, y, k)), k % 2 ? sh : lo) << k;
  EXPECT_THROW(abb(pair(s, y, 0)), DomainError);
}

TEST(BarzilaiBorwein, TraceShortcutMatchesDirectInnerProduct) {
  const StiefelPoint x(oracle::orthonormal(12, 3, 5));
  const Matrix g = oracle::gaussian(12, 3, 6);
  const auto c = make_new_curve(x.mat(), d_rho(x.mat(), g, 0.5), GTau::Linear);
  for (double tau : {1e-7, 1e-3, 0.3}) {
    BBState st = pair(c->at(tau) - x.mat(), oracle::gaussian(12, 3, 7));
    const double direct = st.s_prev.squaredNorm();
    st.ss_shortcut = c->step_norm_sq(tau);
    const double sy = std::abs(inner(st.s_prev, st.y_prev));
    EXPECT_NEAR(*bb_long(st) * sy, direct, 1e-10 * direct) << tau;
  }
}

TEST(Safeguard, Clamps) {
  const SafeguardParams p;
  EXPECT_DOUBLE_EQ(safeguard(0.7, 1.0, p), 0.7);
  EXPECT_DOUBLE_EQ(safeguard(1e12, 1.0, p), 1e8);
  EXPECT_DOUBLE_EQ(safeguard(0.0, 2.0, p), 5e-9);
  EXPECT_DOUBLE_EQ(safeguard(1e12, 1e-3, p), 1e10);
  EXPECT_DOUBLE_EQ(safeguard(std::nan(""), 2.0, p), 5e-9);
  EXPECT_THROW(safeguard(1.0, 0.0, p), DomainError);
  SafeguardParams bad;
  bad.sigma = 1.0;
  EXPECT_THROW(bad.validate(), DomainError);
}

TEST(Reference, ImprovementResetsCounter) {
  auto r = ReferenceState::start(10.0);
  r = update_reference(r, 8.0);
  EXPECT_EQ(r.f_best, 8.0);
  EXPECT_EQ(r.f_c, 8.0);
  EXPECT_EQ(r.l, 0);
  EXPECT_TRUE(std::isinf(r.f_r));
}

TEST(Reference, ThreeNonImprovingValuesRaiseReference) {
  auto r = ReferenceState::start(1.0, 3);
  r = update_reference(r, 5.0);
  r = update_reference(r, 4.0);
  EXPECT_EQ(r.l, 2);
  EXPECT_EQ(r.f_c, 5.0);
  r = update_reference(r, 6.0);
  EXPECT_EQ(r.f_r, 6.0);
  EXPECT_EQ(r.f_c, 6.0);
  EXPECT_EQ(r.l, 0);
  EXPECT_EQ(r.f_best, 1.0);
}

TEST(Reference, MonotoneSequenceNeverSetsReference) {
  auto r = ReferenceState::start(100.0);
  for (int k = 0; k < 1000; ++k) r = update_reference(r, 99.0 - k);
  EXPECT_TRUE(std::isinf(r.f_r));
  EXPECT_THROW(ReferenceState::start(0.0, 0), DomainError);
}

namespace {

/// F(X) = tr(X^T A X) and its gradient.
struct Quadratic {
  Matrix a;
  GradientPair operator()(const Matrix& x) const {
    return {(x.transpose() * a * x).trace(), 2.0 * a * x};
  }
};

Matrix spd(Eigen::Index n, std::uint64_t seed, double scale) {
  Matrix q = oracle::orthonormal(n, n, seed);
  Vector ev = Vector::LinSpaced(n, 0.1, 1.0) * scale;
  return q * ev.asDiagonal() * q.transpose();
}

}  // namespace

TEST(Armijo, InfiniteReferenceAcceptsFirstTrial) {
  const Quadratic f{spd(6, 1, 1.0)};
  const Matrix x = oracle::orthonormal(6, 2, 2);
  const auto fg = f(x);
  const auto c = make_new_curve(x, d_rho(x, fg.euclid_grad, 0.5), GTau::Linear);
  const double slope = -inner(fg.euclid_grad, c->velocity());
  const auto r = armijo_backtrack(f, c, 123.0, std::numeric_limits<double>::infinity(), slope, {});
  EXPECT_TRUE(r.accepted);
  EXPECT_EQ(r.backtracks, 0);
  EXPECT_EQ(r.tau, 123.0);
  EXPECT_EQ(r.evaluations, 1);
}

TEST(Armijo, ExactMinimizerStepIsAcceptedImmediately) {
  const Quadratic f{spd(5, 3, 1.0)};
  const Matrix x = oracle::orthonormal(5, 1, 4);
  const auto fg = f(x);
  const auto c = make_new_curve(x, d_rho(x, fg.euclid_grad, 0.5), GTau::Linear);
  const double slope = -inner(fg.euclid_grad, c->velocity());
  // grid scan, then golden-section refinement around the best grid point
  const double span = 20.0 / c->velocity().norm();
  double best = 0.0, fbest = fg.value;
  for (int i = 1; i <= 2000; ++i) {
    const double t = span * i / 2000.0;
    const double v = f(c->at(t)).value;
    if (v < fbest) {
      fbest = v;
      best = t;
    }
  }
  double lo = std::max(0.0, best - span / 2000.0), hi = best + span / 2000.0;
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 200; ++it) {
    const double a = hi - phi * (hi - lo), b = lo + phi * (hi - lo);
    if (f(c->at(a)).value < f(c->at(b)).value) {
      hi = b;
    } else {
      lo = a;
    }
  }
  const double tstar = 0.5 * (lo + hi);
  ASSERT_LT(f(c->at(tstar)).value, fg.value);
  const auto r = armijo_backtrack(f, c, tstar, fg.value, slope, {});
  EXPECT_TRUE(r.accepted);
  EXPECT_EQ(r.backtracks, 0);
}

TEST(Armijo, HugeTrialBacktracksAndSatisfiesInequality) {
  const Quadratic f{spd(8, 5, 1.0)};
  const Matrix x = oracle::orthonormal(8, 3, 6);
  const auto fg = f(x);
  const auto c = make_new_curve(x, d_rho(x, fg.euclid_grad, 0.5), GTau::Linear);
  const double slope = -inner(fg.euclid_grad, c->velocity());
  const SafeguardParams p;
  const auto r = armijo_backtrack(f, c, 1e6, fg.value, slope, p);
  ASSERT_TRUE(r.accepted);
  EXPECT_GT(r.backtracks, 0);
  EXPECT_DOUBLE_EQ(r.tau, 1e6 * std::pow(p.sigma, r.backtracks));
  const double fy = (r.y.transpose() * f.a * r.y).trace();
  EXPECT_LE(fy, fg.value + p.delta_armijo * r.tau * slope);
  EXPECT_LT((r.y - c->at(r.tau)).norm(), 1e-15);
}

TEST(Armijo, GivesUpAfterCapAndSkipsNonFiniteTrials) {
  const Matrix x = oracle::orthonormal(4, 1, 7);
  const Matrix g = oracle::gaussian(4, 1, 8);
  const auto c = make_new_curve(x, d_rho(x, g, 0.5), GTau::Linear);
  int calls = 0;
  const Evaluator nan_eval = [&](const Matrix& y) {
    ++calls;
    return GradientPair{std::nan(""), y};
  };
  const auto r = armijo_backtrack(nan_eval, c, 1.0, 0.0, -1.0, {}, 5);
  EXPECT_FALSE(r.accepted);
  EXPECT_EQ(r.backtracks, 5);
  EXPECT_EQ(calls, 6);
  EXPECT_EQ(r.evaluations, 6);
  EXPECT_THROW(armijo_backtrack(nan_eval, c, 1.0, 0.0, 0.0, {}), DomainError);
  EXPECT_THROW(armijo_backtrack(nan_eval, c, -1.0, 0.0, -1.0, {}), DomainError);
}
