#pragma once

// Shared test fixtures: the two-state running problem, the three-state
// problem whose maximal transition coupling cannot come from a maximal
// proposal coupling, a four-state problem whose maximal pipeline has both
// off-diagonal proposal mass and rejection mass, and randomized problem
// generators used by the property suites.

#include <cstdint>
#include <utility>
#include <vector>

#include "kercoup/decompose.hpp"
#include "kercoup/kernel.hpp"
#include "kercoup/measure.hpp"
#include "kercoup/rng.hpp"

namespace kercoup::testfx {

inline Rational r(long n, long d = 1) { return Rational(n, d); }

/// Two states, uniform proposal, target (1/3, 2/3):
/// P(1,.) = (1/2, 1/2), P(2,.) = (1/4, 3/4).
inline MhProblem two_state_problem() {
  const SpacePtr space = make_space(2);
  FiniteKernel Q = FiniteKernel::from_weights(space, {{r(1, 2), r(1, 2)}, {r(1, 2), r(1, 2)}});
  const Dist pi = Dist::checked(space, {r(1, 3), r(2, 3)});
  return MhProblem::make(Q, mh_acceptance(pi, Q));
}

/// The transition coupling studied throughout the two-state example:
/// mass {(1,1):0, (2,1):1/4, (1,2):1/2, (2,2):1/4} in (x', y') order.
inline JointDist two_state_pbar(const SpacePtr& space) {
  JointDist p = JointDist::zero(space);
  p.at(1, 0) = r(1, 4);
  p.at(0, 1) = r(1, 2);
  p.at(1, 1) = r(1, 4);
  return p;
}

/// Three states, non-lazy proposals, target (2/5, 2/5, 1/5):
/// P(1,.) = (1/2, 1/2, 0), P(2,.) = (1/2, 0, 1/2).
inline MhProblem nonmax_problem() {
  const SpacePtr space = make_space(3);
  FiniteKernel Q = FiniteKernel::from_weights(
      space, {{r(0), r(1, 2), r(1, 2)}, {r(1, 2), r(0), r(1, 2)}, {r(0), r(1), r(0)}});
  const Dist pi = Dist::checked(space, {r(2, 5), r(2, 5), r(1, 5)});
  return MhProblem::make(Q, mh_acceptance(pi, Q));
}

/// Four states with explicit acceptance rates. At the pair (1, 2) the
/// maximal proposal coupling has an off-diagonal cell and the per-cell
/// common-uniform acceptance coupling over it generates a maximal
/// transition coupling with rejection mass spread over two diagonal cells.
struct ResampleFixture {
  MhProblem problem;
  std::size_t x = 0, y = 1;
  JointDist qbar_m;          // maximal proposal coupling at (1, 2)
  AcceptanceCoupling b_m;    // per-cell common-uniform outcome vectors
  JointDist pbar;            // the (maximal) transition coupling generated
};

inline ResampleFixture resample_fixture() {
  const SpacePtr space = make_space(4);
  const Rational q4 = r(1, 4);
  FiniteKernel Q = FiniteKernel::from_weights(space, {{q4, q4, q4, q4},
                                                      {r(0), q4, q4, r(1, 2)},
                                                      {q4, q4, q4, q4},
                                                      {q4, q4, q4, q4}});
  const Rational h = r(1, 2);
  AcceptanceMatrix a = AcceptanceMatrix::checked(space, {{r(1), h, h, h},
                                                         {r(1), r(1), h, h},
                                                         {r(1), r(1), r(1), r(1)},
                                                         {r(1), r(1), r(1), r(1)}});
  ResampleFixture fx;
  fx.problem = MhProblem::make(Q, a);
  fx.qbar_m = build_maximal_coupling(fx.problem.Q.row(0), fx.problem.Q.row(1));

  fx.b_m = AcceptanceCoupling::filled(space);
  auto set = [&](std::size_t i, std::size_t j, Rational p11, Rational p10, Rational p01,
                 Rational p00) {
    fx.b_m.at(i, j) = {std::move(p11), std::move(p10), std::move(p01), std::move(p00)};
    fx.b_m.off_support[i][j] = false;
  };
  set(1, 1, h, r(0), h, r(0));
  set(2, 2, h, r(0), r(0), h);
  set(3, 3, h, r(0), r(0), h);
  set(0, 3, h, h, r(0), r(0));

  fx.pbar = regenerate_pbar(fx.qbar_m, fx.b_m, fx.x, fx.y);
  return fx;
}

/// Random row-stochastic problem with MH acceptance rates against a random
/// strictly positive target. With non_lazy, proposals never stay put.
inline MhProblem random_problem(std::size_t n, std::uint64_t seed, bool non_lazy = false) {
  RngStream rng(seed, 0, 0, Role::kMisc);
  std::vector<std::vector<Rational>> q(n, std::vector<Rational>(n, Rational(0)));
  for (std::size_t i = 0; i < n; ++i) {
    Rational total;
    for (std::size_t j = 0; j < n; ++j) {
      if (non_lazy && i == j) continue;
      q[i][j] = Rational(static_cast<long>(rng.next_below(8)));
      total += q[i][j];
    }
    if (total.is_zero()) {
      const std::size_t j = non_lazy ? (i + 1) % n : i;
      q[i][j] = Rational(1);
      total = Rational(1);
    }
    for (auto& w : q[i]) w /= total;
  }
  std::vector<Rational> pw(n);
  Rational pt;
  for (auto& w : pw) {
    w = Rational(static_cast<long>(1 + rng.next_below(8)));
    pt += w;
  }
  for (auto& w : pw) w /= pt;

  const SpacePtr space = make_space(n);
  FiniteKernel Q = FiniteKernel::from_weights(space, std::move(q));
  const Dist pi = Dist::checked(space, std::move(pw));
  return MhProblem::make(Q, mh_acceptance(pi, Q));
}

/// Acceptance indicator coupling with every conditional acceptance
/// probability equal to the marginal rate: a per-cell blend of the
/// independent and the common-uniform outcome vectors. Valid over any
/// proposal coupling of the problem's rows.
inline AcceptanceCoupling random_rate_respecting_b(const MhProblem& problem, const JointDist& qbar,
                                                   std::size_t x, std::size_t y,
                                                   std::uint64_t seed) {
  const std::size_t n = qbar.size();
  RngStream rng(seed, 1, 0, Role::kMisc);
  AcceptanceCoupling b = AcceptanceCoupling::filled(qbar.space);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const Rational ax = problem.a.at(x, i);
      const Rational ay = problem.a.at(y, j);
      const Rational lam(static_cast<long>(rng.next_below(9)), 8);
      const Rational mn = min(ax, ay);
      const Rational mx = max(ax, ay);
      const std::array<Rational, 4> ind{ax * ay, ax * (Rational(1) - ay), (Rational(1) - ax) * ay,
                                        (Rational(1) - ax) * (Rational(1) - ay)};
      const std::array<Rational, 4> cu{mn, ax - mn, ay - mn, Rational(1) - mx};
      for (int k = 0; k < 4; ++k) {
        b.probs[i][j][static_cast<std::size_t>(k)] =
            lam * ind[static_cast<std::size_t>(k)] + (Rational(1) - lam) * cu[static_cast<std::size_t>(k)];
      }
      b.off_support[i][j] = qbar.at(i, j).is_zero();
    }
  }
  return b;
}

}  // namespace kercoup::testfx
