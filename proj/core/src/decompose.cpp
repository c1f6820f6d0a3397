#include "kercoup/decompose.hpp"

#include <stdexcept>

#include "kercoup/rng.hpp"

namespace kercoup {

namespace {

std::string cell(const SpacePtr& s, std::size_t i, std::size_t j) {
  return "(" + s->label(i) + "," + s->label(j) + ")";
}

std::string subset_str(const SpacePtr& s, const std::vector<std::size_t>& idx) {
  std::string out = "{";
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (k) out += ",";
    out += s->label(idx[k]);
  }
  return out + "}";
}

}  // namespace

AcceptanceCoupling AcceptanceCoupling::filled(SpacePtr space) {
  const std::size_t n = space->size();
  AcceptanceCoupling b;
  b.space = std::move(space);
  b.probs.assign(n, std::vector<std::array<Rational, 4>>(
                        n, {Rational(1), Rational(0), Rational(0), Rational(0)}));
  b.off_support.assign(n, std::vector<bool>(n, true));
  return b;
}

Helpers compute_helpers(const FiniteKernel& Q, const FiniteKernel& P) {
  if (!same_space(Q.space, P.space)) throw std::invalid_argument("compute_helpers: mismatched spaces");
  const std::size_t n = Q.size();
  Helpers h;
  h.space = Q.space;
  for (std::size_t x = 0; x < n; ++x) {
    std::vector<Rational> a0(n), a1(n);
    for (std::size_t z = 0; z < n; ++z) {
      if (z == x) {
        a0[z] = Rational(0);
        a1[z] = Q.at(x, x);
      } else {
        a0[z] = Q.at(x, z) - P.at(x, z);
        a1[z] = P.at(x, z);
        if (a0[z].is_negative()) {
          throw std::invalid_argument("P not weakly dominated by Q at (" + Q.space->label(x) + "," +
                                      Q.space->label(z) + ")");
        }
      }
    }
    Rational beta;
    if (!P.at(x, x).is_zero()) {
      beta = Q.at(x, x) / P.at(x, x);
      if (beta > Rational(1)) {
        throw std::invalid_argument("compute_helpers: Q(x,{x}) exceeds P(x,{x}) at state " +
                                    Q.space->label(x));
      }
    } else {
      beta = Rational(1);
    }
    SubDist alpha0 = SubDist::checked(Q.space, a0);
    const Rational a0_total = alpha0.total();
    Dist mu = a0_total.is_zero()
                  ? Dist::point_mass(Q.space, x)
                  : [&] {
                      std::vector<Rational> m(n);
                      for (std::size_t z = 0; z < n; ++z) m[z] = a0[z] / a0_total;
                      return Dist::checked(Q.space, std::move(m));
                    }();
    h.alpha0.push_back(std::move(alpha0));
    h.alpha1.push_back(SubDist::checked(Q.space, std::move(a1)));
    h.beta.push_back(beta);
    h.mu.push_back(std::move(mu));
  }
  return h;
}

CamBuildResult build_cam(const JointDist& pbar, const Helpers& h, const FiniteKernel& Q,
                         const FiniteKernel& P, std::size_t x, std::size_t y) {
  const std::size_t n = Q.size();
  {
    const auto rep = check_coupling(pbar, P.row(x), P.row(y));
    if (!rep.ok) {
      throw std::invalid_argument("build_cam: input is not a coupling of P(x,.), P(y,.): " +
                                  rep.violations.front());
    }
  }
  const Rational& bx = h.beta[x];
  const Rational& by = h.beta[y];

  // Accepted/accepted component: the transition coupling reweighted by the
  // probability that a stay-put transition came from an accepted
  // self-proposal.
  JointDist phi11 = JointDist::zero(Q.space);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      Rational f(1);
      if (i == x) f *= bx;
      if (j == y) f *= by;
      phi11.w[i][j] = pbar.at(i, j) * f;
    }
  }
  const auto phi11_x = phi11.x_marginal();
  const auto phi11_y = phi11.y_marginal();

  std::vector<Rational> psi10(n), psi01(n);
  for (std::size_t i = 0; i < n; ++i) {
    psi10[i] = h.alpha1[x][i] - phi11_x[i];
    if (psi10[i].is_negative()) {
      throw std::invalid_argument("build_cam: negative accepted/rejected mass at x-destination " +
                                  Q.space->label(i) + " (input is inconsistent with P)");
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    psi01[j] = h.alpha1[y][j] - phi11_y[j];
    if (psi01[j].is_negative()) {
      throw std::invalid_argument("build_cam: negative rejected/accepted mass at y-destination " +
                                  Q.space->label(j) + " (input is inconsistent with P)");
    }
  }
  Rational psi00 = Rational(1) - h.alpha1[x].total() - h.alpha1[y].total() + phi11.total();
  if (psi00.is_negative()) {
    throw std::invalid_argument("build_cam: negative rejected/rejected mass (input is inconsistent with P)");
  }

  // Rejected coordinates are completed by the conditional rejected-proposal
  // laws mu(x,.), mu(y,.) as product measures.
  JointDist phi10 = JointDist::zero(Q.space);
  JointDist phi01 = JointDist::zero(Q.space);
  JointDist phi00 = JointDist::zero(Q.space);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      phi10.w[i][j] = psi10[i] * h.mu[y][j];
      phi01.w[i][j] = h.mu[x][i] * psi01[j];
      phi00.w[i][j] = psi00 * h.mu[x][i] * h.mu[y][j];
    }
  }

  Cam cam{std::move(phi11), std::move(phi10), std::move(phi01), std::move(phi00)};
  JointDist qbar = cam.sum();

  {
    const auto rep = check_coupling(qbar, Q.row(x), Q.row(y));
    if (!rep.ok) {
      throw std::logic_error("build_cam: produced proposal coupling with bad marginals: " +
                             rep.violations.front());
    }
    const auto camrep = verify_cam(cam, qbar, pbar, Q, x, y);
    if (!camrep.ok) {
      throw std::logic_error("build_cam: output fails its defining conditions: " +
                             camrep.violations.front());
    }
  }
  return CamBuildResult{std::move(cam), std::move(qbar)};
}

namespace {

// Enumerates all subsets of `universe` (indices), maintaining an additive
// accumulator via Gray-code single-element flips, and calls `check` on each
// non-empty subset. `check` returns false to abort (a violation was found).
template <typename Flip, typename Check>
bool gray_walk(std::size_t m, Flip flip, Check check) {
  std::vector<bool> in(m, false);
  const std::uint64_t limit = std::uint64_t(1) << m;
  for (std::uint64_t g = 1; g < limit; ++g) {
    // Bit that changes between Gray codes of g-1 and g.
    const std::uint64_t gray_prev = (g - 1) ^ ((g - 1) >> 1);
    const std::uint64_t gray_cur = g ^ (g >> 1);
    std::uint64_t changed = gray_prev ^ gray_cur;
    std::size_t bit = 0;
    while (!(changed & 1)) {
      changed >>= 1;
      ++bit;
    }
    in[bit] = !in[bit];
    flip(bit, in[bit]);
    if (!check(in)) return false;
  }
  return true;
}

}  // namespace

CamReport verify_cam(const Cam& cam, const JointDist& qbar, const JointDist& pbar,
                     const FiniteKernel& Q, std::size_t x, std::size_t y,
                     std::size_t max_exhaustive_n, std::uint64_t sample_seed) {
  CamReport rep;
  const std::size_t n = Q.size();
  const SpacePtr& space = Q.space;

  // Condition 1: the four components add up to the proposal coupling.
  const JointDist total = cam.sum();
  for (std::size_t i = 0; i < n && rep.condition1; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (total.at(i, j) != qbar.at(i, j)) {
        rep.condition1 = false;
        rep.violations.push_back("condition 1: component sum " + total.at(i, j).str() + " != qbar " +
                                 qbar.at(i, j).str() + " at " + cell(space, i, j));
        break;
      }
    }
  }

  // Condition 2, stated on rectangles A_x x A_y with x not in A_x and
  // y not in A_y, split into the four destination cases.
  const auto phi10_x = cam.phi10.x_marginal();
  const auto phi01_y = cam.phi01.y_marginal();

  // Case residuals; each must vanish on every admissible rectangle/subset.
  // d1[i][j]: accepted/accepted transitions to (i, j) off the current pair.
  std::vector<std::vector<Rational>> d1(n, std::vector<Rational>(n, Rational(0)));
  std::vector<Rational> d2(n, Rational(0)), d3(n, Rational(0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != x && j != y) d1[i][j] = cam.phi11.at(i, j) - pbar.at(i, j);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (i != x) d2[i] = cam.phi11.at(i, y) + phi10_x[i] - pbar.at(i, y);
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (j != y) d3[j] = cam.phi11.at(x, j) + phi01_y[j] - pbar.at(x, j);
  }
  const Rational d4 = cam.phi11.at(x, y) + phi10_x[x] + phi01_y[y] + cam.phi00.total() - pbar.at(x, y);

  std::vector<std::size_t> xs, ys;  // admissible destination states
  for (std::size_t i = 0; i < n; ++i) {
    if (i != x) xs.push_back(i);
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (j != y) ys.push_back(j);
  }

  auto fail2 = [&](const std::string& what) {
    rep.condition2 = false;
    rep.violations.push_back(what);
  };

  if (n <= max_exhaustive_n && n <= 62) {
    // Exhaustive rectangle check with incremental subset sums.
    std::vector<Rational> acc_v(n, Rational(0));  // per-column sums of d1 over A_x
    Rational acc2;
    bool ok1 = gray_walk(
        xs.size(),
        [&](std::size_t bit, bool added) {
          const std::size_t i = xs[bit];
          for (std::size_t j : ys) {
            if (added) acc_v[j] += d1[i][j];
            else acc_v[j] -= d1[i][j];
          }
        },
        [&](const std::vector<bool>& in) {
          for (std::size_t j : ys) {
            if (!acc_v[j].is_zero()) {
              std::vector<std::size_t> sel;
              for (std::size_t k = 0; k < xs.size(); ++k) {
                if (in[k]) sel.push_back(xs[k]);
              }
              fail2("condition 2 (accepted/accepted) fails on A_x=" + subset_str(space, sel) +
                    " x A_y={" + space->label(j) + "}");
              return false;
            }
          }
          return true;
        });
    Rational acc3;
    bool ok2 = ok1 && gray_walk(
                          xs.size(),
                          [&](std::size_t bit, bool added) {
                            if (added) acc2 += d2[xs[bit]];
                            else acc2 -= d2[xs[bit]];
                          },
                          [&](const std::vector<bool>& in) {
                            if (!acc2.is_zero()) {
                              std::vector<std::size_t> sel;
                              for (std::size_t k = 0; k < xs.size(); ++k) {
                                if (in[k]) sel.push_back(xs[k]);
                              }
                              fail2("condition 2 (x-accept, y-reject) fails on A_x=" +
                                    subset_str(space, sel));
                              return false;
                            }
                            return true;
                          });
    bool ok3 = ok2 && gray_walk(
                          ys.size(),
                          [&](std::size_t bit, bool added) {
                            if (added) acc3 += d3[ys[bit]];
                            else acc3 -= d3[ys[bit]];
                          },
                          [&](const std::vector<bool>& in) {
                            if (!acc3.is_zero()) {
                              std::vector<std::size_t> sel;
                              for (std::size_t k = 0; k < ys.size(); ++k) {
                                if (in[k]) sel.push_back(ys[k]);
                              }
                              fail2("condition 2 (x-reject, y-accept) fails on A_y=" +
                                    subset_str(space, sel));
                              return false;
                            }
                            return true;
                          });
    (void)ok3;
  } else {
    // Spot-check 1024 seeded random rectangles.
    RngStream rng(sample_seed, 0, 0, Role::kMisc);
    for (int trial = 0; trial < 1024 && rep.condition2; ++trial) {
      Rational s1, s2, s3;
      std::vector<std::size_t> ax, ay;
      for (std::size_t i : xs) {
        if (rng.next_u64() & 1) ax.push_back(i);
      }
      for (std::size_t j : ys) {
        if (rng.next_u64() & 1) ay.push_back(j);
      }
      for (std::size_t i : ax) {
        s2 += d2[i];
        for (std::size_t j : ay) s1 += d1[i][j];
      }
      for (std::size_t j : ay) s3 += d3[j];
      if (!s1.is_zero() || !s2.is_zero() || !s3.is_zero()) {
        fail2("condition 2 fails on sampled rectangle A_x=" + subset_str(space, ax) + " x A_y=" +
              subset_str(space, ay));
      }
    }
  }
  if (!d4.is_zero()) {
    fail2("condition 2 (both rejected) fails: stay-put mass off by " + d4.str());
  }

  // Condition 3: self-proposal mass is accepted mass.
  Rational qx_self, qy_self;
  for (std::size_t j = 0; j < n; ++j) qx_self += cam.phi11.at(x, j) + cam.phi10.at(x, j);
  for (std::size_t i = 0; i < n; ++i) qy_self += cam.phi11.at(i, y) + cam.phi01.at(i, y);
  if (qx_self != Q.at(x, x)) {
    rep.condition3 = false;
    rep.violations.push_back("condition 3: (phi11+phi10)({x} x X) = " + qx_self.str() +
                             " but Q(x,{x}) = " + Q.at(x, x).str());
  }
  if (qy_self != Q.at(y, y)) {
    rep.condition3 = false;
    rep.violations.push_back("condition 3: (phi11+phi01)(X x {y}) = " + qy_self.str() +
                             " but Q(y,{y}) = " + Q.at(y, y).str());
  }

  rep.ok = rep.condition1 && rep.condition2 && rep.condition3;
  return rep;
}

AcceptanceCoupling extract_acceptance_coupling(const Cam& cam, const JointDist& qbar) {
  const std::size_t n = qbar.size();
  AcceptanceCoupling b = AcceptanceCoupling::filled(qbar.space);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const Rational& q = qbar.at(i, j);
      if (q.is_zero()) continue;  // keep the flagged fill value
      b.probs[i][j] = {cam.phi11.at(i, j) / q, cam.phi10.at(i, j) / q, cam.phi01.at(i, j) / q,
                       cam.phi00.at(i, j) / q};
      b.off_support[i][j] = false;
      Rational s;
      for (const auto& p : b.probs[i][j]) s += p;
      if (s != Rational(1)) {
        throw std::logic_error("extract_acceptance_coupling: outcome vector does not sum to 1 at " +
                               cell(qbar.space, i, j));
      }
    }
  }
  return b;
}

JointDist regenerate_pbar(const JointDist& qbar, const AcceptanceCoupling& b, std::size_t x,
                          std::size_t y) {
  const std::size_t n = qbar.size();
  JointDist out = JointDist::zero(qbar.space);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const Rational& m = qbar.at(i, j);
      if (m.is_zero()) continue;
      const auto& p = b.probs[i][j];
      if (p[0].is_negative() || p[1].is_negative() || p[2].is_negative() || p[3].is_negative() ||
          p[0] + p[1] + p[2] + p[3] != Rational(1)) {
        throw std::invalid_argument("regenerate_pbar: outcome vector not normalized at " +
                                    cell(qbar.space, i, j));
      }
      out.w[i][j] += m * p[0];
      out.w[i][y] += m * p[1];
      out.w[x][j] += m * p[2];
      out.w[x][y] += m * p[3];
    }
  }
  return out;
}

MarginalAcceptanceReport check_marginal_acceptance(const JointDist& qbar, const AcceptanceCoupling& b,
                                         const FiniteKernel& Q, const AcceptanceMatrix& a,
                                         std::size_t x, std::size_t y) {
  {
    const auto rep = check_coupling(qbar, Q.row(x), Q.row(y));
    if (!rep.ok) {
      throw std::invalid_argument("check_marginal_acceptance: qbar is not a proposal coupling: " +
                                  rep.violations.front());
    }
  }
  MarginalAcceptanceReport rep;
  const std::size_t n = Q.size();
  for (std::size_t xp = 0; xp < n; ++xp) {
    if (Q.at(x, xp).is_zero()) continue;
    Rational got;
    for (std::size_t yp = 0; yp < n; ++yp) {
      got += qbar.at(xp, yp) * (b.p11(xp, yp) + b.p10(xp, yp));
    }
    const Rational want = a.at(x, xp) * Q.at(x, xp);
    if (got != want) {
      rep.ok = false;
      rep.violations.push_back("x-acceptance at proposal " + Q.space->label(xp) + ": got " + got.str() +
                               ", expected a(x,x')Q(x,x') = " + want.str());
    }
  }
  for (std::size_t yp = 0; yp < n; ++yp) {
    if (Q.at(y, yp).is_zero()) continue;
    Rational got;
    for (std::size_t xp = 0; xp < n; ++xp) {
      got += qbar.at(xp, yp) * (b.p11(xp, yp) + b.p01(xp, yp));
    }
    const Rational want = a.at(y, yp) * Q.at(y, yp);
    if (got != want) {
      rep.ok = false;
      rep.violations.push_back("y-acceptance at proposal " + Q.space->label(yp) + ": got " + got.str() +
                               ", expected a(y,y')Q(y,y') = " + want.str());
    }
  }
  return rep;
}

JointDist sample_frechet_coupling(const Dist& mu, const Dist& nu, std::uint64_t seed, int moves) {
  const std::size_t n = mu.size();
  JointDist gamma = JointDist::product(mu, nu);
  if (n < 2) return gamma;
  RngStream rng(seed, 0, 0, Role::kMisc);
  const int k = moves >= 0 ? moves : static_cast<int>(4 * n * n);
  for (int t = 0; t < k; ++t) {
    const std::size_t i = rng.next_below(n);
    std::size_t i2 = rng.next_below(n - 1);
    if (i2 >= i) ++i2;
    const std::size_t j = rng.next_below(n);
    std::size_t j2 = rng.next_below(n - 1);
    if (j2 >= j) ++j2;
    // gamma += t * (e_i e_j + e_i2 e_j2 - e_i e_j2 - e_i2 e_j); zero row and
    // column sums, so the marginals are untouched.
    const Rational lo = -min(gamma.at(i, j), gamma.at(i2, j2));
    const Rational hi = min(gamma.at(i, j2), gamma.at(i2, j));
    const long grid = 16;
    const Rational step = Rational(static_cast<long>(rng.next_below(grid + 1)), grid);
    const Rational tshift = lo + (hi - lo) * step;
    gamma.at(i, j) += tshift;
    gamma.at(i2, j2) += tshift;
    gamma.at(i, j2) -= tshift;
    gamma.at(i2, j) -= tshift;
  }
  return gamma;
}

JointDist sample_frechet_coupling(const FiniteKernel& P, std::size_t x, std::size_t y,
                                  std::uint64_t seed, int moves) {
  return sample_frechet_coupling(P.row(x), P.row(y), seed, moves);
}

DiscreteSpecialization discrete_specialization(const JointDist& pbar, const FiniteKernel& Q,
                                               const FiniteKernel& P, std::size_t x, std::size_t y) {
  if (!Q.is_non_lazy()) {
    throw std::invalid_argument(
        "discrete_specialization: proposal kernel has self-proposals; use build_cam");
  }
  const std::size_t n = Q.size();
  const Rational rx = P.at(x, x);
  const Rational cy = P.at(y, y);

  auto residual_law = [&](std::size_t z, const Rational& stay) {
    std::vector<Rational> m(n, Rational(0));
    if (stay.is_zero()) {
      m[z] = Rational(1);
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        if (i == z) continue;
        const Rational d = Q.at(z, i) - P.at(z, i);
        if (d.is_negative()) {
          throw std::invalid_argument("P not weakly dominated by Q at (" + Q.space->label(z) + "," +
                                      Q.space->label(i) + ")");
        }
        m[i] = d / stay;
      }
    }
    return Dist::checked(Q.space, std::move(m));
  };
  const Dist mu_x = residual_law(x, rx);
  const Dist mu_y = residual_law(y, cy);

  JointDist m11 = JointDist::zero(Q.space);
  JointDist m10 = JointDist::zero(Q.space);
  JointDist m01 = JointDist::zero(Q.space);
  JointDist m00 = JointDist::zero(Q.space);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != x && j != y) m11.w[i][j] = pbar.at(i, j);
      if (i != x) m10.w[i][j] = pbar.at(i, y) * mu_y[j];
      if (j != y) m01.w[i][j] = mu_x[i] * pbar.at(x, j);
      m00.w[i][j] = pbar.at(x, y) * mu_x[i] * mu_y[j];
    }
  }

  // Cross-validate against the general construction.
  const Helpers h = compute_helpers(Q, P);
  const CamBuildResult general = build_cam(pbar, h, Q, P, x, y);
  if (!(m11 == general.cam.phi11) || !(m10 == general.cam.phi10) || !(m01 == general.cam.phi01) ||
      !(m00 == general.cam.phi00)) {
    throw std::logic_error("discrete_specialization: matrices disagree with the general construction");
  }
  return DiscreteSpecialization{std::move(m11), std::move(m10), std::move(m01), std::move(m00),
                                std::move(mu_x), std::move(mu_y)};
}

Algorithm1Result algorithm1_resampled_qbar(const JointDist& qm, const AcceptanceCoupling& bm,
                                           std::size_t x, std::size_t y) {
  const std::size_t n = qm.size();
  std::array<JointDist, 4> outcome{JointDist::zero(qm.space), JointDist::zero(qm.space),
                                   JointDist::zero(qm.space), JointDist::zero(qm.space)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const Rational& m = qm.at(i, j);
      if (m.is_zero()) continue;
      for (int k = 0; k < 4; ++k) outcome[k].w[i][j] = m * bm.probs[i][j][k];
    }
  }
  // Outcome (1,1) keeps the joint draw. Every outcome with a rejected
  // coordinate redraws that coordinate independently, so its joint law
  // collapses to the product of its conditional marginals.
  std::array<JointDist, 4> resampled{outcome[0], JointDist::zero(qm.space),
                                     JointDist::zero(qm.space), JointDist::zero(qm.space)};
  for (int k = 1; k < 4; ++k) {
    const Rational total = outcome[k].total();
    if (total.is_zero()) continue;  // outcome never happens, no mass to place
    const auto xm = outcome[k].x_marginal();
    const auto ym = outcome[k].y_marginal();
    for (std::size_t i = 0; i < n; ++i) {
      if (xm[i].is_zero()) continue;
      for (std::size_t j = 0; j < n; ++j) {
        resampled[k].w[i][j] = xm[i] * ym[j] / total;
      }
    }
  }
  JointDist qbar = resampled[0] + resampled[1] + resampled[2] + resampled[3];
  AcceptanceCoupling b = AcceptanceCoupling::filled(qm.space);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const Rational& q = qbar.at(i, j);
      if (q.is_zero()) continue;
      for (int k = 0; k < 4; ++k) b.probs[i][j][k] = resampled[k].at(i, j) / q;
      b.off_support[i][j] = false;
    }
  }
  (void)x;
  (void)y;
  return Algorithm1Result{std::move(qbar), std::move(b)};
}

Algorithm1Result algorithm1_resampled_qbar(const JointDist& qm, const AcceptanceCoupling& bm,
                                           const FiniteKernel& Q, const AcceptanceMatrix& a,
                                           std::size_t x, std::size_t y) {
  const auto pre = check_marginal_acceptance(qm, bm, Q, a, x, y);
  if (!pre.ok) {
    throw std::invalid_argument("algorithm1_resampled_qbar: input pair does not generate a valid "
                                "transition coupling: " + pre.violations.front());
  }
  return algorithm1_resampled_qbar(qm, bm, x, y);
}

}  // namespace kercoup
