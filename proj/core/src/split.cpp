#include "kercoup/split.hpp"

#include <cmath>
#include <stdexcept>

namespace kercoup {

namespace {

std::size_t invert_cdf_rational(const std::vector<Rational>& w, double u) {
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    acc += w[i].to_double();
    if (u < acc) return i;
  }
  return w.empty() ? 0 : w.size() - 1;
}

}  // namespace

void validate_minorization(const FiniteKernel& P, const SplitSpecFinite& spec) {
  if (spec.epsilon <= Rational(0) || spec.epsilon > Rational(1)) {
    throw std::invalid_argument("split: epsilon must lie in (0, 1]");
  }
  if (!same_space(P.space, spec.nu.space) || spec.small_set.size() != P.size()) {
    throw std::invalid_argument("split: mismatched spaces");
  }
  for (std::size_t x = 0; x < P.size(); ++x) {
    if (!spec.small_set[x]) continue;
    for (std::size_t z = 0; z < P.size(); ++z) {
      if (P.at(x, z) < spec.epsilon * spec.nu[z]) {
        throw std::invalid_argument("split: minorization fails at x=" + P.space->label(x) +
                                    ", state " + P.space->label(z) + ": P = " + P.at(x, z).str() +
                                    " < eps*nu = " + (spec.epsilon * spec.nu[z]).str());
      }
    }
  }
}

Dist split_residual(const FiniteKernel& P, const SplitSpecFinite& spec, std::size_t x) {
  if (spec.epsilon == Rational(1)) {
    throw std::invalid_argument("split_residual: undefined at epsilon = 1");
  }
  const Rational denom = Rational(1) - spec.epsilon;
  std::vector<Rational> w(P.size());
  for (std::size_t z = 0; z < P.size(); ++z) {
    const Rational r = P.at(x, z) - spec.epsilon * spec.nu[z];
    if (r.is_negative()) {
      throw std::invalid_argument("split_residual: negative residual at x=" + P.space->label(x) +
                                  ", state " + P.space->label(z));
    }
    w[z] = r / denom;
  }
  return Dist::checked(P.space, std::move(w));
}

JointDist split_pbar(const FiniteKernel& P, const SplitSpecFinite& spec, std::size_t x,
                     std::size_t y) {
  validate_minorization(P, spec);
  if (!spec.small_set[x] || !spec.small_set[y]) {
    throw std::invalid_argument("split_pbar: both states must lie in the small set");
  }
  JointDist pbar = JointDist::zero(P.space);
  for (std::size_t z = 0; z < P.size(); ++z) pbar.w[z][z] = spec.epsilon * spec.nu[z];
  if (spec.epsilon < Rational(1)) {
    const Dist rx = split_residual(P, spec, x);
    const Dist ry = split_residual(P, spec, y);
    const Rational tails = Rational(1) - spec.epsilon;
    for (std::size_t i = 0; i < P.size(); ++i) {
      for (std::size_t j = 0; j < P.size(); ++j) {
        pbar.w[i][j] += tails * rx[i] * ry[j];
      }
    }
  }
  return pbar;
}

FiniteSplitStep split_coupling_step(const FiniteKernel& P, const SplitSpecFinite& spec,
                                    std::size_t x, std::size_t y, std::uint64_t seed,
                                    std::uint64_t replicate, std::uint64_t step) {
  FiniteSplitStep rec;
  rec.in_small_set = spec.small_set[x] && spec.small_set[y];

  if (x == y) {
    // Met chains move together under the same marginal draw.
    RngStream rng(seed, replicate, step, Role::kProposalX);
    rec.x_next = rec.y_next = invert_cdf_rational(P.row(x).w, rng.next_uniform());
    rec.met = true;
    return rec;
  }

  if (rec.in_small_set) {
    RngStream coin(seed, replicate, step, Role::kCoin);
    if (coin.next_uniform() < spec.epsilon.to_double()) {
      RngStream nu_rng(seed, replicate, step, Role::kNuDraw);
      rec.regenerated = true;
      rec.x_next = rec.y_next = invert_cdf_rational(spec.nu.w, nu_rng.next_uniform());
    } else {
      const Dist rx = split_residual(P, spec, x);
      const Dist ry = split_residual(P, spec, y);
      RngStream rng_x(seed, replicate, step, Role::kResidualX);
      RngStream rng_y(seed, replicate, step, Role::kResidualY);
      rec.x_next = invert_cdf_rational(rx.w, rng_x.next_uniform());
      rec.y_next = invert_cdf_rational(ry.w, rng_y.next_uniform());
    }
  } else {
    RngStream rng_x(seed, replicate, step, Role::kProposalX);
    if (spec.outside == OutsideSmallSet::kIndependent) {
      RngStream rng_y(seed, replicate, step, Role::kProposalY);
      rec.x_next = invert_cdf_rational(P.row(x).w, rng_x.next_uniform());
      rec.y_next = invert_cdf_rational(P.row(y).w, rng_y.next_uniform());
    } else {
      const double u = rng_x.next_uniform();
      rec.x_next = invert_cdf_rational(P.row(x).w, u);
      rec.y_next = invert_cdf_rational(P.row(y).w, u);
    }
  }
  rec.met = rec.x_next == rec.y_next;
  return rec;
}

SplitOneStepStats split_one_step_stats(const FiniteKernel& P, const SplitSpecFinite& spec,
                                       std::size_t x, std::size_t y, long n, std::uint64_t seed) {
  SplitOneStepStats s;
  s.x_marginal.assign(P.size(), 0.0);
  s.y_marginal.assign(P.size(), 0.0);
  long met = 0, regen = 0;
  for (long i = 0; i < n; ++i) {
    const auto rec = split_coupling_step(P, spec, x, y, seed, static_cast<std::uint64_t>(i), 1);
    if (rec.met) ++met;
    if (rec.regenerated) ++regen;
    s.x_marginal[rec.x_next] += 1.0;
    s.y_marginal[rec.y_next] += 1.0;
  }
  for (auto& v : s.x_marginal) v /= static_cast<double>(n);
  for (auto& v : s.y_marginal) v /= static_cast<double>(n);
  s.meet_freq = static_cast<double>(met) / static_cast<double>(n);
  s.regen_freq = static_cast<double>(regen) / static_cast<double>(n);
  return s;
}

SplitTwoStepResult split_two_step_representation(const SplitSpecFinite& spec, const FiniteKernel& Q,
                                                 const AcceptanceMatrix& a, const FiniteKernel& P,
                                                 std::size_t x, std::size_t y) {
  if (x == y) {
    throw std::invalid_argument("split_two_step_representation: needs distinct current states");
  }
  if (spec.epsilon == Rational(1)) {
    throw std::invalid_argument("split_two_step_representation: epsilon = 1 leaves no residual law");
  }
  const JointDist pbar = split_pbar(P, spec, x, y);
  {
    const auto rep = check_coupling(pbar, P.row(x), P.row(y));
    if (!rep.ok) {
      throw std::logic_error("split_two_step_representation: split law is not a coupling: " +
                             rep.violations.front());
    }
  }

  // The specialization for non-lazy proposals applies verbatim; it also
  // cross-validates against the general construction internally.
  const DiscreteSpecialization ds = discrete_specialization(pbar, Q, P, x, y);
  Cam cam{ds.m11, ds.m10, ds.m01, ds.m00};
  JointDist qbar = cam.sum();
  AcceptanceCoupling accept = extract_acceptance_coupling(cam, qbar);

  // Closed-form identity on fully off-diagonal support points: accepting
  // both proposals reproduces the residual-product density.
  const Rational denom = Rational(1) - spec.epsilon;
  for (std::size_t i = 0; i < P.size(); ++i) {
    for (std::size_t j = 0; j < P.size(); ++j) {
      if (i == x || j == y || i == j) continue;
      if (qbar.at(i, j).is_zero()) continue;
      const Rational lhs = qbar.at(i, j) * accept.p11(i, j);
      const Rational rhs =
          (P.at(x, i) - spec.epsilon * spec.nu[i]) * (P.at(y, j) - spec.epsilon * spec.nu[j]) / denom;
      if (lhs != rhs) {
        throw std::logic_error("split_two_step_representation: qbar*p11 != residual product at (" +
                               P.space->label(i) + "," + P.space->label(j) + ")");
      }
    }
  }

  const auto t1 = check_marginal_acceptance(qbar, accept, Q, a, x, y);
  if (!t1.ok) {
    throw std::logic_error("split_two_step_representation: marginal acceptance identity fails: " +
                           t1.violations.front());
  }
  return SplitTwoStepResult{pbar, std::move(cam), std::move(qbar), std::move(accept)};
}

// ---------- continuous scalar state ----------

ScalarSplitKernel mixture_split_kernel(double epsilon, double tau) {
  if (epsilon <= 0.0 || epsilon > 1.0) throw std::invalid_argument("mixture_split_kernel: bad epsilon");
  ScalarSplitKernel k;
  k.epsilon = epsilon;
  k.sample_nu = [](RngStream& rng) { return rng.next_normal(); };
  k.sample_residual = [tau](RngStream& rng, double x) { return x + tau * rng.next_normal(); };
  k.sample_p = [epsilon, tau](RngStream& rng, double x) {
    if (rng.next_uniform() < epsilon) return rng.next_normal();
    return x + tau * rng.next_normal();
  };
  k.in_small_set = [](double) { return true; };
  const double inv_sqrt2pi = 0.3989422804014327;
  k.nu_density = [inv_sqrt2pi](double z) { return inv_sqrt2pi * std::exp(-0.5 * z * z); };
  k.p_density = [epsilon, tau, inv_sqrt2pi](double x, double z) {
    const double d = (z - x) / tau;
    return epsilon * inv_sqrt2pi * std::exp(-0.5 * z * z) +
           (1.0 - epsilon) * inv_sqrt2pi / tau * std::exp(-0.5 * d * d);
  };
  return k;
}

ScalarSplitStep split_coupling_step(const ScalarSplitKernel& kernel, double x, double y,
                                    std::uint64_t seed, std::uint64_t replicate,
                                    std::uint64_t step) {
  ScalarSplitStep rec;
  rec.in_small_set = kernel.in_small_set(x) && kernel.in_small_set(y);

  if (x == y) {
    RngStream rng(seed, replicate, step, Role::kProposalX);
    rec.x_next = rec.y_next = kernel.sample_p(rng, x);
    rec.met = true;
    return rec;
  }
  if (rec.in_small_set) {
    RngStream coin(seed, replicate, step, Role::kCoin);
    if (coin.next_uniform() < kernel.epsilon) {
      RngStream nu_rng(seed, replicate, step, Role::kNuDraw);
      rec.regenerated = true;
      rec.x_next = rec.y_next = kernel.sample_nu(nu_rng);
    } else {
      RngStream rng_x(seed, replicate, step, Role::kResidualX);
      RngStream rng_y(seed, replicate, step, Role::kResidualY);
      rec.x_next = kernel.sample_residual(rng_x, x);
      rec.y_next = kernel.sample_residual(rng_y, y);
    }
  } else {
    RngStream rng_x(seed, replicate, step, Role::kProposalX);
    RngStream rng_y(seed, replicate, step, Role::kProposalY);
    rec.x_next = kernel.sample_p(rng_x, x);
    rec.y_next = kernel.sample_p(rng_y, y);
  }
  rec.met = rec.x_next == rec.y_next;
  return rec;
}

bool check_minorization_grid(const ScalarSplitKernel& kernel, const std::vector<double>& xs,
                             const std::vector<double>& zs, double slack) {
  for (double x : xs) {
    if (!kernel.in_small_set(x)) continue;
    for (double z : zs) {
      if (kernel.p_density(x, z) + slack < kernel.epsilon * kernel.nu_density(z)) return false;
    }
  }
  return true;
}

}  // namespace kercoup
