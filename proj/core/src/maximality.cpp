#include "kercoup/maximality.hpp"

#include <stdexcept>

namespace kercoup {

std::string MaximalityReport::Violation::describe(const SpacePtr& s) const {
  return "condition " + std::to_string(condition) + " at proposal (" + s->label(xp) + "," +
         s->label(yp) + "): outcome mass " + mass.str();
}

std::vector<bool> hahn_set_for_kernels(const FiniteKernel& P, std::size_t x, std::size_t y) {
  return hahn_jordan(P.row(x), P.row(y)).positive_set;
}

MaximalityReport check_max_conditions(const JointDist& qbar, const AcceptanceCoupling& b,
                                      const FiniteKernel& Q, const AcceptanceMatrix& a,
                                      const FiniteKernel& P, std::size_t x, std::size_t y,
                                      bool cross_check) {
  {
    const auto pre = check_marginal_acceptance(qbar, b, Q, a, x, y);
    if (!pre.ok) {
      throw std::invalid_argument("check_max_conditions: marginal acceptance conditions fail: " +
                                  pre.violations.front());
    }
  }
  MaximalityReport rep;
  rep.x = x;
  rep.y = y;
  rep.hahn_set = hahn_set_for_kernels(P, x, y);
  const auto& S = rep.hahn_set;
  const std::size_t n = Q.size();

  auto record = [&](int condition, std::size_t xp, std::size_t yp, const Rational& mass) {
    if (mass.is_zero()) return;
    rep.conditions[condition - 1] = false;
    rep.violations.push_back({condition, xp, yp, mass});
  };

  // Conditions are scoped to the support of the proposal coupling; the
  // flagged fill values off the support never participate.
  for (std::size_t xp = 0; xp < n; ++xp) {
    for (std::size_t yp = 0; yp < n; ++yp) {
      if (qbar.at(xp, yp).is_zero()) continue;
      const auto& p = b.probs[xp][yp];
      if (xp != yp && (!S[xp] || S[yp])) record(3, xp, yp, p[0]);
      if (xp != y && (!S[xp] || S[y])) record(4, xp, yp, p[1]);
      if (yp != x && (!S[x] || S[yp])) record(5, xp, yp, p[2]);
      if (x != y && (!S[x] || S[y])) record(6, xp, yp, p[3]);
    }
  }

  if (cross_check) {
    const JointDist pbar = regenerate_pbar(qbar, b, x, y);
    const auto hahn_verdict = is_maximal_coupling(pbar, P.row(x), P.row(y));
    if (hahn_verdict.maximal != rep.verdict()) {
      throw std::logic_error(
          "check_max_conditions: six-condition verdict disagrees with the Hahn maximality test");
    }
  }
  return rep;
}

KernelCoupling build_maximal_kernel_coupling(const FiniteKernel& P, ResidualStrategy strategy) {
  KernelCoupling out;
  const std::size_t n = P.size();
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t y = 0; y < n; ++y) {
      out.emplace(std::make_pair(x, y), build_maximal_coupling(P.row(x), P.row(y), strategy));
    }
  }
  return out;
}

NonmaxCertificate certify_nonmax_example() {
  // 3-state problem: uniform-over-neighbors proposals, target (2/5, 2/5, 1/5).
  const SpacePtr space = make_space(3);
  const Rational half(1, 2);
  FiniteKernel Q = FiniteKernel::from_weights(
      space, {{Rational(0), half, half}, {half, Rational(0), half}, {Rational(0), Rational(1), Rational(0)}});
  const Dist pi = Dist::checked(space, {Rational(2, 5), Rational(2, 5), Rational(1, 5)});
  MhProblem problem = MhProblem::make(Q, mh_acceptance(pi, Q));

  NonmaxCertificate cert;
  cert.x = 0;
  cert.y = 1;
  cert.maximal_qbar = build_maximal_coupling(problem.Q.row(0), problem.Q.row(1));
  cert.maximal_pbar = build_maximal_coupling(problem.P.row(0), problem.P.row(1));

  // Uniqueness of the maximal proposal coupling: the meet is pinned to the
  // diagonal, and the Jordan residuals are point masses, so the residual
  // coupling polytope is a single point.
  const auto hahn = hahn_jordan(problem.Q.row(0), problem.Q.row(1));
  const bool unique = hahn.upper.support().size() <= 1 || hahn.lower.support().size() <= 1;
  cert.qbar_unique = unique;
  cert.extreme_points = unique ? 1 : 0;

  // The maximal transition coupling demands mass at (2,3) that the maximal
  // proposal coupling cannot supply.
  const std::size_t to_x = space->index_of("2");
  const std::size_t to_y = space->index_of("3");
  cert.required_mass = cert.maximal_pbar.at(to_x, to_y);
  cert.available_mass = cert.maximal_qbar.at(to_x, to_y);

  // Alternative non-maximal proposal coupling with deterministic
  // acceptances: propose (3,1) or (2,3), accept both at (2,3), accept only
  // the y-side at (3,1).
  JointDist qtilde = JointDist::zero(space);
  qtilde.at(space->index_of("3"), space->index_of("1")) = half;
  qtilde.at(space->index_of("2"), space->index_of("3")) = half;
  AcceptanceCoupling btilde = AcceptanceCoupling::filled(space);
  btilde.at(space->index_of("2"), space->index_of("3")) = {Rational(1), Rational(0), Rational(0), Rational(0)};
  btilde.off_support[space->index_of("2")][space->index_of("3")] = false;
  btilde.at(space->index_of("3"), space->index_of("1")) = {Rational(0), Rational(0), Rational(1), Rational(0)};
  btilde.off_support[space->index_of("3")][space->index_of("1")] = false;

  const auto t1 = check_marginal_acceptance(qtilde, btilde, problem.Q, problem.a, cert.x, cert.y);
  const JointDist regen = regenerate_pbar(qtilde, btilde, cert.x, cert.y);
  cert.alternative_regenerates = t1.ok && regen == cert.maximal_pbar;
  cert.alternative_qbar = std::move(qtilde);
  cert.alternative_b = std::move(btilde);
  cert.problem = std::move(problem);

  cert.ok = cert.qbar_unique && cert.required_mass > cert.available_mass &&
            cert.alternative_regenerates &&
            is_maximal_coupling(cert.maximal_pbar, cert.problem.P.row(0), cert.problem.P.row(1)).maximal;
  return cert;
}

}  // namespace kercoup
