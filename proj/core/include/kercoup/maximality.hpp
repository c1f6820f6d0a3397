#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "kercoup/decompose.hpp"
#include "kercoup/kernel.hpp"
#include "kercoup/measure.hpp"

namespace kercoup {

/// Six-condition maximality report for a (proposal coupling, acceptance
/// indicator coupling) pair at a state pair (x, y). Conditions 1-2 are the
/// marginal acceptance conditions (a precondition here); conditions 3-6
/// each forbid one acceptance outcome on a region determined by the Hahn
/// set of P(x,.) - P(y,.), the diagonal, and the current states.
struct MaximalityReport {
  std::size_t x = 0, y = 0;
  std::vector<bool> hahn_set;  // S_xy, ties included
  bool conditions[6] = {true, true, true, true, true, true};
  struct Violation {
    int condition;  // 3..6
    std::size_t xp, yp;
    Rational mass;  // offending outcome probability at that support point
    std::string describe(const SpacePtr& s) const;
  };
  std::vector<Violation> violations;

  bool verdict() const {
    return conditions[0] && conditions[1] && conditions[2] && conditions[3] && conditions[4] &&
           conditions[5];
  }
};

/// Hahn set of P(x,.) - P(y,.); states where the rows tie are included.
std::vector<bool> hahn_set_for_kernels(const FiniteKernel& P, std::size_t x, std::size_t y);

/// Evaluates conditions 3-6 pointwise on the support of qbar. Throws if
/// (qbar, b) fails the marginal acceptance conditions (those are
/// prerequisites, not part of this report). With cross_check enabled the
/// verdict is compared against the Hahn maximality test applied to the
/// regenerated transition coupling; a disagreement throws, since the two
/// tests are provably equivalent.
MaximalityReport check_max_conditions(const JointDist& qbar, const AcceptanceCoupling& b,
                                      const FiniteKernel& Q, const AcceptanceMatrix& a,
                                      const FiniteKernel& P, std::size_t x, std::size_t y,
                                      bool cross_check = true);

/// Pairwise maximal coupling of P with itself: meet mass on the diagonal
/// plus a residual coupling at every ordered state pair.
KernelCoupling build_maximal_kernel_coupling(const FiniteKernel& P,
                                             ResidualStrategy strategy = ResidualStrategy::kNormalizedProduct);

/// Certificate that a maximal transition coupling need not be reachable
/// from a maximal proposal coupling: on a 3-state problem the unique
/// maximal proposal coupling puts zero mass where the maximal transition
/// coupling needs probability 1/2, while a non-maximal proposal coupling
/// with deterministic acceptances regenerates it exactly.
struct NonmaxCertificate {
  MhProblem problem;
  std::size_t x = 0, y = 1;
  JointDist maximal_qbar;
  JointDist maximal_pbar;
  Rational required_mass;   // transition mass the proposal coupling must cover
  Rational available_mass;  // proposal mass available at that destination pair
  bool qbar_unique = false;
  int extreme_points = 0;  // of the maximal proposal-coupling polytope
  JointDist alternative_qbar;
  AcceptanceCoupling alternative_b;
  bool alternative_regenerates = false;
  bool ok = false;
};

NonmaxCertificate certify_nonmax_example();

}  // namespace kercoup
