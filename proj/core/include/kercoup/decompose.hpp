#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kercoup/kernel.hpp"
#include "kercoup/measure.hpp"

namespace kercoup {

/// Per-state helper quantities tying a proposal kernel Q to the transition
/// kernel P it generates:
///   alpha0(x,A) = Q(x, A\{x}) - P(x, A\{x})   rejected-proposal mass
///   alpha1(x,A) = Q(x, A cap {x}) + P(x, A\{x})  accepted-proposal mass
///   beta(x)     = Q(x,{x}) / P(x,{x})  (1 when P(x,{x}) = 0)
///   mu(x,.)     = alpha0 normalized (point mass at x when alpha0 vanishes)
/// They depend on the marginal kernels only.
struct Helpers {
  SpacePtr space;
  std::vector<SubDist> alpha0;
  std::vector<SubDist> alpha1;
  std::vector<Rational> beta;
  std::vector<Dist> mu;
};

/// Coupled acceptance mechanism: four joint sub-probability measures
/// splitting proposal-coupling mass by which of the two proposals gets
/// accepted. Entry order matches the acceptance outcome (b_x, b_y).
struct Cam {
  JointDist phi11;
  JointDist phi10;
  JointDist phi01;
  JointDist phi00;

  JointDist sum() const { return phi11 + phi10 + phi01 + phi00; }
};

/// Acceptance indicator coupling: for each proposal pair (x', y'), the
/// probability 4-vector over acceptance outcomes (11, 10, 01, 00).
/// Entries where the proposal coupling has no mass are unconstrained; they
/// are filled with (1,0,0,0) and flagged so tests can skip them.
struct AcceptanceCoupling {
  SpacePtr space;
  std::vector<std::vector<std::array<Rational, 4>>> probs;
  std::vector<std::vector<bool>> off_support;

  static AcceptanceCoupling filled(SpacePtr space);

  const std::array<Rational, 4>& at(std::size_t xp, std::size_t yp) const { return probs[xp][yp]; }
  std::array<Rational, 4>& at(std::size_t xp, std::size_t yp) { return probs[xp][yp]; }

  const Rational& p11(std::size_t i, std::size_t j) const { return probs[i][j][0]; }
  const Rational& p10(std::size_t i, std::size_t j) const { return probs[i][j][1]; }
  const Rational& p01(std::size_t i, std::size_t j) const { return probs[i][j][2]; }
  const Rational& p00(std::size_t i, std::size_t j) const { return probs[i][j][3]; }
};

struct CamReport {
  bool ok = true;
  bool condition1 = true;  // components add up to the proposal coupling
  bool condition2 = true;  // pushforward agrees with the transition coupling
  bool condition3 = true;  // self-proposals are always accepted
  std::vector<std::string> violations;
};

struct MarginalAcceptanceReport {
  bool ok = true;
  std::vector<std::string> violations;
};

struct CamBuildResult {
  Cam cam;
  JointDist qbar;
};

/// Computes alpha0, alpha1, beta, mu from the marginal kernels. Throws if P
/// is not weakly dominated by Q off the diagonal (then no acceptance
/// function can generate P from Q), naming the offending pair.
Helpers compute_helpers(const FiniteKernel& Q, const FiniteKernel& P);

/// The constructive decomposition: from a transition coupling at (x, y),
/// produce a coupled acceptance mechanism and the proposal coupling it
/// induces. Post-checks (marginals of qbar, verify_cam) run on every call
/// and throw on failure.
CamBuildResult build_cam(const JointDist& pbar, const Helpers& h, const FiniteKernel& Q,
                         const FiniteKernel& P, std::size_t x, std::size_t y);

/// Checks the defining conditions of a coupled acceptance mechanism
/// exactly. Condition 2 is verified on all rectangles A_x x A_y with
/// x not in A_x, y not in A_y: exhaustively (incremental subset sums) for
/// n <= max_exhaustive_n, on 1024 seeded random subset pairs above that.
CamReport verify_cam(const Cam& cam, const JointDist& qbar, const JointDist& pbar,
                     const FiniteKernel& Q, std::size_t x, std::size_t y,
                     std::size_t max_exhaustive_n = 12, std::uint64_t sample_seed = 20240901);

/// Pointwise ratios phi_ij / qbar on the support of qbar.
AcceptanceCoupling extract_acceptance_coupling(const Cam& cam, const JointDist& qbar);

/// Pushes (qbar, B) forward through the accept/reject map:
/// mass at (x',y') goes to (x',y'), (x',y), (x,y'), (x,y) according to the
/// outcome probabilities.
JointDist regenerate_pbar(const JointDist& qbar, const AcceptanceCoupling& b, std::size_t x,
                          std::size_t y);

/// Marginal acceptance conditions: for every proposable x', the qbar-average
/// of P(b_x = 1) equals a(x,x'), and symmetrically in y'. These are exactly
/// the conditions under which (qbar, B) generates an element of the
/// transition kernel's coupling class.
MarginalAcceptanceReport check_marginal_acceptance(const JointDist& qbar, const AcceptanceCoupling& b,
                                         const FiniteKernel& Q, const AcceptanceMatrix& a,
                                         std::size_t x, std::size_t y);

/// Randomized exact element of the coupling class of (mu, nu): the
/// independence coupling plus random zero-marginal perturbations, scaled so
/// all entries stay non-negative. Endpoints are included so boundary
/// couplings appear.
JointDist sample_frechet_coupling(const Dist& mu, const Dist& nu, std::uint64_t seed,
                                  int moves = -1);
JointDist sample_frechet_coupling(const FiniteKernel& P, std::size_t x, std::size_t y,
                                  std::uint64_t seed, int moves = -1);

/// Matrix specialization of the decomposition for non-lazy proposals
/// (Q(x,{x}) = 0 for all x). Cross-validated entrywise against build_cam on
/// every call; a mismatch throws.
struct DiscreteSpecialization {
  JointDist m11, m10, m01, m00;
  Dist mu_x, mu_y;
};
DiscreteSpecialization discrete_specialization(const JointDist& pbar, const FiniteKernel& Q,
                                               const FiniteKernel& P, std::size_t x, std::size_t y);

/// Closed form of the resample-on-rejection construction: conditional on
/// each acceptance outcome, accepted coordinates keep their joint law and
/// rejected coordinates are redrawn independently from the outcome's
/// conditional marginals. Regenerating from the output reproduces the same
/// transition coupling as the input pair.
struct Algorithm1Result {
  JointDist qbar;
  AcceptanceCoupling b;
};
Algorithm1Result algorithm1_resampled_qbar(const JointDist& qm, const AcceptanceCoupling& bm,
                                           std::size_t x, std::size_t y);

/// Same, but first checks that (qm, bm) satisfies the marginal acceptance
/// conditions for (Q, a).
Algorithm1Result algorithm1_resampled_qbar(const JointDist& qm, const AcceptanceCoupling& bm,
                                           const FiniteKernel& Q, const AcceptanceMatrix& a,
                                           std::size_t x, std::size_t y);

}  // namespace kercoup
