#pragma once

#include <map>
#include <utility>
#include <vector>

#include "kercoup/measure.hpp"

namespace kercoup {

/// Row-stochastic transition kernel: row i is the one-step distribution
/// out of state i.
struct FiniteKernel {
  SpacePtr space;
  std::vector<Dist> rows;

  static FiniteKernel checked(SpacePtr space, std::vector<Dist> rows);
  static FiniteKernel from_weights(SpacePtr space, std::vector<std::vector<Rational>> rows);

  const Dist& row(std::size_t i) const { return rows.at(i); }
  const Rational& at(std::size_t i, std::size_t j) const { return rows[i].w[j]; }
  std::size_t size() const { return rows.size(); }

  /// True when no state proposes itself: row i puts zero mass on state i.
  bool is_non_lazy() const;
};

/// Acceptance rate function a(x, x') with a(x, x) = 1. Entries at pairs the
/// proposal can never produce (q(x, x') = 0) are filled with 1 and flagged
/// unreachable; any value there generates the same transition kernel.
struct AcceptanceMatrix {
  SpacePtr space;
  std::vector<std::vector<Rational>> a;
  std::vector<std::vector<bool>> unreachable;

  static AcceptanceMatrix checked(SpacePtr space, std::vector<std::vector<Rational>> a);
  static AcceptanceMatrix all_accept(SpacePtr space);

  const Rational& at(std::size_t x, std::size_t xp) const { return a[x][xp]; }
  std::size_t size() const { return a.size(); }
};

/// Proposal kernel, acceptance rates and the transition kernel they
/// generate, kept together so the three never drift apart.
struct MhProblem {
  FiniteKernel Q;
  AcceptanceMatrix a;
  FiniteKernel P;

  static MhProblem make(FiniteKernel Q, AcceptanceMatrix a);
};

/// Metropolis-Hastings rates: a(x,x') = min(1, pi(x')q(x',x) / (pi(x)q(x,x'))),
/// diagonal forced to 1. Throws if some pi(x) = 0, naming the state.
AcceptanceMatrix mh_acceptance(const Dist& pi, const FiniteKernel& Q);

/// Barker rates: a(x,x') = pi(x')q(x',x) / (pi(x')q(x',x) + pi(x)q(x,x'))
/// off the diagonal; the diagonal is forced to 1, which leaves the generated
/// kernel unchanged because an accepted self-proposal goes nowhere.
AcceptanceMatrix barker_acceptance(const Dist& pi, const FiniteKernel& Q);

/// P(x,x') = q(x,x')a(x,x') off-diagonal; the rejected mass piles onto x.
/// Rows sum to exactly 1.
FiniteKernel generate_P(const FiniteKernel& Q, const AcceptanceMatrix& a);

/// A kernel coupling as a per-pair table of joint destination measures.
using KernelCoupling = std::map<std::pair<std::size_t, std::size_t>, JointDist>;

struct JointKernelReport {
  bool ok = true;
  std::vector<std::string> violations;
};

/// Checks each supplied pair's joint measure against the marginal rows of P.
/// With require_all_pairs, every ordered pair must be present.
JointKernelReport check_joint_kernel_coupling(const KernelCoupling& pbar, const FiniteKernel& P,
                                              bool require_all_pairs = false);

}  // namespace kercoup
