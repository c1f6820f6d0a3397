#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "kercoup/rational.hpp"
#include "kercoup/state_space.hpp"

namespace kercoup {

/// Probability distribution on a finite state space. Weights are exact
/// rationals, non-negative, summing to exactly 1.
struct Dist {
  SpacePtr space;
  std::vector<Rational> w;

  static Dist checked(SpacePtr space, std::vector<Rational> w);
  static Dist point_mass(SpacePtr space, std::size_t at);
  static Dist uniform(SpacePtr space);

  const Rational& operator[](std::size_t i) const { return w[i]; }
  std::size_t size() const { return w.size(); }
  Rational total() const;
};

/// Sub-probability: non-negative weights with total at most 1.
struct SubDist {
  SpacePtr space;
  std::vector<Rational> w;

  static SubDist checked(SpacePtr space, std::vector<Rational> w);
  static SubDist zero(SpacePtr space);

  const Rational& operator[](std::size_t i) const { return w[i]; }
  std::size_t size() const { return w.size(); }
  Rational total() const;
  std::vector<std::size_t> support() const;

  /// Throws unless the total is exactly 1.
  Dist as_dist() const;
};

/// Joint (sub-)probability measure over destination pairs. Entry (i, j)
/// carries the mass of (x' = state i, y' = state j): the FIRST index is
/// always the x-chain destination, the second the y-chain destination.
struct JointDist {
  SpacePtr space;
  std::vector<std::vector<Rational>> w;

  static JointDist zero(SpacePtr space);
  static JointDist checked(SpacePtr space, std::vector<std::vector<Rational>> w,
                           bool require_probability = false);
  /// Independence coupling mu (x) tensor nu (y).
  static JointDist product(const Dist& mu, const Dist& nu);
  /// All of mu's mass pushed onto the diagonal.
  static JointDist diagonal(const Dist& mu);

  const Rational& at(std::size_t i, std::size_t j) const { return w[i][j]; }
  Rational& at(std::size_t i, std::size_t j) { return w[i][j]; }
  std::size_t size() const { return w.size(); }

  Rational total() const;
  Rational diagonal_mass() const;
  /// Marginal of the x-chain destination: sum over j of entry (i, j).
  std::vector<Rational> x_marginal() const;
  std::vector<Rational> y_marginal() const;

  JointDist operator+(const JointDist& o) const;
  bool operator==(const JointDist& o) const { return w == o.w; }
};

/// Hahn/Jordan decomposition data for mu - nu. `positive_set` is the set S
/// on which mu >= nu entrywise (ties included); `upper` and `lower` are the
/// Jordan parts, `meet` = mu /\ nu.
struct HahnDecomposition {
  std::vector<bool> positive_set;
  SubDist upper;
  SubDist lower;
  SubDist meet;

  std::vector<std::size_t> positive_indices() const;
};

struct CouplingReport {
  bool ok = true;
  std::vector<std::string> violations;
};

struct MaximalityVerdict {
  bool maximal = false;
  std::vector<bool> witness_set;       // Hahn set used for the test
  std::vector<std::string> violations; // off-support mass found, if any
  Rational diagonal;                   // gamma(Delta)
  Rational bound;                      // 1 - TV(mu, nu)
};

enum class ResidualStrategy {
  kNormalizedProduct,  // upper (x) lower / TV
  kGreedy,             // index-order transport of the residuals
};

/// Total variation distance, computed as half the L1 distance of the
/// weight vectors. Equals sup_A |mu(A) - nu(A)| on finite spaces.
Rational tv_distance(const Dist& mu, const Dist& nu);

/// Hahn/Jordan decomposition of mu - nu. States with mu_i = nu_i are
/// placed in the positive set, so the witness set is canonical.
HahnDecomposition hahn_jordan(const Dist& mu, const Dist& nu);

/// Checks gamma's marginals against mu (x side) and nu (y side) exactly.
CouplingReport check_coupling(const JointDist& gamma, const Dist& mu, const Dist& nu);

/// Hahn maximality test: gamma is maximal iff it has no off-diagonal mass
/// on (S^c x X) or (X x S) for the Hahn set S of mu - nu; equivalently
/// gamma(Delta) = 1 - TV(mu, nu). Throws if gamma is not a coupling.
MaximalityVerdict is_maximal_coupling(const JointDist& gamma, const Dist& mu, const Dist& nu);

/// Meet mass on the diagonal plus a residual coupling of the Jordan parts.
/// The output always passes is_maximal_coupling.
JointDist build_maximal_coupling(const Dist& mu, const Dist& nu,
                                 ResidualStrategy strategy = ResidualStrategy::kNormalizedProduct);

}  // namespace kercoup
