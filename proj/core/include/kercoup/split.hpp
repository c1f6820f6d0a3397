#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "kercoup/decompose.hpp"
#include "kercoup/kernel.hpp"
#include "kercoup/rng.hpp"

namespace kercoup {

/// Behavior when at least one chain sits outside the small set: the split
/// branch is only prescribed on the small set.
enum class OutsideSmallSet { kIndependent, kCrn };

/// Minorization data for a finite kernel: P(x, .) >= epsilon * nu on the
/// small set.
struct SplitSpecFinite {
  Rational epsilon;
  Dist nu;
  std::vector<bool> small_set;
  OutsideSmallSet outside = OutsideSmallSet::kIndependent;
};

/// Exhaustive exact check of the minorization on the small set; throws
/// naming the state pair that violates it.
void validate_minorization(const FiniteKernel& P, const SplitSpecFinite& spec);

/// Residual law (P(x,.) - epsilon*nu) / (1 - epsilon). Requires epsilon < 1.
Dist split_residual(const FiniteKernel& P, const SplitSpecFinite& spec, std::size_t x);

/// Exact one-step law of the split coupling from (x, y) in the small set:
/// shared nu draw on the diagonal with probability epsilon, independent
/// residual draws otherwise (their coincidences stay in the law).
JointDist split_pbar(const FiniteKernel& P, const SplitSpecFinite& spec, std::size_t x,
                     std::size_t y);

struct FiniteSplitStep {
  std::size_t x_next = 0, y_next = 0;
  bool regenerated = false;   // shared nu draw happened
  bool in_small_set = false;  // both chains were in the small set
  bool met = false;
};

FiniteSplitStep split_coupling_step(const FiniteKernel& P, const SplitSpecFinite& spec,
                                    std::size_t x, std::size_t y, std::uint64_t seed,
                                    std::uint64_t replicate, std::uint64_t step);

struct SplitOneStepStats {
  double meet_freq = 0.0;
  double regen_freq = 0.0;
  std::vector<double> x_marginal;
  std::vector<double> y_marginal;
};

SplitOneStepStats split_one_step_stats(const FiniteKernel& P, const SplitSpecFinite& spec,
                                       std::size_t x, std::size_t y, long n, std::uint64_t seed);

/// Two-step representation of the split coupling on a finite space with a
/// non-lazy proposal: builds the exact coupled acceptance mechanism and the
/// outcome-probability tables, checks them against the transition coupling,
/// and verifies the closed-form identity
///   qbar * p11 = (P(x,x') - eps*nu(x'))(P(y,y') - eps*nu(y')) / (1 - eps)
/// at every fully off-diagonal support point.
struct SplitTwoStepResult {
  JointDist pbar;
  Cam cam;
  JointDist qbar;
  AcceptanceCoupling accept;
};

SplitTwoStepResult split_two_step_representation(const SplitSpecFinite& spec, const FiniteKernel& Q,
                                                 const AcceptanceMatrix& a, const FiniteKernel& P,
                                                 std::size_t x, std::size_t y);

// ---------- continuous scalar state ----------

/// Continuous split kernel with user-supplied samplers and densities.
struct ScalarSplitKernel {
  double epsilon = 0.0;
  std::function<double(RngStream&)> sample_nu;
  std::function<double(RngStream&, double)> sample_residual;  // residual given current point
  std::function<double(RngStream&, double)> sample_p;         // full marginal step
  std::function<bool(double)> in_small_set;
  std::function<double(double)> nu_density;
  std::function<double(double, double)> p_density;  // p(x, z)
};

/// P(x, .) = epsilon * N(0,1) + (1 - epsilon) * N(x, tau^2): the minorization
/// holds everywhere by construction and the residual is exactly N(x, tau^2).
ScalarSplitKernel mixture_split_kernel(double epsilon, double tau);

struct ScalarSplitStep {
  double x_next = 0, y_next = 0;
  bool regenerated = false;
  bool in_small_set = false;
  bool met = false;
};

ScalarSplitStep split_coupling_step(const ScalarSplitKernel& kernel, double x, double y,
                                    std::uint64_t seed, std::uint64_t replicate,
                                    std::uint64_t step);

/// Density-grid verification of p(x, z) >= epsilon * nu(z).
bool check_minorization_grid(const ScalarSplitKernel& kernel, const std::vector<double>& xs,
                             const std::vector<double>& zs, double slack = 1e-12);

}  // namespace kercoup
