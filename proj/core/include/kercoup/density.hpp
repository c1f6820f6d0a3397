#pragma once

#include <cstdint>
#include <functional>

#include "kercoup/samplers.hpp"

namespace kercoup {

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;  // absolute error estimate
  long evaluations = 0;
};

/// Adaptive Simpson integration with an absolute error estimate.
QuadratureResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                                    double tol = 1e-10, int max_depth = 48);

/// One-dimensional density pieces for a scalar target and proposal.
double proposal_density_1d(const TargetModel& target, const ProposalSpec& prop, double x, double xp);
double acceptance_rate_1d(const TargetModel& target, const ProposalSpec& prop, double x, double xp);
double transition_density_1d(const TargetModel& target, const ProposalSpec& prop, double x, double xp);

/// r(x) = P(x, {x}) = 1 - integral of q(x,z) a(x,z), by adaptive quadrature.
QuadratureResult rejection_probability_1d(const TargetModel& target, const ProposalSpec& prop,
                                          double x, double tol = 1e-10);

struct McIntegral {
  double value = 0.0;
  double standard_error = 0.0;
  long n = 0;
};

/// Monte Carlo estimate of the rejection probability in any dimension:
/// 1 - E_{x' ~ Q(x,.)} a(x, x').
McIntegral rejection_probability_mc(const TargetModel& target, const ProposalSpec& prop,
                                    const Vec& x, long n, std::uint64_t seed);

/// m(x, x') = q(x,x') (1 - a(x,x')) / r(x); identically zero when r(x) = 0.
double m_function_1d(const TargetModel& target, const ProposalSpec& prop, double x, double xp,
                     double r_x);

enum class PbarDensityKind { kIndependent, kSplit };

struct PbarDensitySpec {
  PbarDensityKind kind = PbarDensityKind::kIndependent;
  double epsilon = 0.0;                      // split only
  std::function<double(double)> nu_density;  // split only
};

/// All the scalar pieces of the two-step density representation of a
/// transition coupling at ((x, y), (x', y')):
///   qbar = p + pbar_y * m_y + m_x * pbar_x + m_x * m_y * rbar
/// with the conditional acceptance probabilities of the two chains.
struct TwoStepDensity {
  double qbar = 0.0;
  double p_accept_x = 0.0, p_accept_y = 0.0;
  double p_joint = 0.0;
  double pbar_y = 0.0, pbar_x = 0.0;
  double rbar = 0.0;
  double m_x = 0.0, m_y = 0.0;
  double r_x = 0.0, r_y = 0.0;
  double r_x_error = 0.0, r_y_error = 0.0;
};

TwoStepDensity two_step_density(const TargetModel& target, const ProposalSpec& prop,
                                const PbarDensitySpec& pbar_spec, double x, double y, double xp,
                                double yp, double quad_tol = 1e-10);

/// Integral of qbar over the plane, term by term (each term is a product of
/// one-dimensional factors). Should be 1 for any valid coupling density.
QuadratureResult two_step_density_normalization(const TargetModel& target, const ProposalSpec& prop,
                                                const PbarDensitySpec& pbar_spec, double x, double y,
                                                double quad_tol = 1e-10);

}  // namespace kercoup
