#pragma once

#include <cstdint>
#include <vector>

#include "kercoup/decompose.hpp"
#include "kercoup/kernel.hpp"
#include "kercoup/rng.hpp"
#include "kercoup/target.hpp"

namespace kercoup {

using Vec = std::vector<double>;

enum class ProposalKind { kRwm, kMala };

struct ProposalSpec {
  ProposalKind kind = ProposalKind::kRwm;
  double scale = 1.0;  // RWM innovation sd; MALA time step
};

enum class ProposalCouplingKind { kIndependent, kCrn, kReflection, kMaximal };
enum class AcceptanceCouplingKind { kCommonUniform, kIndependent };

struct CouplingSpec {
  ProposalCouplingKind proposal = ProposalCouplingKind::kCrn;
  AcceptanceCouplingKind acceptance = AcceptanceCouplingKind::kCommonUniform;
  bool faithful = true;
};

struct MhStepRecord {
  Vec proposal;
  bool accepted = false;
  bool flagged_nonfinite = false;  // proposal landed outside the target's support
  Vec next;
};

/// One marginal step: propose from the spec's kernel, accept at the MH rate
/// (log-domain comparison). A non-finite log-density at the proposal counts
/// as acceptance rate zero and is flagged.
MhStepRecord mh_step(const TargetModel& target, const ProposalSpec& prop, const Vec& state,
                     std::uint64_t seed, std::uint64_t replicate, std::uint64_t step);

struct CoupledStepRecord {
  Vec x_prop, y_prop;
  bool b_x = false, b_y = false;
  Vec x_next, y_next;
  bool proposals_equal = false;
  bool met = false;  // exact coordinate equality after the step
};

/// One coupled step: a coupled proposal draw followed by a coupled
/// acceptance draw. Reflection requires the spherically symmetric
/// random-walk proposal and is rejected for drifted (MALA) proposals.
CoupledStepRecord coupled_step(const TargetModel& target, const ProposalSpec& prop,
                               const CouplingSpec& spec, const Vec& x, const Vec& y,
                               std::uint64_t seed, std::uint64_t replicate, std::uint64_t step,
                               long max_loop = 1000000);

struct CoupledTrajectory {
  long meeting_time = -1;  // -1: not met within the horizon; 0: equal starts
  std::vector<CoupledStepRecord> steps;  // populated only when requested
};

CoupledTrajectory run_coupled_trajectory(const TargetModel& target, const ProposalSpec& prop,
                                         const CouplingSpec& spec, Vec x0, Vec y0, long horizon,
                                         std::uint64_t seed, std::uint64_t replicate,
                                         bool keep_steps = false);

struct MeetingSummary {
  long horizon = 0;
  int replicates = 0;
  std::vector<long> meeting_times;  // per replicate; -1 when unmet
  double fraction_met = 0.0;
  double mean_meeting_time = 0.0;    // among met replicates
  double median_meeting_time = 0.0;  // among met replicates
  std::vector<double> survival;            // P(meeting time > t), t = 0..horizon
  std::vector<double> one_step_meet_freq;  // index t: met at t / alive entering t
};

MeetingSummary summarize_meetings(std::vector<long> times, long horizon);

/// Replicates run in parallel on independent keyed streams; the result is
/// byte-identical regardless of thread count.
MeetingSummary simulate_meetings(const TargetModel& target, const ProposalSpec& prop,
                                 const CouplingSpec& spec, const Vec& x0, const Vec& y0,
                                 long horizon, int replicates, std::uint64_t seed, int threads = 0);

// ---------- finite state spaces ----------

enum class FiniteCouplingKind {
  kMaximalKernel,      // sample the pairwise maximal coupling of P directly
  kIndependentKernel,  // two independent P draws
  kTwoStep,            // proposal coupling over Q, then coupled acceptance
};

enum class FiniteProposalCoupling { kIndependent, kCrn, kMaximal };

struct FiniteCouplingSpec {
  FiniteCouplingKind kind = FiniteCouplingKind::kTwoStep;
  FiniteProposalCoupling proposal = FiniteProposalCoupling::kMaximal;
  AcceptanceCouplingKind acceptance = AcceptanceCouplingKind::kCommonUniform;
  bool faithful = true;
};

struct FiniteCoupledStep {
  std::size_t x_next = 0, y_next = 0;
  bool met = false;
};

FiniteCoupledStep finite_coupled_step(const MhProblem& problem, const FiniteCouplingSpec& spec,
                                      std::size_t x, std::size_t y, std::uint64_t seed,
                                      std::uint64_t replicate, std::uint64_t step);

MeetingSummary simulate_finite_meetings(const MhProblem& problem, const FiniteCouplingSpec& spec,
                                        std::size_t x0, std::size_t y0, long horizon,
                                        int replicates, std::uint64_t seed, int threads = 0);

/// Frequency of one-step meetings over n independent draws from (x, y).
double estimate_one_step_meeting(const MhProblem& problem, const FiniteCouplingSpec& spec,
                                 std::size_t x, std::size_t y, long n, std::uint64_t seed);

// ---------- stochastic resample-on-rejection draw ----------

struct Algo1Draw {
  std::size_t xp = 0, yp = 0;
  bool b_x = false, b_y = false;
};

/// Literal rejection-loop implementation of the resampled proposal
/// coupling: rejected coordinates are redrawn until the redraw produces the
/// same acceptance outcome. Throws when a loop exceeds max_loop (the
/// conditioned branch has near-zero probability).
Algo1Draw algorithm1_stochastic(const JointDist& qm, const AcceptanceCoupling& bm, std::size_t x,
                                std::size_t y, std::uint64_t seed, std::uint64_t draw_index,
                                long max_loop = 100000);

}  // namespace kercoup
