#include <doctest.h>

#include <cmath>
#include <map>

#include "fixtures.hpp"
#include "kercoup/density.hpp"
#include "kercoup/samplers.hpp"
#include "kercoup/target.hpp"

using namespace kercoup;
using testfx::r;

namespace {

double bernoulli_se(double p, long n) { return std::sqrt(std::max(p * (1.0 - p), 1e-12) / n); }

}  // namespace

TEST_CASE("gradient validation") {
  CHECK(validate_gradient(std_normal_target(3), 100, 1e-5, 11).ok);
  CHECK(validate_gradient(funnel_target(), 100, 1e-5, 12).ok);
}

TEST_CASE("mh_step acceptance rate for scaled random-walk on a standard normal") {
  // Stationary acceptance rate at sigma = 2.4, from an independent
  // quadrature oracle: 0.44229 (not 0.35; the one-dimensional optimum sits
  // near 0.44).
  const auto target = std_normal_target(1);
  const ProposalSpec prop{ProposalKind::kRwm, 2.4};
  long accepted = 0;
  const long n = 100000;
  Vec state{0.0};
  for (long t = 1; t <= n; ++t) {
    const auto rec = mh_step(target, prop, state, 555, 0, static_cast<std::uint64_t>(t));
    if (rec.accepted) ++accepted;
    state = rec.next;
  }
  const double rate = static_cast<double>(accepted) / n;
  // 4 standard errors plus a little room for the short transient.
  CHECK(rate == doctest::Approx(0.44229).epsilon(0.02));
}

TEST_CASE("MALA chain matches the target moments") {
  const auto target = std_normal_target(1);
  const ProposalSpec prop{ProposalKind::kMala, 0.25};
  const long n = 100000;
  Vec state{1.5};
  double sum = 0, sumsq = 0;
  // Batch means give an honest standard error for the correlated chain.
  const int batches = 50;
  std::vector<double> batch_mean(batches, 0.0);
  const long per = n / batches;
  for (long t = 1; t <= n; ++t) {
    const auto rec = mh_step(target, prop, state, 777, 0, static_cast<std::uint64_t>(t));
    state = rec.next;
    sum += state[0];
    sumsq += state[0] * state[0];
    batch_mean[static_cast<std::size_t>((t - 1) / per) % batches] += state[0] / per;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  double bvar = 0;
  for (double b : batch_mean) bvar += (b - mean) * (b - mean);
  const double se_mean = std::sqrt(bvar / (batches - 1) / batches);
  CHECK(std::fabs(mean - 0.0) <= 4.0 * se_mean + 1e-9);
  CHECK(var == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("non-finite proposals are rejected and flagged") {
  TargetModel boxed;
  boxed.dim = 1;
  boxed.log_density = [](const Vec& x) {
    return std::fabs(x[0]) <= 1.0 ? 0.0 : -std::numeric_limits<double>::infinity();
  };
  const ProposalSpec prop{ProposalKind::kRwm, 10.0};
  bool saw_flag = false;
  for (int t = 1; t <= 200; ++t) {
    const auto rec = mh_step(boxed, prop, {0.0}, 5, 0, static_cast<std::uint64_t>(t));
    if (rec.flagged_nonfinite) {
      saw_flag = true;
      CHECK_FALSE(rec.accepted);
    }
  }
  CHECK(saw_flag);

  SUBCASE("uniform target inside the box accepts every interior proposal") {
    const ProposalSpec tight{ProposalKind::kRwm, 0.05};
    for (int t = 1; t <= 200; ++t) {
      const auto rec = mh_step(boxed, tight, {0.0}, 6, 0, static_cast<std::uint64_t>(t));
      if (!rec.flagged_nonfinite) CHECK(rec.accepted);
    }
  }
}

TEST_CASE("coupled_step degeneracies") {
  const auto target = std_normal_target(2);
  const ProposalSpec prop{ProposalKind::kRwm, 1.0};

  SUBCASE("equal states collapse to a single duplicated step") {
    for (auto pc : {ProposalCouplingKind::kCrn, ProposalCouplingKind::kReflection,
                    ProposalCouplingKind::kMaximal, ProposalCouplingKind::kIndependent}) {
      const CouplingSpec spec{pc, AcceptanceCouplingKind::kCommonUniform, true};
      const Vec x{0.3, -0.7};
      const auto rec = coupled_step(target, prop, spec, x, x, 9, 0, 1);
      CHECK(rec.x_prop == rec.y_prop);
      CHECK(rec.b_x == rec.b_y);
      CHECK(rec.x_next == rec.y_next);
      CHECK(rec.met);
    }
  }

  SUBCASE("reflection is rejected for drifted proposals") {
    const ProposalSpec mala{ProposalKind::kMala, 0.2};
    const CouplingSpec spec{ProposalCouplingKind::kReflection,
                            AcceptanceCouplingKind::kCommonUniform, true};
    CHECK_THROWS_AS(coupled_step(target, mala, spec, {0.0, 0.0}, {1.0, 1.0}, 9, 0, 1),
                    std::invalid_argument);
  }

  SUBCASE("independent proposals on a continuous target never coincide") {
    const CouplingSpec spec{ProposalCouplingKind::kIndependent,
                            AcceptanceCouplingKind::kCommonUniform, true};
    for (int t = 1; t <= 500; ++t) {
      const auto rec = coupled_step(target, prop, spec, {0.0, 0.0}, {1.0, 1.0}, 10, 0,
                                    static_cast<std::uint64_t>(t));
      CHECK_FALSE(rec.proposals_equal);
    }
  }
}

TEST_CASE("maximal proposal coupling hits the total-variation bound for unit normals") {
  // P(x' = y') for N(0,1) vs N(1,1) proposals equals 1 - TV = 0.6171.
  const auto target = std_normal_target(1);
  const ProposalSpec prop{ProposalKind::kRwm, 1.0};
  const CouplingSpec spec{ProposalCouplingKind::kMaximal, AcceptanceCouplingKind::kCommonUniform,
                          true};
  const long n = 100000;
  long equal = 0;
  for (long t = 1; t <= n; ++t) {
    const auto rec = coupled_step(target, prop, spec, {0.0}, {1.0}, 1234, 0,
                                  static_cast<std::uint64_t>(t));
    if (rec.proposals_equal) ++equal;
  }
  const double freq = static_cast<double>(equal) / n;
  const double want = 0.6170750774519738;
  CHECK(std::fabs(freq - want) <= 4.0 * bernoulli_se(want, n) + 1e-12);
}

TEST_CASE("faithfulness holds along trajectories") {
  const auto target = std_normal_target(1);
  const ProposalSpec prop{ProposalKind::kRwm, 1.5};
  const CouplingSpec spec{ProposalCouplingKind::kMaximal, AcceptanceCouplingKind::kCommonUniform,
                          true};
  int met_count = 0;
  for (std::uint64_t rep = 0; rep < 20; ++rep) {
    const auto traj = run_coupled_trajectory(target, prop, spec, {3.0}, {-3.0}, 200, 99, rep,
                                             /*keep_steps=*/true);
    if (traj.meeting_time < 0) continue;
    ++met_count;
    for (long t = traj.meeting_time; t < static_cast<long>(traj.steps.size()); ++t) {
      CHECK(traj.steps[static_cast<std::size_t>(t)].x_next ==
            traj.steps[static_cast<std::size_t>(t)].y_next);
    }
  }
  CHECK(met_count > 0);
}

TEST_CASE("finite simulation: maximal kernel coupling attains 1 - TV at the start pair") {
  const auto problem = testfx::two_state_problem();
  FiniteCouplingSpec spec;
  spec.kind = FiniteCouplingKind::kMaximalKernel;
  const long n = 100000;
  const double freq = estimate_one_step_meeting(problem, spec, 0, 1, n, 2024);
  const double bound = 1.0 - tv_distance(problem.P.row(0), problem.P.row(1)).to_double();
  CHECK(std::fabs(freq - bound) <= 4.0 * bernoulli_se(bound, n));
}

TEST_CASE("finite simulation: every built-in coupling respects the one-step bound") {
  const auto problem = testfx::two_state_problem();
  const long n = 50000;
  const double bound = 1.0 - tv_distance(problem.P.row(0), problem.P.row(1)).to_double();
  std::vector<FiniteCouplingSpec> specs;
  {
    FiniteCouplingSpec s;
    s.kind = FiniteCouplingKind::kMaximalKernel;
    specs.push_back(s);
    s.kind = FiniteCouplingKind::kIndependentKernel;
    specs.push_back(s);
    s.kind = FiniteCouplingKind::kTwoStep;
    for (auto pc : {FiniteProposalCoupling::kIndependent, FiniteProposalCoupling::kCrn,
                    FiniteProposalCoupling::kMaximal}) {
      s.proposal = pc;
      s.acceptance = AcceptanceCouplingKind::kCommonUniform;
      specs.push_back(s);
      s.acceptance = AcceptanceCouplingKind::kIndependent;
      specs.push_back(s);
    }
  }
  for (std::size_t k = 0; k < specs.size(); ++k) {
    const double freq = estimate_one_step_meeting(problem, specs[k], 0, 1, n, 3000 + k);
    CHECK(freq <= bound + 4.0 * bernoulli_se(bound, n));
  }
}

TEST_CASE("finite meeting simulation summary fields") {
  const auto problem = testfx::two_state_problem();
  FiniteCouplingSpec spec;
  spec.kind = FiniteCouplingKind::kMaximalKernel;
  const auto s = simulate_finite_meetings(problem, spec, 0, 1, 50, 4000, 77, 2);
  CHECK(s.replicates == 4000);
  CHECK(s.fraction_met == doctest::Approx(1.0).epsilon(0.01));  // meets fast
  CHECK(s.survival[0] == doctest::Approx(1.0));
  // One-step meeting from (1,2) should be near 3/4.
  CHECK(s.one_step_meet_freq[1] == doctest::Approx(0.75).epsilon(0.05));
  // Threaded and serial runs agree exactly.
  const auto s1 = simulate_finite_meetings(problem, spec, 0, 1, 50, 4000, 77, 1);
  CHECK(s1.meeting_times == s.meeting_times);
}

TEST_CASE("marginal frequencies of proposal/indicator events match the helper quantities") {
  // Simulated (x', b_x) frequencies from the two-state problem agree with
  // alpha1 (accepted) and alpha0 (rejected) within 4 standard errors.
  const auto problem = testfx::two_state_problem();
  const auto h = compute_helpers(problem.Q, problem.P);
  const std::size_t x = 1;
  const long n = 100000;
  std::map<std::pair<std::size_t, bool>, long> counts;
  RngStream rng(4321, 0, 0, Role::kMisc);
  for (long i = 0; i < n; ++i) {
    const double u = rng.next_uniform();
    const std::size_t xp = u < problem.Q.at(x, 0).to_double() ? 0 : 1;
    const bool accept = rng.next_uniform() < problem.a.at(x, xp).to_double();
    ++counts[{xp, accept}];
  }
  for (std::size_t xp = 0; xp < 2; ++xp) {
    const double want1 = h.alpha1[x][xp].to_double();
    const double got1 = static_cast<double>(counts[{xp, true}]) / n;
    CHECK(std::fabs(got1 - want1) <= 4.0 * bernoulli_se(want1, n) + 1e-12);
    const double want0 = h.alpha0[x][xp].to_double();
    const double got0 = static_cast<double>(counts[{xp, false}]) / n;
    CHECK(std::fabs(got0 - want0) <= 4.0 * bernoulli_se(std::max(want0, 1e-6), n) + 1e-12);
  }
}

TEST_CASE("stochastic resampling loop matches the closed form") {
  const auto fx = testfx::resample_fixture();
  const auto closed = algorithm1_resampled_qbar(fx.qbar_m, fx.b_m, fx.x, fx.y);
  const long n = 50000;
  const std::size_t ns = fx.problem.Q.size();
  std::vector<long> cell_counts(ns * ns, 0);
  for (long i = 0; i < n; ++i) {
    const auto d = algorithm1_stochastic(fx.qbar_m, fx.b_m, fx.x, fx.y, 86421,
                                         static_cast<std::uint64_t>(i));
    ++cell_counts[d.xp * ns + d.yp];
  }
  for (std::size_t i = 0; i < ns; ++i) {
    for (std::size_t j = 0; j < ns; ++j) {
      const double want = closed.qbar.at(i, j).to_double();
      const double got = static_cast<double>(cell_counts[i * ns + j]) / n;
      CHECK(std::fabs(got - want) <= 4.0 * bernoulli_se(std::max(want, 1e-6), n) + 1e-12);
    }
  }

  SUBCASE("all-accept tables pass draws through unchanged") {
    AcceptanceCoupling accept_all = AcceptanceCoupling::filled(fx.problem.Q.space);
    for (std::size_t i = 0; i < ns; ++i) {
      for (std::size_t j = 0; j < ns; ++j) accept_all.off_support[i][j] = fx.qbar_m.at(i, j).is_zero();
    }
    std::vector<long> counts(ns * ns, 0);
    for (long i = 0; i < 20000; ++i) {
      const auto d = algorithm1_stochastic(fx.qbar_m, accept_all, fx.x, fx.y, 5150,
                                           static_cast<std::uint64_t>(i));
      CHECK(d.b_x);
      CHECK(d.b_y);
      ++counts[d.xp * ns + d.yp];
    }
    for (std::size_t i = 0; i < ns; ++i) {
      for (std::size_t j = 0; j < ns; ++j) {
        const double want = fx.qbar_m.at(i, j).to_double();
        const double got = static_cast<double>(counts[i * ns + j]) / 20000;
        CHECK(std::fabs(got - want) <= 4.0 * bernoulli_se(std::max(want, 1e-6), 20000) + 1e-12);
      }
    }
  }
}

TEST_CASE("x-marginals of the stochastic resampling loop follow the proposal row") {
  const auto fx = testfx::resample_fixture();
  const long n = 50000;
  const std::size_t ns = fx.problem.Q.size();
  std::vector<long> counts(ns, 0);
  for (long i = 0; i < n; ++i) {
    const auto d = algorithm1_stochastic(fx.qbar_m, fx.b_m, fx.x, fx.y, 11111,
                                         static_cast<std::uint64_t>(i));
    ++counts[d.xp];
  }
  for (std::size_t i = 0; i < ns; ++i) {
    const double want = fx.problem.Q.at(fx.x, i).to_double();
    const double got = static_cast<double>(counts[i]) / n;
    CHECK(std::fabs(got - want) <= 4.0 * bernoulli_se(std::max(want, 1e-6), n) + 1e-12);
  }
}

TEST_CASE("continuous meeting summaries and determinism") {
  const auto target = std_normal_target(1);
  const ProposalSpec prop{ProposalKind::kRwm, 1.5};
  const CouplingSpec spec{ProposalCouplingKind::kMaximal, AcceptanceCouplingKind::kCommonUniform,
                          true};
  const auto s1 = simulate_meetings(target, prop, spec, {2.0}, {-2.0}, 100, 200, 31, 2);
  const auto s2 = simulate_meetings(target, prop, spec, {2.0}, {-2.0}, 100, 200, 31, 1);
  CHECK(s1.meeting_times == s2.meeting_times);  // thread count cannot matter
  CHECK(s1.fraction_met > 0.5);

  SUBCASE("crn coupling never meets exactly on a continuous space") {
    const CouplingSpec crn{ProposalCouplingKind::kCrn, AcceptanceCouplingKind::kCommonUniform, true};
    const auto s = simulate_meetings(target, prop, crn, {2.0}, {-2.0}, 50, 50, 77, 2);
    CHECK(s.fraction_met == 0.0);
  }
}
