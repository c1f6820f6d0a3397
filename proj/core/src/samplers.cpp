#include "kercoup/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace kercoup {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Vec rwm_move(const Vec& from, double sigma, const Vec& z) {
  Vec out(from.size());
  for (std::size_t i = 0; i < from.size(); ++i) out[i] = from[i] + sigma * z[i];
  return out;
}

Vec mala_mean(const TargetModel& target, double tau, const Vec& from) {
  const auto g = target.grad_log_density(from);
  Vec m(from.size());
  for (std::size_t i = 0; i < from.size(); ++i) m[i] = from[i] + tau * g[i];
  return m;
}

Vec draw_innovation(std::size_t d, RngStream& rng) {
  Vec z(d);
  for (auto& v : z) v = rng.next_normal();
  return z;
}

/// Proposal mean for one step out of `from`.
Vec proposal_mean(const TargetModel& target, const ProposalSpec& prop, const Vec& from) {
  if (prop.kind == ProposalKind::kRwm) return from;
  return mala_mean(target, prop.scale, from);
}

double proposal_sd(const ProposalSpec& prop) {
  return prop.kind == ProposalKind::kRwm ? prop.scale : std::sqrt(2.0 * prop.scale);
}

/// log q(from -> to), dropping dimension constants (they cancel in every
/// ratio this file forms).
double log_proposal_density(const TargetModel& target, const ProposalSpec& prop, const Vec& from,
                            const Vec& to) {
  const Vec mean = proposal_mean(target, prop, from);
  const double sd = proposal_sd(prop);
  double s = 0.0;
  for (std::size_t i = 0; i < to.size(); ++i) {
    const double d = to[i] - mean[i];
    s += d * d;
  }
  return -0.5 * s / (sd * sd);
}

/// log of the MH acceptance ratio for from -> to (before the min with 0).
double log_accept_ratio(const TargetModel& target, const ProposalSpec& prop, const Vec& from,
                        const Vec& to, bool* nonfinite = nullptr) {
  const double lp_to = target.log_density(to);
  if (!std::isfinite(lp_to)) {
    if (nonfinite) *nonfinite = true;
    return kNegInf;
  }
  const double lp_from = target.log_density(from);
  if (prop.kind == ProposalKind::kRwm) return lp_to - lp_from;  // symmetric proposal
  return lp_to - lp_from + log_proposal_density(target, prop, to, from) -
         log_proposal_density(target, prop, from, to);
}

Vec reflect(const Vec& z, const Vec& x, const Vec& y) {
  double norm2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    norm2 += d * d;
  }
  if (norm2 == 0.0) return z;
  double dot = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) dot += (x[i] - y[i]) * z[i];
  const double c = 2.0 * dot / norm2;
  Vec out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] - c * (x[i] - y[i]);
  return out;
}

}  // namespace

MhStepRecord mh_step(const TargetModel& target, const ProposalSpec& prop, const Vec& state,
                     std::uint64_t seed, std::uint64_t replicate, std::uint64_t step) {
  if (prop.kind == ProposalKind::kMala && !target.has_gradient()) {
    throw std::invalid_argument("mh_step: MALA requires grad_log_density");
  }
  RngStream prop_rng(seed, replicate, step, Role::kProposalX);
  RngStream acc_rng(seed, replicate, step, Role::kAccept);

  MhStepRecord rec;
  const Vec mean = proposal_mean(target, prop, state);
  rec.proposal = rwm_move(mean, proposal_sd(prop), draw_innovation(target.dim, prop_rng));
  const double logr = log_accept_ratio(target, prop, state, rec.proposal, &rec.flagged_nonfinite);
  rec.accepted = std::log(acc_rng.next_uniform_pos()) <= logr;
  rec.next = rec.accepted ? rec.proposal : state;
  return rec;
}

CoupledStepRecord coupled_step(const TargetModel& target, const ProposalSpec& prop,
                               const CouplingSpec& spec, const Vec& x, const Vec& y,
                               std::uint64_t seed, std::uint64_t replicate, std::uint64_t step,
                               long max_loop) {
  if (prop.kind == ProposalKind::kMala && spec.proposal == ProposalCouplingKind::kReflection) {
    throw std::invalid_argument(
        "coupled_step: reflection coupling requires a spherically symmetric proposal; "
        "drifted MALA proposals are not radially exchangeable");
  }
  CoupledStepRecord rec;

  if (spec.faithful && x == y) {
    // Chains that have met move identically: one marginal step, duplicated.
    const auto m = mh_step(target, prop, x, seed, replicate, step);
    rec.x_prop = rec.y_prop = m.proposal;
    rec.b_x = rec.b_y = m.accepted;
    rec.x_next = rec.y_next = m.next;
    rec.proposals_equal = true;
    rec.met = true;
    return rec;
  }

  RngStream prop_rng(seed, replicate, step, Role::kProposalX);
  RngStream prop_rng_y(seed, replicate, step, Role::kProposalY);
  RngStream loop_rng(seed, replicate, step, Role::kMaximalLoop);
  RngStream acc_rng(seed, replicate, step, Role::kAccept);

  const double sd = proposal_sd(prop);
  const Vec mean_x = proposal_mean(target, prop, x);
  const Vec z = draw_innovation(target.dim, prop_rng);
  rec.x_prop = rwm_move(mean_x, sd, z);

  switch (spec.proposal) {
    case ProposalCouplingKind::kIndependent: {
      rec.y_prop = rwm_move(proposal_mean(target, prop, y), sd, draw_innovation(target.dim, prop_rng_y));
      break;
    }
    case ProposalCouplingKind::kCrn: {
      rec.y_prop = rwm_move(proposal_mean(target, prop, y), sd, z);
      break;
    }
    case ProposalCouplingKind::kReflection: {
      rec.y_prop = rwm_move(y, sd, reflect(z, x, y));
      break;
    }
    case ProposalCouplingKind::kMaximal: {
      // Coupled rejection sampler for the two proposal densities: keep the
      // x-draw for y when a uniform slides under the density ratio,
      // otherwise sample y from its residual.
      const double lq_x = log_proposal_density(target, prop, x, rec.x_prop);
      const double lq_y = log_proposal_density(target, prop, y, rec.x_prop);
      if (std::log(loop_rng.next_uniform_pos()) <= lq_y - lq_x) {
        rec.y_prop = rec.x_prop;
      } else {
        long tries = 0;
        for (;;) {
          if (++tries > max_loop) {
            throw std::runtime_error("coupled_step: maximal-coupling residual sampler exceeded " +
                                     std::to_string(max_loop) + " iterations");
          }
          const Vec cand = rwm_move(proposal_mean(target, prop, y), sd,
                                    draw_innovation(target.dim, loop_rng));
          const double ly = log_proposal_density(target, prop, y, cand);
          const double lx = log_proposal_density(target, prop, x, cand);
          if (std::log(loop_rng.next_uniform_pos()) > lx - ly) {
            rec.y_prop = cand;
            break;
          }
        }
      }
      break;
    }
  }
  rec.proposals_equal = rec.x_prop == rec.y_prop;

  const double logr_x = log_accept_ratio(target, prop, x, rec.x_prop);
  const double logr_y = log_accept_ratio(target, prop, y, rec.y_prop);
  if (spec.acceptance == AcceptanceCouplingKind::kCommonUniform) {
    const double lu = std::log(acc_rng.next_uniform_pos());
    rec.b_x = lu <= logr_x;
    rec.b_y = lu <= logr_y;
  } else {
    rec.b_x = std::log(acc_rng.next_uniform_pos()) <= logr_x;
    rec.b_y = std::log(acc_rng.next_uniform_pos()) <= logr_y;
  }
  rec.x_next = rec.b_x ? rec.x_prop : x;
  rec.y_next = rec.b_y ? rec.y_prop : y;
  rec.met = rec.x_next == rec.y_next;
  return rec;
}

CoupledTrajectory run_coupled_trajectory(const TargetModel& target, const ProposalSpec& prop,
                                         const CouplingSpec& spec, Vec x0, Vec y0, long horizon,
                                         std::uint64_t seed, std::uint64_t replicate,
                                         bool keep_steps) {
  CoupledTrajectory traj;
  if (x0 == y0) traj.meeting_time = 0;
  Vec x = std::move(x0), y = std::move(y0);
  for (long t = 1; t <= horizon; ++t) {
    auto rec = coupled_step(target, prop, spec, x, y, seed, replicate, static_cast<std::uint64_t>(t));
    x = rec.x_next;
    y = rec.y_next;
    if (traj.meeting_time < 0 && rec.met) traj.meeting_time = t;
    if (keep_steps) traj.steps.push_back(std::move(rec));
    if (traj.meeting_time >= 0 && !keep_steps) break;  // faithful: nothing more to learn
  }
  return traj;
}

MeetingSummary summarize_meetings(std::vector<long> times, long horizon) {
  MeetingSummary s;
  s.horizon = horizon;
  s.replicates = static_cast<int>(times.size());
  s.meeting_times = std::move(times);

  std::vector<long> met;
  for (long t : s.meeting_times) {
    if (t >= 0) met.push_back(t);
  }
  s.fraction_met = s.meeting_times.empty()
                       ? 0.0
                       : static_cast<double>(met.size()) / static_cast<double>(s.meeting_times.size());
  if (!met.empty()) {
    double sum = 0.0;
    for (long t : met) sum += static_cast<double>(t);
    s.mean_meeting_time = sum / static_cast<double>(met.size());
    std::sort(met.begin(), met.end());
    const std::size_t m = met.size();
    s.median_meeting_time = (m % 2 == 1)
                                ? static_cast<double>(met[m / 2])
                                : 0.5 * static_cast<double>(met[m / 2 - 1] + met[m / 2]);
  }

  s.survival.assign(static_cast<std::size_t>(horizon) + 1, 0.0);
  s.one_step_meet_freq.assign(static_cast<std::size_t>(horizon) + 1, 0.0);
  const double n = static_cast<double>(std::max<std::size_t>(s.meeting_times.size(), 1));
  std::vector<long> met_at(static_cast<std::size_t>(horizon) + 1, 0);
  for (long mt : s.meeting_times) {
    if (mt >= 0 && mt <= horizon) ++met_at[static_cast<std::size_t>(mt)];
  }
  long alive = static_cast<long>(s.meeting_times.size()) - met_at[0];
  s.survival[0] = static_cast<double>(alive) / n;
  for (long t = 1; t <= horizon; ++t) {
    const long entered = alive;  // not yet met when step t begins
    const long met_here = met_at[static_cast<std::size_t>(t)];
    alive -= met_here;
    s.survival[static_cast<std::size_t>(t)] = static_cast<double>(alive) / n;
    s.one_step_meet_freq[static_cast<std::size_t>(t)] =
        entered > 0 ? static_cast<double>(met_here) / static_cast<double>(entered) : 0.0;
  }
  return s;
}

namespace {

template <typename RunOne>
std::vector<long> parallel_meeting_times(int replicates, int threads, RunOne run_one) {
  std::vector<long> times(static_cast<std::size_t>(replicates), -1);
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const int nthreads = threads > 0 ? threads : static_cast<int>(std::min<unsigned>(hw, 8));
  if (nthreads <= 1 || replicates < 2) {
    for (int r = 0; r < replicates; ++r) times[static_cast<std::size_t>(r)] = run_one(r);
    return times;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(nthreads));
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (int w = 0; w < nthreads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int r = w; r < replicates; r += nthreads) {
          times[static_cast<std::size_t>(r)] = run_one(r);
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return times;
}

}  // namespace

MeetingSummary simulate_meetings(const TargetModel& target, const ProposalSpec& prop,
                                 const CouplingSpec& spec, const Vec& x0, const Vec& y0,
                                 long horizon, int replicates, std::uint64_t seed, int threads) {
  if (horizon < 1 || replicates < 1) {
    throw std::invalid_argument("simulate_meetings: horizon and replicates must be at least 1");
  }
  if (prop.kind == ProposalKind::kMala && spec.proposal == ProposalCouplingKind::kReflection) {
    throw std::invalid_argument(
        "simulate_meetings: reflection coupling requires a spherically symmetric proposal");
  }
  if (prop.kind == ProposalKind::kMala && !target.has_gradient()) {
    throw std::invalid_argument("simulate_meetings: MALA requires grad_log_density");
  }
  auto times = parallel_meeting_times(replicates, threads, [&](int r) {
    return run_coupled_trajectory(target, prop, spec, x0, y0, horizon, seed,
                                  static_cast<std::uint64_t>(r))
        .meeting_time;
  });
  return summarize_meetings(std::move(times), horizon);
}

// ---------- finite state spaces ----------

namespace {

std::vector<double> to_doubles(const std::vector<Rational>& w) {
  std::vector<double> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = w[i].to_double();
  return out;
}

std::size_t invert_cdf(const std::vector<double>& weights, double u) {
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return i;
  }
  return weights.empty() ? 0 : weights.size() - 1;
}

struct FiniteSimContext {
  const MhProblem& problem;
  FiniteCouplingSpec spec;
  std::size_t n;
  std::vector<std::vector<double>> p_rows, q_rows;
  std::vector<std::vector<double>> a;  // acceptance rates
  // joint couplings flattened row-major, built lazily per ordered pair
  std::vector<std::vector<double>> joint;  // index x * n + y
  std::vector<bool> joint_ready;

  FiniteSimContext(const MhProblem& pr, const FiniteCouplingSpec& sp)
      : problem(pr), spec(sp), n(pr.Q.size()) {
    for (std::size_t i = 0; i < n; ++i) {
      p_rows.push_back(to_doubles(pr.P.row(i).w));
      q_rows.push_back(to_doubles(pr.Q.row(i).w));
    }
    a.resize(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = to_doubles(pr.a.a[i]);
    joint.resize(n * n);
    joint_ready.assign(n * n, false);
  }

  const std::vector<double>& joint_for(std::size_t x, std::size_t y) {
    const std::size_t k = x * n + y;
    if (!joint_ready[k]) {
      const bool over_p = spec.kind == FiniteCouplingKind::kMaximalKernel;
      const auto& K = over_p ? problem.P : problem.Q;
      const JointDist g = build_maximal_coupling(K.row(x), K.row(y));
      std::vector<double> flat(n * n);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) flat[i * n + j] = g.at(i, j).to_double();
      }
      joint[k] = std::move(flat);
      joint_ready[k] = true;
    }
    return joint[k];
  }
};

FiniteCoupledStep finite_coupled_step_ctx(FiniteSimContext& ctx, std::size_t x, std::size_t y,
                                          std::uint64_t seed, std::uint64_t replicate,
                                          std::uint64_t step) {
  const std::size_t n = ctx.n;
  FiniteCoupledStep rec;

  if (ctx.spec.faithful && x == y) {
    RngStream rng(seed, replicate, step, Role::kProposalX);
    rec.x_next = rec.y_next = invert_cdf(ctx.p_rows[x], rng.next_uniform());
    rec.met = true;
    return rec;
  }

  switch (ctx.spec.kind) {
    case FiniteCouplingKind::kMaximalKernel: {
      RngStream rng(seed, replicate, step, Role::kProposalX);
      const std::size_t cell = invert_cdf(ctx.joint_for(x, y), rng.next_uniform());
      rec.x_next = cell / n;
      rec.y_next = cell % n;
      break;
    }
    case FiniteCouplingKind::kIndependentKernel: {
      RngStream rng_x(seed, replicate, step, Role::kProposalX);
      RngStream rng_y(seed, replicate, step, Role::kProposalY);
      rec.x_next = invert_cdf(ctx.p_rows[x], rng_x.next_uniform());
      rec.y_next = invert_cdf(ctx.p_rows[y], rng_y.next_uniform());
      break;
    }
    case FiniteCouplingKind::kTwoStep: {
      RngStream rng_x(seed, replicate, step, Role::kProposalX);
      RngStream rng_y(seed, replicate, step, Role::kProposalY);
      RngStream acc(seed, replicate, step, Role::kAccept);
      std::size_t xp = 0, yp = 0;
      switch (ctx.spec.proposal) {
        case FiniteProposalCoupling::kIndependent:
          xp = invert_cdf(ctx.q_rows[x], rng_x.next_uniform());
          yp = invert_cdf(ctx.q_rows[y], rng_y.next_uniform());
          break;
        case FiniteProposalCoupling::kCrn: {
          const double u = rng_x.next_uniform();
          xp = invert_cdf(ctx.q_rows[x], u);
          yp = invert_cdf(ctx.q_rows[y], u);
          break;
        }
        case FiniteProposalCoupling::kMaximal: {
          const std::size_t cell = invert_cdf(ctx.joint_for(x, y), rng_x.next_uniform());
          xp = cell / n;
          yp = cell % n;
          break;
        }
      }
      bool bx = false, by = false;
      if (ctx.spec.acceptance == AcceptanceCouplingKind::kCommonUniform) {
        const double u = acc.next_uniform();
        bx = u <= ctx.a[x][xp];
        by = u <= ctx.a[y][yp];
      } else {
        bx = acc.next_uniform() <= ctx.a[x][xp];
        by = acc.next_uniform() <= ctx.a[y][yp];
      }
      rec.x_next = bx ? xp : x;
      rec.y_next = by ? yp : y;
      break;
    }
  }
  rec.met = rec.x_next == rec.y_next;
  return rec;
}

}  // namespace

FiniteCoupledStep finite_coupled_step(const MhProblem& problem, const FiniteCouplingSpec& spec,
                                      std::size_t x, std::size_t y, std::uint64_t seed,
                                      std::uint64_t replicate, std::uint64_t step) {
  FiniteSimContext ctx(problem, spec);
  return finite_coupled_step_ctx(ctx, x, y, seed, replicate, step);
}

MeetingSummary simulate_finite_meetings(const MhProblem& problem, const FiniteCouplingSpec& spec,
                                        std::size_t x0, std::size_t y0, long horizon,
                                        int replicates, std::uint64_t seed, int threads) {
  if (horizon < 1 || replicates < 1) {
    throw std::invalid_argument("simulate_finite_meetings: horizon and replicates must be at least 1");
  }
  // Prebuild every pairwise coupling once; the per-replicate contexts then
  // share the same problem without locking.
  FiniteSimContext shared(problem, spec);
  if (spec.kind != FiniteCouplingKind::kIndependentKernel &&
      !(spec.kind == FiniteCouplingKind::kTwoStep &&
        spec.proposal != FiniteProposalCoupling::kMaximal)) {
    for (std::size_t x = 0; x < shared.n; ++x) {
      for (std::size_t y = 0; y < shared.n; ++y) shared.joint_for(x, y);
    }
  }
  auto times = parallel_meeting_times(replicates, threads, [&](int r) -> long {
    std::size_t x = x0, y = y0;
    long met_at = (x == y) ? 0 : -1;
    for (long t = 1; t <= horizon; ++t) {
      const auto rec = finite_coupled_step_ctx(shared, x, y, seed, static_cast<std::uint64_t>(r),
                                               static_cast<std::uint64_t>(t));
      x = rec.x_next;
      y = rec.y_next;
      if (met_at < 0 && rec.met) {
        met_at = t;
        break;  // only the first meeting time is collected
      }
    }
    return met_at;
  });
  return summarize_meetings(std::move(times), horizon);
}

double estimate_one_step_meeting(const MhProblem& problem, const FiniteCouplingSpec& spec,
                                 std::size_t x, std::size_t y, long n, std::uint64_t seed) {
  FiniteSimContext ctx(problem, spec);
  long met = 0;
  for (long i = 0; i < n; ++i) {
    const auto rec = finite_coupled_step_ctx(ctx, x, y, seed, static_cast<std::uint64_t>(i), 1);
    if (rec.met) ++met;
  }
  return static_cast<double>(met) / static_cast<double>(n);
}

Algo1Draw algorithm1_stochastic(const JointDist& qm, const AcceptanceCoupling& bm, std::size_t x,
                                std::size_t y, std::uint64_t seed, std::uint64_t draw_index,
                                long max_loop) {
  (void)x;
  (void)y;
  const std::size_t n = qm.size();
  std::vector<double> cells(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) cells[i * n + j] = qm.at(i, j).to_double();
  }
  RngStream rng(seed, draw_index, 0, Role::kAlgoLoop);

  auto draw_pair = [&](std::size_t* i, std::size_t* j, int* outcome) {
    const std::size_t cell = invert_cdf(cells, rng.next_uniform());
    *i = cell / n;
    *j = cell % n;
    const auto& p = bm.probs[*i][*j];
    const double u = rng.next_uniform();
    double acc = 0.0;
    *outcome = 3;
    for (int k = 0; k < 3; ++k) {
      acc += p[static_cast<std::size_t>(k)].to_double();
      if (u < acc) {
        *outcome = k;
        break;
      }
    }
  };

  std::size_t i0, j0;
  int outcome;
  draw_pair(&i0, &j0, &outcome);
  Algo1Draw out;
  out.b_x = outcome == 0 || outcome == 1;
  out.b_y = outcome == 0 || outcome == 2;
  out.xp = i0;
  out.yp = j0;

  // Rejected coordinates are redrawn until the redraw reproduces the same
  // acceptance outcome; each coordinate runs its own independent loop.
  for (int coord = 0; coord < 2; ++coord) {
    const bool accepted = coord == 0 ? out.b_x : out.b_y;
    if (accepted) continue;
    long tries = 0;
    for (;;) {
      if (++tries > max_loop) {
        throw std::runtime_error(
            "algorithm1_stochastic: conditioning loop exceeded " + std::to_string(max_loop) +
            " draws; the acceptance outcome has near-zero probability");
      }
      std::size_t i, j;
      int o;
      draw_pair(&i, &j, &o);
      if (o == outcome) {
        if (coord == 0) out.xp = i;
        else out.yp = j;
        break;
      }
    }
  }
  return out;
}

}  // namespace kercoup
