// kercoup command-line tool: decompositions, maximality checks, maximal
// coupling construction, coupled-chain simulation, and the non-maximality
// certificate, over exact JSON problem/coupling files.

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "kercoup/decompose.hpp"
#include "kercoup/io.hpp"
#include "kercoup/maximality.hpp"
#include "kercoup/samplers.hpp"
#include "kercoup/target.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace kercoup;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitParse = 2;
constexpr int kExitMarginal = 3;
constexpr int kExitInternal = 4;
constexpr int kExitDisagreement = 5;

struct Output {
  bool quiet = false;
  bool as_json = false;
  json payload;

  void line(const std::string& s) {
    if (!quiet && !as_json) std::cout << s << "\n";
  }
  void finish() {
    if (as_json) std::cout << payload.dump(2) << "\n";
  }
};

std::uint64_t default_seed() {
  if (const char* env = std::getenv("KERCOUP_SEED")) {
    try {
      return std::stoull(env);
    } catch (...) {
      std::cerr << "warning: ignoring unparsable KERCOUP_SEED\n";
    }
  }
  return 20240901;
}

std::pair<std::size_t, std::size_t> parse_pair(const std::string& s, const SpacePtr& space) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw ParseError("pair must look like \"x,y\"");
  return {space->index_of(s.substr(0, comma)), space->index_of(s.substr(comma + 1))};
}

int cmd_decompose(const std::string& problem_path, const std::string& coupling_path,
                  const std::string& out_dir, bool check_exhaustive, Output& out) {
  const MhProblem problem = load_problem_file(problem_path);
  const LoadedCoupling lc = load_coupling_file(coupling_path, problem.Q.space);

  const auto marginals = check_coupling(lc.gamma, problem.P.row(lc.x), problem.P.row(lc.y));
  if (!marginals.ok) {
    std::cerr << "error: coupling does not match the generated transition kernel:\n";
    for (const auto& v : marginals.violations) std::cerr << "  " << v << "\n";
    return kExitMarginal;
  }

  const Helpers h = compute_helpers(problem.Q, problem.P);
  const CamBuildResult built = build_cam(lc.gamma, h, problem.Q, problem.P, lc.x, lc.y);
  const std::size_t max_n = check_exhaustive ? problem.Q.size() : 12;
  const CamReport cam_report =
      verify_cam(built.cam, built.qbar, lc.gamma, problem.Q, lc.x, lc.y, max_n);
  const AcceptanceCoupling b = extract_acceptance_coupling(built.cam, built.qbar);
  const MarginalAcceptanceReport t1 = check_marginal_acceptance(built.qbar, b, problem.Q, problem.a, lc.x, lc.y);
  const JointDist regen = regenerate_pbar(built.qbar, b, lc.x, lc.y);
  const bool round_trip = regen == lc.gamma;

  fs::create_directories(out_dir);
  const std::string xl = problem.Q.space->label(lc.x);
  const std::string yl = problem.Q.space->label(lc.y);
  write_text_file(out_dir + "/phi11.json", coupling_to_json(built.cam.phi11, xl, yl));
  write_text_file(out_dir + "/phi10.json", coupling_to_json(built.cam.phi10, xl, yl));
  write_text_file(out_dir + "/phi01.json", coupling_to_json(built.cam.phi01, xl, yl));
  write_text_file(out_dir + "/phi00.json", coupling_to_json(built.cam.phi00, xl, yl));
  write_text_file(out_dir + "/qbar.json", coupling_to_json(built.qbar, xl, yl));
  write_text_file(out_dir + "/acceptance.json", acceptance_coupling_to_json(b));

  json report;
  report["pair"] = {xl, yl};
  report["verify_cam"] = {{"ok", cam_report.ok},
                          {"condition1", cam_report.condition1},
                          {"condition2", cam_report.condition2},
                          {"condition3", cam_report.condition3},
                          {"violations", cam_report.violations}};
  report["marginal_acceptance"] = {{"ok", t1.ok}, {"violations", t1.violations}};
  report["round_trip"] = round_trip ? "exact" : "mismatch";
  write_text_file(out_dir + "/report.json", report.dump(2) + "\n");

  out.line("pair (" + xl + "," + yl + ")");
  out.line(std::string("verify_cam: ") + (cam_report.ok ? "pass" : "FAIL"));
  out.line(std::string("marginal acceptance conditions: ") + (t1.ok ? "pass" : "FAIL"));
  out.line(std::string("round trip: ") + (round_trip ? "exact" : "MISMATCH"));
  out.line("wrote " + out_dir + "/{phi11,phi10,phi01,phi00,qbar,acceptance,report}.json");
  out.payload = report;

  return (cam_report.ok && t1.ok && round_trip) ? kExitOk : kExitInternal;
}

int cmd_verify_maximal(const std::string& problem_path, const std::string& coupling_path,
                       const std::string& via, Output& out) {
  const MhProblem problem = load_problem_file(problem_path);
  const LoadedCoupling lc = load_coupling_file(coupling_path, problem.Q.space);

  const auto marginals = check_coupling(lc.gamma, problem.P.row(lc.x), problem.P.row(lc.y));
  if (!marginals.ok) {
    std::cerr << "error: not a coupling of the transition kernel rows:\n";
    for (const auto& v : marginals.violations) std::cerr << "  " << v << "\n";
    return kExitMarginal;
  }

  std::optional<bool> hahn_verdict;
  std::optional<bool> cond_verdict;
  json details;

  if (via == "hahn" || via == "both") {
    const auto v = is_maximal_coupling(lc.gamma, problem.P.row(lc.x), problem.P.row(lc.y));
    hahn_verdict = v.maximal;
    details["hahn"] = {{"maximal", v.maximal},
                       {"diagonal", v.diagonal.str()},
                       {"bound", v.bound.str()},
                       {"diagonal_deficit", (v.bound - v.diagonal).str()},
                       {"violations", v.violations}};
    out.line(std::string("hahn route: ") + (v.maximal ? "maximal" : "not maximal") + " (diagonal " +
             v.diagonal.str() + ", bound " + v.bound.str() + ")");
  }
  if (via == "conditions" || via == "both") {
    const Helpers h = compute_helpers(problem.Q, problem.P);
    const CamBuildResult built = build_cam(lc.gamma, h, problem.Q, problem.P, lc.x, lc.y);
    const AcceptanceCoupling b = extract_acceptance_coupling(built.cam, built.qbar);
    const auto rep = check_max_conditions(built.qbar, b, problem.Q, problem.a, problem.P, lc.x, lc.y,
                                          /*cross_check=*/false);
    cond_verdict = rep.verdict();
    json viol = json::array();
    for (const auto& v : rep.violations) viol.push_back(v.describe(problem.Q.space));
    details["conditions"] = {{"maximal", rep.verdict()}, {"violations", viol}};
    out.line(std::string("six-condition route: ") + (rep.verdict() ? "maximal" : "not maximal") +
             (rep.violations.empty()
                  ? ""
                  : " (first witness: " + rep.violations.front().describe(problem.Q.space) + ")"));
  }
  out.payload = details;
  if (via == "both" && hahn_verdict != cond_verdict) {
    std::cerr << "error: the two maximality routes disagree\n";
    return kExitDisagreement;
  }
  return kExitOk;
}

int cmd_build_maximal(const std::string& problem_path, const std::string& pair,
                      const std::string& out_file, Output& out) {
  const MhProblem problem = load_problem_file(problem_path);
  const auto [x, y] = parse_pair(pair, problem.Q.space);
  const JointDist gamma = build_maximal_coupling(problem.P.row(x), problem.P.row(y));
  const std::string text =
      coupling_to_json(gamma, problem.Q.space->label(x), problem.Q.space->label(y));
  write_text_file(out_file, text);
  out.line("wrote maximal coupling of P(" + problem.Q.space->label(x) + ",.), P(" +
           problem.Q.space->label(y) + ",.) to " + out_file);
  out.payload = json::parse(text);
  return kExitOk;
}

int cmd_certify_nonmax(Output& out) {
  const NonmaxCertificate cert = certify_nonmax_example();
  out.line("required transition mass at (2,3): " + cert.required_mass.str());
  out.line("available proposal mass at (2,3) under the maximal proposal coupling: " +
           cert.available_mass.str());
  out.line(std::string("maximal proposal coupling unique: ") + (cert.qbar_unique ? "yes" : "no") +
           " (" + std::to_string(cert.extreme_points) + " extreme point)");
  out.line(std::string("alternative non-maximal proposal coupling regenerates the maximal "
                       "transition coupling: ") +
           (cert.alternative_regenerates ? "pass" : "FAIL"));
  out.payload = {{"required_mass", cert.required_mass.str()},
                 {"available_mass", cert.available_mass.str()},
                 {"qbar_unique", cert.qbar_unique},
                 {"extreme_points", cert.extreme_points},
                 {"alternative_regenerates", cert.alternative_regenerates},
                 {"ok", cert.ok}};
  return cert.ok ? kExitOk : kExitInternal;
}

struct SimulateArgs {
  std::string target = "normal";
  std::string problem_path;
  std::string algorithm = "rwm";
  double scale = 1.0;
  std::string coupling = "crn";
  std::string acceptance = "common-uniform";
  std::string pair;
  double x0 = 2.0, y0 = -2.0;
  long steps = 1000;
  int replicates = 100;
  std::uint64_t seed = 0;
  std::string out_csv;
  std::string trajectories;
  int threads = 0;
};

std::string format_csv(const MeetingSummary& s) {
  std::ostringstream csv;
  csv << "replicate,meeting_time,met,horizon\n";
  for (std::size_t r = 0; r < s.meeting_times.size(); ++r) {
    const long mt = s.meeting_times[r];
    csv << r << "," << mt << "," << (mt >= 0 ? 1 : 0) << "," << s.horizon << "\n";
  }
  return csv.str();
}

void print_summary(Output& out, const MeetingSummary& s, long bound_violations,
                   const std::string& bound_note) {
  std::ostringstream os;
  os << "replicates " << s.replicates << ", horizon " << s.horizon << ", fraction met "
     << s.fraction_met;
  out.line(os.str());
  if (s.fraction_met > 0) {
    std::ostringstream os2;
    os2 << "meeting time mean " << s.mean_meeting_time << ", median " << s.median_meeting_time;
    out.line(os2.str());
  }
  out.line("per-step coupling-bound violations: " + std::to_string(bound_violations) + bound_note);
  out.payload["fraction_met"] = s.fraction_met;
  out.payload["mean_meeting_time"] = s.mean_meeting_time;
  out.payload["median_meeting_time"] = s.median_meeting_time;
  out.payload["bound_violations"] = bound_violations;
}

int simulate_finite(const SimulateArgs& args, Output& out) {
  const MhProblem problem = load_problem_file(args.problem_path);
  if (args.pair.empty()) throw ParseError("finite simulation needs --pair x,y");
  const auto [px, py] = parse_pair(args.pair, problem.Q.space);
  const std::size_t x0 = px, y0 = py;

  FiniteCouplingSpec spec;
  if (args.coupling == "maximal") {
    spec.kind = FiniteCouplingKind::kMaximalKernel;
  } else if (args.coupling == "independent") {
    spec.kind = FiniteCouplingKind::kIndependentKernel;
  } else if (args.coupling == "crn") {
    spec.kind = FiniteCouplingKind::kTwoStep;
    spec.proposal = FiniteProposalCoupling::kCrn;
  } else if (args.coupling == "maximal-proposal") {
    spec.kind = FiniteCouplingKind::kTwoStep;
    spec.proposal = FiniteProposalCoupling::kMaximal;
  } else if (args.coupling == "independent-proposal") {
    spec.kind = FiniteCouplingKind::kTwoStep;
    spec.proposal = FiniteProposalCoupling::kIndependent;
  } else {
    throw ParseError("unknown finite coupling \"" + args.coupling + "\"");
  }
  spec.acceptance = args.acceptance == "independent" ? AcceptanceCouplingKind::kIndependent
                                                     : AcceptanceCouplingKind::kCommonUniform;

  // Meeting-time runs plus per-pair one-step tallies for the coupling
  // inequality report.
  const std::size_t n = problem.Q.size();
  struct Tally {
    std::atomic<long> attempts{0};
    std::atomic<long> meets{0};
  };
  std::vector<Tally> tallies(n * n);
  std::vector<long> times(static_cast<std::size_t>(args.replicates), -1);

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const int nthreads = args.threads > 0 ? args.threads : static_cast<int>(std::min<unsigned>(hw, 8));
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&](int w) {
    try {
      for (int r = w; r < args.replicates; r += nthreads) {
        std::size_t x = x0, y = y0;
        long met_at = (x == y) ? 0 : -1;
        for (long t = 1; t <= args.steps && met_at < 0; ++t) {
          const auto rec = finite_coupled_step(problem, spec, x, y, args.seed,
                                               static_cast<std::uint64_t>(r),
                                               static_cast<std::uint64_t>(t));
          if (x != y) {
            auto& tally = tallies[x * n + y];
            tally.attempts.fetch_add(1, std::memory_order_relaxed);
            if (rec.met) tally.meets.fetch_add(1, std::memory_order_relaxed);
          }
          x = rec.x_next;
          y = rec.y_next;
          if (rec.met) met_at = t;
        }
        times[static_cast<std::size_t>(r)] = met_at;
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < nthreads; ++w) pool.emplace_back(worker, w);
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);

  const MeetingSummary summary = summarize_meetings(std::move(times), args.steps);
  if (!args.out_csv.empty()) write_text_file(args.out_csv, format_csv(summary));

  long violations = 0;
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t y = 0; y < n; ++y) {
      const long attempts = tallies[x * n + y].attempts.load();
      if (attempts == 0 || x == y) continue;
      const double bound = 1.0 - tv_distance(problem.P.row(x), problem.P.row(y)).to_double();
      const double freq =
          static_cast<double>(tallies[x * n + y].meets.load()) / static_cast<double>(attempts);
      const double se = std::sqrt(std::max(bound * (1.0 - bound), 1e-12) / attempts);
      if (freq > bound + 4.0 * se) ++violations;
    }
  }
  print_summary(out, summary, violations, " (exact per-pair bounds)");
  return kExitOk;
}

int simulate_continuous(const SimulateArgs& args, Output& out) {
  TargetModel target;
  if (args.target == "normal") {
    target = std_normal_target(1);
  } else if (args.target.rfind("normal:", 0) == 0) {
    target = std_normal_target(std::stoul(args.target.substr(7)));
  } else if (args.target == "funnel") {
    target = funnel_target();
  } else {
    throw ParseError("unknown target \"" + args.target + "\"");
  }

  ProposalSpec prop;
  if (args.algorithm == "mala") prop.kind = ProposalKind::kMala;
  else if (args.algorithm == "rwm") prop.kind = ProposalKind::kRwm;
  else throw ParseError("unknown algorithm \"" + args.algorithm + "\"");
  prop.scale = args.scale;

  CouplingSpec spec;
  if (args.coupling == "independent") spec.proposal = ProposalCouplingKind::kIndependent;
  else if (args.coupling == "crn") spec.proposal = ProposalCouplingKind::kCrn;
  else if (args.coupling == "reflection") spec.proposal = ProposalCouplingKind::kReflection;
  else if (args.coupling == "maximal") spec.proposal = ProposalCouplingKind::kMaximal;
  else throw ParseError("unknown coupling \"" + args.coupling + "\"");
  spec.acceptance = args.acceptance == "independent" ? AcceptanceCouplingKind::kIndependent
                                                     : AcceptanceCouplingKind::kCommonUniform;

  const Vec x0(target.dim, args.x0);
  const Vec y0(target.dim, args.y0);

  if (!args.trajectories.empty()) {
    // Sequential run with full step records dumped one JSON object per line.
    std::ofstream traj(args.trajectories, std::ios::trunc);
    if (!traj) throw std::runtime_error("cannot write " + args.trajectories);
    std::vector<long> times;
    for (int r = 0; r < args.replicates; ++r) {
      const auto t = run_coupled_trajectory(target, prop, spec, x0, y0, args.steps, args.seed,
                                            static_cast<std::uint64_t>(r), /*keep_steps=*/true);
      times.push_back(t.meeting_time);
      long step_idx = 1;
      for (const auto& srec : t.steps) {
        json rec{{"replicate", r},   {"step", step_idx++},  {"x", srec.x_next},
                 {"y", srec.y_next}, {"x_prop", srec.x_prop}, {"y_prop", srec.y_prop},
                 {"b_x", srec.b_x},  {"b_y", srec.b_y},       {"met", srec.met}};
        traj << rec.dump() << "\n";
      }
    }
    const MeetingSummary summary = summarize_meetings(std::move(times), args.steps);
    if (!args.out_csv.empty()) write_text_file(args.out_csv, format_csv(summary));
    print_summary(out, summary, 0, " (no exact bound on continuous spaces)");
    return kExitOk;
  }

  const MeetingSummary summary = simulate_meetings(target, prop, spec, x0, y0, args.steps,
                                                   args.replicates, args.seed, args.threads);
  if (!args.out_csv.empty()) write_text_file(args.out_csv, format_csv(summary));
  print_summary(out, summary, 0, " (no exact bound on continuous spaces)");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transition kernel couplings for Metropolis-Hastings chains"};
  app.require_subcommand(1);
  Output out;
  app.add_flag("--quiet", out.quiet, "suppress informational output");
  app.add_flag("--json", out.as_json, "emit a JSON result object on stdout");

  std::string problem_path, coupling_path, out_dir = "decomposition", out_file = "coupling.json";
  std::string via = "both", pair;
  bool check_exhaustive = false;

  auto* dec = app.add_subcommand("decompose",
                                 "split a transition coupling into a proposal coupling and an "
                                 "acceptance indicator coupling");
  dec->add_option("--problem", problem_path, "problem JSON file")->required();
  dec->add_option("--coupling", coupling_path, "transition coupling JSON file")->required();
  dec->add_option("--out", out_dir, "output directory");
  dec->add_flag("--check-exhaustive", check_exhaustive,
                "verify rectangle conditions exhaustively regardless of state count");

  auto* ver = app.add_subcommand("verify-maximal", "test a transition coupling for maximality");
  ver->add_option("--problem", problem_path, "problem JSON file")->required();
  ver->add_option("--coupling", coupling_path, "transition coupling JSON file")->required();
  ver->add_option("--via", via, "conditions | hahn | both")
      ->check(CLI::IsMember({"conditions", "hahn", "both"}));

  auto* bld = app.add_subcommand("build-maximal", "build the maximal coupling of two kernel rows");
  bld->add_option("--problem", problem_path, "problem JSON file")->required();
  bld->add_option("--pair", pair, "current states, e.g. 1,2")->required();
  bld->add_option("--out", out_file, "output coupling JSON file");

  SimulateArgs sim;
  sim.seed = default_seed();
  auto* s = app.add_subcommand("simulate", "run coupled chains and collect meeting times");
  s->add_option("--target", sim.target, "normal | normal:<dim> | funnel (continuous mode)");
  s->add_option("--problem", sim.problem_path, "problem JSON file (finite mode)");
  s->add_option("--algorithm", sim.algorithm, "rwm | mala");
  s->add_option("--proposal-scale", sim.scale, "RWM sd or MALA step");
  s->add_option("--coupling", sim.coupling,
                "continuous: independent|crn|reflection|maximal; finite adds "
                "maximal-proposal, independent-proposal");
  s->add_option("--acceptance", sim.acceptance, "common-uniform | independent");
  s->add_option("--pair", sim.pair, "finite-mode start pair, e.g. 1,2");
  s->add_option("--x0", sim.x0, "continuous-mode x start (every coordinate)");
  s->add_option("--y0", sim.y0, "continuous-mode y start (every coordinate)");
  s->add_option("--steps", sim.steps, "horizon")->check(CLI::PositiveNumber);
  s->add_option("--replicates", sim.replicates, "independent replicates")->check(CLI::PositiveNumber);
  s->add_option("--seed", sim.seed, "stream seed (default from KERCOUP_SEED)");
  s->add_option("--out", sim.out_csv, "meeting-time CSV path");
  s->add_option("--trajectories", sim.trajectories, "JSON-lines step dump (continuous mode)");
  s->add_option("--threads", sim.threads, "worker threads (0 = auto)");

  auto* cert = app.add_subcommand("certify-nonmax",
                                  "print the certificate that maximal transition couplings can be "
                                  "unreachable from maximal proposal couplings");

  CLI11_PARSE(app, argc, argv);

  int rc = kExitOk;
  try {
    if (dec->parsed()) {
      rc = cmd_decompose(problem_path, coupling_path, out_dir, check_exhaustive, out);
    } else if (ver->parsed()) {
      rc = cmd_verify_maximal(problem_path, coupling_path, via, out);
    } else if (bld->parsed()) {
      rc = cmd_build_maximal(problem_path, pair, out_file, out);
    } else if (cert->parsed()) {
      rc = cmd_certify_nonmax(out);
    } else if (s->parsed()) {
      rc = sim.problem_path.empty() ? simulate_continuous(sim, out) : simulate_finite(sim, out);
    }
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  } catch (const std::logic_error& e) {
    std::cerr << "internal check failure: " << e.what() << "\n";
    return kExitInternal;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInternal;
  }
  out.finish();
  return rc;
}
