#include "kercoup/density.hpp"

#include <cmath>
#include <stdexcept>

namespace kercoup {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014327;

double simpson(double a, double fa, double fm, double b, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

struct AdaptState {
  const std::function<double(double)>& f;
  double tol;
  int max_depth;
  long evals = 0;
  double err = 0.0;
};

double adapt(AdaptState& st, double a, double fa, double b, double fb, double m, double fm,
             double whole, int depth) {
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = st.f(lm), frm = st.f(rm);
  st.evals += 2;
  const double left = simpson(a, fa, flm, m, fm);
  const double right = simpson(m, fm, frm, b, fb);
  const double delta = left + right - whole;
  if (depth >= st.max_depth || std::fabs(delta) <= 15.0 * st.tol) {
    st.err += std::fabs(delta) / 15.0;
    return left + right + delta / 15.0;
  }
  return adapt(st, a, fa, m, fm, lm, flm, left, depth + 1) +
         adapt(st, m, fm, b, fb, rm, frm, right, depth + 1);
}

double proposal_mean_1d(const TargetModel& target, const ProposalSpec& prop, double x) {
  if (prop.kind == ProposalKind::kRwm) return x;
  if (!target.has_gradient()) throw std::invalid_argument("MALA density needs grad_log_density");
  return x + prop.scale * target.grad_log_density({x})[0];
}

double proposal_sd_1d(const ProposalSpec& prop) {
  return prop.kind == ProposalKind::kRwm ? prop.scale : std::sqrt(2.0 * prop.scale);
}

}  // namespace

QuadratureResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                                    double tol, int max_depth) {
  // Start from uniform panels so integrands that vanish on an interval
  // (acceptance plateaus make the m-functions do exactly that) cannot fool
  // the refinement test at the first level.
  constexpr int kPanels = 32;
  AdaptState st{f, tol / kPanels, max_depth};
  QuadratureResult out;
  const double h = (b - a) / kPanels;
  double left_edge = a;
  double f_left = f(left_edge);
  ++st.evals;
  for (int p = 0; p < kPanels; ++p) {
    const double right_edge = (p == kPanels - 1) ? b : a + (p + 1) * h;
    const double mid = 0.5 * (left_edge + right_edge);
    const double f_mid = f(mid), f_right = f(right_edge);
    st.evals += 2;
    const double whole = simpson(left_edge, f_left, f_mid, right_edge, f_right);
    out.value += adapt(st, left_edge, f_left, right_edge, f_right, mid, f_mid, whole, 0);
    left_edge = right_edge;
    f_left = f_right;
  }
  out.error = st.err;
  out.evaluations = st.evals;
  return out;
}

double proposal_density_1d(const TargetModel& target, const ProposalSpec& prop, double x,
                           double xp) {
  const double sd = proposal_sd_1d(prop);
  const double d = (xp - proposal_mean_1d(target, prop, x)) / sd;
  return kInvSqrt2Pi / sd * std::exp(-0.5 * d * d);
}

double acceptance_rate_1d(const TargetModel& target, const ProposalSpec& prop, double x,
                          double xp) {
  const double lp_to = target.log_density({xp});
  if (!std::isfinite(lp_to)) return 0.0;
  double logr = lp_to - target.log_density({x});
  if (prop.kind == ProposalKind::kMala) {
    logr += std::log(proposal_density_1d(target, prop, xp, x)) -
            std::log(proposal_density_1d(target, prop, x, xp));
  }
  return std::min(1.0, std::exp(logr));
}

double transition_density_1d(const TargetModel& target, const ProposalSpec& prop, double x,
                             double xp) {
  return proposal_density_1d(target, prop, x, xp) * acceptance_rate_1d(target, prop, x, xp);
}

QuadratureResult rejection_probability_1d(const TargetModel& target, const ProposalSpec& prop,
                                          double x, double tol) {
  if (target.dim != 1) throw std::invalid_argument("rejection_probability_1d: needs a 1-D target");
  const double mean = proposal_mean_1d(target, prop, x);
  const double sd = proposal_sd_1d(prop);
  const auto integrand = [&](double z) { return transition_density_1d(target, prop, x, z); };
  auto q = integrate_adaptive(integrand, mean - 15.0 * sd, mean + 15.0 * sd, tol);
  q.value = 1.0 - q.value;
  return q;
}

McIntegral rejection_probability_mc(const TargetModel& target, const ProposalSpec& prop,
                                    const Vec& x, long n, std::uint64_t seed) {
  McIntegral out;
  out.n = n;
  // log q(from -> to) up to constants shared by the forward/backward pair.
  auto log_q = [&](const Vec& from, const Vec& to) {
    const double sd = proposal_sd_1d(prop);
    Vec mean = from;
    if (prop.kind == ProposalKind::kMala) {
      const auto g = target.grad_log_density(from);
      for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += prop.scale * g[i];
    }
    double s = 0.0;
    for (std::size_t i = 0; i < to.size(); ++i) {
      const double d = to[i] - mean[i];
      s += d * d;
    }
    return -0.5 * s / (sd * sd);
  };
  double sum = 0.0, sumsq = 0.0;
  for (long i = 0; i < n; ++i) {
    const auto rec = mh_step(target, prop, x, seed, static_cast<std::uint64_t>(i), 0);
    // Average the acceptance probability of the drawn proposal rather than
    // the accept indicator; the estimator variance drops.
    double a = 0.0;
    const double lp_to = target.log_density(rec.proposal);
    if (std::isfinite(lp_to)) {
      double logr = lp_to - target.log_density(x);
      if (prop.kind == ProposalKind::kMala) logr += log_q(rec.proposal, x) - log_q(x, rec.proposal);
      a = std::min(1.0, std::exp(logr));
    }
    const double r = 1.0 - a;
    sum += r;
    sumsq += r * r;
  }
  out.value = sum / static_cast<double>(n);
  const double var = std::max(0.0, sumsq / static_cast<double>(n) - out.value * out.value);
  out.standard_error = std::sqrt(var / static_cast<double>(n));
  return out;
}

double m_function_1d(const TargetModel& target, const ProposalSpec& prop, double x, double xp,
                     double r_x) {
  if (r_x == 0.0) return 0.0;
  return proposal_density_1d(target, prop, x, xp) * (1.0 - acceptance_rate_1d(target, prop, x, xp)) /
         r_x;
}

TwoStepDensity two_step_density(const TargetModel& target, const ProposalSpec& prop,
                                const PbarDensitySpec& pbar_spec, double x, double y, double xp,
                                double yp, double quad_tol) {
  if (target.dim != 1) throw std::invalid_argument("two_step_density: needs a 1-D target");
  TwoStepDensity out;
  const auto rx = rejection_probability_1d(target, prop, x, quad_tol);
  const auto ry = rejection_probability_1d(target, prop, y, quad_tol);
  out.r_x = rx.value;
  out.r_y = ry.value;
  out.r_x_error = rx.error;
  out.r_y_error = ry.error;

  const double px = transition_density_1d(target, prop, x, xp);
  const double py = transition_density_1d(target, prop, y, yp);
  out.m_x = m_function_1d(target, prop, x, xp, out.r_x);
  out.m_y = m_function_1d(target, prop, y, yp, out.r_y);

  switch (pbar_spec.kind) {
    case PbarDensityKind::kIndependent: {
      out.p_joint = px * py;
      out.pbar_y = px * out.r_y;
      out.pbar_x = out.r_x * py;
      out.rbar = out.r_x * out.r_y;
      break;
    }
    case PbarDensityKind::kSplit: {
      if (!pbar_spec.nu_density || pbar_spec.epsilon <= 0.0 || pbar_spec.epsilon >= 1.0) {
        throw std::invalid_argument("two_step_density: split spec needs nu density and epsilon in (0,1)");
      }
      const double eps = pbar_spec.epsilon;
      const double res_x = px - eps * pbar_spec.nu_density(xp);
      const double res_y = py - eps * pbar_spec.nu_density(yp);
      if (res_x < 0.0 || res_y < 0.0) {
        throw std::invalid_argument("two_step_density: minorization violated at the query point");
      }
      out.p_joint = res_x * res_y / (1.0 - eps);
      out.pbar_y = res_x * out.r_y / (1.0 - eps);
      out.pbar_x = out.r_x * res_y / (1.0 - eps);
      out.rbar = out.r_x * out.r_y / (1.0 - eps);
      break;
    }
  }
  out.qbar = out.p_joint + out.pbar_y * out.m_y + out.m_x * out.pbar_x + out.m_x * out.m_y * out.rbar;
  if (out.qbar > 0.0) {
    out.p_accept_x = (out.p_joint + out.pbar_y * out.m_y) / out.qbar;
    out.p_accept_y = (out.p_joint + out.pbar_x * out.m_x) / out.qbar;
  }
  return out;
}

QuadratureResult two_step_density_normalization(const TargetModel& target, const ProposalSpec& prop,
                                                const PbarDensitySpec& pbar_spec, double x, double y,
                                                double quad_tol) {
  if (pbar_spec.kind != PbarDensityKind::kIndependent) {
    throw std::invalid_argument("two_step_density_normalization: implemented for the independent spec");
  }
  const auto rx = rejection_probability_1d(target, prop, x, quad_tol);
  const auto ry = rejection_probability_1d(target, prop, y, quad_tol);

  auto axis_integrals = [&](double from, const QuadratureResult& r) {
    const double mean = proposal_mean_1d(target, prop, from);
    const double sd = proposal_sd_1d(prop);
    const auto p_int = integrate_adaptive(
        [&](double z) { return transition_density_1d(target, prop, from, z); }, mean - 15.0 * sd,
        mean + 15.0 * sd, quad_tol);
    const auto m_int = integrate_adaptive(
        [&](double z) { return m_function_1d(target, prop, from, z, r.value); }, mean - 15.0 * sd,
        mean + 15.0 * sd, quad_tol);
    return std::pair<QuadratureResult, QuadratureResult>{p_int, m_int};
  };
  const auto [px_int, mx_int] = axis_integrals(x, rx);
  const auto [py_int, my_int] = axis_integrals(y, ry);

  QuadratureResult out;
  // qbar integrates termwise to:
  //   (int p_x)(int p_y) + (int p_x) r_y (int m_y)
  // + r_x (int m_x)(int p_y) + r_x r_y (int m_x)(int m_y)
  out.value = px_int.value * py_int.value + px_int.value * ry.value * my_int.value +
              rx.value * mx_int.value * py_int.value +
              rx.value * ry.value * mx_int.value * my_int.value;
  out.error = px_int.error + py_int.error + mx_int.error + my_int.error + rx.error + ry.error;
  out.evaluations = px_int.evaluations + py_int.evaluations + mx_int.evaluations +
                    my_int.evaluations + rx.evaluations + ry.evaluations;
  return out;
}

}  // namespace kercoup
