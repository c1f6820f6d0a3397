#include "kercoup/target.hpp"

#include <cmath>
#include <stdexcept>

#include "kercoup/rng.hpp"

namespace kercoup {

TargetModel std_normal_target(std::size_t dim) {
  TargetModel t;
  t.dim = dim;
  t.name = "normal";
  t.log_density = [](const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return -0.5 * s;
  };
  t.grad_log_density = [](const std::vector<double>& x) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = -x[i];
    return g;
  };
  return t;
}

TargetModel funnel_target() {
  TargetModel t;
  t.dim = 2;
  t.name = "funnel";
  t.log_density = [](const std::vector<double>& x) {
    const double v = x[0], z = x[1];
    return -v * v / 18.0 - 0.5 * v - 0.5 * z * z * std::exp(-v);
  };
  t.grad_log_density = [](const std::vector<double>& x) {
    const double v = x[0], z = x[1];
    return std::vector<double>{-v / 9.0 - 0.5 + 0.5 * z * z * std::exp(-v), -z * std::exp(-v)};
  };
  return t;
}

GradientCheck validate_gradient(const TargetModel& target, int points, double rel_tol,
                                std::uint64_t seed) {
  if (!target.has_gradient()) throw std::invalid_argument("validate_gradient: no gradient supplied");
  GradientCheck out;
  RngStream rng(seed, 0, 0, Role::kMisc);
  for (int p = 0; p < points; ++p) {
    std::vector<double> x(target.dim);
    for (auto& v : x) v = 2.0 * rng.next_normal();
    const auto g = target.grad_log_density(x);
    for (std::size_t i = 0; i < target.dim; ++i) {
      const double h = 1e-5 * std::max(1.0, std::fabs(x[i]));
      auto xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      const double num = (target.log_density(xp) - target.log_density(xm)) / (2.0 * h);
      const double rel = std::fabs(num - g[i]) / std::max(std::fabs(g[i]), 1.0);
      if (rel > out.max_rel_error) {
        out.max_rel_error = rel;
        out.worst_point = x;
      }
    }
  }
  out.ok = out.max_rel_error <= rel_tol;
  return out;
}

}  // namespace kercoup
