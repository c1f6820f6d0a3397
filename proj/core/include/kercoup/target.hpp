#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace kercoup {

/// Continuous target with log-density and (optionally) its gradient.
/// Both callables must be safe to invoke from several threads at once.
struct TargetModel {
  std::size_t dim = 1;
  std::function<double(const std::vector<double>&)> log_density;
  std::function<std::vector<double>(const std::vector<double>&)> grad_log_density;  // may be null
  std::string name;

  bool has_gradient() const { return static_cast<bool>(grad_log_density); }
};

TargetModel std_normal_target(std::size_t dim = 1);

/// Neal's funnel in 2-D: v ~ N(0, 9), z | v ~ N(0, exp(v)).
TargetModel funnel_target();

struct GradientCheck {
  bool ok = true;
  double max_rel_error = 0.0;
  std::vector<double> worst_point;
};

/// Central-difference validation of grad_log_density at `points` random
/// locations (componentwise relative tolerance `rel_tol`).
GradientCheck validate_gradient(const TargetModel& target, int points, double rel_tol,
                                std::uint64_t seed);

}  // namespace kercoup
