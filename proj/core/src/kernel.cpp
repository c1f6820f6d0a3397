#include "kercoup/kernel.hpp"

#include <stdexcept>

namespace kercoup {

FiniteKernel FiniteKernel::checked(SpacePtr space, std::vector<Dist> rows) {
  if (rows.size() != space->size()) throw std::invalid_argument("FiniteKernel: wrong row count");
  for (const auto& r : rows) {
    if (!same_space(r.space, space)) throw std::invalid_argument("FiniteKernel: row on a different space");
  }
  return FiniteKernel{std::move(space), std::move(rows)};
}

FiniteKernel FiniteKernel::from_weights(SpacePtr space, std::vector<std::vector<Rational>> rows) {
  std::vector<Dist> d;
  d.reserve(rows.size());
  for (auto& r : rows) d.push_back(Dist::checked(space, std::move(r)));
  return checked(space, std::move(d));
}

bool FiniteKernel::is_non_lazy() const {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].w[i].is_zero()) return false;
  }
  return true;
}

AcceptanceMatrix AcceptanceMatrix::checked(SpacePtr space, std::vector<std::vector<Rational>> a) {
  const std::size_t n = space->size();
  if (a.size() != n) throw std::invalid_argument("AcceptanceMatrix: wrong row count");
  for (std::size_t x = 0; x < n; ++x) {
    if (a[x].size() != n) throw std::invalid_argument("AcceptanceMatrix: wrong column count");
    for (const auto& v : a[x]) {
      if (v.is_negative() || v > Rational(1)) {
        throw std::invalid_argument("AcceptanceMatrix: entry " + v.str() + " outside [0,1]");
      }
    }
    if (a[x][x] != Rational(1)) {
      throw std::invalid_argument("AcceptanceMatrix: a(x,x) must be 1 at state " + space->label(x));
    }
  }
  std::vector<std::vector<bool>> unreachable(n, std::vector<bool>(n, false));
  return AcceptanceMatrix{std::move(space), std::move(a), std::move(unreachable)};
}

AcceptanceMatrix AcceptanceMatrix::all_accept(SpacePtr space) {
  const std::size_t n = space->size();
  return checked(std::move(space), std::vector<std::vector<Rational>>(n, std::vector<Rational>(n, Rational(1))));
}

MhProblem MhProblem::make(FiniteKernel Q, AcceptanceMatrix a) {
  if (!same_space(Q.space, a.space)) throw std::invalid_argument("MhProblem: mismatched spaces");
  // Entries the proposal can never reach are immaterial; keep them flagged
  // regardless of how the matrix was constructed.
  for (std::size_t x = 0; x < Q.size(); ++x) {
    for (std::size_t xp = 0; xp < Q.size(); ++xp) {
      if (xp != x && Q.at(x, xp).is_zero()) a.unreachable[x][xp] = true;
    }
  }
  FiniteKernel P = generate_P(Q, a);
  return MhProblem{std::move(Q), std::move(a), std::move(P)};
}

namespace {

AcceptanceMatrix rates_from_rule(const Dist& pi, const FiniteKernel& Q, bool barker) {
  if (!same_space(pi.space, Q.space)) throw std::invalid_argument("acceptance: mismatched spaces");
  const std::size_t n = Q.size();
  for (std::size_t x = 0; x < n; ++x) {
    if (pi[x].is_zero()) {
      throw std::invalid_argument("acceptance: target mass is zero at state " + pi.space->label(x));
    }
  }
  std::vector<std::vector<Rational>> a(n, std::vector<Rational>(n, Rational(1)));
  std::vector<std::vector<bool>> unreachable(n, std::vector<bool>(n, false));
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t xp = 0; xp < n; ++xp) {
      if (xp == x) continue;  // diagonal stays 1
      const Rational forward = pi[x] * Q.at(x, xp);
      const Rational backward = pi[xp] * Q.at(xp, x);
      if (Q.at(x, xp).is_zero()) {
        a[x][xp] = Rational(1);  // never proposed, value immaterial
        unreachable[x][xp] = true;
      } else if (barker) {
        a[x][xp] = backward / (backward + forward);
      } else {
        a[x][xp] = min(Rational(1), backward / forward);
      }
    }
  }
  AcceptanceMatrix m = AcceptanceMatrix::checked(Q.space, std::move(a));
  m.unreachable = std::move(unreachable);
  return m;
}

}  // namespace

AcceptanceMatrix mh_acceptance(const Dist& pi, const FiniteKernel& Q) {
  return rates_from_rule(pi, Q, /*barker=*/false);
}

AcceptanceMatrix barker_acceptance(const Dist& pi, const FiniteKernel& Q) {
  return rates_from_rule(pi, Q, /*barker=*/true);
}

FiniteKernel generate_P(const FiniteKernel& Q, const AcceptanceMatrix& a) {
  if (!same_space(Q.space, a.space)) throw std::invalid_argument("generate_P: mismatched spaces");
  const std::size_t n = Q.size();
  std::vector<std::vector<Rational>> p(n, std::vector<Rational>(n, Rational(0)));
  for (std::size_t x = 0; x < n; ++x) {
    Rational rejected;
    for (std::size_t xp = 0; xp < n; ++xp) {
      if (xp == x) continue;
      p[x][xp] = Q.at(x, xp) * a.at(x, xp);
      rejected += Q.at(x, xp) * (Rational(1) - a.at(x, xp));
    }
    p[x][x] = Q.at(x, x) + rejected;
  }
  return FiniteKernel::from_weights(Q.space, std::move(p));
}

JointKernelReport check_joint_kernel_coupling(const KernelCoupling& pbar, const FiniteKernel& P,
                                              bool require_all_pairs) {
  JointKernelReport rep;
  const std::size_t n = P.size();
  if (require_all_pairs) {
    for (std::size_t x = 0; x < n; ++x) {
      for (std::size_t y = 0; y < n; ++y) {
        if (!pbar.count({x, y})) {
          rep.ok = false;
          rep.violations.push_back("missing pair (" + P.space->label(x) + "," + P.space->label(y) + ")");
        }
      }
    }
  }
  for (const auto& [pair, gamma] : pbar) {
    const auto [x, y] = pair;
    if (x >= n || y >= n) {
      rep.ok = false;
      rep.violations.push_back("pair index out of range");
      continue;
    }
    const auto c = check_coupling(gamma, P.row(x), P.row(y));
    if (!c.ok) {
      rep.ok = false;
      for (const auto& v : c.violations) {
        rep.violations.push_back("pair (" + P.space->label(x) + "," + P.space->label(y) + "): " + v);
      }
    }
  }
  return rep;
}

}  // namespace kercoup
