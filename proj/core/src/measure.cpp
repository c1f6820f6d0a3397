#include "kercoup/measure.hpp"

#include <stdexcept>

namespace kercoup {

namespace {

void require_nonneg(const std::vector<Rational>& w, const char* what) {
  for (const auto& x : w) {
    if (x.is_negative()) throw std::invalid_argument(std::string(what) + ": negative weight " + x.str());
  }
}

Rational sum(const std::vector<Rational>& w) {
  Rational t;
  for (const auto& x : w) t += x;
  return t;
}

void require_same_space(const SpacePtr& a, const SpacePtr& b, const char* where) {
  if (!same_space(a, b)) throw std::invalid_argument(std::string(where) + ": mismatched state spaces");
}

}  // namespace

SpacePtr make_space(std::size_t n) {
  std::vector<std::string> labels;
  labels.reserve(n);
  for (std::size_t i = 1; i <= n; ++i) labels.push_back(std::to_string(i));
  return make_space(std::move(labels));
}

Dist Dist::checked(SpacePtr space, std::vector<Rational> w) {
  if (!space || w.size() != space->size()) throw std::invalid_argument("Dist: wrong length");
  require_nonneg(w, "Dist");
  if (sum(w) != Rational(1)) throw std::invalid_argument("Dist: weights must sum to exactly 1");
  return Dist{std::move(space), std::move(w)};
}

Dist Dist::point_mass(SpacePtr space, std::size_t at) {
  std::vector<Rational> w(space->size(), Rational(0));
  w.at(at) = Rational(1);
  return Dist{std::move(space), std::move(w)};
}

Dist Dist::uniform(SpacePtr space) {
  const long n = static_cast<long>(space->size());
  std::vector<Rational> w(space->size(), Rational(1, n));
  return Dist{std::move(space), std::move(w)};
}

Rational Dist::total() const { return sum(w); }

SubDist SubDist::checked(SpacePtr space, std::vector<Rational> w) {
  if (!space || w.size() != space->size()) throw std::invalid_argument("SubDist: wrong length");
  require_nonneg(w, "SubDist");
  if (sum(w) > Rational(1)) throw std::invalid_argument("SubDist: total exceeds 1");
  return SubDist{std::move(space), std::move(w)};
}

SubDist SubDist::zero(SpacePtr space) {
  std::vector<Rational> w(space->size(), Rational(0));
  return SubDist{std::move(space), std::move(w)};
}

Rational SubDist::total() const { return sum(w); }

std::vector<std::size_t> SubDist::support() const {
  std::vector<std::size_t> s;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!w[i].is_zero()) s.push_back(i);
  }
  return s;
}

Dist SubDist::as_dist() const {
  if (total() != Rational(1)) throw std::invalid_argument("SubDist::as_dist: total is not 1");
  return Dist{space, w};
}

JointDist JointDist::zero(SpacePtr space) {
  const std::size_t n = space->size();
  return JointDist{std::move(space), std::vector<std::vector<Rational>>(n, std::vector<Rational>(n, Rational(0)))};
}

JointDist JointDist::checked(SpacePtr space, std::vector<std::vector<Rational>> w, bool require_probability) {
  const std::size_t n = space->size();
  if (w.size() != n) throw std::invalid_argument("JointDist: wrong row count");
  Rational t;
  for (const auto& row : w) {
    if (row.size() != n) throw std::invalid_argument("JointDist: wrong column count");
    for (const auto& x : row) {
      if (x.is_negative()) throw std::invalid_argument("JointDist: negative entry " + x.str());
      t += x;
    }
  }
  if (require_probability ? (t != Rational(1)) : (t > Rational(1))) {
    throw std::invalid_argument("JointDist: bad total mass " + t.str());
  }
  return JointDist{std::move(space), std::move(w)};
}

JointDist JointDist::product(const Dist& mu, const Dist& nu) {
  require_same_space(mu.space, nu.space, "JointDist::product");
  JointDist g = zero(mu.space);
  for (std::size_t i = 0; i < mu.size(); ++i) {
    for (std::size_t j = 0; j < nu.size(); ++j) g.w[i][j] = mu[i] * nu[j];
  }
  return g;
}

JointDist JointDist::diagonal(const Dist& mu) {
  JointDist g = zero(mu.space);
  for (std::size_t i = 0; i < mu.size(); ++i) g.w[i][i] = mu[i];
  return g;
}

Rational JointDist::total() const {
  Rational t;
  for (const auto& row : w) {
    for (const auto& x : row) t += x;
  }
  return t;
}

Rational JointDist::diagonal_mass() const {
  Rational t;
  for (std::size_t i = 0; i < w.size(); ++i) t += w[i][i];
  return t;
}

std::vector<Rational> JointDist::x_marginal() const {
  std::vector<Rational> m(w.size(), Rational(0));
  for (std::size_t i = 0; i < w.size(); ++i) {
    for (std::size_t j = 0; j < w.size(); ++j) m[i] += w[i][j];
  }
  return m;
}

std::vector<Rational> JointDist::y_marginal() const {
  std::vector<Rational> m(w.size(), Rational(0));
  for (std::size_t i = 0; i < w.size(); ++i) {
    for (std::size_t j = 0; j < w.size(); ++j) m[j] += w[i][j];
  }
  return m;
}

JointDist JointDist::operator+(const JointDist& o) const {
  JointDist r = *this;
  for (std::size_t i = 0; i < w.size(); ++i) {
    for (std::size_t j = 0; j < w.size(); ++j) r.w[i][j] += o.w[i][j];
  }
  return r;
}

std::vector<std::size_t> HahnDecomposition::positive_indices() const {
  std::vector<std::size_t> s;
  for (std::size_t i = 0; i < positive_set.size(); ++i) {
    if (positive_set[i]) s.push_back(i);
  }
  return s;
}

Rational tv_distance(const Dist& mu, const Dist& nu) {
  require_same_space(mu.space, nu.space, "tv_distance");
  Rational t;
  for (std::size_t i = 0; i < mu.size(); ++i) t += (mu[i] - nu[i]).abs();
  return t / Rational(2);
}

HahnDecomposition hahn_jordan(const Dist& mu, const Dist& nu) {
  require_same_space(mu.space, nu.space, "hahn_jordan");
  const std::size_t n = mu.size();
  std::vector<bool> pos(n, false);
  std::vector<Rational> up(n), lo(n), mt(n);
  for (std::size_t i = 0; i < n; ++i) {
    pos[i] = mu[i] >= nu[i];  // ties go into the positive set
    up[i] = max(mu[i] - nu[i], Rational(0));
    lo[i] = max(nu[i] - mu[i], Rational(0));
    mt[i] = min(mu[i], nu[i]);
  }
  return HahnDecomposition{std::move(pos),
                           SubDist{mu.space, std::move(up)},
                           SubDist{mu.space, std::move(lo)},
                           SubDist{mu.space, std::move(mt)}};
}

CouplingReport check_coupling(const JointDist& gamma, const Dist& mu, const Dist& nu) {
  require_same_space(gamma.space, mu.space, "check_coupling");
  require_same_space(gamma.space, nu.space, "check_coupling");
  CouplingReport rep;
  const auto xm = gamma.x_marginal();
  const auto ym = gamma.y_marginal();
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (xm[i] != mu[i]) {
      rep.ok = false;
      rep.violations.push_back("x-marginal at state " + gamma.space->label(i) + ": got " + xm[i].str() +
                               ", expected " + mu[i].str());
    }
    if (ym[i] != nu[i]) {
      rep.ok = false;
      rep.violations.push_back("y-marginal at state " + gamma.space->label(i) + ": got " + ym[i].str() +
                               ", expected " + nu[i].str());
    }
  }
  return rep;
}

MaximalityVerdict is_maximal_coupling(const JointDist& gamma, const Dist& mu, const Dist& nu) {
  auto rep = check_coupling(gamma, mu, nu);
  if (!rep.ok) {
    throw std::invalid_argument("is_maximal_coupling: gamma is not a coupling (" + rep.violations.front() + ")");
  }
  const auto hahn = hahn_jordan(mu, nu);
  MaximalityVerdict v;
  v.witness_set = hahn.positive_set;
  v.diagonal = gamma.diagonal_mass();
  v.bound = Rational(1) - tv_distance(mu, nu);
  v.maximal = true;
  const std::size_t n = gamma.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || gamma.at(i, j).is_zero()) continue;
      if (!hahn.positive_set[i]) {
        v.maximal = false;
        v.violations.push_back("off-diagonal mass " + gamma.at(i, j).str() + " at (" + gamma.space->label(i) +
                               "," + gamma.space->label(j) + ") with x-destination outside the Hahn set");
      } else if (hahn.positive_set[j]) {
        v.maximal = false;
        v.violations.push_back("off-diagonal mass " + gamma.at(i, j).str() + " at (" + gamma.space->label(i) +
                               "," + gamma.space->label(j) + ") with y-destination inside the Hahn set");
      }
    }
  }
  // The support condition and the diagonal-mass condition are equivalent;
  // holding both here guards the implementation against itself.
  if (v.maximal != (v.diagonal == v.bound)) {
    throw std::logic_error("is_maximal_coupling: support test and diagonal test disagree");
  }
  return v;
}

JointDist build_maximal_coupling(const Dist& mu, const Dist& nu, ResidualStrategy strategy) {
  const auto hahn = hahn_jordan(mu, nu);
  const std::size_t n = mu.size();
  JointDist gamma = JointDist::zero(mu.space);
  for (std::size_t i = 0; i < n; ++i) gamma.w[i][i] = hahn.meet[i];

  const Rational tv = hahn.upper.total();
  if (tv.is_zero()) return gamma;  // equal measures: pure diagonal

  // Residual coupling of (upper, lower). The supports are disjoint, so any
  // residual coupling puts zero mass on the diagonal.
  switch (strategy) {
    case ResidualStrategy::kNormalizedProduct: {
      for (std::size_t i = 0; i < n; ++i) {
        if (hahn.upper[i].is_zero()) continue;
        for (std::size_t j = 0; j < n; ++j) {
          if (hahn.lower[j].is_zero()) continue;
          gamma.w[i][j] += hahn.upper[i] * hahn.lower[j] / tv;
        }
      }
      break;
    }
    case ResidualStrategy::kGreedy: {
      std::vector<Rational> row = hahn.upper.w;
      std::vector<Rational> col = hahn.lower.w;
      std::size_t i = 0, j = 0;
      while (i < n && j < n) {
        if (row[i].is_zero()) { ++i; continue; }
        if (col[j].is_zero()) { ++j; continue; }
        const Rational m = min(row[i], col[j]);
        gamma.w[i][j] += m;
        row[i] -= m;
        col[j] -= m;
      }
      break;
    }
  }
  return gamma;
}

}  // namespace kercoup
