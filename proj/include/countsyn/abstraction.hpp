#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "countsyn/common.hpp"
#include "countsyn/model.hpp"

namespace countsyn {

// Floors are nudged by +1e-12 so exact-boundary inputs land deterministically.
inline long grid_index(double x, double eta) {
  return static_cast<long>(std::floor(x / eta + 1e-12));
}

/// kappa_eta(x) = eta*floor(x/eta) + (eta/2)*1, componentwise.
inline Vec quantize(const Vec& x, double eta) {
  Vec q(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    q[i] = eta * static_cast<double>(grid_index(x[i], eta)) + 0.5 * eta;
  return q;
}

/// Uniform grid over a box: the point set kappa_eta(X), indexed
/// lexicographically with axis 0 most significant.
struct Grid {
  double eta = 1.0;
  Box domain;
  std::vector<long> lo;  // floor(lower/eta) per axis
  std::vector<long> hi;  // floor(upper/eta) per axis

  Grid() = default;
  Grid(double eta_, Box domain_) : eta(eta_), domain(std::move(domain_)) {
    if (!(eta > 0)) throw std::invalid_argument("Grid: eta must be positive");
    domain.validate();
    const int n = domain.dim();
    lo.resize(n);
    hi.resize(n);
    for (int i = 0; i < n; ++i) {
      lo[i] = grid_index(domain.lower[i], eta);
      hi[i] = grid_index(domain.upper[i], eta);
    }
  }

  int dim() const { return domain.dim(); }

  long axis_count(int axis) const { return hi[axis] - lo[axis] + 1; }

  long state_count() const {
    long n = 1;
    for (int i = 0; i < dim(); ++i) n *= axis_count(i);
    return n;
  }

  long flatten(const std::vector<long>& idx) const {
    long flat = 0;
    for (int i = 0; i < dim(); ++i) flat = flat * axis_count(i) + (idx[i] - lo[i]);
    return flat;
  }

  std::vector<long> unflatten(long flat) const {
    std::vector<long> idx(dim());
    for (int i = dim() - 1; i >= 0; --i) {
      long span = axis_count(i);
      idx[i] = lo[i] + flat % span;
      flat /= span;
    }
    return idx;
  }

  Vec point(long flat) const {
    auto idx = unflatten(flat);
    Vec p(dim());
    for (int i = 0; i < dim(); ++i) p[i] = eta * static_cast<double>(idx[i]) + 0.5 * eta;
    return p;
  }

  /// Flat index of kappa_eta(x), or nullopt when the cell is off-grid.
  std::optional<long> index_of(const Vec& x) const {
    std::vector<long> idx(dim());
    for (int i = 0; i < dim(); ++i) {
      idx[i] = grid_index(x[i], eta);
      if (idx[i] < lo[i] || idx[i] > hi[i]) return std::nullopt;
    }
    return flatten(idx);
  }
};

/// The (tau,eta)-discretized DFTS: grid states, per-mode successor table with
/// -1 for transitions whose nominal flow exits the domain.
struct Abstraction {
  Grid grid;
  std::vector<std::string> mode_ids;
  double tau = 0.0;
  double epsilon = 0.0;  // bisimilarity margin attached to this abstraction
  std::vector<std::int32_t> succ;  // flat [state*n_modes + mode], -1 encodes bottom

  long state_count() const { return grid.state_count(); }
  int mode_count() const { return static_cast<int>(mode_ids.size()); }

  std::int32_t successor(long state, int mode) const {
    return succ[static_cast<std::size_t>(state) * mode_count() + mode];
  }
};

/// Smallest epsilon solving Prop. 1's inequality in the exponential KL family:
/// eps* = max_mu (delta/K (e^{K tau}-1) + eta/2) / (1 - M e^{-lambda tau}).
inline double min_bisim_epsilon(const SwitchedModel& model, double tau, double eta) {
  model.validate();
  double eps = 0.0;
  for (const auto& m : model.modes) {
    double contraction = m.kl_gain * std::exp(-m.kl_rate * tau);
    if (contraction >= 1.0)
      throw CertificateError("mode " + m.id +
                             ": M e^{-lambda tau} >= 1, no epsilon exists for this (tau,eta)");
    double perturb =
        m.disturbance_bound / m.lipschitz * (std::exp(m.lipschitz * tau) - 1.0);
    eps = std::max(eps, (perturb + 0.5 * eta) / (1.0 - contraction));
  }
  return eps;
}

/// Validates Prop. 1's inequality at a given epsilon, every mode.
inline bool check_epsilon(const SwitchedModel& model, double tau, double eta, double eps) {
  for (const auto& m : model.modes) {
    double lhs = m.kl_gain * eps * std::exp(-m.kl_rate * tau) +
                 m.disturbance_bound / m.lipschitz * (std::exp(m.lipschitz * tau) - 1.0) +
                 0.5 * eta;
    if (lhs > eps + 1e-12) return false;
  }
  return true;
}

/// Builds the abstraction: states kappa_eta(X) in lexicographic axis order,
/// successors kappa_eta(phi_mu(tau, q, 0)), domain exits recorded as -1.
inline Abstraction build_abstraction(const SwitchedModel& model, double tau, double eta) {
  model.validate();
  if (!(tau > 0) || !(eta > 0))
    throw std::invalid_argument("build_abstraction: tau and eta must be positive");

  Abstraction abs;
  abs.grid = Grid(eta, model.domain);
  abs.tau = tau;
  for (const auto& m : model.modes) abs.mode_ids.push_back(m.id);

  const long n_states = abs.grid.state_count();
  const int n_modes = model.mode_count();
  abs.succ.assign(static_cast<std::size_t>(n_states) * n_modes, -1);

  const Vec zero(model.dimension(), 0.0);
  parallel_for(static_cast<std::size_t>(n_states), [&](std::size_t q) {
    Vec x = abs.grid.point(static_cast<long>(q));
    for (int mu = 0; mu < n_modes; ++mu) {
      Vec y = flow(model.modes[mu], x, tau, zero);
      // successor exists iff the quantized image is itself a grid state
      auto idx = abs.grid.index_of(y);
      abs.succ[q * n_modes + mu] = idx ? static_cast<std::int32_t>(*idx) : -1;
    }
  });
  return abs;
}

/// A counting set over the abstraction: explicit (state, mode) membership
/// plus the bound R. Kept sorted for binary-search lookups.
struct DiscreteCountingSet {
  std::vector<std::pair<int, int>> members;  // (state index, mode index)
  double bound = 0.0;

  void normalize() {
    std::sort(members.begin(), members.end());
    members.erase(std::unique(members.begin(), members.end()), members.end());
  }

  bool contains(int state, int mode) const {
    return std::binary_search(members.begin(), members.end(), std::make_pair(state, mode));
  }

  void validate(long n_states, int n_modes) const {
    for (auto [q, m] : members)
      if (q < 0 || q >= n_states || m < 0 || m >= n_modes)
        throw std::invalid_argument("DiscreteCountingSet: index out of range");
  }

  /// Product-form constructor X^Q x X^U.
  static DiscreteCountingSet product(const std::vector<int>& states,
                                     const std::vector<int>& modes, double bound) {
    DiscreteCountingSet s;
    s.bound = bound;
    s.members.reserve(states.size() * modes.size());
    for (int q : states)
      for (int m : modes) s.members.emplace_back(q, m);
    s.normalize();
    return s;
  }

  /// Mode-only counting set (all states), Eq.-2 style.
  static DiscreteCountingSet mode_only(long n_states, const std::vector<int>& modes,
                                       double bound) {
    std::vector<int> all(n_states);
    for (long q = 0; q < n_states; ++q) all[q] = static_cast<int>(q);
    return product(all, modes, bound);
  }
};

/// Continuous-form counting set: a box (or its complement) in state space
/// times a mode subset, with bound R.
struct ContinuousCountingSet {
  Box box;
  bool complement = false;
  std::vector<int> modes;  // mode indices; empty means all modes
  double bound = 0.0;

  bool state_member(const Vec& x) const {
    bool inside = box.contains(x);
    return complement ? !inside : inside;
  }
  bool mode_member(int mu) const {
    if (modes.empty()) return true;
    return std::find(modes.begin(), modes.end(), mu) != modes.end();
  }
};

namespace detail {

inline std::vector<int> collect_cells(const Grid& grid, const std::vector<long>& klo,
                                      const std::vector<long>& khi) {
  std::vector<int> out;
  std::vector<long> idx = klo;
  const int n = grid.dim();
  while (true) {
    out.push_back(static_cast<int>(grid.flatten(idx)));
    int axis = n - 1;
    while (axis >= 0) {
      if (++idx[axis] <= khi[axis]) break;
      idx[axis] = klo[axis];
      --axis;
    }
    if (axis < 0) break;
  }
  return out;
}

// Grid cells whose closed hyperbox meets the closed box inflated by eps;
// shared faces count as intersecting.
inline std::vector<int> cells_meeting(const Grid& grid, const Box& box, double eps) {
  const int n = grid.dim();
  const double tie = 1e-9 * grid.eta;
  std::vector<long> klo(n), khi(n);
  for (int i = 0; i < n; ++i) {
    double a = box.lower[i] - eps;
    double b = box.upper[i] + eps;
    // need eta*(k+1) >= a and eta*k <= b
    long kmin = static_cast<long>(std::ceil((a - tie) / grid.eta - 1.0 - 1e-12));
    long kmax = static_cast<long>(std::floor((b + tie) / grid.eta + 1e-12));
    klo[i] = std::max(kmin, grid.lo[i]);
    khi[i] = std::min(kmax, grid.hi[i]);
    if (klo[i] > khi[i]) return {};
  }
  return collect_cells(grid, klo, khi);
}

// Grid cells whose hyperbox lies strictly inside the box deflated by eps;
// shared faces are excluded.
inline std::vector<int> cells_inside(const Grid& grid, const Box& box, double eps) {
  const int n = grid.dim();
  const double tie = 1e-9 * grid.eta;
  std::vector<long> klo(n), khi(n);
  for (int i = 0; i < n; ++i) {
    double a = box.lower[i] + eps;
    double b = box.upper[i] - eps;
    if (!(a < b)) return {};
    // need eta*k > a and eta*(k+1) < b
    long kmin = static_cast<long>(std::floor((a + tie) / grid.eta + 1e-12)) + 1;
    long kmax = static_cast<long>(std::ceil((b - tie) / grid.eta - 1e-12)) - 2;
    klo[i] = std::max(kmin, grid.lo[i]);
    khi[i] = std::min(kmax, grid.hi[i]);
    if (klo[i] > khi[i]) return {};
  }
  return collect_cells(grid, klo, khi);
}

inline std::vector<int> all_modes_or(const std::vector<int>& modes, int n_modes) {
  if (!modes.empty()) return modes;
  std::vector<int> all(n_modes);
  for (int m = 0; m < n_modes; ++m) all[m] = m;
  return all;
}

inline std::vector<int> complement_states(const Grid& grid, const std::vector<int>& states) {
  std::vector<char> mark(grid.state_count(), 0);
  for (int q : states) mark[q] = 1;
  std::vector<int> out;
  for (long q = 0; q < grid.state_count(); ++q)
    if (!mark[q]) out.push_back(static_cast<int>(q));
  return out;
}

}  // namespace detail

/// G^{+eps}: kappa_eta(X ⊕ B_inf(0,eps)) x X^U. For box complements this is
/// the complement (over the grid) of the strict interior of the deflated box.
inline DiscreteCountingSet expand_set(const ContinuousCountingSet& set, double eps,
                                      const Grid& grid, int n_modes) {
  if (eps < 0) throw std::invalid_argument("expand_set: eps must be >= 0");
  std::vector<int> states = set.complement
                                ? detail::complement_states(grid, detail::cells_inside(grid, set.box, eps))
                                : detail::cells_meeting(grid, set.box, eps);
  return DiscreteCountingSet::product(states, detail::all_modes_or(set.modes, n_modes),
                                      set.bound);
}

/// G^{-eps}: Minkowski-difference analogue (caller supplies eps + eta/2 for
/// the Thm-2 direction). Empty result is allowed.
inline DiscreteCountingSet contract_set(const ContinuousCountingSet& set, double eps,
                                        const Grid& grid, int n_modes) {
  if (eps < 0) throw std::invalid_argument("contract_set: eps must be >= 0");
  std::vector<int> states = set.complement
                                ? detail::complement_states(grid, detail::cells_meeting(grid, set.box, eps))
                                : detail::cells_inside(grid, set.box, eps);
  return DiscreteCountingSet::product(states, detail::all_modes_or(set.modes, n_modes),
                                      set.bound);
}

}  // namespace countsyn
