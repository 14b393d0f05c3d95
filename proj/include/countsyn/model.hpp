#pragma once

#include <cstdio>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "countsyn/common.hpp"

namespace countsyn {

/// One term c * prod_i x_i^e_i of a sparse multivariate polynomial.
struct Monomial {
  std::vector<unsigned> exponents;
  double coeff = 0.0;
};

struct Polynomial {
  std::vector<Monomial> terms;

  double eval(std::span<const double> x) const {
    double acc = 0.0;
    for (const auto& t : terms) {
      double m = t.coeff;
      for (std::size_t i = 0; i < t.exponents.size(); ++i) {
        double xi = x[i];
        for (unsigned k = 0; k < t.exponents[i]; ++k) m *= xi;
      }
      acc += m;
    }
    return acc;
  }

  /// Exact partial derivative with respect to axis (dropping vanished terms).
  Polynomial derivative(std::size_t axis) const {
    Polynomial d;
    for (const auto& t : terms) {
      if (axis >= t.exponents.size() || t.exponents[axis] == 0) continue;
      Monomial m = t;
      m.coeff *= static_cast<double>(t.exponents[axis]);
      m.exponents[axis] -= 1;
      d.terms.push_back(std::move(m));
    }
    return d;
  }

  /// Convenience builders for the common affine pieces.
  static Polynomial constant(int dim, double c) {
    Polynomial p;
    p.terms.push_back({std::vector<unsigned>(dim, 0u), c});
    return p;
  }
  Polynomial& add_term(std::vector<unsigned> exps, double c) {
    terms.push_back({std::move(exps), c});
    return *this;
  }
};

/// A mode of the switched family: polynomial vector field plus the stability
/// and disturbance certificates of Assumptions 1-2 (beta(r,t) = M r e^{-lt}).
struct Mode {
  std::string id;
  std::vector<Polynomial> field;  // one polynomial per coordinate
  double lipschitz = 1.0;         // K, sup-norm Lipschitz constant on the domain
  double kl_gain = 1.0;           // M
  double kl_rate = 1.0;           // lambda
  double disturbance_bound = 0.0; // delta_bar

  int dimension() const { return static_cast<int>(field.size()); }

  void validate() const {
    if (field.empty()) throw std::invalid_argument("Mode " + id + ": empty field");
    if (!(lipschitz > 0)) throw std::invalid_argument("Mode " + id + ": K must be > 0");
    // M*r at t=0 must dominate the identity for the certificate to be a KL bound
    if (!(kl_gain >= 1.0)) throw std::invalid_argument("Mode " + id + ": M must be >= 1");
    if (!(kl_rate > 0)) throw std::invalid_argument("Mode " + id + ": lambda must be > 0");
    if (disturbance_bound < 0)
      throw std::invalid_argument("Mode " + id + ": delta_bar must be >= 0");
  }
};

struct SwitchedModel {
  std::vector<Mode> modes;
  Box domain;

  int dimension() const { return modes.empty() ? 0 : modes.front().dimension(); }
  int mode_count() const { return static_cast<int>(modes.size()); }

  void validate() const {
    if (modes.empty()) throw std::invalid_argument("SwitchedModel: no modes");
    domain.validate();
    int n = modes.front().dimension();
    if (domain.dim() != n)
      throw std::invalid_argument("SwitchedModel: domain dimension mismatch");
    for (const auto& m : modes) {
      m.validate();
      if (m.dimension() != n)
        throw std::invalid_argument("SwitchedModel: modes must share the state dimension");
    }
  }
};

/// f_mu(x) + d with the disturbance entering as an additive field offset.
inline Vec eval_field(const Mode& mode, const Vec& x, const Vec& d) {
  const std::size_t n = mode.field.size();
  if (x.size() != n || d.size() != n)
    throw std::invalid_argument("eval_field: dimension mismatch");
  for (double di : d)
    if (std::abs(di) > mode.disturbance_bound + 1e-15)
      throw std::invalid_argument("eval_field: disturbance bound exceeded");
  Vec out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = mode.field[i].eval(x) + d[i];
  return out;
}

namespace detail {
inline void field_into(const Mode& mode, const Vec& x, const Vec& d, Vec& out) {
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = mode.field[i].eval(x) + d[i];
}
}  // namespace detail

/// Flow map phi_mu(tau, x, d) for a constant disturbance, classical RK4 with
/// fixed substep h = tau/32 (deterministic, so abstraction transitions are
/// reproducible bit for bit).
inline Vec flow(const Mode& mode, Vec x, double tau, const Vec& d) {
  const std::size_t n = mode.field.size();
  if (x.size() != n || d.size() != n)
    throw std::invalid_argument("flow: dimension mismatch");
  if (!(tau > 0)) throw std::invalid_argument("flow: tau must be positive");

  constexpr int kSubsteps = 32;
  const double h = tau / kSubsteps;
  Vec k1(n), k2(n), k3(n), k4(n), tmp(n);
  for (int step = 0; step < kSubsteps; ++step) {
    detail::field_into(mode, x, d, k1);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
    detail::field_into(mode, tmp, d, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
    detail::field_into(mode, tmp, d, k3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + h * k3[i];
    detail::field_into(mode, tmp, d, k4);
    for (std::size_t i = 0; i < n; ++i)
      x[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    for (double xi : x)
      if (!std::isfinite(xi))
        throw IntegrationError("flow: state blew up integrating mode " + mode.id);
  }
  return x;
}

/// Sampled lower bound on the sup-norm Lipschitz constant over the box: the
/// max row sum of the (analytic) Jacobian over seeded sample points. Advisory
/// only; warns on stderr when it exceeds the declared K.
inline double lipschitz_estimate(const Mode& mode, const Box& box, int samples,
                                 std::uint64_t seed = 1) {
  box.validate();
  if (samples < 2) throw std::invalid_argument("lipschitz_estimate: samples must be >= 2");
  const std::size_t n = mode.field.size();
  std::vector<std::vector<Polynomial>> jac(n);
  for (std::size_t i = 0; i < n; ++i) {
    jac[i].reserve(n);
    for (std::size_t j = 0; j < n; ++j) jac[i].push_back(mode.field[i].derivative(j));
  }
  Rng rng(seed);
  Vec x(n);
  double best = 0.0;
  for (int s = 0; s < samples; ++s) {
    for (std::size_t j = 0; j < n; ++j) {
      // mix corners in; the row-sum sup often sits on the boundary
      if (s < (1 << n) && n <= 16) {
        x[j] = ((s >> j) & 1) ? box.upper[j] : box.lower[j];
      } else {
        x[j] = rng.uniform_real(box.lower[j], box.upper[j]);
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < n; ++j) row += std::abs(jac[i][j].eval(x));
      best = std::max(best, row);
    }
  }
  if (best > mode.lipschitz * (1.0 + 1e-9) + 1e-12) {
    std::fprintf(stderr,
                 "warning: sampled Lipschitz bound %.6g exceeds declared K=%.6g for mode %s\n",
                 best, mode.lipschitz, mode.id.c_str());
  }
  return best;
}

}  // namespace countsyn
