#pragma once

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "countsyn/synthesis.hpp"

namespace countsyn {

struct SolveResult {
  enum class Status { Feasible, Infeasible, IterationLimit, NumericFailure };
  Status status = Status::NumericFailure;
  Vec point;  // structural variables
  struct Stats {
    long iterations = 0;
    long nodes = 0;
    double wall_seconds = 0.0;
  } stats;
  std::string message;
};

struct SolveOptions {
  long max_pivots = 1000000;
  long max_nodes = 100000;
  // optional crash basis: one structural column per row, -1 for automatic
  std::vector<int> start_basis;
};

/// Independent feasibility check straight from the raw row data.
inline bool validate_point(const LinearProgram& lp, const Vec& x, double tol = 1e-7,
                           std::string* why = nullptr) {
  if (static_cast<int>(x.size()) != lp.n_vars()) {
    if (why) *why = "point dimension mismatch";
    return false;
  }
  for (int j = 0; j < lp.n_vars(); ++j) {
    double scale = std::max(1.0, std::abs(x[j]));
    if (x[j] < lp.lower[j] - tol * scale || x[j] > lp.upper[j] + tol * scale) {
      if (why) *why = "bound violated on " + lp.var_names[j];
      return false;
    }
  }
  for (const auto& row : lp.rows) {
    double acc = 0, scale = std::max(1.0, std::abs(row.rhs));
    for (auto [j, v] : row.terms) {
      acc += v * x[j];
      scale = std::max(scale, std::abs(v * x[j]));
    }
    bool ok = row.sense == LinearProgram::Sense::Eq ? std::abs(acc - row.rhs) <= tol * scale
                                                    : acc <= row.rhs + tol * scale;
    if (!ok) {
      if (why)
        *why = "row " + row.name + " violated (activity " + std::to_string(acc) + " vs rhs " +
               std::to_string(row.rhs) + ")";
      return false;
    }
  }
  return true;
}

namespace simplex_detail {

constexpr double kPivotTol = 1e-9;
constexpr double kCostTol = 1e-9;
constexpr double kFeasTol = 1e-9;
constexpr double kDegenerateStep = 1e-11;
constexpr int kRefactorEvery = 64;
constexpr int kBlandTrigger = 1000;

enum VStat : std::int8_t { kAtLower = 0, kAtUpper = 1, kBasic = 2 };

/// Bounded-variable revised primal simplex over a sparse column store; basis
/// kept as an Eigen SparseLU refreshed every kRefactorEvery pivots with
/// product-form eta updates in between.
class Simplex {
 public:
  Simplex(const LinearProgram& lp, const Vec& lb, const Vec& ub) : lp_(lp) {
    m_ = static_cast<int>(lp.rows.size());
    n_struct_ = lp.n_vars();
    cols_.resize(n_struct_);
    for (int i = 0; i < m_; ++i)
      for (auto [j, v] : lp.rows[i].terms)
        if (v != 0.0) cols_[j].emplace_back(i, v);
    for (auto& col : cols_) {
      std::sort(col.begin(), col.end());
      // merge duplicate row entries
      std::size_t out = 0;
      for (std::size_t k = 0; k < col.size(); ++k) {
        if (out > 0 && col[out - 1].first == col[k].first)
          col[out - 1].second += col[k].second;
        else
          col[out++] = col[k];
      }
      col.resize(out);
    }
    lb_ = lb;
    ub_ = ub;
    rhs_.resize(m_);
    for (int i = 0; i < m_; ++i) rhs_[i] = lp.rows[i].rhs;
    // slack per inequality row
    slack_of_row_.assign(m_, -1);
    for (int i = 0; i < m_; ++i) {
      if (lp.rows[i].sense == LinearProgram::Sense::LessEq) {
        slack_of_row_[i] = n_cols();
        cols_.push_back({{i, 1.0}});
        lb_.push_back(0.0);
        ub_.push_back(std::numeric_limits<double>::infinity());
      }
    }
    n_slack_end_ = n_cols();
  }

  int n_cols() const { return static_cast<int>(cols_.size()); }

  SolveResult run(const SolveOptions& opt) {
    auto t0 = std::chrono::steady_clock::now();
    SolveResult res;
    if (!init_basis(opt)) {
      res.status = SolveResult::Status::NumericFailure;
      res.message = "initial basis factorization failed";
      return res;
    }

    // phase I: minimize the artificial sum
    double art_sum = 0;
    for (int j = art_begin_; j < n_cols(); ++j) art_sum += xval_[j];
    if (art_sum > kFeasTol) {
      cost_.assign(n_cols(), 0.0);
      for (int j = art_begin_; j < n_cols(); ++j) cost_[j] = 1.0;
      auto stat = optimize(opt, res.stats);
      if (stat != SolveResult::Status::Feasible) {
        res.status = stat;
        res.message = "phase I did not converge";
        res.stats.wall_seconds = seconds_since(t0);
        return res;
      }
      double residual = objective_value();
      if (residual > 1e-8 * std::max(1.0, mass_scale())) {
        res.status = SolveResult::Status::Infeasible;
        res.message = "phase I optimum " + std::to_string(residual);
        res.stats.wall_seconds = seconds_since(t0);
        return res;
      }
      expel_artificials();
    }
    for (int j = art_begin_; j < n_cols(); ++j) lb_[j] = ub_[j] = 0.0;

    // phase II only when an objective hook is present
    if (!lp_.objective.empty()) {
      cost_.assign(n_cols(), 0.0);
      for (auto [j, v] : lp_.objective) cost_[j] += v;
      auto stat = optimize(opt, res.stats);
      if (stat != SolveResult::Status::Feasible) {
        res.status = stat;
        res.message = "phase II did not converge";
        res.stats.wall_seconds = seconds_since(t0);
        return res;
      }
    }

    refactor();  // final clean recompute of the basic values
    res.point.assign(xval_.begin(), xval_.begin() + n_struct_);
    res.status = SolveResult::Status::Feasible;
    res.stats.wall_seconds = seconds_since(t0);
    return res;
  }

  std::vector<int> basis_snapshot() const { return basic_; }

 private:
  static double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

  double mass_scale() const {
    double s = 0;
    for (double b : rhs_) s += std::abs(b);
    return s;
  }

  double objective_value() const {
    double v = 0;
    for (int j = 0; j < n_cols(); ++j) v += cost_[j] * xval_[j];
    return v;
  }

  // ---- basis management -------------------------------------------------

  bool factorize() {
    std::vector<Eigen::Triplet<double>> trips;
    for (int i = 0; i < m_; ++i)
      for (auto [r, v] : cols_[basic_[i]]) trips.emplace_back(r, i, v);
    Eigen::SparseMatrix<double> B(m_, m_);
    B.setFromTriplets(trips.begin(), trips.end());
    lu_.compute(B);
    etas_.clear();
    return lu_.info() == Eigen::Success;
  }

  void compute_basic_values() {
    Eigen::VectorXd act = Eigen::VectorXd::Zero(m_);
    for (int j = 0; j < n_cols(); ++j) {
      if (vstat_[j] == kBasic || xval_[j] == 0.0) continue;
      for (auto [i, v] : cols_[j]) act[i] += v * xval_[j];
    }
    Eigen::VectorXd b(m_);
    for (int i = 0; i < m_; ++i) b[i] = rhs_[i] - act[i];
    Eigen::VectorXd xb = lu_.solve(b);
    for (int i = 0; i < m_; ++i) xval_[basic_[i]] = xb[i];
  }

  bool refactor() {
    if (!factorize()) return false;
    compute_basic_values();
    return true;
  }

  void ftran(Eigen::VectorXd& v) {
    v = lu_.solve(v);
    for (const auto& [r, d] : etas_) {
      double piv = 0;
      for (auto [i, val] : d)
        if (i == r) piv = val;
      double vr = v[r] / piv;
      for (auto [i, val] : d)
        if (i != r) v[i] -= val * vr;
      v[r] = vr;
    }
  }

  void btran(Eigen::VectorXd& v) {
    for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
      const auto& [r, d] = *it;
      double acc = v[r], piv = 0;
      for (auto [i, val] : d) {
        if (i == r)
          piv = val;
        else
          acc -= val * v[i];
      }
      v[r] = acc / piv;
    }
    v = lu_.transpose().solve(v);
  }

  // ---- initialization ----------------------------------------------------

  bool init_basis(const SolveOptions& opt) {
    xval_.assign(n_cols(), 0.0);
    vstat_.assign(n_cols(), kAtLower);
    for (int j = 0; j < n_cols(); ++j) {
      // nonbasic at the finite bound closest to zero
      if (std::isfinite(lb_[j]))
        xval_[j] = lb_[j], vstat_[j] = kAtLower;
      else if (std::isfinite(ub_[j]))
        xval_[j] = ub_[j], vstat_[j] = kAtUpper;
    }

    basic_.assign(m_, -1);
    bool hinted = false;
    if (!opt.start_basis.empty() && static_cast<int>(opt.start_basis.size()) == m_) {
      hinted = true;
      std::vector<char> used(n_cols(), 0);
      for (int i = 0; i < m_; ++i) {
        int j = opt.start_basis[i];
        if (j >= 0 && j < n_struct_ && !used[j]) {
          basic_[i] = j;
          used[j] = 1;
        }
      }
    }

    // residual with nonbasic at bounds decides slack vs artificial sign
    art_begin_ = n_cols();
    std::vector<double> act(m_, 0.0);
    for (int j = 0; j < n_cols(); ++j) {
      if (xval_[j] == 0.0) continue;
      for (auto [i, v] : cols_[j]) act[i] += v * xval_[j];
    }
    for (int i = 0; i < m_; ++i) {
      if (basic_[i] >= 0) continue;
      double res = rhs_[i] - act[i];
      if (slack_of_row_[i] >= 0 && res >= 0.0) {
        basic_[i] = slack_of_row_[i];
      } else {
        double sign = res >= 0.0 ? 1.0 : -1.0;
        basic_[i] = n_cols();
        cols_.push_back({{i, sign}});
        lb_.push_back(0.0);
        ub_.push_back(std::numeric_limits<double>::infinity());
        xval_.push_back(0.0);
        vstat_.push_back(kAtLower);
      }
    }
    for (int i = 0; i < m_; ++i) vstat_[basic_[i]] = kBasic;

    if (!refactor()) {
      if (!hinted) return false;
      // reject the hint and restart with the plain slack/artificial basis
      return restart_plain();
    }
    // repair pass: negative basic slacks become artificials, negative basic
    // artificials flip sign; a hinted structural out of bounds voids the hint
    for (int pass = 0; pass < 2; ++pass) {
      bool changed = false;
      for (int i = 0; i < m_; ++i) {
        int j = basic_[i];
        if (j < n_struct_) {
          if (xval_[j] < lb_[j] - 1e-7 || xval_[j] > ub_[j] + 1e-7)
            return hinted ? restart_plain() : false;
        } else if (j < art_begin_) {
          if (xval_[j] < -kFeasTol) {
            basic_[i] = n_cols();
            vstat_[j] = kAtLower;
            xval_[j] = 0.0;
            cols_.push_back({{i, -1.0}});
            lb_.push_back(0.0);
            ub_.push_back(std::numeric_limits<double>::infinity());
            xval_.push_back(0.0);
            vstat_.push_back(kBasic);
            changed = true;
          }
        } else if (xval_[j] < -kFeasTol) {
          cols_[j][0].second = -cols_[j][0].second;
          changed = true;
        }
      }
      if (!changed) break;
      if (!refactor()) return hinted ? restart_plain() : false;
    }
    // clamp residual noise on the artificials
    for (int i = 0; i < m_; ++i) {
      int j = basic_[i];
      if (j >= art_begin_ && xval_[j] < 0.0 && xval_[j] > -kFeasTol) xval_[j] = 0.0;
    }
    return true;
  }

  bool restart_plain() {
    // drop artificials added so far and rebuild without a hint
    cols_.resize(art_begin_);
    lb_.resize(art_begin_);
    ub_.resize(art_begin_);
    SolveOptions plain;
    return init_basis(plain);
  }

  // ---- pivoting ----------------------------------------------------------

  // entering-variable search: deterministic rotating-window partial pricing,
  // first-index rule under Bland mode
  int price(const Eigen::VectorXd& y, bool bland) {
    const int n = n_cols();
    auto reduced = [&](int j) {
      double d = cost_[j];
      for (auto [i, v] : cols_[j]) d -= y[i] * v;
      return d;
    };
    auto eligible = [&](int j, double d) {
      if (vstat_[j] == kBasic || lb_[j] == ub_[j]) return false;
      return vstat_[j] == kAtLower ? d < -kCostTol : d > kCostTol;
    };
    if (bland) {
      for (int j = 0; j < n; ++j) {
        double d = reduced(j);
        if (eligible(j, d)) return j;
      }
      return -1;
    }
    const int window = std::max(256, n / 32);
    int scanned = 0;
    while (scanned < n) {
      int best = -1;
      double best_score = 0;
      for (int k = 0; k < window && scanned < n; ++k, ++scanned) {
        int j = price_pos_;
        price_pos_ = (price_pos_ + 1) % n;
        double d = reduced(j);
        if (eligible(j, d) && std::abs(d) > best_score) {
          best_score = std::abs(d);
          best = j;
        }
      }
      if (best >= 0) return best;
    }
    return -1;
  }

  SolveResult::Status optimize(const SolveOptions& opt, SolveResult::Stats& stats) {
    int since_refactor = 0;
    int degenerate_streak = 0;
    const bool trace = std::getenv("COUNTSYN_LP_LOG") != nullptr;
    auto trace_t0 = std::chrono::steady_clock::now();
    Eigen::VectorXd y(m_), w(m_);
    for (;;) {
      if (stats.iterations >= opt.max_pivots) return SolveResult::Status::IterationLimit;
      if (since_refactor >= kRefactorEvery) {
        if (!refactor()) return SolveResult::Status::NumericFailure;
        since_refactor = 0;
      }
      if (trace && stats.iterations % 2000 == 0)
        std::fprintf(stderr, "[lp] it=%ld obj=%.6g t=%.1fs\n", stats.iterations,
                     objective_value(), seconds_since(trace_t0));

      for (int i = 0; i < m_; ++i) y[i] = cost_[basic_[i]];
      btran(y);
      bool bland = degenerate_streak >= kBlandTrigger;
      int enter = price(y, bland);
      if (enter < 0) return SolveResult::Status::Feasible;  // optimal for this phase

      w.setZero();
      for (auto [i, v] : cols_[enter]) w[i] = v;
      ftran(w);

      const double dir = vstat_[enter] == kAtLower ? 1.0 : -1.0;
      const double flip_limit = ub_[enter] - lb_[enter];

      // two-pass ratio test: tightest ratio first, then the stablest pivot
      // (artificials preferred out) among near-ties
      auto room_of = [&](int i, double& target) {
        double g = dir * w[i];
        int bj = basic_[i];
        if (g > kPivotTol) {
          target = lb_[bj];
          return (xval_[bj] - lb_[bj]) / g;
        }
        if (g < -kPivotTol && std::isfinite(ub_[bj])) {
          target = ub_[bj];
          return (xval_[bj] - ub_[bj]) / g;
        }
        target = 0.0;
        return std::numeric_limits<double>::infinity();
      };

      double limit = flip_limit;
      for (int i = 0; i < m_; ++i) {
        double target;
        double room = room_of(i, target);
        if (room < -kFeasTol) room = 0.0;
        limit = std::min(limit, std::max(room, 0.0));
      }
      if (!std::isfinite(limit)) return SolveResult::Status::NumericFailure;  // unbounded ray

      int leave_row = -1;
      double leave_bound = 0.0, best_piv = 0.0;
      const double tie = 1e-9 * (1.0 + std::abs(limit));
      if (limit < flip_limit - 1e-12 || !std::isfinite(flip_limit)) {
        for (int i = 0; i < m_; ++i) {
          double target;
          double room = room_of(i, target);
          if (room < -kFeasTol) room = 0.0;
          if (room > limit + tie) continue;
          int bj = basic_[i];
          bool better;
          if (leave_row < 0) {
            better = true;
          } else if (bland) {
            better = bj < basic_[leave_row];
          } else {
            bool art_i = bj >= art_begin_, art_l = basic_[leave_row] >= art_begin_;
            better = art_i != art_l ? art_i : std::abs(w[i]) > best_piv;
          }
          if (better) {
            leave_row = i;
            leave_bound = target;
            best_piv = std::abs(w[i]);
          }
        }
      }

      ++stats.iterations;
      ++since_refactor;
      degenerate_streak = limit <= kDegenerateStep ? degenerate_streak + 1 : 0;

      // move the entering variable and update the basics
      double delta = std::max(limit, 0.0);
      if (delta > 0) {
        for (int i = 0; i < m_; ++i)
          if (w[i] != 0.0) xval_[basic_[i]] -= dir * delta * w[i];
      }
      if (leave_row < 0) {
        // bound flip, no basis change
        xval_[enter] = vstat_[enter] == kAtLower ? ub_[enter] : lb_[enter];
        vstat_[enter] = vstat_[enter] == kAtLower ? kAtUpper : kAtLower;
        continue;
      }
      if (std::abs(w[leave_row]) <= kPivotTol) return SolveResult::Status::NumericFailure;

      int leave = basic_[leave_row];
      xval_[leave] = leave_bound;
      vstat_[leave] = leave_bound == lb_[leave] ? kAtLower : kAtUpper;
      xval_[enter] = (vstat_[enter] == kAtLower ? lb_[enter] : ub_[enter]) + dir * delta;
      vstat_[enter] = kBasic;
      basic_[leave_row] = enter;

      std::vector<std::pair<int, double>> eta;
      for (int i = 0; i < m_; ++i)
        if (std::abs(w[i]) > 1e-14) eta.emplace_back(i, w[i]);
      etas_.emplace_back(leave_row, std::move(eta));
    }
  }

  // drive zero-level artificials out of the basis where possible; leftovers
  // stay pinned at zero in redundant rows
  void expel_artificials() {
    for (int i = 0; i < m_; ++i) {
      int j = basic_[i];
      if (j < art_begin_) continue;
      Eigen::VectorXd rho = Eigen::VectorXd::Zero(m_);
      rho[i] = 1.0;
      btran(rho);
      int replacement = -1;
      for (int k = 0; k < art_begin_ && replacement < 0; ++k) {
        if (vstat_[k] == kBasic || lb_[k] == ub_[k]) continue;
        double piv = 0;
        for (auto [r, v] : cols_[k]) piv += rho[r] * v;
        if (std::abs(piv) > 1e-7) replacement = k;
      }
      if (replacement < 0) continue;
      Eigen::VectorXd w = Eigen::VectorXd::Zero(m_);
      for (auto [r, v] : cols_[replacement]) w[r] = v;
      ftran(w);
      if (std::abs(w[i]) <= kPivotTol) continue;
      vstat_[j] = kAtLower;
      xval_[j] = 0.0;
      basic_[i] = replacement;
      vstat_[replacement] = kBasic;
      std::vector<std::pair<int, double>> eta;
      for (int r = 0; r < m_; ++r)
        if (std::abs(w[r]) > 1e-14) eta.emplace_back(r, w[r]);
      etas_.emplace_back(i, std::move(eta));
      if (static_cast<int>(etas_.size()) >= kRefactorEvery) refactor();
    }
  }

  const LinearProgram& lp_;
  int m_ = 0, n_struct_ = 0, n_slack_end_ = 0, art_begin_ = 0;
  std::vector<std::vector<std::pair<int, double>>> cols_;
  Vec lb_, ub_, rhs_, cost_, xval_;
  std::vector<int> basic_;
  std::vector<std::int8_t> vstat_;
  std::vector<int> slack_of_row_;
  int price_pos_ = 0;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
  std::vector<std::pair<int, std::vector<std::pair<int, double>>>> etas_;
};

}  // namespace simplex_detail

/// Phase-I/II primal simplex on the relaxation (integrality ignored).
inline SolveResult solve_lp(const LinearProgram& lp, const SolveOptions& opt = {}) {
  if (lp.n_vars() == 0 && lp.rows.empty()) {
    SolveResult res;
    res.status = SolveResult::Status::Feasible;
    return res;
  }
  simplex_detail::Simplex simplex(lp, lp.lower, lp.upper);
  SolveResult res = simplex.run(opt);
  if (res.status == SolveResult::Status::Feasible) {
    std::string why;
    if (!validate_point(lp, res.point, 1e-7, &why)) {
      res.status = SolveResult::Status::NumericFailure;
      res.message = "solution failed independent validation: " + why;
    }
  }
  return res;
}

namespace simplex_detail {

// exact revalidation of an integral point: integral data is checked in
// integer arithmetic, anything else at tolerance
inline bool validate_integral(const LinearProgram& lp, const Vec& x, std::string* why) {
  auto integral = [](double v) { return std::abs(v - std::llround(v)) < 1e-9; };
  for (const auto& row : lp.rows) {
    bool exact = integral(row.rhs);
    for (auto [j, v] : row.terms) exact = exact && integral(v) && integral(x[j]);
    if (!exact) continue;
    long long acc = 0;
    for (auto [j, v] : row.terms) acc += std::llround(v) * std::llround(x[j]);
    long long rhs = std::llround(row.rhs);
    bool ok = row.sense == LinearProgram::Sense::Eq ? acc == rhs : acc <= rhs;
    if (!ok) {
      if (why) *why = "integral row " + row.name + " violated exactly";
      return false;
    }
  }
  return validate_point(lp, x, 1e-7, why);
}

}  // namespace simplex_detail

/// Depth-first branch and bound on the integer blocks: most-fractional
/// branching, nearest-integer child explored first; a node limit yields an
/// inconclusive IterationLimit status.
inline SolveResult solve_ilp(const LinearProgram& lp, const SolveOptions& opt = {}) {
  struct Node {
    std::vector<std::pair<int, std::pair<double, double>>> bounds;
  };
  std::vector<Node> stack{Node{}};
  SolveResult out;
  out.status = SolveResult::Status::Infeasible;
  long iterations = 0;

  while (!stack.empty()) {
    if (out.stats.nodes >= opt.max_nodes) {
      out.status = SolveResult::Status::IterationLimit;
      out.message = "node limit reached";
      return out;
    }
    Node node = std::move(stack.back());
    stack.pop_back();
    ++out.stats.nodes;

    Vec lb = lp.lower, ub = lp.upper;
    for (auto [j, b] : node.bounds) {
      lb[j] = std::max(lb[j], b.first);
      ub[j] = std::min(ub[j], b.second);
    }
    bool empty_box = false;
    for (int j = 0; j < lp.n_vars() && !empty_box; ++j) empty_box = lb[j] > ub[j];
    if (empty_box) continue;

    simplex_detail::Simplex simplex(lp, lb, ub);
    SolveOptions node_opt = opt;
    node_opt.start_basis.clear();
    SolveResult res = simplex.run(node_opt);
    iterations += res.stats.iterations;
    if (res.status == SolveResult::Status::NumericFailure) {
      out.status = res.status;
      out.message = res.message;
      out.stats.iterations = iterations;
      return out;
    }
    if (res.status != SolveResult::Status::Feasible) continue;

    // most fractional integer variable
    int branch = -1;
    double best_frac = 1e-6;
    for (int j = 0; j < lp.n_vars(); ++j) {
      if (!lp.integer[j]) continue;
      double frac = std::abs(res.point[j] - std::llround(res.point[j]));
      if (frac > best_frac + 1e-12) {
        best_frac = frac;
        branch = j;
      }
    }
    if (branch < 0) {
      Vec rounded = res.point;
      for (int j = 0; j < lp.n_vars(); ++j)
        if (lp.integer[j]) rounded[j] = std::llround(rounded[j]);
      std::string why;
      if (simplex_detail::validate_integral(lp, rounded, &why)) {
        long nodes = out.stats.nodes;
        out = res;
        out.point = std::move(rounded);
        out.stats.nodes = nodes;
        out.stats.iterations = iterations;
        out.status = SolveResult::Status::Feasible;
        return out;
      }
      // rounding at tolerance broke a row: branch on the least-integral
      // variable anyway so the subtree is not lost
      double worst = 1e-12;
      for (int j = 0; j < lp.n_vars(); ++j) {
        if (!lp.integer[j]) continue;
        double frac = std::abs(res.point[j] - std::llround(res.point[j]));
        if (frac > worst) {
          worst = frac;
          branch = j;
        }
      }
      if (branch < 0) continue;
    }

    double v = res.point[branch];
    Node down = node, up = node;
    down.bounds.emplace_back(branch,
                             std::make_pair(-std::numeric_limits<double>::infinity(),
                                            std::floor(v)));
    up.bounds.emplace_back(branch, std::make_pair(std::ceil(v),
                                                  std::numeric_limits<double>::infinity()));
    // push the far side first so the nearest-integer child pops first
    if (v - std::floor(v) <= 0.5) {
      stack.push_back(std::move(up));
      stack.push_back(std::move(down));
    } else {
      stack.push_back(std::move(down));
      stack.push_back(std::move(up));
    }
  }
  out.stats.iterations = iterations;
  return out;
}

// ---- MPS export / import --------------------------------------------------

namespace mps_detail {

// fixed-format fields start at columns 2, 5, 15, 25, 40, 50 (1-based); an
// overlong field pushes the next one right, always keeping one space
inline void put_field(std::string& line, std::size_t col, const std::string& text) {
  if (!line.empty() && line.size() + 2 > col)
    line += ' ';
  else
    line.resize(col - 1, ' ');
  line += text;
}

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace mps_detail

/// Fixed-format MPS with deterministic naming; integer blocks wrapped in
/// MARKER INTORG/INTEND sections, zero-upper-bound columns emitted as FX.
inline void export_mps(const LinearProgram& lp, const std::string& path,
                       const std::string& name = "COUNTSYN") {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("export_mps: cannot open " + path);
  using mps_detail::num;
  using mps_detail::put_field;

  auto emit = [&out](std::initializer_list<std::pair<std::size_t, std::string>> fields) {
    std::string line;
    for (const auto& [col, text] : fields) put_field(line, col, text);
    out << line << "\n";
  };

  emit({{1, "NAME"}, {15, name}});
  out << "ROWS\n";
  emit({{2, "N"}, {5, "COST"}});
  for (const auto& row : lp.rows)
    emit({{2, row.sense == LinearProgram::Sense::Eq ? "E" : "L"}, {5, row.name}});

  // column-major terms
  std::vector<std::vector<std::pair<int, double>>> col_terms(lp.n_vars());
  for (std::size_t i = 0; i < lp.rows.size(); ++i)
    for (auto [j, v] : lp.rows[i].terms)
      if (v != 0.0) col_terms[j].emplace_back(static_cast<int>(i), v);
  std::vector<double> obj(lp.n_vars(), 0.0);
  for (auto [j, v] : lp.objective) obj[j] += v;

  out << "COLUMNS\n";
  bool in_int = false;
  int marker = 0;
  for (int j = 0; j < lp.n_vars(); ++j) {
    if (bool(lp.integer[j]) != in_int) {
      emit({{5, "M" + std::to_string(marker++)},
            {15, "'MARKER'"},
            {40, lp.integer[j] ? "'INTORG'" : "'INTEND'"}});
      in_int = lp.integer[j];
    }
    std::vector<std::pair<std::string, double>> entries;
    if (obj[j] != 0.0) entries.emplace_back("COST", obj[j]);
    for (auto [i, v] : col_terms[j]) entries.emplace_back(lp.rows[i].name, v);
    for (std::size_t k = 0; k < entries.size(); k += 2) {
      if (k + 1 < entries.size())
        emit({{5, lp.var_names[j]},
              {15, entries[k].first},
              {25, num(entries[k].second)},
              {40, entries[k + 1].first},
              {50, num(entries[k + 1].second)}});
      else
        emit({{5, lp.var_names[j]}, {15, entries[k].first}, {25, num(entries[k].second)}});
    }
    if (entries.empty()) emit({{5, lp.var_names[j]}, {15, "COST"}, {25, "0"}});
  }
  if (in_int) emit({{5, "M" + std::to_string(marker++)}, {15, "'MARKER'"}, {40, "'INTEND'"}});

  out << "RHS\n";
  for (const auto& row : lp.rows)
    if (row.rhs != 0.0) emit({{5, "RHS"}, {15, row.name}, {25, num(row.rhs)}});

  out << "BOUNDS\n";
  for (int j = 0; j < lp.n_vars(); ++j) {
    if (lp.lower[j] != 0.0)
      emit({{2, "LO"}, {5, "BND"}, {15, lp.var_names[j]}, {25, num(lp.lower[j])}});
    if (std::isfinite(lp.upper[j])) {
      if (lp.upper[j] == lp.lower[j])
        emit({{2, "FX"}, {5, "BND"}, {15, lp.var_names[j]}, {25, num(lp.upper[j])}});
      else
        emit({{2, "UP"}, {5, "BND"}, {15, lp.var_names[j]}, {25, num(lp.upper[j])}});
    }
  }
  out << "ENDATA\n";
}

/// Reads a solver solution file ("name value" per line, '#' comments), maps it
/// onto the program's variables and re-validates it independently.
inline SolveResult import_solution(const LinearProgram& lp, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("import_solution: cannot open " + path);
  std::map<std::string, int> index;
  for (int j = 0; j < lp.n_vars(); ++j) index[lp.var_names[j]] = j;

  SolveResult res;
  res.point.assign(lp.n_vars(), 0.0);
  std::string line;
  std::vector<std::string> unknown;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::string name;
    double value;
    if (!(ss >> name >> value)) continue;
    auto it = index.find(name);
    if (it == index.end()) {
      unknown.push_back(name);
      continue;
    }
    res.point[it->second] = value;
  }
  std::string why;
  if (validate_point(lp, res.point, 1e-7, &why)) {
    res.status = SolveResult::Status::Feasible;
  } else {
    res.status = SolveResult::Status::Infeasible;
    res.message = why;
  }
  if (!unknown.empty())
    res.message += (res.message.empty() ? "" : "; ") + std::to_string(unknown.size()) +
                   " unknown variable names (first: " + unknown.front() + ")";
  return res;
}

}  // namespace countsyn
