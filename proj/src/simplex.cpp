#include "simplex.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

#include <Eigen/SparseLU>

namespace refplan::detail {

LinearProgram to_linear_program(const AlgebraicModel& model) {
  if (!model.is_linear()) throw ModelError("LP solve requested for a model with bilinear terms");
  LinearProgram lp;
  std::size_t n = model.variables.size(), m = model.constraints.size();
  lp.col_lo.resize(n);
  lp.col_hi.resize(n);
  lp.cost.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    lp.col_lo[j] = model.variables[j].lo;
    lp.col_hi[j] = model.variables[j].hi;
  }
  for (const auto& t : model.objective.linear) lp.cost[t.var] -= t.coef;
  lp.offset = -model.objective.constant;
  std::vector<Eigen::Triplet<double>> trip;
  lp.row_lo.resize(m);
  lp.row_hi.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto& c = model.constraints[i];
    for (const auto& t : c.expr.linear) trip.emplace_back(int(i), int(t.var), t.coef);
    double rhs = -c.expr.constant;
    lp.row_lo[i] = c.sense == Sense::le ? -kInf : rhs;
    lp.row_hi[i] = c.sense == Sense::ge ? kInf : rhs;
  }
  lp.A.resize(int(m), int(n));
  lp.A.setFromTriplets(trip.begin(), trip.end());
  lp.A.prune(0.0);  // explicit and cancelled zeros
  lp.A.makeCompressed();
  return lp;
}

namespace {

constexpr double kPrimalTol = 1e-9;
constexpr double kDualTol = 1e-9;
constexpr double kPivotTol = 1e-7;
constexpr std::size_t kRefactorEvery = 64;
constexpr std::size_t kBlandAfter = 50;

enum class State : char { lower, upper, zero, basic };

struct Eta {
  int row;
  double pivot;
  std::vector<std::pair<int, double>> column;  // off-pivot entries
};

class Simplex {
 public:
  Simplex(const LinearProgram& lp, const SolveConfig& cfg, Clock::time_point deadline,
          const WarmStart& warm)
      : src_(lp),
        cfg_(cfg),
        deadline_(deadline),
        col_lo_(warm.col_lo ? *warm.col_lo : lp.col_lo),
        col_hi_(warm.col_hi ? *warm.col_hi : lp.col_hi),
        warm_basis_(warm.basis) {}

  LpOutcome run() {
    LpOutcome out;
    prepare();
    if (infeasible_bounds_) {
      out.status = SolveStatus::infeasible;
      return out;
    }
    if (m_ == 0) return trivial();
    Dual warm = warm_basis_ ? warm_start(*warm_basis_) : Dual::trouble;
    if (warm == Dual::infeasible || warm == Dual::limit) {
      out.status = warm == Dual::infeasible ? SolveStatus::infeasible : SolveStatus::limit;
      out.iterations = iterations_;
      return out;
    }
    if (warm == Dual::trouble) {
      cold_start();
      refactor();
      phase_ = arts_ > 0 ? 1 : 2;
      load_costs();
    }
    for (;;) {
      if (iterations_ >= cfg_.iteration_limit || (iterations_ % 16 == 0 && Clock::now() > deadline_)) {
        out.status = SolveStatus::limit;
        break;
      }
      int q = price();
      if (q < 0) {
        if (phase_ == 1) {
          double infeas = 0.0;
          for (int j = n_ + m_; j < total_; ++j) infeas += x_[j];
          if (infeas > 1e-7) {
            out.status = SolveStatus::infeasible;
            break;
          }
          for (int j = n_ + m_; j < total_; ++j) hi_[j] = 0.0;
          phase_ = 2;
          load_costs();
          std::fill(weight_.begin(), weight_.end(), 1.0);
          continue;
        }
        out.status = SolveStatus::optimal;
        break;
      }
      if (!iterate(q)) {
        out.status = phase_ == 2 ? SolveStatus::unbounded : SolveStatus::infeasible;
        break;
      }
      ++iterations_;
      if (etas_.size() >= kRefactorEvery) refactor();
    }
    out.iterations = iterations_;
    if (out.status == SolveStatus::optimal || out.status == SolveStatus::limit) {
      if (out.status == SolveStatus::optimal) {
        refactor();  // clean primal values before reporting
      }
      out.x.resize(n_);
      for (int j = 0; j < n_; ++j) {
        double v = x_[j] * col_scale_[j];
        out.x[j] = std::clamp(v, col_lo_[j], col_hi_[j]);
      }
      out.objective = src_.offset;
      for (int j = 0; j < n_; ++j) out.objective += src_.cost[j] * out.x[j];
      if (out.status == SolveStatus::optimal) out.basis = export_basis();
    }
    return out;
  }

 private:
  // ---- setup ---------------------------------------------------------------

  // Scaled bounds of structurals and logicals.
  void prepare() {
    n_ = int(src_.cols());
    m_ = int(src_.rows());
    A_ = src_.A;
    scale();
    total_ = n_ + m_;
    lo_.assign(total_, 0.0);
    hi_.assign(total_, 0.0);
    for (int j = 0; j < n_; ++j) {
      lo_[j] = col_lo_[j] / col_scale_[j];
      hi_[j] = col_hi_[j] / col_scale_[j];
      if (lo_[j] > hi_[j] + kPrimalTol * std::max(1.0, std::abs(lo_[j]))) infeasible_bounds_ = true;
    }
    for (int i = 0; i < m_; ++i) {
      lo_[n_ + i] = src_.row_lo[i] * row_scale_[i];
      hi_[n_ + i] = src_.row_hi[i] * row_scale_[i];
      if (lo_[n_ + i] > hi_[n_ + i] + kPrimalTol * std::max(1.0, std::abs(lo_[n_ + i])))
        infeasible_bounds_ = true;
    }
  }

  // Structurals at a finite bound, logicals basic, artificials where the
  // logical would violate its row bounds.
  void cold_start() {
    total_ = n_ + m_;
    lo_.resize(total_);
    hi_.resize(total_);
    cost_.assign(total_, 0.0);
    x_.assign(total_, 0.0);
    state_.assign(total_, State::lower);
    etas_.clear();
    for (int j = 0; j < n_; ++j) {
      if (std::isfinite(lo_[j])) {
        x_[j] = lo_[j];
        state_[j] = State::lower;
      } else if (std::isfinite(hi_[j])) {
        x_[j] = hi_[j];
        state_[j] = State::upper;
      } else {
        x_[j] = 0.0;
        state_[j] = State::zero;
      }
    }
    std::vector<double> activity(m_, 0.0);
    for (int j = 0; j < n_; ++j)
      if (x_[j] != 0.0)
        for (Eigen::SparseMatrix<double>::InnerIterator it(A_, j); it; ++it)
          activity[it.row()] += it.value() * x_[j];

    basis_.assign(m_, -1);
    art_sign_.clear();
    art_row_.clear();
    for (int i = 0; i < m_; ++i) {
      int r = n_ + i;
      double v = activity[i];
      double tol = kPrimalTol * std::max(1.0, std::abs(v));
      if (v >= lo_[r] - tol && v <= hi_[r] + tol) {
        x_[r] = v;
        state_[r] = State::basic;
        basis_[i] = r;
        continue;
      }
      double b = v < lo_[r] ? lo_[r] : hi_[r];
      x_[r] = b;
      state_[r] = b == lo_[r] ? State::lower : State::upper;
      // A x - r + sign * art = 0  =>  sign * art = b - v
      art_sign_.push_back(b - v > 0 ? 1.0 : -1.0);
      art_row_.push_back(i);
      int a = total_++;
      lo_.push_back(0.0);
      hi_.push_back(kInf);
      cost_.push_back(0.0);
      x_.push_back(std::abs(b - v));
      state_.push_back(State::basic);
      basis_[i] = a;
    }
    arts_ = int(art_row_.size());
    weight_.assign(total_, 1.0);
    reduced_.assign(total_, 0.0);
    pos_.assign(total_, -1);
    for (int i = 0; i < m_; ++i) pos_[basis_[i]] = i;
  }

  // Geometric-mean row and column scaling, a few passes.
  void scale() {
    row_scale_.assign(m_, 1.0);
    col_scale_.assign(n_, 1.0);
    for (int pass = 0; pass < 4; ++pass) {
      std::vector<double> rmax(m_, 0.0), rmin(m_, kInf);
      for (int j = 0; j < n_; ++j)
        for (Eigen::SparseMatrix<double>::InnerIterator it(A_, j); it; ++it) {
          double a = std::abs(it.value());
          if (a == 0.0) continue;
          rmax[it.row()] = std::max(rmax[it.row()], a);
          rmin[it.row()] = std::min(rmin[it.row()], a);
        }
      for (int i = 0; i < m_; ++i) {
        double s = rmax[i] > 0.0 ? 1.0 / std::sqrt(rmax[i] * rmin[i]) : 1.0;
        row_scale_[i] *= s;
        rmax[i] = s;
      }
      for (int j = 0; j < n_; ++j)
        for (Eigen::SparseMatrix<double>::InnerIterator it(A_, j); it; ++it)
          it.valueRef() *= rmax[it.row()];
      for (int j = 0; j < n_; ++j) {
        double cmax = 0.0, cmin = kInf;
        for (Eigen::SparseMatrix<double>::InnerIterator it(A_, j); it; ++it) {
          double a = std::abs(it.value());
          if (a == 0.0) continue;
          cmax = std::max(cmax, a);
          cmin = std::min(cmin, a);
        }
        double s = cmax > 0.0 ? 1.0 / std::sqrt(cmax * cmin) : 1.0;
        col_scale_[j] *= s;
        for (Eigen::SparseMatrix<double>::InnerIterator it(A_, j); it; ++it) it.valueRef() *= s;
      }
    }
    double cmax = 0.0;
    for (int j = 0; j < n_; ++j) cmax = std::max(cmax, std::abs(src_.cost[j] * col_scale_[j]));
    cost_scale_ = cmax > 0.0 ? 1.0 / cmax : 1.0;
  }

  void load_costs() {
    std::fill(cost_.begin(), cost_.end(), 0.0);
    if (phase_ == 1) {
      for (int j = n_ + m_; j < total_; ++j) cost_[j] = 1.0;
    } else {
      for (int j = 0; j < n_; ++j) cost_[j] = src_.cost[j] * col_scale_[j] * cost_scale_;
    }
    compute_duals();
  }

  LpOutcome trivial() {
    LpOutcome out;
    out.x.resize(n_);
    out.status = SolveStatus::optimal;
    for (int j = 0; j < n_; ++j) {
      double c = src_.cost[j];
      double v;
      if (c > 0) v = col_lo_[j];
      else if (c < 0) v = col_hi_[j];
      else v = std::isfinite(col_lo_[j]) ? col_lo_[j] : std::isfinite(col_hi_[j]) ? col_hi_[j] : 0.0;
      if (!std::isfinite(v)) {
        out.status = SolveStatus::unbounded;
        out.x.clear();
        return out;
      }
      out.x[j] = v;
    }
    out.objective = src_.offset;
    for (int j = 0; j < n_; ++j) out.objective += src_.cost[j] * out.x[j];
    return out;
  }

  // ---- column access -------------------------------------------------------

  template <class F>
  void for_column(int j, F f) const {
    if (j < n_) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(A_, j); it; ++it) f(int(it.row()), it.value());
    } else if (j < n_ + m_) {
      f(j - n_, -1.0);
    } else {
      int k = j - n_ - m_;
      f(art_row_[k], art_sign_[k]);
    }
  }

  double dot_column(int j, const Eigen::VectorXd& y) const {
    double s = 0.0;
    for_column(j, [&](int i, double v) { s += v * y[i]; });
    return s;
  }

  // ---- factorization -------------------------------------------------------

  void refactor() {
    std::vector<Eigen::Triplet<double>> trip;
    for (int i = 0; i < m_; ++i) for_column(basis_[i], [&](int r, double v) { trip.emplace_back(r, i, v); });
    B_.resize(m_, m_);
    B_.setFromTriplets(trip.begin(), trip.end());
    B_.makeCompressed();
    lu_.analyzePattern(B_);
    lu_.factorize(B_);
    if (lu_.info() != Eigen::Success) {
      std::ostringstream os;
      os << "basis factorization failed after " << iterations_ << " pivots (" << m_
         << " rows): " << lu_.lastErrorMessage();
      throw NumericalError(os.str());
    }
    etas_.clear();

    // x_B = B^{-1} (-N x_N)
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m_);
    for (int j = 0; j < total_; ++j) {
      if (state_[j] == State::basic || x_[j] == 0.0) continue;
      double v = x_[j];
      for_column(j, [&](int i, double a) { rhs[i] -= a * v; });
    }
    Eigen::VectorXd xb = lu_.solve(rhs);
    if (!xb.allFinite()) throw NumericalError("non-finite basic solution after refactorization");
    for (int i = 0; i < m_; ++i) x_[basis_[i]] = xb[i];
    compute_duals();
  }

  Eigen::VectorXd ftran(int j) const {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m_);
    for_column(j, [&](int i, double v) { rhs[i] += v; });
    Eigen::VectorXd a = lu_.solve(rhs);
    for (const auto& e : etas_) {
      double xr = a[e.row] / e.pivot;
      a[e.row] = xr;
      if (xr != 0.0)
        for (const auto& [i, d] : e.column) a[i] -= d * xr;
    }
    return a;
  }

  Eigen::VectorXd btran(Eigen::VectorXd c) const {
    for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
      double s = c[it->row];
      for (const auto& [i, d] : it->column) s -= c[i] * d;
      c[it->row] = s / it->pivot;
    }
    return lu_.transpose().solve(c);
  }

  void compute_duals() {
    Eigen::VectorXd cb(m_);
    for (int i = 0; i < m_; ++i) cb[i] = cost_[basis_[i]];
    Eigen::VectorXd y = btran(cb);
    for (int j = 0; j < total_; ++j)
      reduced_[j] = state_[j] == State::basic ? 0.0 : cost_[j] - dot_column(j, y);
  }

  // ---- iteration -----------------------------------------------------------

  bool eligible(int j, double d) const {
    if (state_[j] == State::basic) return false;
    if (lo_[j] == hi_[j]) return false;
    switch (state_[j]) {
      case State::lower: return d < -kDualTol;
      case State::upper: return d > kDualTol;
      case State::zero: return std::abs(d) > kDualTol;
      default: return false;
    }
  }

  int price() const {
    int best = -1;
    double score = 0.0;
    for (int j = 0; j < total_; ++j) {
      double d = reduced_[j];
      if (!eligible(j, d)) continue;
      if (bland_) return j;
      double s = d * d / weight_[j];
      if (s > score) {
        score = s;
        best = j;
      }
    }
    return best;
  }

  // Returns false when the entering direction is unbounded.
  bool iterate(int q) {
    double dir = reduced_[q] < 0 ? 1.0 : -1.0;
    Eigen::VectorXd alpha = ftran(q);
    double amax = alpha.cwiseAbs().maxCoeff();
    double ptol = kPivotTol * std::max(1.0, amax);

    // Harris pass 1: largest step with bounds relaxed by the tolerance.
    double theta_max = kInf;
    for (int i = 0; i < m_; ++i) {
      double a = alpha[i];
      if (std::abs(a) <= ptol) continue;
      int b = basis_[i];
      double delta = -dir * a;
      double tol = kPrimalTol * std::max(1.0, std::abs(x_[b]));
      if (delta < 0 && std::isfinite(lo_[b])) theta_max = std::min(theta_max, (x_[b] - lo_[b] + tol) / -delta);
      if (delta > 0 && std::isfinite(hi_[b])) theta_max = std::min(theta_max, (hi_[b] - x_[b] + tol) / delta);
    }
    double range = hi_[q] - lo_[q];

    int leave = -1;
    double theta = kInf;
    bool to_upper = false;
    if (std::isfinite(theta_max)) {
      double best = 0.0;
      for (int i = 0; i < m_; ++i) {
        double a = alpha[i];
        if (std::abs(a) <= ptol) continue;
        int b = basis_[i];
        double delta = -dir * a;
        double t = kInf;
        bool up = false;
        if (delta < 0 && std::isfinite(lo_[b])) t = (x_[b] - lo_[b]) / -delta;
        if (delta > 0 && std::isfinite(hi_[b])) {
          t = (hi_[b] - x_[b]) / delta;
          up = true;
        }
        if (t <= theta_max && std::abs(a) > best) {
          best = std::abs(a);
          leave = i;
          theta = std::max(t, 0.0);
          to_upper = up;
        }
      }
    }

    if (range <= theta || (leave < 0 && std::isfinite(range))) {
      // Bound flip of the entering variable.
      theta = range;
      leave = -1;
    }
    if (!std::isfinite(theta)) return false;

    // The pivot from the row side must agree with the column side; when the
    // eta file has drifted, refactor and price again instead of pivoting.
    Eigen::VectorXd rho;
    if (leave >= 0) {
      Eigen::VectorXd unit = Eigen::VectorXd::Zero(m_);
      unit[leave] = 1.0;
      rho = btran(unit);
      double row_pivot = dot_column(q, rho);
      if (std::abs(row_pivot - alpha[leave]) > 1e-7 * std::max(1.0, std::abs(alpha[leave])) && !etas_.empty()) {
        refactor();
        return true;
      }
    }

    degenerate_ = theta <= 1e-12 ? degenerate_ + 1 : 0;
    bland_ = degenerate_ >= kBlandAfter;

    if (theta > 0.0) {
      x_[q] += dir * theta;
      for (int i = 0; i < m_; ++i)
        if (alpha[i] != 0.0) x_[basis_[i]] -= dir * theta * alpha[i];
    }

    if (leave < 0) {
      state_[q] = dir > 0 ? State::upper : State::lower;
      x_[q] = dir > 0 ? hi_[q] : lo_[q];
      return true;
    }

    // Pivot row for reduced-cost and reference-weight updates.
    double arq = alpha[leave];
    double dq = reduced_[q];
    double ratio = dq / arq;
    double wq = weight_[q];
    for (int j = 0; j < total_; ++j) {
      if (state_[j] == State::basic || j == q) continue;
      double arj = dot_column(j, rho);
      if (arj == 0.0) continue;
      reduced_[j] -= ratio * arj;
      double r = arj / arq;
      weight_[j] = std::max(weight_[j], r * r * wq);
    }

    int out = basis_[leave];
    state_[out] = to_upper ? State::upper : State::lower;
    x_[out] = to_upper ? hi_[out] : lo_[out];
    if (out >= n_ + m_) {
      hi_[out] = 0.0;  // artificials never re-enter
      state_[out] = State::lower;
      x_[out] = 0.0;
    }
    reduced_[out] = -ratio;
    weight_[out] = std::max(wq / (arq * arq), 1.0);
    pos_[out] = -1;

    basis_[leave] = q;
    pos_[q] = leave;
    state_[q] = State::basic;
    reduced_[q] = 0.0;

    Eta eta;
    eta.row = leave;
    eta.pivot = arq;
    for (int i = 0; i < m_; ++i)
      if (i != leave && alpha[i] != 0.0) eta.column.emplace_back(i, alpha[i]);
    etas_.push_back(std::move(eta));
    return true;
  }

  // ---- warm start ----------------------------------------------------------

  enum class Dual { feasible, infeasible, limit, trouble };

  std::shared_ptr<const Basis> export_basis() const {
    auto b = std::make_shared<Basis>();
    b->basic.resize(m_);
    b->upper.assign(n_ + m_, 0);
    for (int j = 0; j < n_ + m_; ++j) b->upper[j] = state_[j] == State::upper;
    for (int i = 0; i < m_; ++i) {
      int j = basis_[i];
      // An artificial left basic at zero stands in for its row's logical.
      if (j >= n_ + m_) j = n_ + art_row_[j - n_ - m_];
      b->basic[i] = j;
      b->upper[j] = 0;
    }
    return b;
  }

  // Loads the basis and restores primal feasibility with dual pivots.
  // `trouble` asks for a cold start.
  Dual warm_start(const Basis& b) {
    if (int(b.basic.size()) != m_ || int(b.upper.size()) != n_ + m_) return Dual::trouble;
    total_ = n_ + m_;
    arts_ = 0;
    art_row_.clear();
    art_sign_.clear();
    cost_.assign(total_, 0.0);
    x_.assign(total_, 0.0);
    state_.assign(total_, State::lower);
    basis_ = b.basic;
    pos_.assign(total_, -1);
    for (int i = 0; i < m_; ++i) {
      int j = basis_[i];
      if (j < 0 || j >= total_ || pos_[j] >= 0) return Dual::trouble;
      pos_[j] = i;
      state_[j] = State::basic;
    }
    for (int j = 0; j < total_; ++j) {
      if (state_[j] == State::basic) continue;
      bool up = b.upper[j] ? std::isfinite(hi_[j]) : !std::isfinite(lo_[j]) && std::isfinite(hi_[j]);
      if (up) {
        state_[j] = State::upper;
        x_[j] = hi_[j];
      } else if (std::isfinite(lo_[j])) {
        x_[j] = lo_[j];
      } else {
        state_[j] = State::zero;
      }
    }
    weight_.assign(total_, 1.0);
    reduced_.assign(total_, 0.0);
    phase_ = 2;
    try {
      refactor();
      load_costs();
      // Boxed columns priced the wrong way move to the other bound; any
      // other dual infeasibility is left to the primal phase.
      bool moved = false;
      for (int j = 0; j < total_; ++j) {
        if (lo_[j] == hi_[j] || !std::isfinite(lo_[j]) || !std::isfinite(hi_[j])) continue;
        if (state_[j] == State::lower && reduced_[j] < -kDualTol) {
          state_[j] = State::upper;
          x_[j] = hi_[j];
          moved = true;
        } else if (state_[j] == State::upper && reduced_[j] > kDualTol) {
          state_[j] = State::lower;
          x_[j] = lo_[j];
          moved = true;
        }
      }
      if (moved) refactor();
      return dual();
    } catch (const NumericalError&) {
      return Dual::trouble;
    }
  }

  Dual dual() {
    for (;;) {
      if (iterations_ >= cfg_.iteration_limit || (iterations_ % 16 == 0 && Clock::now() > deadline_))
        return Dual::limit;
      // Leaving row: largest bound violation.
      int r = -1;
      double worst = 0.0;
      for (int i = 0; i < m_; ++i) {
        int b = basis_[i];
        double tol = kPrimalTol * std::max(1.0, std::abs(x_[b]));
        double v = 0.0;
        if (x_[b] < lo_[b] - tol) v = lo_[b] - x_[b];
        else if (x_[b] > hi_[b] + tol) v = x_[b] - hi_[b];
        if (v > worst) {
          worst = v;
          r = i;
        }
      }
      if (r < 0) return Dual::feasible;
      int out = basis_[r];
      bool raise = x_[out] < lo_[out];
      double target = raise ? lo_[out] : hi_[out];
      double s = raise ? 1.0 : -1.0;

      Eigen::VectorXd unit = Eigen::VectorXd::Zero(m_);
      unit[r] = 1.0;
      Eigen::VectorXd rho = btran(unit);
      row_.clear();
      double amax = 0.0;
      for (int j = 0; j < total_; ++j) {
        if (state_[j] == State::basic) continue;
        double a = dot_column(j, rho);
        if (a == 0.0) continue;
        row_.emplace_back(j, a);
        if (lo_[j] != hi_[j]) amax = std::max(amax, std::abs(a));
      }
      double ptol = kPivotTol * std::max(1.0, amax);

      // Harris ratio test on the reduced costs.
      auto slack = [&](int j, double a) -> double {
        if (lo_[j] == hi_[j] || std::abs(a) <= ptol) return -1.0;
        switch (state_[j]) {
          case State::lower: return s * a < 0 ? std::max(reduced_[j], 0.0) : -1.0;
          case State::upper: return s * a > 0 ? std::max(-reduced_[j], 0.0) : -1.0;
          case State::zero: return std::abs(reduced_[j]);
          default: return -1.0;
        }
      };
      double theta_max = kInf;
      for (const auto& [j, a] : row_) {
        double d = slack(j, a);
        if (d >= 0.0) theta_max = std::min(theta_max, (d + kDualTol) / std::abs(a));
      }
      if (!std::isfinite(theta_max)) return Dual::infeasible;
      int q = -1;
      double arq = 0.0;
      for (const auto& [j, a] : row_) {
        double d = slack(j, a);
        if (d >= 0.0 && d / std::abs(a) <= theta_max && std::abs(a) > std::abs(arq)) {
          q = j;
          arq = a;
        }
      }

      Eigen::VectorXd alpha = ftran(q);
      if (std::abs(alpha[r] - arq) > 1e-7 * std::max(1.0, std::abs(arq))) {
        if (etas_.empty()) return Dual::trouble;
        refactor();
        continue;
      }

      double step = (x_[out] - target) / alpha[r];
      x_[q] += step;
      for (int i = 0; i < m_; ++i)
        if (alpha[i] != 0.0) x_[basis_[i]] -= step * alpha[i];
      double ratio = reduced_[q] / arq;
      for (const auto& [j, a] : row_) reduced_[j] -= ratio * a;
      reduced_[out] = -ratio;
      reduced_[q] = 0.0;
      state_[out] = raise ? State::lower : State::upper;
      x_[out] = target;
      pos_[out] = -1;
      basis_[r] = q;
      pos_[q] = r;
      state_[q] = State::basic;

      Eta eta;
      eta.row = r;
      eta.pivot = arq;
      for (int i = 0; i < m_; ++i)
        if (i != r && alpha[i] != 0.0) eta.column.emplace_back(i, alpha[i]);
      etas_.push_back(std::move(eta));
      ++iterations_;
      if (etas_.size() >= kRefactorEvery) refactor();
    }
  }

  const LinearProgram& src_;
  const SolveConfig& cfg_;
  Clock::time_point deadline_;
  const std::vector<double>& col_lo_;
  const std::vector<double>& col_hi_;
  const Basis* warm_basis_;

  int n_ = 0, m_ = 0, total_ = 0, arts_ = 0;
  int phase_ = 2;
  bool infeasible_bounds_ = false;
  Eigen::SparseMatrix<double, Eigen::ColMajor> A_;
  std::vector<double> row_scale_, col_scale_;
  double cost_scale_ = 1.0;
  std::vector<double> lo_, hi_, cost_, x_, reduced_, weight_;
  std::vector<State> state_;
  std::vector<int> basis_, pos_;
  std::vector<double> art_sign_;
  std::vector<int> art_row_;

  Eigen::SparseMatrix<double, Eigen::ColMajor> B_;
  mutable Eigen::SparseLU<Eigen::SparseMatrix<double, Eigen::ColMajor>, Eigen::COLAMDOrdering<int>> lu_;
  std::vector<Eta> etas_;
  std::vector<std::pair<int, double>> row_;  // nonzeros of the dual pivot row

  std::size_t iterations_ = 0;
  std::size_t degenerate_ = 0;
  bool bland_ = false;
};

}  // namespace

LpOutcome simplex(const LinearProgram& lp, const SolveConfig& cfg, Clock::time_point deadline,
                  const WarmStart& warm) {
  return Simplex(lp, cfg, deadline, warm).run();
}

}  // namespace refplan::detail
