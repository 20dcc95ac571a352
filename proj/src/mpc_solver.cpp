// Copyright 2026 The Offline MPC Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <limits>

#include "offline_mpc/mpc.hpp"

namespace ompc {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

void check_query(const ParameterizedMpc& mpc, const Vec& s0) {
  mpc.validate();
  if (s0.size() != state_dim(mpc.model)) throw DomainError("MPC query state has wrong dimension");
  if (!s0.allFinite()) throw DomainError("MPC query state is not finite");
}

void check_pinned_action(const ParameterizedMpc& mpc, const Vec& a0) {
  if (a0.size() != action_dim(mpc.model)) throw DomainError("pinned action has wrong dimension");
  if (!a0.allFinite()) throw DomainError("pinned action is not finite");
  if (mpc.input_bounds && ((a0.array() < mpc.input_bounds->lower.array()).any() ||
                           (a0.array() > mpc.input_bounds->upper.array()).any())) {
    throw DomainError("pinned action violates the input bounds");
  }
}

Vec clamp_to(const Vec& u, const std::optional<InputBounds>& bounds) {
  if (!bounds) return u;
  return u.cwiseMax(bounds->lower).cwiseMin(bounds->upper);
}

// ----- exact sweep for linear-quadratic instances ----- //

// z'Hz + g'z + c over z = [x; u] for a quadratic stage cost on a linear model.
GeneralQuadraticCost as_general(const ParameterizedMpc& mpc) {
  const int n = state_dim(mpc.model);
  const int m = action_dim(mpc.model);
  return std::visit(Overloaded{[&](const QuadraticStageCost& c) {
                                 GeneralQuadraticCost out{Mat::Zero(n + m, n + m), Vec::Zero(n + m), 0.0};
                                 const Mat w = c.w();
                                 out.h.topLeftCorner(n, n) = w;
                                 out.h.bottomRightCorner(m, m) = c.r();
                                 out.g.head(n) = -2.0 * w * c.ref;
                                 out.c = c.ref.dot(w * c.ref) + c.offset;
                                 return out;
                               },
                               [](const GeneralQuadraticCost& c) { return c; }},
                    mpc.stage_cost);
}

struct AffineGain {
  Mat k;   // u = -K x - k
  Vec kk;
};

std::vector<AffineGain> riccati_sweep(const ParameterizedMpc& mpc) {
  const auto& lin = std::get<LinearPlant>(mpc.model);
  const Eigen::Index n = lin.a.rows();
  const Eigen::Index m = lin.b.cols();
  GeneralQuadraticCost cost = as_general(mpc);
  const Mat h = 0.5 * (cost.h + cost.h.transpose());
  const Mat hxx = h.topLeftCorner(n, n);
  const Mat huu = h.bottomRightCorner(m, m);
  const Mat hux = h.bottomLeftCorner(m, n);
  const Vec gx = cost.g.head(n);
  const Vec gu = cost.g.tail(m);

  // V(x) = x'Sx + s'x (constants do not affect the gains).
  Mat s_mat = Mat::Zero(n, n);
  Vec s_vec = Vec::Zero(n);
  if (const auto* t = std::get_if<QuadraticTerminal>(&mpc.terminal_cost)) {
    const Mat p = 0.5 * (t->p + t->p.transpose());
    s_mat = p;
    s_vec = -2.0 * p * t->ref;
  }
  const double g = mpc.gamma;
  std::vector<AffineGain> gains(static_cast<std::size_t>(mpc.horizon));
  for (int k = mpc.horizon - 1; k >= 0; --k) {
    const Mat qxx = hxx + g * lin.a.transpose() * s_mat * lin.a;
    const Mat quu = huu + g * lin.b.transpose() * s_mat * lin.b;
    const Mat qux = hux + g * lin.b.transpose() * s_mat * lin.a;
    const Vec qx = gx + g * lin.a.transpose() * s_vec;
    const Vec qu = gu + g * lin.b.transpose() * s_vec;
    Eigen::LLT<Mat> llt(quu);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("Riccati sweep: input Hessian is not positive definite at stage " + std::to_string(k));
    }
    AffineGain gain{llt.solve(qux), 0.5 * llt.solve(qu)};
    s_mat = qxx - qux.transpose() * gain.k;
    s_mat = (0.5 * (s_mat + s_mat.transpose())).eval();
    s_vec = qx - qux.transpose() * llt.solve(qu);
    gains[static_cast<std::size_t>(k)] = std::move(gain);
  }
  return gains;
}

MpcSolution solve_riccati_backend(const ParameterizedMpc& mpc, const Vec& s0, const Vec* pinned) {
  const auto gains = riccati_sweep(mpc);
  const auto& lin = std::get<LinearPlant>(mpc.model);
  MpcSolution sol;
  sol.states.reserve(static_cast<std::size_t>(mpc.horizon) + 1);
  sol.actions.reserve(static_cast<std::size_t>(mpc.horizon));
  sol.states.push_back(s0);
  for (int k = 0; k < mpc.horizon; ++k) {
    const Vec& x = sol.states.back();
    const auto& gain = gains[static_cast<std::size_t>(k)];
    Vec u = (k == 0 && pinned) ? *pinned : Vec(-gain.k * x - gain.kk);
    sol.states.push_back(lin.a * x + lin.b * u);
    sol.actions.push_back(std::move(u));
  }
  sol.objective = trajectory_objective(mpc, s0, sol.actions);
  if (!std::isfinite(sol.objective)) throw SolverError("Riccati rollout produced a non-finite objective");
  sol.converged = true;
  sol.iterations = 1;
  return sol;
}

// ----- iLQR ----- //

struct Expansion {
  Vec lx, lu;
  Mat lxx, luu, lux;
};

// Cost data fixed for one solve.
struct CostCache {
  bool general = false;
  Mat w, r;
  Vec ref;
  Mat h;  // symmetrized
  Vec g;
};

CostCache make_cache(const ParameterizedMpc& mpc) {
  CostCache cache;
  std::visit(Overloaded{[&](const QuadraticStageCost& c) {
                          cache.w = c.w();
                          cache.r = c.r();
                          cache.ref = c.ref;
                        },
                        [&](const GeneralQuadraticCost& c) {
                          cache.general = true;
                          cache.h = 0.5 * (c.h + c.h.transpose());
                          cache.g = c.g;
                        }},
             mpc.stage_cost);
  return cache;
}

void expand_stage(const ParameterizedMpc& mpc, const CostCache& cache, const Vec& x, const Vec& u, Expansion& e) {
  const Eigen::Index n = x.size();
  const Eigen::Index m = u.size();
  if (cache.general) {
    Vec z(n + m);
    z << x, u;
    const Vec grad = 2.0 * cache.h * z + cache.g;
    e.lx = grad.head(n);
    e.lu = grad.tail(m);
    e.lxx = 2.0 * cache.h.topLeftCorner(n, n);
    e.luu = 2.0 * cache.h.bottomRightCorner(m, m);
    e.lux = 2.0 * cache.h.bottomLeftCorner(m, n);
    return;
  }
  // Gauss-Newton in observation space.
  const bool obs = mpc.cost_space == CostSpace::kObservation;
  const Vec err = (obs ? observe(mpc.model, x) : x) - cache.ref;
  const Mat jac = obs ? observe_jacobian(mpc.model, x) : Mat::Identity(n, n);
  const Mat wj = cache.w * jac;
  e.lx = 2.0 * jac.transpose() * (cache.w * err);
  e.lxx = 2.0 * jac.transpose() * wj;
  e.lu = 2.0 * cache.r * u;
  e.luu = 2.0 * cache.r;
  e.lux = Mat::Zero(m, n);
}

void expand_terminal(const ParameterizedMpc& mpc, const Vec& x, Vec& vx, Mat& vxx) {
  const Eigen::Index n = x.size();
  const bool obs = mpc.cost_space == CostSpace::kObservation;
  std::visit(Overloaded{[&](const ZeroTerminal&) {
                          vx = Vec::Zero(n);
                          vxx = Mat::Zero(n, n);
                        },
                        [&](const SmoothedNormTerminal& t) {
                          const Vec err = (obs ? observe(mpc.model, x) : x) - t.ref;
                          const Mat jac = obs ? observe_jacobian(mpc.model, x) : Mat::Identity(n, n);
                          const double norm = std::sqrt(err.squaredNorm() + t.eps);
                          const Mat hyy = (Mat::Identity(err.size(), err.size()) - err * err.transpose() /
                                                                                        (norm * norm)) /
                                          norm;
                          vx = jac.transpose() * err / norm;
                          vxx = jac.transpose() * hyy * jac;
                        },
                        [&](const QuadraticTerminal& t) {
                          const Vec err = (obs ? observe(mpc.model, x) : x) - t.ref;
                          const Mat jac = obs ? observe_jacobian(mpc.model, x) : Mat::Identity(n, n);
                          const Mat p = t.p + t.p.transpose();
                          vx = jac.transpose() * p * err;
                          vxx = jac.transpose() * p * jac;
                        }},
             mpc.terminal_cost);
}

void linearize(const Plant& model, const Vec& x, const Vec& u, Mat& fx, Mat& fu) {
  if (const auto* lin = std::get_if<LinearPlant>(&model)) {
    fx = lin->a;
    fu = lin->b;
    return;
  }
  constexpr double kStep = 1e-6;
  const Eigen::Index n = x.size();
  const Eigen::Index m = u.size();
  fx.resize(n, n);
  fu.resize(n, m);
  Vec xp = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    xp[i] = x[i] + kStep;
    const Vec plus = propagate(model, xp, u);
    xp[i] = x[i] - kStep;
    fx.col(i) = (plus - propagate(model, xp, u)) / (2.0 * kStep);
    xp[i] = x[i];
  }
  Vec up = u;
  for (Eigen::Index i = 0; i < m; ++i) {
    up[i] = u[i] + kStep;
    const Vec plus = propagate(model, x, up);
    up[i] = u[i] - kStep;
    fu.col(i) = (plus - propagate(model, x, up)) / (2.0 * kStep);
    up[i] = u[i];
  }
}

// min 0.5 x'Hx + g'x  s.t.  lower <= x <= upper, by projected Newton.
// On success `free` marks the inactive components and `factor` holds the
// Cholesky factor of H restricted to them.
struct BoxQpResult {
  bool ok = false;
  Vec x;
  std::vector<bool> free;
  Eigen::LLT<Mat> factor;
};

Mat restrict(const Mat& h, const std::vector<bool>& rows, const std::vector<bool>& cols) {
  std::vector<Eigen::Index> ri, ci;
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (rows[i]) ri.push_back(static_cast<Eigen::Index>(i));
  for (std::size_t i = 0; i < cols.size(); ++i)
    if (cols[i]) ci.push_back(static_cast<Eigen::Index>(i));
  Mat out(static_cast<Eigen::Index>(ri.size()), static_cast<Eigen::Index>(ci.size()));
  for (std::size_t i = 0; i < ri.size(); ++i)
    for (std::size_t j = 0; j < ci.size(); ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = h(ri[i], ci[j]);
  return out;
}

Vec gather(const Vec& v, const std::vector<bool>& mask) {
  Vec out(std::count(mask.begin(), mask.end(), true));
  Eigen::Index k = 0;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) out[k++] = v[static_cast<Eigen::Index>(i)];
  return out;
}

BoxQpResult box_qp(const Mat& h, const Vec& g, const Vec& lower, const Vec& upper) {
  const Eigen::Index m = g.size();
  BoxQpResult res;
  res.x = Vec::Zero(m).cwiseMax(lower).cwiseMin(upper);
  auto objective = [&](const Vec& x) { return 0.5 * x.dot(h * x) + g.dot(x); };
  double value = objective(res.x);
  std::vector<bool> clamped(static_cast<std::size_t>(m), false);
  std::vector<bool> previous;
  bool factored = false;
  for (int iter = 0; iter < 100; ++iter) {
    const Vec grad = g + h * res.x;
    previous = clamped;
    for (Eigen::Index i = 0; i < m; ++i) {
      clamped[static_cast<std::size_t>(i)] =
          (res.x[i] <= lower[i] && grad[i] > 0.0) || (res.x[i] >= upper[i] && grad[i] < 0.0);
    }
    res.free.assign(static_cast<std::size_t>(m), false);
    for (std::size_t i = 0; i < clamped.size(); ++i) res.free[i] = !clamped[i];
    if (std::none_of(res.free.begin(), res.free.end(), [](bool f) { return f; })) {
      res.ok = true;
      return res;
    }
    if (!factored || clamped != previous) {
      res.factor.compute(restrict(h, res.free, res.free));
      if (res.factor.info() != Eigen::Success) return res;
      factored = true;
    }
    const Vec grad_free = gather(grad, res.free);
    if (grad_free.norm() < 1e-12) break;
    // Newton step on the free components with clamped ones held fixed.
    const Vec target = -res.factor.solve(gather(g, res.free) + restrict(h, res.free, clamped) * gather(res.x, clamped));
    Vec dir = Vec::Zero(m);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (res.free[static_cast<std::size_t>(i)]) {
        dir[i] = target[k] - res.x[i];
        ++k;
      }
    }
    const double slope = dir.dot(grad);
    if (slope >= 0.0) break;
    double step = 1.0;
    bool accepted = false;
    Vec trial;
    double trial_value = value;
    while (step > 1e-20) {
      trial = (res.x + step * dir).cwiseMax(lower).cwiseMin(upper);
      trial_value = objective(trial);
      if ((trial_value - value) / (step * slope) > 0.1) {
        accepted = true;
        break;
      }
      step *= 0.6;
    }
    if (!accepted) break;
    const double improvement = value - trial_value;
    res.x = trial;
    value = trial_value;
    if (improvement < 1e-14 * (1.0 + std::abs(value))) break;
  }
  // Refresh the free set and its factor at the final point.
  const Vec grad = g + h * res.x;
  for (Eigen::Index i = 0; i < m; ++i) {
    const bool c = (res.x[i] <= lower[i] && grad[i] > 0.0) || (res.x[i] >= upper[i] && grad[i] < 0.0);
    res.free[static_cast<std::size_t>(i)] = !c;
  }
  if (std::any_of(res.free.begin(), res.free.end(), [](bool f) { return f; })) {
    res.factor.compute(restrict(h, res.free, res.free));
    if (res.factor.info() != Eigen::Success) return res;
  }
  res.ok = true;
  return res;
}

class Ilqr {
 public:
  Ilqr(const ParameterizedMpc& mpc, const Vec& s0, const Vec* pinned, const SolveOptions& options)
      : mpc_(mpc), s0_(s0), pinned_(pinned), options_(options), cache_(make_cache(mpc)) {
    n_ = s0.size();
    m_ = action_dim(mpc.model);
    const auto horizon = static_cast<std::size_t>(mpc.horizon);
    fx_.resize(horizon);
    fu_.resize(horizon);
    exp_.resize(horizon);
    kff_.resize(horizon);
    gain_.resize(horizon);
  }

  MpcSolution run(std::vector<Vec> actions) {
    if (pinned_) actions[0] = *pinned_;
    for (auto& u : actions) u = clamp_to(u, mpc_.input_bounds);
    MpcSolution sol;
    sol.actions = std::move(actions);
    sol.objective = rollout(sol.actions, sol.states);
    if (!std::isfinite(sol.objective)) throw SolverError("iLQR initial rollout produced a non-finite objective");

    double mu = 0.0;
    constexpr double kMuMin = 1e-6;
    constexpr double kMuMax = 1e10;
    bool stale = true;
    std::vector<Vec> trial_actions;
    std::vector<Vec> trial_states;
    for (int iter = 1; iter <= options_.max_iterations; ++iter) {
      sol.iterations = iter;
      if (stale) {
        differentiate(sol);
        stale = false;
      }
      if (!backward(sol, mu)) {
        mu = std::max(kMuMin, 10.0 * mu);
        if (mu > kMuMax) break;
        continue;
      }
      if (-(dv1_ + dv2_) < options_.tolerance) {
        // The predicted decrease is quadratic in the step, so a step that
        // is still visible in the actions may predict almost nothing.
        // Polish with full steps while they do not raise the objective.
        polish(sol, mu);
        sol.converged = true;
        break;
      }
      bool accepted = false;
      double decrease = 0.0;
      for (double alpha = 1.0; alpha > 1e-4; alpha *= 0.5) {
        const double cost = forward(sol, alpha, trial_actions, trial_states);
        if (!std::isfinite(cost)) continue;
        decrease = sol.objective - cost;
        const double expected = -(alpha * dv1_ + alpha * alpha * dv2_);
        if (decrease > 0.0 && (expected <= 0.0 || decrease >= 1e-4 * expected)) {
          sol.actions.swap(trial_actions);
          sol.states.swap(trial_states);
          sol.objective = cost;
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        mu = std::max(kMuMin, 10.0 * mu);
        if (mu > kMuMax) break;
        continue;
      }
      stale = true;
      mu = mu * 0.1 < kMuMin ? 0.0 : mu * 0.1;
      if (decrease < options_.tolerance) {
        sol.converged = true;
        break;
      }
    }
    return sol;
  }

 private:
  void polish(MpcSolution& sol, double mu) {
    std::vector<Vec> trial_actions;
    std::vector<Vec> trial_states;
    for (int i = 0; i < 8; ++i) {
      double step = 0.0, scale = 1.0;
      for (std::size_t k = 0; k < kff_.size(); ++k) {
        step = std::max(step, kff_[k].cwiseAbs().maxCoeff());
        scale = std::max(scale, sol.actions[k].cwiseAbs().maxCoeff());
      }
      if (step <= 1e-12 * scale) return;
      const double cost = forward(sol, 1.0, trial_actions, trial_states);
      if (!(cost <= sol.objective)) return;
      sol.actions.swap(trial_actions);
      sol.states.swap(trial_states);
      sol.objective = cost;
      differentiate(sol);
      if (!backward(sol, mu)) return;
    }
  }

  double rollout(const std::vector<Vec>& actions, std::vector<Vec>& states) const {
    states.resize(actions.size() + 1);
    states[0] = s0_;
    double total = 0.0;
    double weight = 1.0;
    for (std::size_t k = 0; k < actions.size(); ++k) {
      states[k + 1] = propagate(mpc_.model, states[k], actions[k]);
      total += weight * mpc_stage_cost(mpc_, states[k], actions[k]);
      weight *= mpc_.gamma;
      if (!states[k + 1].allFinite()) return std::numeric_limits<double>::quiet_NaN();
    }
    return total + weight * mpc_terminal_cost(mpc_, states.back());
  }

  void differentiate(const MpcSolution& sol) {
    for (std::size_t k = 0; k < sol.actions.size(); ++k) {
      linearize(mpc_.model, sol.states[k], sol.actions[k], fx_[k], fu_[k]);
      expand_stage(mpc_, cache_, sol.states[k], sol.actions[k], exp_[k]);
    }
    expand_terminal(mpc_, sol.states.back(), term_x_, term_xx_);
  }

  bool backward(const MpcSolution& sol, double mu) {
    const double g = mpc_.gamma;
    Vec vx = term_x_;
    Mat vxx = term_xx_;
    dv1_ = 0.0;
    dv2_ = 0.0;
    const auto horizon = sol.actions.size();
    for (std::size_t idx = horizon; idx-- > 0;) {
      // Stage k is weighted by gamma^k in the expected decrease.
      const double weight = std::pow(g, static_cast<double>(idx));
      const Expansion& e = exp_[idx];
      const Mat vxx_fx = vxx * fx_[idx];
      const Vec qx = e.lx + g * fx_[idx].transpose() * vx;
      const Vec qu = e.lu + g * fu_[idx].transpose() * vx;
      const Mat qxx = e.lxx + g * fx_[idx].transpose() * vxx_fx;
      const Mat quu = e.luu + g * fu_[idx].transpose() * vxx * fu_[idx];
      const Mat qux = e.lux + g * fu_[idx].transpose() * vxx_fx;
      Vec& kff = kff_[idx];
      Mat& gain = gain_[idx];
      if (idx == 0 && pinned_) {
        kff = Vec::Zero(m_);
        gain = Mat::Zero(m_, n_);
        break;
      }
      const Mat quu_reg = quu + mu * Mat::Identity(m_, m_);
      if (mpc_.input_bounds) {
        const Vec& u = sol.actions[idx];
        BoxQpResult qp = box_qp(quu_reg, qu, mpc_.input_bounds->lower - u, mpc_.input_bounds->upper - u);
        if (!qp.ok) return false;
        kff = qp.x;
        gain = Mat::Zero(m_, n_);
        if (std::any_of(qp.free.begin(), qp.free.end(), [](bool f) { return f; })) {
          std::vector<bool> all_cols(static_cast<std::size_t>(n_), true);
          const Mat free_gain = -qp.factor.solve(restrict(qux, qp.free, all_cols));
          Eigen::Index r = 0;
          for (Eigen::Index i = 0; i < m_; ++i) {
            if (qp.free[static_cast<std::size_t>(i)]) gain.row(i) = free_gain.row(r++);
          }
        }
      } else {
        Eigen::LLT<Mat> llt(quu_reg);
        if (llt.info() != Eigen::Success) return false;
        kff = -llt.solve(qu);
        gain = -llt.solve(qux);
      }
      dv1_ += weight * kff.dot(qu);
      dv2_ += weight * 0.5 * kff.dot(quu * kff);
      vx = qx + gain.transpose() * quu * kff + gain.transpose() * qu + qux.transpose() * kff;
      vxx = qxx + gain.transpose() * quu * gain + gain.transpose() * qux + qux.transpose() * gain;
      vxx = (0.5 * (vxx + vxx.transpose())).eval();
    }
    return true;
  }

  double forward(const MpcSolution& sol, double alpha, std::vector<Vec>& actions, std::vector<Vec>& states) const {
    const auto horizon = sol.actions.size();
    actions.resize(horizon);
    states.resize(horizon + 1);
    states[0] = s0_;
    double total = 0.0;
    double weight = 1.0;
    for (std::size_t k = 0; k < horizon; ++k) {
      if (k == 0 && pinned_) {
        actions[k] = *pinned_;
      } else {
        actions[k] = clamp_to(sol.actions[k] + alpha * kff_[k] + gain_[k] * (states[k] - sol.states[k]),
                              mpc_.input_bounds);
      }
      states[k + 1] = propagate(mpc_.model, states[k], actions[k]);
      if (!states[k + 1].allFinite()) return std::numeric_limits<double>::quiet_NaN();
      total += weight * mpc_stage_cost(mpc_, states[k], actions[k]);
      weight *= mpc_.gamma;
    }
    return total + weight * mpc_terminal_cost(mpc_, states.back());
  }

  const ParameterizedMpc& mpc_;
  const Vec& s0_;
  const Vec* pinned_;
  const SolveOptions& options_;
  CostCache cache_;
  Eigen::Index n_ = 0;
  Eigen::Index m_ = 0;
  std::vector<Mat> fx_, fu_;
  std::vector<Expansion> exp_;
  Vec term_x_;
  Mat term_xx_;
  std::vector<Vec> kff_;
  std::vector<Mat> gain_;
  double dv1_ = 0.0;
  double dv2_ = 0.0;
};

// Initial guesses for a cold start. Nonlinear models also try constant
// pushes in both directions so that symmetric equilibria (a hanging
// pendulum) do not trap the solver at a zero-gradient point.
std::vector<std::vector<Vec>> cold_starts(const ParameterizedMpc& mpc) {
  const auto horizon = static_cast<std::size_t>(mpc.horizon);
  const int m = action_dim(mpc.model);
  std::vector<std::vector<Vec>> starts;
  starts.emplace_back(horizon, Vec::Zero(m));
  if (!std::holds_alternative<LinearPlant>(mpc.model)) {
    Vec push = Vec::Constant(m, 0.5);
    if (mpc.input_bounds) push = 0.5 * mpc.input_bounds->upper.cwiseAbs().cwiseMin(mpc.input_bounds->lower.cwiseAbs());
    if (push.norm() > 0.0) {
      starts.emplace_back(horizon, push);
      starts.emplace_back(horizon, -push);
    }
  }
  return starts;
}

MpcSolution solve_ilqr_backend(const ParameterizedMpc& mpc, const Vec& s0, const Vec* pinned,
                               const SolveOptions& options) {
  const auto horizon = static_cast<std::size_t>(mpc.horizon);
  Ilqr solver(mpc, s0, pinned, options);
  if (!options.warm_start.empty()) {
    if (options.warm_start.size() != horizon) throw DomainError("warm start has wrong length");
    for (const auto& u : options.warm_start) {
      if (u.size() != action_dim(mpc.model)) throw DomainError("warm start action has wrong dimension");
    }
    return solver.run(options.warm_start);
  }
  MpcSolution best;
  bool have = false;
  for (auto& start : cold_starts(mpc)) {
    MpcSolution sol = solver.run(std::move(start));
    if (!have || sol.objective < best.objective) {
      best = std::move(sol);
      have = true;
    }
  }
  // Bang-bang swing-ups can sit in a basin that no constant guess reaches.
  // Solve with u_0 pinned at each bound corner and restart from those
  // sequences (with the caller's u_0 when pinned).
  if (mpc.input_bounds && !std::holds_alternative<LinearPlant>(mpc.model)) {
    for (const Vec* corner : {&mpc.input_bounds->lower, &mpc.input_bounds->upper}) {
      Ilqr seeded(mpc, s0, corner, options);
      std::vector<Vec> seed = seeded.run(std::vector<Vec>(horizon, *corner)).actions;
      if (pinned != nullptr) seed.front() = *pinned;
      MpcSolution sol = solver.run(std::move(seed));
      if (sol.objective < best.objective) best = std::move(sol);
    }
  }
  return best;
}

MpcSolution dispatch(const ParameterizedMpc& mpc, const Vec& s0, const Vec* pinned, const SolveOptions& options) {
  switch (options.backend) {
    case SolverBackend::kRiccati:
      if (!riccati_applicable(mpc)) throw DomainError("Riccati backend requested for a non linear-quadratic scheme");
      return solve_riccati_backend(mpc, s0, pinned);
    case SolverBackend::kIlqr:
      return solve_ilqr_backend(mpc, s0, pinned, options);
    case SolverBackend::kAuto:
      break;
  }
  if (riccati_applicable(mpc)) return solve_riccati_backend(mpc, s0, pinned);
  return solve_ilqr_backend(mpc, s0, pinned, options);
}

}  // namespace

bool riccati_applicable(const ParameterizedMpc& mpc) {
  return std::holds_alternative<LinearPlant>(mpc.model) && !mpc.input_bounds &&
         !std::holds_alternative<SmoothedNormTerminal>(mpc.terminal_cost);
}

double trajectory_objective(const ParameterizedMpc& mpc, const Vec& s0, const std::vector<Vec>& actions,
                            std::vector<Vec>* states) {
  if (actions.size() != static_cast<std::size_t>(mpc.horizon)) {
    throw DomainError("action sequence length differs from the horizon");
  }
  Vec x = s0;
  if (states) {
    states->clear();
    states->push_back(x);
  }
  double total = 0.0;
  double weight = 1.0;
  for (const auto& u : actions) {
    total += weight * mpc_stage_cost(mpc, x, u);
    x = propagate(mpc.model, x, u);
    if (states) states->push_back(x);
    weight *= mpc.gamma;
  }
  return total + weight * mpc_terminal_cost(mpc, x);
}

MpcSolution solve(const ParameterizedMpc& mpc, const Vec& s0, const SolveOptions& options) {
  check_query(mpc, s0);
  return dispatch(mpc, s0, nullptr, options);
}

MpcSolution solve_pinned(const ParameterizedMpc& mpc, const Vec& s0, const Vec& a0, const SolveOptions& options) {
  check_query(mpc, s0);
  check_pinned_action(mpc, a0);
  return dispatch(mpc, s0, &a0, options);
}

Vec policy(const ParameterizedMpc& mpc, const Vec& s0, const SolveOptions& options) {
  return solve(mpc, s0, options).actions.front();
}

double value(const ParameterizedMpc& mpc, const Vec& s0, const SolveOptions& options) {
  return solve(mpc, s0, options).objective;
}

double action_value(const ParameterizedMpc& mpc, const Vec& s0, const Vec& a0, const SolveOptions& options) {
  return solve_pinned(mpc, s0, a0, options).objective;
}

MpcController::MpcController(ParameterizedMpc mpc, SolveOptions options)
    : mpc_(std::move(mpc)), options_(std::move(options)) {
  mpc_.validate();
}

Vec MpcController::operator()(const Vec& state) {
  SolveOptions opts = options_;
  if (!previous_.empty()) {
    opts.warm_start.assign(previous_.begin() + 1, previous_.end());
    opts.warm_start.push_back(previous_.back());
  }
  last_ = solve(mpc_, state, opts);
  previous_ = last_.actions;
  return last_.actions.front();
}

}  // namespace ompc
