#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>

#include <Eigen/Dense>

// Limited-memory BFGS with Armijo backtracking.  Small and self-contained:
// the only consumer is the 16-parameter likelihood maximization in tomo, so
// there is no need for box constraints or Wolfe line searches.

namespace entdist {

struct LbfgsOptions {
  int max_evals = 100000;   // function+gradient evaluation budget
  int history = 8;          // stored curvature pairs
  double grad_tol = 1e-6;   // stop when ||grad||_2 falls below this
  double rel_f_tol = 1e-9;  // stop when |f_prev - f| <= rel_f_tol * max(1, |f|)
};

struct LbfgsResult {
  Eigen::VectorXd x;
  double f = 0.0;
  Eigen::VectorXd grad;
  int evals = 0;
  int iterations = 0;
  bool converged = false;
};

// Minimize f(x).  `fg` evaluates f and writes the gradient into its second
// argument.  Deterministic: no randomness, no wall-clock dependence.
inline LbfgsResult lbfgs_minimize(
    const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>& fg,
    Eigen::VectorXd x0, const LbfgsOptions& opt = {}) {
  LbfgsResult res;
  res.x = std::move(x0);
  const auto n = res.x.size();
  res.grad.resize(n);
  res.f = fg(res.x, res.grad);
  res.evals = 1;

  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;

  Eigen::VectorXd g_new(n);
  while (res.evals < opt.max_evals) {
    if (res.grad.norm() < opt.grad_tol) {
      res.converged = true;
      break;
    }

    // Two-loop recursion for d = -H * grad.
    Eigen::VectorXd d = -res.grad;
    std::vector<double> alpha(s_hist.size());
    for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(d);
      d -= alpha[i] * y_hist[i];
    }
    if (!s_hist.empty()) {
      const double gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
      d *= gamma;
    }
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(d);
      d += (alpha[i] - beta) * s_hist[i];
    }

    double dir_deriv = d.dot(res.grad);
    if (!(dir_deriv < 0.0)) {  // not a descent direction; fall back to steepest
      d = -res.grad;
      dir_deriv = -res.grad.squaredNorm();
    }

    // Armijo backtracking.
    constexpr double c1 = 1e-4;
    double step = 1.0;
    bool accepted = false;
    double f_new = res.f;
    Eigen::VectorXd x_new;
    for (int halving = 0; halving < 60 && res.evals < opt.max_evals; ++halving) {
      x_new = res.x + step * d;
      f_new = fg(x_new, g_new);
      ++res.evals;
      if (std::isfinite(f_new) && f_new <= res.f + c1 * step * dir_deriv) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (!s_hist.empty()) {  // curvature memory may be stale; retry from steepest
        s_hist.clear();
        y_hist.clear();
        rho_hist.clear();
        continue;
      }
      // Steepest descent cannot make progress: we are at numerical stationarity.
      res.converged = true;
      break;
    }

    const Eigen::VectorXd s = x_new - res.x;
    const Eigen::VectorXd y = g_new - res.grad;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opt.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }

    const double f_prev = res.f;
    res.x = std::move(x_new);
    res.f = f_new;
    res.grad = g_new;
    ++res.iterations;

    if (std::abs(f_prev - res.f) <= opt.rel_f_tol * std::max(1.0, std::abs(res.f))) {
      res.converged = true;
      break;
    }
  }
  if (res.grad.norm() < opt.grad_tol) res.converged = true;
  return res;
}

}  // namespace entdist
