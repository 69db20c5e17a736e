#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include <Eigen/Dense>

namespace eccbo::detail {

/// Objective returning f(x) and writing df/dx into `grad`.
using SmoothObjective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct MinimizeResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
};

struct MinimizeOptions {
  int max_iterations = 100;
  double gradient_tolerance = 1e-9;
  double value_tolerance = 1e-13;
};

/// Projected quasi-Newton descent on a box. Iterates never leave the box and
/// the returned value never exceeds f(clamp(x0)).
inline MinimizeResult minimize_in_box(const SmoothObjective& f, Eigen::VectorXd x0,
                                      const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                      const MinimizeOptions& opt = {}) {
  const Eigen::Index n = x0.size();
  auto project = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd p(n);
    for (Eigen::Index i = 0; i < n; ++i) p[i] = std::clamp(v[i], lower[i], upper[i]);
    return p;
  };

  Eigen::VectorXd x = project(x0);
  Eigen::VectorXd g(n);
  double fx = f(x, g);
  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n);
  bool h_scaled = false;

  MinimizeResult res;
  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    if (!std::isfinite(fx) || !g.allFinite()) break;

    // Variables pinned at a bound with the gradient pushing outward stay fixed.
    Eigen::Array<bool, Eigen::Dynamic, 1> pinned(n);
    double pg_norm = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool at_lo = x[i] <= lower[i] && g[i] > 0.0;
      const bool at_hi = x[i] >= upper[i] && g[i] < 0.0;
      pinned[i] = at_lo || at_hi;
      if (!pinned[i]) pg_norm = std::max(pg_norm, std::abs(g[i]));
    }
    if (pg_norm < opt.gradient_tolerance) break;

    Eigen::VectorXd d = -(h * g);
    for (Eigen::Index i = 0; i < n; ++i)
      if (pinned[i]) d[i] = 0.0;
    double slope = d.dot(g);
    if (!(slope < 0.0)) {
      h.setIdentity();
      h_scaled = false;
      d = -g;
      for (Eigen::Index i = 0; i < n; ++i)
        if (pinned[i]) d[i] = 0.0;
    }

    double alpha = 1.0;
    Eigen::VectorXd x_new, g_new(n);
    double f_new = fx;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      x_new = project(x + alpha * d);
      const Eigen::VectorXd step = x_new - x;
      if (step.cwiseAbs().maxCoeff() == 0.0) break;
      f_new = f(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= fx + 1e-4 * g.dot(step)) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;

    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-16 * std::max(1.0, s.squaredNorm())) {
      if (!h_scaled) {
        h *= sy / y.squaredNorm();
        h_scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
      h = (eye - rho * s * y.transpose()) * h * (eye - rho * y * s.transpose()) +
          rho * s * s.transpose();
    }

    const double decrease = fx - f_new;
    x = x_new;
    g = g_new;
    fx = f_new;
    if (decrease <= opt.value_tolerance * std::max(1.0, std::abs(fx))) {
      ++it;
      break;
    }
  }
  res.x = x;
  res.value = fx;
  res.iterations = it;
  return res;
}

}  // namespace eccbo::detail
