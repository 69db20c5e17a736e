#pragma once

// Contextual GP-LCB: alpha(x, d) = mean([x, d]) - sqrt(beta) * std([x, d]),
// minimized over the decision box for a fixed context d.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "eccbo/box.hpp"
#include "eccbo/detail/box_minimizer.hpp"
#include "eccbo/errors.hpp"
#include "eccbo/gp.hpp"

namespace eccbo::acquisition {

using Eigen::Index;
using Eigen::VectorXd;

struct AcquisitionConfig {
  double beta = 4.0;  // sqrt(beta) = 2
  int multistart_count = 32;
  int local_steps = 50;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(beta >= 0.0)) throw ContractViolation("acquisition: beta must be non-negative");
    if (multistart_count < 1) throw ContractViolation("acquisition: multistart_count must be >= 1");
    if (local_steps < 0) throw ContractViolation("acquisition: local_steps must be >= 0");
  }

  bool operator==(const AcquisitionConfig&) const = default;
};

inline VectorXd join(const VectorXd& x, const VectorXd& d) {
  VectorXd p(x.size() + d.size());
  p << x, d;
  return p;
}

/// LCB in original cost units.
inline double lcb(const gp::GpPosterior& post, const VectorXd& x, const VectorXd& d,
                  const AcquisitionConfig& cfg) {
  if (x.size() + d.size() != post.dim())
    throw ContractViolation("lcb: [x, d] dimension does not match the posterior");
  const gp::Prediction p = post.predict(join(x, d));
  return p.mean - std::sqrt(cfg.beta) * std::sqrt(p.variance);
}

/// LCB in normalized target units; an increasing affine map of `lcb`.
inline double lcb_normalized(const gp::GpPosterior& post, const VectorXd& x, const VectorXd& d,
                             const AcquisitionConfig& cfg) {
  const gp::Prediction p = post.predict_normalized(join(x, d));
  return p.mean - std::sqrt(cfg.beta) * std::sqrt(p.variance);
}

namespace detail {

inline double radical_inverse(std::uint64_t index, std::uint64_t base) {
  double inv = 1.0 / double(base), f = inv, r = 0.0;
  while (index > 0) {
    r += f * double(index % base);
    index /= base;
    f *= inv;
  }
  return r;
}

inline constexpr std::array<std::uint64_t, 16> kPrimes = {2,  3,  5,  7,  11, 13, 17, 19,
                                                          23, 29, 31, 37, 41, 43, 47, 53};

}  // namespace detail

/// Halton point `index` (1-based) in the unit cube, without rotation.
inline VectorXd halton(std::uint64_t index, Index dim) {
  if (dim > Index(detail::kPrimes.size())) throw ContractViolation("halton: dimension too large");
  VectorXd u(dim);
  for (Index j = 0; j < dim; ++j) u[j] = detail::radical_inverse(index, detail::kPrimes[j]);
  return u;
}

/// Deterministic start set: Halton points with a seed-dependent
/// Cranley-Patterson rotation, mapped into `box`.
inline std::vector<VectorXd> start_points(const Box& box, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  VectorXd shift(box.dim());
  for (Index j = 0; j < box.dim(); ++j) shift[j] = unit(rng);
  std::vector<VectorXd> pts;
  pts.reserve(count);
  for (int k = 0; k < count; ++k) {
    VectorXd u = halton(std::uint64_t(k) + 1, box.dim()) + shift;
    for (Index j = 0; j < u.size(); ++j) u[j] -= std::floor(u[j]);
    pts.push_back(box.from_unit(u));
  }
  return pts;
}

/// Multistart projected quasi-Newton minimization of the LCB over `box` at
/// context `d_next`. The result is always inside `box` and never worse than
/// any start point; ties go to the earliest start.
inline VectorXd optimize_acquisition(const gp::GpPosterior& post, const VectorXd& d_next,
                                     const Box& box, const AcquisitionConfig& cfg) {
  cfg.validate();
  if (box.dim() + d_next.size() != post.dim())
    throw ContractViolation("optimize_acquisition: box + context dimension mismatch");
  const double sqrt_beta = std::sqrt(cfg.beta);
  const Index m = box.dim();
  const VectorXd width = box.upper - box.lower;

  auto value_at = [&](const VectorXd& x) { return lcb_normalized(post, x, d_next, cfg); };

  // Local search runs in unit coordinates of the box.
  auto objective = [&](const VectorXd& u, VectorXd& g) {
    const VectorXd x = box.from_unit(u);
    const gp::PredictionGradient p = post.predict_with_gradient(join(x, d_next));
    const double sd = std::sqrt(p.variance);
    VectorXd gx = p.mean_grad.head(m);
    if (sd > 1e-12 && sqrt_beta > 0.0) gx -= sqrt_beta * p.variance_grad.head(m) / (2.0 * sd);
    g = gx.cwiseProduct(width);
    return p.mean - sqrt_beta * sd;
  };

  eccbo::detail::MinimizeOptions opt;
  opt.max_iterations = cfg.local_steps;
  opt.gradient_tolerance = 1e-10;
  opt.value_tolerance = 1e-14;
  const VectorXd ulo = VectorXd::Zero(m), uhi = VectorXd::Ones(m);

  const auto starts = start_points(box, cfg.multistart_count, cfg.seed);
  VectorXd best_x;
  double best_v = std::numeric_limits<double>::infinity();
  for (const VectorXd& s : starts) {
    const double v0 = value_at(s);
    VectorXd cand = s;
    double cv = v0;
    if (cfg.local_steps > 0) {
      VectorXd u0(m);
      for (Index j = 0; j < m; ++j) u0[j] = width[j] > 0.0 ? (s[j] - box.lower[j]) / width[j] : 0.0;
      const auto r = eccbo::detail::minimize_in_box(objective, u0, ulo, uhi, opt);
      const VectorXd x = box.from_unit(r.x);
      const double v = value_at(x);
      if (v < v0) {
        cand = x;
        cv = v;
      }
    }
    if (cv < best_v) {
      best_v = cv;
      best_x = cand;
    }
  }
  if (best_x.size() == 0) best_x = starts.front();
  return box.clamp(best_x);
}

}  // namespace eccbo::acquisition
