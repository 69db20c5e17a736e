#pragma once

// Gaussian-process regression with an ARD RBF kernel plus a constant bias
// kernel. All kernel algebra happens in normalized coordinates: inputs are
// mapped to [0, 1] per dimension through a declared box, targets are
// standardized to zero mean and unit variance.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "eccbo/box.hpp"
#include "eccbo/detail/box_minimizer.hpp"
#include "eccbo/errors.hpp"

namespace eccbo::gp {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct KernelParams {
  double rbf_variance = 1.0;
  VectorXd lengthscales;
  double bias_variance = 0.0;
  double noise_variance = 1e-6;

  static KernelParams isotropic(Index dim, double lengthscale, double rbf_variance = 1.0,
                                double bias_variance = 0.0, double noise_variance = 1e-6) {
    return {rbf_variance, VectorXd::Constant(dim, lengthscale), bias_variance, noise_variance};
  }

  Index dim() const { return lengthscales.size(); }

  void validate(Index expected_dim) const {
    if (lengthscales.size() != expected_dim)
      throw ContractViolation("kernel: lengthscale count " + std::to_string(lengthscales.size()) +
                              " does not match input dimension " + std::to_string(expected_dim));
    if (!(rbf_variance > 0.0) || !(noise_variance > 0.0) || !(bias_variance >= 0.0))
      throw ContractViolation("kernel: variances must be positive (bias non-negative)");
    for (Index j = 0; j < lengthscales.size(); ++j)
      if (!(lengthscales[j] > 0.0)) throw ContractViolation("kernel: lengthscales must be positive");
  }

  bool operator==(const KernelParams& o) const {
    return rbf_variance == o.rbf_variance && lengthscales.size() == o.lengthscales.size() &&
           lengthscales == o.lengthscales && bias_variance == o.bias_variance &&
           noise_variance == o.noise_variance;
  }
};

namespace detail {

inline double rbf_part(const Eigen::Ref<const VectorXd>& a, const Eigen::Ref<const VectorXd>& b,
                       const KernelParams& p) {
  double r2 = 0.0;
  for (Index j = 0; j < a.size(); ++j) {
    const double d = (a[j] - b[j]) / p.lengthscales[j];
    r2 += d * d;
  }
  return p.rbf_variance * std::exp(-0.5 * r2);
}

}  // namespace detail

/// k(a, b) = bias + rbf_variance * exp(-0.5 * sum_j ((a_j - b_j) / l_j)^2)
inline double kernel_eval(const Eigen::Ref<const VectorXd>& a, const Eigen::Ref<const VectorXd>& b,
                          const KernelParams& p) {
  if (a.size() != p.dim() || b.size() != p.dim())
    throw ContractViolation("kernel_eval: point dimension does not match lengthscales");
  return p.bias_variance + detail::rbf_part(a, b, p);
}

struct Normalization {
  VectorXd input_shift;
  VectorXd input_scale;
  double target_shift = 0.0;
  double target_scale = 1.0;

  VectorXd normalize_input(const Eigen::Ref<const VectorXd>& x) const {
    return (x - input_shift).cwiseQuotient(input_scale);
  }
};

/// Observed joint points (rows) and scalar targets, plus the normalization
/// derived from the declared input box and the target sample moments.
class Dataset {
 public:
  Dataset() = default;

  Dataset(MatrixXd inputs, VectorXd targets, const Box& input_box)
      : inputs_(std::move(inputs)), targets_(std::move(targets)) {
    if (inputs_.rows() != targets_.size())
      throw ContractViolation("dataset: row count does not match target count");
    if (inputs_.cols() != input_box.dim() && inputs_.rows() > 0)
      throw ContractViolation("dataset: input columns do not match box dimension");
    if (!inputs_.allFinite() || !targets_.allFinite())
      throw ContractViolation("dataset: non-finite entry");
    if (inputs_.rows() == 0) inputs_.resize(0, input_box.dim());

    norm_.input_shift = input_box.lower;
    norm_.input_scale = input_box.upper - input_box.lower;
    for (Index j = 0; j < norm_.input_scale.size(); ++j)
      if (!(norm_.input_scale[j] > 0.0))
        throw ContractViolation("dataset: input box has zero width in dimension " +
                                std::to_string(j));

    const Index n = targets_.size();
    if (n >= 1) norm_.target_shift = targets_.mean();
    if (n >= 2) {
      const double var = (targets_.array() - norm_.target_shift).square().sum() / double(n - 1);
      const double sd = std::sqrt(var);
      if (sd > 1e-12 * std::max(1.0, std::abs(norm_.target_shift))) norm_.target_scale = sd;
    }
  }

  static Dataset empty(const Box& input_box) { return Dataset(MatrixXd(0, input_box.dim()), VectorXd(0), input_box); }

  Index size() const { return targets_.size(); }
  Index dim() const { return norm_.input_shift.size(); }
  const MatrixXd& inputs() const { return inputs_; }
  const VectorXd& targets() const { return targets_; }
  const Normalization& normalization() const { return norm_; }
  Box input_box() const { return Box(norm_.input_shift, norm_.input_shift + norm_.input_scale); }

  MatrixXd normalized_inputs() const {
    MatrixXd z(inputs_.rows(), inputs_.cols());
    for (Index i = 0; i < inputs_.rows(); ++i)
      z.row(i) = norm_.normalize_input(inputs_.row(i).transpose()).transpose();
    return z;
  }

  VectorXd normalized_targets() const {
    return (targets_.array() - norm_.target_shift) / norm_.target_scale;
  }

  Dataset with_observation(const VectorXd& x, double y) const {
    MatrixXd in(inputs_.rows() + 1, dim());
    in.topRows(inputs_.rows()) = inputs_;
    in.row(inputs_.rows()) = x.transpose();
    VectorXd t(targets_.size() + 1);
    t.head(targets_.size()) = targets_;
    t[targets_.size()] = y;
    return Dataset(std::move(in), std::move(t), input_box());
  }

 private:
  MatrixXd inputs_;
  VectorXd targets_;
  Normalization norm_;
};

/// Kernel matrix over rows of `z` (normalized inputs), without noise.
inline MatrixXd kernel_matrix(const MatrixXd& z, const KernelParams& p) {
  const Index n = z.rows();
  MatrixXd k(n, n);
  for (Index i = 0; i < n; ++i) {
    k(i, i) = p.bias_variance + p.rbf_variance;
    for (Index j = 0; j < i; ++j) {
      const double v = p.bias_variance + detail::rbf_part(z.row(i).transpose(), z.row(j).transpose(), p);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

struct Factorization {
  MatrixXd lower;
  double jitter = 0.0;
};

/// Cholesky of `a` with jitter escalation 1e-10, 1e-9, ..., 1e-4.
inline Factorization factorize_with_jitter(const MatrixXd& a) {
  const Index n = a.rows();
  double jitter = 0.0;
  constexpr double kFirstJitter = 1e-10;
  constexpr double kMaxJitter = 1e-4;
  for (;;) {
    MatrixXd m = a;
    if (jitter > 0.0) m.diagonal().array() += jitter;
    Eigen::LLT<MatrixXd> llt(m);
    bool ok = llt.info() == Eigen::Success;
    if (ok) {
      MatrixXd l = llt.matrixL();
      for (Index i = 0; i < n && ok; ++i) ok = std::isfinite(l(i, i)) && l(i, i) > 0.0;
      if (ok) return {std::move(l), jitter};
    }
    if (jitter >= kMaxJitter * (1.0 - 1e-9)) throw NonPositiveDefinite(jitter);
    jitter = jitter == 0.0 ? kFirstJitter : jitter * 10.0;
  }
}

struct Prediction {
  double mean = 0.0;
  double variance = 0.0;
};

/// Normalized-space prediction with gradients taken w.r.t. the original-unit point.
struct PredictionGradient {
  double mean = 0.0;
  double variance = 0.0;
  VectorXd mean_grad;
  VectorXd variance_grad;
};

namespace detail {
inline double clamp_variance(double v) {
  constexpr double kTolerance = 1e-10;
  if (v >= 0.0) return v;
  if (v >= -kTolerance) return 0.0;
  throw NumericalError("negative predictive variance " + std::to_string(v));
}
}  // namespace detail

class GpPosterior;
GpPosterior condition(Dataset data, KernelParams params, double prior_mean = 0.0);

/// Immutable posterior; build with `condition`.
class GpPosterior {
 public:
  const KernelParams& params() const { return params_; }
  const Dataset& data() const { return data_; }
  const MatrixXd& chol_factor() const { return chol_; }
  const VectorXd& weights() const { return weights_; }
  double jitter() const { return jitter_; }
  double prior_mean() const { return prior_mean_; }
  Index dim() const { return data_.dim(); }

  /// Mean and latent variance in normalized units.
  Prediction predict_normalized(const Eigen::Ref<const VectorXd>& point) const {
    check_point(point);
    const VectorXd z = data_.normalization().normalize_input(point);
    const VectorXd ks = cross_covariance(z);
    Prediction p;
    p.mean = prior_mean_ + ks.dot(weights_);
    double var = params_.bias_variance + params_.rbf_variance;
    if (data_.size() > 0) {
      const VectorXd v = chol_.triangularView<Eigen::Lower>().solve(ks);
      var -= v.squaredNorm();
    }
    p.variance = detail::clamp_variance(var);
    return p;
  }

  PredictionGradient predict_with_gradient(const Eigen::Ref<const VectorXd>& point) const {
    check_point(point);
    const auto& nm = data_.normalization();
    const VectorXd z = nm.normalize_input(point);
    const Index n = data_.size();
    const Index d = dim();
    PredictionGradient out;
    out.mean_grad = VectorXd::Zero(d);
    out.variance_grad = VectorXd::Zero(d);
    out.mean = prior_mean_;
    double var = params_.bias_variance + params_.rbf_variance;
    if (n > 0) {
      VectorXd ks(n);
      MatrixXd dks(n, d);  // d k(z, z_i) / d z
      for (Index i = 0; i < n; ++i) {
        const double r = detail::rbf_part(z, z_train_.row(i).transpose(), params_);
        ks[i] = params_.bias_variance + r;
        for (Index j = 0; j < d; ++j) {
          const double l = params_.lengthscales[j];
          dks(i, j) = -r * (z[j] - z_train_(i, j)) / (l * l);
        }
      }
      out.mean += ks.dot(weights_);
      const VectorXd v = chol_.triangularView<Eigen::Lower>().solve(ks);
      var -= v.squaredNorm();
      const VectorXd kinv_ks = chol_.transpose().triangularView<Eigen::Upper>().solve(v);
      out.mean_grad = dks.transpose() * weights_;
      out.variance_grad = -2.0 * (dks.transpose() * kinv_ks);
      out.mean_grad = out.mean_grad.cwiseQuotient(nm.input_scale);
      out.variance_grad = out.variance_grad.cwiseQuotient(nm.input_scale);
    }
    out.variance = detail::clamp_variance(var);
    return out;
  }

  /// Mean and latent variance in original target units.
  Prediction predict(const Eigen::Ref<const VectorXd>& point) const {
    const Prediction pn = predict_normalized(point);
    const auto& nm = data_.normalization();
    return {nm.target_shift + nm.target_scale * pn.mean,
            nm.target_scale * nm.target_scale * pn.variance};
  }

 private:
  friend GpPosterior condition(Dataset data, KernelParams params, double prior_mean);

  void check_point(const Eigen::Ref<const VectorXd>& point) const {
    if (point.size() != dim())
      throw ContractViolation("gp: point dimension " + std::to_string(point.size()) +
                              " does not match " + std::to_string(dim()));
    if (!point.allFinite()) throw ContractViolation("gp: non-finite query point");
  }

  VectorXd cross_covariance(const VectorXd& z) const {
    VectorXd ks(data_.size());
    for (Index i = 0; i < data_.size(); ++i)
      ks[i] = params_.bias_variance + detail::rbf_part(z, z_train_.row(i).transpose(), params_);
    return ks;
  }

  KernelParams params_;
  Dataset data_;
  MatrixXd z_train_;
  MatrixXd chol_;
  VectorXd weights_;
  double jitter_ = 0.0;
  double prior_mean_ = 0.0;
};

/// Conditions the GP on `data`. `prior_mean` is a constant in normalized
/// target units (0 reproduces the standardized zero-mean prior).
inline GpPosterior condition(Dataset data, KernelParams params, double prior_mean) {
  params.validate(data.dim());
  GpPosterior post;
  post.z_train_ = data.normalized_inputs();
  const Index n = data.size();
  if (n > 0) {
    MatrixXd k = kernel_matrix(post.z_train_, params);
    k.diagonal().array() += params.noise_variance;
    Factorization f = factorize_with_jitter(k);
    const VectorXd y = data.normalized_targets().array() - prior_mean;
    post.weights_ = f.lower.transpose().triangularView<Eigen::Upper>().solve(
        f.lower.triangularView<Eigen::Lower>().solve(y));
    post.chol_ = std::move(f.lower);
    post.jitter_ = f.jitter;
  } else {
    post.chol_.resize(0, 0);
    post.weights_.resize(0);
  }
  post.params_ = std::move(params);
  post.data_ = std::move(data);
  post.prior_mean_ = prior_mean;
  return post;
}

inline Prediction predict(const GpPosterior& post, const Eigen::Ref<const VectorXd>& point) {
  return post.predict(point);
}

// ---------------------------------------------------------------------------
// Hyperparameters

/// Linear-unit bounds; optimization runs over their logarithms.
struct HyperBounds {
  double rbf_variance_min = 1e-2, rbf_variance_max = 1e2;
  double lengthscale_min = 0.3, lengthscale_max = 10.0;
  double bias_variance_min = 1e-6, bias_variance_max = 10.0;
  double noise_variance_min = 1e-6, noise_variance_max = 1.0;

  bool operator==(const HyperBounds&) const = default;
};

/// Packing order: [log rbf, log l_1..l_D, log bias, log noise].
inline VectorXd pack_log_params(const KernelParams& p) {
  const Index d = p.dim();
  VectorXd t(d + 3);
  t[0] = std::log(p.rbf_variance);
  for (Index j = 0; j < d; ++j) t[1 + j] = std::log(p.lengthscales[j]);
  t[d + 1] = std::log(std::max(p.bias_variance, std::numeric_limits<double>::min()));
  t[d + 2] = std::log(p.noise_variance);
  return t;
}

inline KernelParams unpack_log_params(const VectorXd& t) {
  const Index d = t.size() - 3;
  KernelParams p;
  p.rbf_variance = std::exp(t[0]);
  p.lengthscales = t.segment(1, d).array().exp();
  p.bias_variance = std::exp(t[d + 1]);
  p.noise_variance = std::exp(t[d + 2]);
  return p;
}

inline std::pair<VectorXd, VectorXd> log_bounds(const HyperBounds& b, Index dim) {
  VectorXd lo(dim + 3), hi(dim + 3);
  lo[0] = std::log(b.rbf_variance_min);
  hi[0] = std::log(b.rbf_variance_max);
  lo.segment(1, dim).setConstant(std::log(b.lengthscale_min));
  hi.segment(1, dim).setConstant(std::log(b.lengthscale_max));
  lo[dim + 1] = std::log(b.bias_variance_min);
  hi[dim + 1] = std::log(b.bias_variance_max);
  lo[dim + 2] = std::log(b.noise_variance_min);
  hi[dim + 2] = std::log(b.noise_variance_max);
  return {lo, hi};
}

/// Log marginal likelihood of the normalized targets. When `grad` is given it
/// receives the gradient w.r.t. the packed log-parameters.
inline double log_marginal_likelihood(const Dataset& data, const KernelParams& p,
                                      VectorXd* grad = nullptr, double prior_mean = 0.0) {
  p.validate(data.dim());
  const Index n = data.size();
  const Index d = data.dim();
  if (grad) grad->setZero(d + 3);
  if (n == 0) return 0.0;

  const MatrixXd z = data.normalized_inputs();
  MatrixXd k_rbf(n, n);
  for (Index i = 0; i < n; ++i) {
    k_rbf(i, i) = p.rbf_variance;
    for (Index j = 0; j < i; ++j) {
      const double v = detail::rbf_part(z.row(i).transpose(), z.row(j).transpose(), p);
      k_rbf(i, j) = v;
      k_rbf(j, i) = v;
    }
  }
  MatrixXd ky = k_rbf.array() + p.bias_variance;
  ky.diagonal().array() += p.noise_variance;
  const Factorization f = factorize_with_jitter(ky);
  const VectorXd y = data.normalized_targets().array() - prior_mean;
  const auto l = f.lower.triangularView<Eigen::Lower>();
  const VectorXd alpha = f.lower.transpose().triangularView<Eigen::Upper>().solve(l.solve(y));
  const double lml = -0.5 * y.dot(alpha) - f.lower.diagonal().array().log().sum() -
                     0.5 * double(n) * std::log(2.0 * std::numbers::pi);

  if (grad) {
    MatrixXd kinv = l.solve(MatrixXd::Identity(n, n));
    kinv = f.lower.transpose().triangularView<Eigen::Upper>().solve(kinv);
    const MatrixXd w = alpha * alpha.transpose() - kinv;
    (*grad)[0] = 0.5 * (w.array() * k_rbf.array()).sum();
    for (Index j = 0; j < d; ++j) {
      const double l2 = p.lengthscales[j] * p.lengthscales[j];
      double acc = 0.0;
      for (Index a = 0; a < n; ++a)
        for (Index b = 0; b < a; ++b) {
          const double diff = z(a, j) - z(b, j);
          acc += 2.0 * w(a, b) * k_rbf(a, b) * diff * diff / l2;
        }
      (*grad)[1 + j] = 0.5 * acc;
    }
    (*grad)[d + 1] = 0.5 * p.bias_variance * w.sum();
    (*grad)[d + 2] = 0.5 * p.noise_variance * w.trace();
  }
  return lml;
}

/// Multi-restart maximization of the log marginal likelihood. The first start
/// is `warm_start` when given (clamped into bounds); the rest are drawn
/// uniformly in the log box from `seed`.
inline KernelParams fit_hyperparameters(const Dataset& data, const HyperBounds& bounds,
                                        int restarts, std::uint64_t seed,
                                        const std::optional<KernelParams>& warm_start = std::nullopt,
                                        double prior_mean = 0.0) {
  if (data.size() < 2) throw InsufficientData("fit_hyperparameters: need at least 2 observations");
  if (restarts < 1) throw ContractViolation("fit_hyperparameters: restarts must be >= 1");
  const Index d = data.dim();
  const auto [lo, hi] = log_bounds(bounds, d);

  auto objective = [&](const VectorXd& t, VectorXd& g) {
    try {
      const double v = log_marginal_likelihood(data, unpack_log_params(t), &g, prior_mean);
      g = -g;
      return -v;
    } catch (const NonPositiveDefinite&) {
      g.setZero(t.size());
      return std::numeric_limits<double>::infinity();
    }
  };

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<VectorXd> starts;
  if (warm_start && warm_start->dim() == d) {
    VectorXd t = pack_log_params(*warm_start);
    starts.push_back(t.cwiseMax(lo).cwiseMin(hi));
  }
  while (static_cast<int>(starts.size()) < restarts) {
    VectorXd t(d + 3);
    for (Index i = 0; i < t.size(); ++i) t[i] = lo[i] + unit(rng) * (hi[i] - lo[i]);
    starts.push_back(t);
  }

  eccbo::detail::MinimizeOptions opt;
  opt.max_iterations = 200;
  opt.gradient_tolerance = 1e-6;
  opt.value_tolerance = 1e-12;
  double best = std::numeric_limits<double>::infinity();
  VectorXd best_t;
  for (const VectorXd& s : starts) {
    const auto r = eccbo::detail::minimize_in_box(objective, s, lo, hi, opt);
    if (r.value < best) {
      best = r.value;
      best_t = r.x;
    }
  }
  if (!std::isfinite(best)) throw NonPositiveDefinite(1e-4);
  return unpack_log_params(best_t);
}

}  // namespace eccbo::gp
