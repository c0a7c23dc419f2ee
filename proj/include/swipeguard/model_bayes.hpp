#pragma once

#include <optional>
#include <span>
#include <vector>

#include "swipeguard/stat_core.hpp"

namespace swipeguard {

/// Normal-inverse-Wishart hyperparameters.
struct NIWParams {
  VectorXd mu0;
  double k0 = 0.01;
  double nu0 = 0.0;
  MatrixXd psi0;

  [[nodiscard]] Index dim() const noexcept { return mu0.size(); }

  void validate() const {
    const Index d = dim();
    if (d == 0) throw DimensionError("niw: empty prior");
    if (psi0.rows() != d || psi0.cols() != d) throw DimensionError("niw: psi0 does not match mu0");
    if (!(k0 > 0.0)) throw ConfigError("niw: k0 must be positive");
    if (!(nu0 > static_cast<double>(d) - 1.0)) throw ConfigError("niw: nu0 must exceed d - 1");
    CholeskyFactor check(psi0);  // throws if psi0 is not positive-definite
    (void)check;
  }
};

/// Posterior after absorbing n_obs samples; a prior is the n_obs = 0 case.
struct NIWPosterior {
  VectorXd mu;
  double k = 0.0;
  double nu = 0.0;
  MatrixXd psi;
  std::size_t n_obs = 0;

  static NIWPosterior from_prior(const NIWParams& p) { return {p.mu0, p.k0, p.nu0, p.psi0, 0}; }
  [[nodiscard]] Index dim() const noexcept { return mu.size(); }
};

struct NIWConfig {
  double k0 = 0.01;
  /// nu0 = d + nu0_offset; 2 makes (nu0 - d - 1) = 1 so E[Sigma] = psi0.
  double nu0_offset = 2.0;
  /// Cold-start prior standard deviation for position channels, in
  /// unit-square coordinates.
  double position_std = 0.15;
  /// Cold-start prior variance for every other (standardized) channel.
  double other_variance = 1.0;
};

struct PriorBuild {
  NIWParams prior;
  double alpha = 1.0;  // shrinkage applied to the pooled covariance
};

/// Prior from a user population: psi0 = (nu0 - d - 1) * shrunk pooled
/// covariance, mu0 = grand mean of every population sample. The pooled
/// shrinkage is cross-validated unless `alpha` is supplied.
inline PriorBuild build_prior(std::span<const SampleSet> population, const NIWConfig& config = {},
                              std::optional<double> alpha = std::nullopt, const ShrinkageConfig& cv = {}) {
  if (population.empty()) throw DimensionError("build_prior: empty population");
  const MatrixXd pooled = pooled_cov(population);
  const Index d = pooled.rows();

  VectorXd grand = VectorXd::Zero(d);
  std::size_t count = 0;
  for (const auto& p : population) {
    for (const auto& x : p) {
      detail::check_dim(d, x.size(), "build_prior");
      grand += x;
      ++count;
    }
  }
  grand /= static_cast<double>(count);
  if (pooled.diagonal().maxCoeff() <= 0.0) {
    throw SingularModelError("build_prior: population has no within-profile variation");
  }

  PriorBuild out;
  out.alpha = alpha ? *alpha : select_alpha(population, cv, ShrinkageScoring::pooled).alpha;
  out.prior.mu0 = std::move(grand);
  out.prior.k0 = config.k0;
  out.prior.nu0 = static_cast<double>(d) + config.nu0_offset;
  out.prior.psi0 = (out.prior.nu0 - static_cast<double>(d) - 1.0) * shrink_cov(pooled, out.alpha);
  out.prior.validate();
  return out;
}

/// Prior without population data: zero mean and diagonal expected covariance,
/// with the first `position_dims` entries treated as position channels.
inline NIWParams cold_start_prior(Index d, Index position_dims, const NIWConfig& config = {}) {
  if (position_dims > d) throw DimensionError("cold_start_prior: more position dims than dims");
  VectorXd variance = VectorXd::Constant(d, config.other_variance);
  variance.head(position_dims).setConstant(config.position_std * config.position_std);

  NIWParams p;
  p.mu0 = VectorXd::Zero(d);
  p.k0 = config.k0;
  p.nu0 = static_cast<double>(d) + config.nu0_offset;
  p.psi0 = ((p.nu0 - static_cast<double>(d) - 1.0) * variance).asDiagonal();
  p.validate();
  return p;
}

/// Conjugate update; an empty batch returns the input unchanged.
inline NIWPosterior posterior_update(const NIWPosterior& prior, std::span<const VectorXd> features) {
  if (features.empty()) return prior;
  const Scatter s = scatter_of(features);
  detail::check_dim(prior.dim(), s.mean.size(), "posterior_update");

  const double n = static_cast<double>(s.count);
  NIWPosterior post;
  post.k = prior.k + n;
  post.nu = prior.nu + n;
  post.mu = (prior.k * prior.mu + n * s.mean) / post.k;
  const VectorXd diff = s.mean - prior.mu;
  post.psi = prior.psi + s.scatter + (prior.k * n / post.k) * (diff * diff.transpose());
  post.n_obs = prior.n_obs + s.count;
  return post;
}

inline NIWPosterior posterior_update(const NIWParams& prior, std::span<const VectorXd> features) {
  return posterior_update(NIWPosterior::from_prior(prior), features);
}

/// Student-t posterior predictive with dof nu - d + 1 and scale
/// psi * (k + 1) / (k * (nu - d + 1)).
inline StudentTParams posterior_predictive(const NIWPosterior& post) {
  const double dof = post.nu - static_cast<double>(post.dim()) + 1.0;
  if (!(dof > 0.0)) throw ConfigError("posterior_predictive: non-positive degrees of freedom");
  return {dof, post.mu, post.psi * ((post.k + 1.0) / (post.k * dof))};
}

/// Bayesian Gaussian model: a prior and the posterior it produced.
class BayesGaussModel {
 public:
  BayesGaussModel(NIWParams prior, NIWPosterior posterior)
      : prior_(std::move(prior)), posterior_(std::move(posterior)), predictive_(posterior_predictive(posterior_)) {}

  [[nodiscard]] double score(const VectorXd& x) const { return predictive_.logpdf(x); }

  [[nodiscard]] const NIWParams& prior() const noexcept { return prior_; }
  [[nodiscard]] const NIWPosterior& posterior() const noexcept { return posterior_; }
  [[nodiscard]] const StudentTParams& predictive() const noexcept { return predictive_.params(); }
  [[nodiscard]] Index dim() const noexcept { return prior_.dim(); }

 private:
  NIWParams prior_;
  NIWPosterior posterior_;
  StudentTDensity predictive_;
};

inline BayesGaussModel train_bayes(const NIWParams& prior, std::span<const VectorXd> features) {
  prior.validate();
  return {prior, posterior_update(prior, features)};
}

inline double score_bayes(const NIWPosterior& post, const VectorXd& x) {
  return student_t_logpdf(posterior_predictive(post), x);
}

}  // namespace swipeguard
