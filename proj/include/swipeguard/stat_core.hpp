#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "swipeguard/errors.hpp"

namespace swipeguard {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

using SampleSet = std::vector<VectorXd>;

struct GaussianParams {
  VectorXd mean;
  MatrixXd cov;
};

struct StudentTParams {
  double dof = 1.0;
  VectorXd loc;
  MatrixXd scale;
};

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

namespace detail {

inline void check_dim(Index expected, Index got, const char* where) {
  if (expected != got) {
    throw DimensionError(std::string(where) + ": dimension mismatch (expected " +
                         std::to_string(expected) + ", got " + std::to_string(got) + ")");
  }
}

inline Index common_dim(std::span<const VectorXd> samples, const char* where) {
  const Index d = samples.front().size();
  for (const auto& s : samples) check_dim(d, s.size(), where);
  return d;
}

}  // namespace detail

/// Cholesky factor of a covariance, with the diagonal jitter that was needed.
///
/// Jitter policy: try the matrix as given, then add eps*I with eps growing by
/// 10x from 1e-12 up to 1e-6 * trace / d. A pivot below 1e-12 of the largest
/// diagonal entry counts as a failure. Throws SingularModelError when no step
/// succeeds.
class CholeskyFactor {
 public:
  explicit CholeskyFactor(const MatrixXd& cov) {
    if (cov.rows() != cov.cols()) throw DimensionError("factorize: matrix is not square");
    const Index d = cov.rows();
    if (d == 0) throw DimensionError("factorize: empty matrix");
    if (!cov.allFinite()) throw SingularModelError("factorize: non-finite covariance");
    const double max_jitter = 1e-6 * cov.trace() / static_cast<double>(d);
    const double max_diag = cov.diagonal().maxCoeff();

    if (try_factor(cov, max_diag)) return;
    for (double eps = 1e-12; eps <= max_jitter; eps *= 10.0) {
      MatrixXd jittered = cov;
      jittered.diagonal().array() += eps;
      if (try_factor(jittered, max_diag + eps)) {
        jitter_ = eps;
        return;
      }
    }
    throw SingularModelError("factorize: covariance is singular after maximum jitter");
  }

  [[nodiscard]] Index dim() const noexcept { return llt_.matrixL().rows(); }
  [[nodiscard]] double log_det() const noexcept { return log_det_; }
  [[nodiscard]] double jitter() const noexcept { return jitter_; }

  /// Squared norm of L^{-1} r, i.e. r' C^{-1} r.
  [[nodiscard]] double quad_form(const VectorXd& r) const {
    return llt_.matrixL().solve(r).squaredNorm();
  }

 private:
  bool try_factor(const MatrixXd& m, double max_diag) {
    llt_.compute(m);
    if (llt_.info() != Eigen::Success) return false;
    const VectorXd diag = llt_.matrixLLT().diagonal();
    const double floor = 1e-12 * std::max(max_diag, 0.0);
    for (Index i = 0; i < diag.size(); ++i) {
      const double p = diag[i];
      if (!(p > 0.0) || !std::isfinite(p) || p * p <= floor) return false;
    }
    log_det_ = 2.0 * diag.array().log().sum();
    return true;
  }

  Eigen::LLT<MatrixXd> llt_;
  double log_det_ = 0.0;
  double jitter_ = 0.0;
};

/// Sample mean and centered scatter matrix sum (x - mean)(x - mean)'.
struct Scatter {
  VectorXd mean;
  MatrixXd scatter;
  std::size_t count = 0;
};

inline Scatter scatter_of(std::span<const VectorXd> samples) {
  if (samples.empty()) throw DimensionError("scatter: no samples");
  const Index d = detail::common_dim(samples, "scatter");
  Scatter s;
  s.count = samples.size();
  s.mean = VectorXd::Zero(d);
  for (const auto& x : samples) s.mean += x;
  s.mean /= static_cast<double>(s.count);
  MatrixXd centered(d, static_cast<Index>(s.count));
  for (std::size_t i = 0; i < s.count; ++i) centered.col(static_cast<Index>(i)) = samples[i] - s.mean;
  s.scatter = centered * centered.transpose();
  return s;
}

/// Maximum-likelihood Gaussian fit (covariance divisor N).
inline GaussianParams mle_cov(std::span<const VectorXd> samples) {
  if (samples.size() < 2) throw DimensionError("mle_cov: need at least two samples");
  Scatter s = scatter_of(samples);
  return {std::move(s.mean), s.scatter / static_cast<double>(s.count)};
}

/// alpha * cov + (1 - alpha) * diag(cov).
inline MatrixXd shrink_cov(const MatrixXd& cov, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("shrink_cov: alpha must lie in [0, 1]");
  if (cov.rows() != cov.cols()) throw DimensionError("shrink_cov: matrix is not square");
  MatrixXd out = alpha * cov;
  out.diagonal() = cov.diagonal();
  return out;
}

/// Unbiased pooled covariance: summed per-profile scatter over summed (N_p - 1).
/// Profiles with a single sample contribute nothing.
inline MatrixXd pooled_cov(std::span<const SampleSet> profiles) {
  MatrixXd total;
  double dof = 0.0;
  for (const auto& p : profiles) {
    if (p.size() < 2) continue;
    Scatter s = scatter_of(p);
    if (total.size() == 0) {
      total = std::move(s.scatter);
    } else {
      detail::check_dim(total.rows(), s.scatter.rows(), "pooled_cov");
      total += s.scatter;
    }
    dof += static_cast<double>(p.size() - 1);
  }
  if (dof < 1.0) throw DimensionError("pooled_cov: no profile has at least two samples");
  return total / dof;
}

/// Multivariate normal with a cached factorization.
class GaussianDensity {
 public:
  explicit GaussianDensity(GaussianParams params)
      : params_(std::move(params)), factor_(params_.cov) {
    detail::check_dim(params_.cov.rows(), params_.mean.size(), "gaussian");
  }

  [[nodiscard]] double mahalanobis_sq(const VectorXd& x) const {
    detail::check_dim(params_.mean.size(), x.size(), "gaussian");
    return factor_.quad_form(x - params_.mean);
  }

  [[nodiscard]] double log_normalizer() const {
    return -0.5 * (static_cast<double>(params_.mean.size()) * kLog2Pi + factor_.log_det());
  }

  [[nodiscard]] double logpdf(const VectorXd& x) const { return log_normalizer() - 0.5 * mahalanobis_sq(x); }

  [[nodiscard]] const GaussianParams& params() const noexcept { return params_; }
  [[nodiscard]] const CholeskyFactor& factor() const noexcept { return factor_; }

 private:
  GaussianParams params_;
  CholeskyFactor factor_;
};

/// Multivariate Student-t with a cached factorization of the scale matrix.
class StudentTDensity {
 public:
  explicit StudentTDensity(StudentTParams params)
      : params_(std::move(params)), factor_(params_.scale) {
    if (!(params_.dof > 0.0)) throw ConfigError("student_t: degrees of freedom must be positive");
    detail::check_dim(params_.scale.rows(), params_.loc.size(), "student_t");
    const double d = static_cast<double>(params_.loc.size());
    const double nu = params_.dof;
    constant_ = std::lgamma(0.5 * (nu + d)) - std::lgamma(0.5 * nu) -
                0.5 * d * std::log(nu * std::numbers::pi) - 0.5 * factor_.log_det();
  }

  [[nodiscard]] double logpdf(const VectorXd& x) const {
    detail::check_dim(params_.loc.size(), x.size(), "student_t");
    const double m = factor_.quad_form(x - params_.loc);
    const double nu = params_.dof;
    const double d = static_cast<double>(params_.loc.size());
    return constant_ - 0.5 * (nu + d) * std::log1p(m / nu);
  }

  [[nodiscard]] const StudentTParams& params() const noexcept { return params_; }

 private:
  StudentTParams params_;
  CholeskyFactor factor_;
  double constant_ = 0.0;
};

inline double gaussian_logpdf(const GaussianParams& params, const VectorXd& x) {
  return GaussianDensity(params).logpdf(x);
}

inline double mahalanobis_sq(const GaussianParams& params, const VectorXd& x) {
  return GaussianDensity(params).mahalanobis_sq(x);
}

inline double student_t_logpdf(const StudentTParams& params, const VectorXd& x) {
  return StudentTDensity(params).logpdf(x);
}

// --- shrinkage selection ----------------------------------------------------

struct ShrinkageConfig {
  std::vector<double> alpha_grid = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  /// Fold count; 0 selects leave-one-out when any profile has fewer than 10
  /// samples and 5-fold otherwise.
  int cv_folds = 0;

  void validate() const {
    if (alpha_grid.empty()) throw ConfigError("shrinkage: empty alpha grid");
    for (std::size_t i = 0; i < alpha_grid.size(); ++i) {
      const double a = alpha_grid[i];
      if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("shrinkage: grid values must lie in [0, 1]");
      for (std::size_t j = 0; j < i; ++j) {
        if (alpha_grid[j] == a) throw ConfigError("shrinkage: grid values must be distinct");
      }
    }
    if (cv_folds == 1 || cv_folds < 0) throw ConfigError("shrinkage: cv_folds must be >= 2 (or 0 for auto)");
  }
};

/// per_profile: each profile's own MLE covariance is shrunk.
/// pooled: the pooled covariance is shrunk and evaluated at each profile mean.
enum class ShrinkageScoring { per_profile, pooled };

struct AlphaSelection {
  double alpha = 1.0;
  std::vector<double> mean_heldout_loglik;  // one per grid entry; -inf if singular
};

namespace detail {

inline int fold_count(std::span<const SampleSet> profiles, int requested) {
  if (requested >= 2) return requested;
  std::size_t smallest = std::numeric_limits<std::size_t>::max();
  std::size_t largest = 0;
  for (const auto& p : profiles) {
    smallest = std::min(smallest, p.size());
    largest = std::max(largest, p.size());
  }
  if (smallest < 10) return static_cast<int>(largest);  // leave-one-out
  return 5;
}

/// Splits one profile by fold id (sample index mod folds).
inline void split_fold(const SampleSet& p, int folds, int fold, SampleSet& train, SampleSet& held) {
  train.clear();
  held.clear();
  for (std::size_t i = 0; i < p.size(); ++i) {
    (static_cast<int>(i % static_cast<std::size_t>(folds)) == fold ? held : train).push_back(p[i]);
  }
}

inline double pick_alpha(const std::vector<double>& grid, const std::vector<double>& score) {
  double best = -std::numeric_limits<double>::infinity();
  for (double s : score) best = std::max(best, s);
  if (!std::isfinite(best)) throw SingularModelError("select_alpha: every candidate is singular");
  const double tol = 1e-9 * std::max(1.0, std::abs(best));
  double alpha = -1.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (score[i] >= best - tol) alpha = std::max(alpha, grid[i]);
  }
  return alpha;
}

}  // namespace detail

/// Cross-validated choice of the shrinkage weight. Returns the grid value with
/// the highest mean held-out log-likelihood; ties (within 1e-9 relative) go
/// to the larger alpha.
inline AlphaSelection select_alpha(std::span<const SampleSet> profiles, const ShrinkageConfig& config,
                                   ShrinkageScoring scoring) {
  config.validate();
  if (profiles.empty()) throw DimensionError("select_alpha: no profiles");
  const auto& grid = config.alpha_grid;
  AlphaSelection out;
  if (grid.size() == 1) {
    out.alpha = grid.front();
    out.mean_heldout_loglik = {0.0};
    return out;
  }

  const int folds = detail::fold_count(profiles, config.cv_folds);
  std::vector<double> total(grid.size(), 0.0);
  std::vector<bool> singular(grid.size(), false);
  std::size_t evaluated = 0;
  SampleSet train, held;

  const auto accumulate = [&](const VectorXd& mean, const MatrixXd& cov, const SampleSet& points) {
    for (std::size_t a = 0; a < grid.size(); ++a) {
      if (singular[a]) continue;
      try {
        const GaussianDensity g({mean, shrink_cov(cov, grid[a])});
        for (const auto& x : points) total[a] += g.logpdf(x);
      } catch (const SingularModelError&) {
        singular[a] = true;
      }
    }
    evaluated += points.size();
  };

  if (scoring == ShrinkageScoring::per_profile) {
    for (const auto& p : profiles) {
      for (int f = 0; f < folds; ++f) {
        detail::split_fold(p, folds, f, train, held);
        if (held.empty() || train.size() < 2) continue;
        const GaussianParams mle = mle_cov(train);
        accumulate(mle.mean, mle.cov, held);
      }
    }
  } else {
    std::vector<SampleSet> trains(profiles.size());
    std::vector<SampleSet> helds(profiles.size());
    for (int f = 0; f < folds; ++f) {
      std::size_t dof = 0;
      for (std::size_t p = 0; p < profiles.size(); ++p) {
        detail::split_fold(profiles[p], folds, f, trains[p], helds[p]);
        if (trains[p].size() >= 2) dof += trains[p].size() - 1;
      }
      if (dof < 1) continue;
      const MatrixXd pooled = pooled_cov(trains);
      for (std::size_t p = 0; p < profiles.size(); ++p) {
        if (helds[p].empty() || trains[p].empty()) continue;
        accumulate(scatter_of(trains[p]).mean, pooled, helds[p]);
      }
    }
  }
  if (evaluated == 0) throw ConfigError("select_alpha: not enough samples for cross-validation");

  out.mean_heldout_loglik.resize(grid.size());
  for (std::size_t a = 0; a < grid.size(); ++a) {
    out.mean_heldout_loglik[a] = singular[a] ? -std::numeric_limits<double>::infinity()
                                             : total[a] / static_cast<double>(evaluated);
  }
  out.alpha = detail::pick_alpha(grid, out.mean_heldout_loglik);
  return out;
}

}  // namespace swipeguard
