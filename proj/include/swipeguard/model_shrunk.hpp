#pragma once

#include <optional>
#include <span>
#include <vector>

#include "swipeguard/stat_core.hpp"

namespace swipeguard {

/// Single Gaussian with a covariance shrunk toward its diagonal.
class ShrunkModel {
 public:
  ShrunkModel(GaussianParams params, double alpha, std::vector<double> train_loglik = {})
      : density_(std::move(params)), alpha_(alpha), train_loglik_(std::move(train_loglik)) {}

  /// Log-likelihood of x; higher means more genuine.
  [[nodiscard]] double score(const VectorXd& x) const { return density_.logpdf(x); }
  [[nodiscard]] double mahalanobis_sq(const VectorXd& x) const { return density_.mahalanobis_sq(x); }

  [[nodiscard]] const GaussianParams& gaussian() const noexcept { return density_.params(); }
  [[nodiscard]] double alpha() const noexcept { return alpha_; }
  [[nodiscard]] const std::vector<double>& train_loglik() const noexcept { return train_loglik_; }
  [[nodiscard]] Index dim() const noexcept { return density_.params().mean.size(); }

 private:
  GaussianDensity density_;
  double alpha_;
  std::vector<double> train_loglik_;
};

/// Fits the shrunk Gaussian. With no alpha given, alpha is chosen by
/// cross-validation on the training samples; fewer than three samples leave
/// no room for that and alpha = 0 is used.
///
/// If the requested alpha yields a singular covariance the fit retries at
/// alpha = 0 before throwing SingularModelError.
inline ShrunkModel train_shrunk(std::span<const VectorXd> features, std::optional<double> alpha = std::nullopt,
                                const ShrinkageConfig& cv = {}) {
  if (features.size() < 2) throw DimensionError("train_shrunk: need at least two samples");
  const GaussianParams mle = mle_cov(features);

  double chosen = 0.0;
  if (alpha) {
    chosen = *alpha;
  } else if (features.size() >= 3) {
    const std::vector<SampleSet> one{SampleSet(features.begin(), features.end())};
    try {
      chosen = select_alpha(one, cv, ShrinkageScoring::per_profile).alpha;
    } catch (const SingularModelError&) {
      chosen = 0.0;
    }
  }

  const auto fit = [&](double a) {
    GaussianDensity g({mle.mean, shrink_cov(mle.cov, a)});
    std::vector<double> ll;
    ll.reserve(features.size());
    for (const auto& x : features) ll.push_back(g.logpdf(x));
    return ShrunkModel(g.params(), a, std::move(ll));
  };
  try {
    return fit(chosen);
  } catch (const SingularModelError&) {
    if (chosen == 0.0) throw;
  }
  return fit(0.0);
}

}  // namespace swipeguard
