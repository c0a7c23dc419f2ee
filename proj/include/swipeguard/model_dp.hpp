#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "swipeguard/stat_core.hpp"

namespace swipeguard {

/// Hyperparameters of the Dirichlet-process mixture with known per-dimension
/// noise. Every vector has one entry per feature dimension.
struct DPHyperParams {
  double alpha = 1.0;
  VectorXd mu0;
  VectorXd sigma0_sq;
  VectorXd sigma_y_sq;
  /// Noise variance used in the new-component weight during sampling. Unset
  /// means the same as sigma_y_sq.
  std::optional<VectorXd> sigma_x_sq;

  static DPHyperParams defaults(Index d, double alpha = 1.0, double sigma0_sq = 1.0, double sigma_y_sq = 0.25) {
    return {alpha, VectorXd::Zero(d), VectorXd::Constant(d, sigma0_sq), VectorXd::Constant(d, sigma_y_sq),
            std::nullopt};
  }

  [[nodiscard]] Index dim() const noexcept { return mu0.size(); }
  [[nodiscard]] const VectorXd& new_noise_sq() const { return sigma_x_sq ? *sigma_x_sq : sigma_y_sq; }

  void validate() const {
    const Index d = dim();
    if (d == 0) throw DimensionError("dp: empty hyperparameters");
    if (!(alpha > 0.0)) throw ConfigError("dp: alpha must be positive");
    if (sigma0_sq.size() != d || sigma_y_sq.size() != d) throw DimensionError("dp: variance vector size");
    if (!(sigma0_sq.array() > 0.0).all() || !(sigma_y_sq.array() > 0.0).all()) {
      throw ConfigError("dp: variances must be positive");
    }
    if (sigma_x_sq) {
      if (sigma_x_sq->size() != d) throw DimensionError("dp: sigma_x_sq size");
      if (!(sigma_x_sq->array() > 0.0).all()) throw ConfigError("dp: variances must be positive");
    }
  }
};

struct ComponentStats {
  std::size_t n = 0;
  VectorXd sum;

  [[nodiscard]] VectorXd mean() const { return sum / static_cast<double>(n); }
};

/// Assignments plus per-component sufficient statistics. Labels are compact
/// (0..K-1) and ordered by first appearance in sample order.
struct MixtureState {
  std::vector<int> assignments;
  std::vector<ComponentStats> components;
  VectorXd tau;  // per-dimension component precision, 1 / sigma_y^2
  std::uint64_t rng_seed = 0;
  int sweep_count = 0;
  bool converged = false;

  [[nodiscard]] std::size_t size() const noexcept { return assignments.size(); }
};

inline std::size_t component_count(const MixtureState& s) { return s.components.size(); }

/// Rebuilds component statistics from the assignments.
inline std::vector<ComponentStats> recompute_stats(std::span<const VectorXd> data, const std::vector<int>& labels) {
  int k_max = -1;
  for (int c : labels) k_max = std::max(k_max, c);
  std::vector<ComponentStats> out(static_cast<std::size_t>(k_max + 1));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto& c = out[static_cast<std::size_t>(labels[i])];
    if (c.n == 0) c.sum = VectorXd::Zero(data[i].size());
    c.n += 1;
    c.sum += data[i];
  }
  return out;
}

namespace detail {

/// Sum over dimensions of log N(x_d; mean_d, var_d).
inline double diag_normal_logpdf(const VectorXd& x, const VectorXd& mean, const VectorXd& var) {
  return -0.5 * ((x - mean).array().square() / var.array() + var.array().log() + kLog2Pi).sum();
}

inline VectorXd component_mean(const ComponentStats& c, const VectorXd& tau, const DPHyperParams& h) {
  const VectorXd tau0 = h.sigma0_sq.cwiseInverse();
  return (c.sum.cwiseProduct(tau) + h.mu0.cwiseProduct(tau0))
      .cwiseQuotient(static_cast<double>(c.n) * tau + tau0);
}

inline VectorXd component_var(const ComponentStats& c, const VectorXd& tau, const DPHyperParams& h) {
  const VectorXd tau0 = h.sigma0_sq.cwiseInverse();
  return (static_cast<double>(c.n) * tau + tau0).cwiseInverse() + h.sigma_y_sq;
}

inline double log_sum_exp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

/// Canonical relabelling: order of first appearance.
inline void relabel(std::vector<int>& labels) {
  std::vector<int> map;
  for (int& c : labels) {
    if (c >= static_cast<int>(map.size())) map.resize(static_cast<std::size_t>(c) + 1, -1);
    auto& m = map[static_cast<std::size_t>(c)];
    if (m < 0) m = static_cast<int>(std::count_if(map.begin(), map.end(), [](int v) { return v >= 0; }));
    c = m;
  }
}

}  // namespace detail

/// All samples in one component.
inline MixtureState initial_state(std::span<const VectorXd> data, const DPHyperParams& hyper, std::uint64_t seed) {
  hyper.validate();
  MixtureState s;
  s.assignments.assign(data.size(), 0);
  s.tau = hyper.sigma_y_sq.cwiseInverse();
  s.rng_seed = seed;
  if (!data.empty()) {
    for (const auto& x : data) detail::check_dim(hyper.dim(), x.size(), "dp");
    s.components = recompute_stats(data, s.assignments);
  }
  return s;
}

/// Observer for the normalized assignment probabilities of every draw.
using WeightObserver = void (*)(std::span<const double>, void*);

/// One collapsed Gibbs pass over the samples in ascending index order.
/// For sample i the weights are, per dimension and multiplied across
/// dimensions,
///   existing k: n_{-i,k}/(n-1+alpha) * N(x; (sum_k tau + mu0 tau0)/(n_k tau + tau0), 1/(n_k tau + tau0) + sigma_y^2)
///   new:        alpha/(n-1+alpha)    * N(x; mu0, sigma0^2 + sigma_x^2)
/// computed in log space and normalized by max subtraction.
template <class Rng>
MixtureState gibbs_sweep(MixtureState state, std::span<const VectorXd> data, const DPHyperParams& hyper, Rng& rng,
                         WeightObserver observer = nullptr, void* observer_ctx = nullptr) {
  const std::size_t n = data.size();
  if (state.assignments.size() != n) throw DimensionError("gibbs_sweep: state does not match data");
  if (n == 0) return state;
  const double denom = static_cast<double>(n) - 1.0 + hyper.alpha;
  const VectorXd new_var = hyper.sigma0_sq + hyper.new_noise_sq();
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  std::vector<double> logw;
  std::vector<double> prob;
  for (std::size_t i = 0; i < n; ++i) {
    const VectorXd& x = data[i];
    const auto old = static_cast<std::size_t>(state.assignments[i]);
    auto& oc = state.components[old];
    oc.n -= 1;
    oc.sum -= x;
    if (oc.n == 0) {
      state.components.erase(state.components.begin() + static_cast<std::ptrdiff_t>(old));
      for (int& c : state.assignments) {
        if (c > static_cast<int>(old)) --c;
      }
    }
    state.assignments[i] = -1;

    const std::size_t k = state.components.size();
    logw.resize(k + 1);
    for (std::size_t c = 0; c < k; ++c) {
      const auto& comp = state.components[c];
      logw[c] = std::log(static_cast<double>(comp.n) / denom) +
                detail::diag_normal_logpdf(x, detail::component_mean(comp, state.tau, hyper),
                                           detail::component_var(comp, state.tau, hyper));
    }
    logw[k] = std::log(hyper.alpha / denom) + detail::diag_normal_logpdf(x, hyper.mu0, new_var);

    const double top = *std::max_element(logw.begin(), logw.end());
    prob.resize(k + 1);
    double total = 0.0;
    for (std::size_t c = 0; c <= k; ++c) total += prob[c] = std::exp(logw[c] - top);
    for (double& p : prob) p /= total;
    if (observer) observer(prob, observer_ctx);

    const double u = unif(rng);
    std::size_t pick = k;
    double acc = 0.0;
    for (std::size_t c = 0; c <= k; ++c) {
      acc += prob[c];
      if (u < acc) {
        pick = c;
        break;
      }
    }
    if (pick == k) state.components.push_back({0, VectorXd::Zero(x.size())});
    state.components[pick].n += 1;
    state.components[pick].sum += x;
    state.assignments[i] = static_cast<int>(pick);
  }

  detail::relabel(state.assignments);
  state.components = recompute_stats(data, state.assignments);
  state.sweep_count += 1;
  return state;
}

struct GibbsSchedule {
  int n_sweeps = 200;
  int convergence_window = 10;
};

/// Runs Gibbs sweeps from the single-component start until the assignment
/// vector is unchanged for `convergence_window` consecutive sweeps or the
/// sweep budget is spent. Non-convergence is reported in the state.
inline MixtureState train_dpgmm(std::span<const VectorXd> data, const DPHyperParams& hyper,
                                const GibbsSchedule& schedule = {}, std::uint64_t seed = 0) {
  if (data.empty()) throw DimensionError("train_dpgmm: need at least one sample");
  if (schedule.n_sweeps < 1 || schedule.convergence_window < 1) throw ConfigError("train_dpgmm: bad schedule");
  MixtureState state = initial_state(data, hyper, seed);
  std::mt19937_64 rng(seed);
  int unchanged = 0;
  while (state.sweep_count < schedule.n_sweeps) {
    std::vector<int> before = state.assignments;
    state = gibbs_sweep(std::move(state), data, hyper, rng);
    unchanged = (state.assignments == before) ? unchanged + 1 : 0;
    if (unchanged >= schedule.convergence_window) {
      state.converged = true;
      break;
    }
  }
  return state;
}

/// Log posterior predictive density of the trained mixture, including the
/// weight reserved for an unseen component.
inline double score_dpgmm(const MixtureState& state, const DPHyperParams& hyper, const VectorXd& x) {
  detail::check_dim(hyper.dim(), x.size(), "score_dpgmm");
  const double n = static_cast<double>(state.size());
  const double denom = n + hyper.alpha;
  std::vector<double> terms;
  terms.reserve(state.components.size() + 1);
  for (const auto& c : state.components) {
    terms.push_back(std::log(static_cast<double>(c.n) / denom) +
                    detail::diag_normal_logpdf(x, detail::component_mean(c, state.tau, hyper),
                                               detail::component_var(c, state.tau, hyper)));
  }
  terms.push_back(std::log(hyper.alpha / denom) +
                  detail::diag_normal_logpdf(x, hyper.mu0, hyper.sigma0_sq + hyper.sigma_y_sq));
  return detail::log_sum_exp(terms);
}

class DPMixtureModel {
 public:
  DPMixtureModel(DPHyperParams hyper, MixtureState state) : hyper_(std::move(hyper)), state_(std::move(state)) {
    hyper_.validate();
  }

  [[nodiscard]] double score(const VectorXd& x) const { return score_dpgmm(state_, hyper_, x); }
  [[nodiscard]] const DPHyperParams& hyper() const noexcept { return hyper_; }
  [[nodiscard]] const MixtureState& state() const noexcept { return state_; }
  [[nodiscard]] std::size_t components() const noexcept { return component_count(state_); }
  [[nodiscard]] Index dim() const noexcept { return hyper_.dim(); }

 private:
  DPHyperParams hyper_;
  MixtureState state_;
};

}  // namespace swipeguard
