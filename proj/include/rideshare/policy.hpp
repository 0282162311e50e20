#pragma once

#include <cmath>
#include <numbers>

#include "rideshare/config.hpp"
#include "rideshare/market.hpp"
#include "rideshare/mlp.hpp"

namespace rideshare {

/// Actor-critic parameters of one platform agent. The policy is a Gaussian
/// over pre-squash actions with a state-independent log standard deviation.
struct PolicyParams {
  Mlp actor;
  Mlp critic;
  Vector log_std;

  int obs_dim() const { return actor.input_size(); }
  int act_dim() const { return actor.output_size(); }

  Eigen::Index n_params() const { return actor.n_params() + log_std.size() + critic.n_params(); }

  /// Flat view in the order [actor, log_std, critic].
  Vector pack() const {
    Vector out(n_params());
    out << actor.params(), log_std, critic.params();
    return out;
  }

  void unpack(const Vector& flat) {
    if (flat.size() != n_params()) throw UsageError("parameter vector has wrong length");
    Eigen::Index k = 0;
    actor.params() = flat.segment(k, actor.n_params());
    k += actor.n_params();
    log_std = flat.segment(k, log_std.size());
    k += log_std.size();
    critic.params() = flat.segment(k, critic.n_params());
  }

  bool all_finite() const {
    return actor.params().allFinite() && critic.params().allFinite() && log_std.allFinite();
  }
};

inline std::vector<int> layer_sizes(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

/// Fresh agent parameters: orthogonal hidden layers (gain sqrt 2), a small
/// policy head (0.01) and a unit-gain value head.
inline PolicyParams make_policy(int obs_dim, int act_dim, const PPOHyperparams& hp,
                                RandomStream& rng) {
  PolicyParams p{Mlp(layer_sizes(obs_dim, hp.hidden_sizes, act_dim)),
                 Mlp(layer_sizes(obs_dim, hp.hidden_sizes, 1)),
                 Vector::Constant(act_dim, hp.log_std_init)};
  p.actor.init_orthogonal(rng, std::sqrt(2.0), 0.01);
  p.critic.init_orthogonal(rng, std::sqrt(2.0), 1.0);
  return p;
}

/// log(1 - tanh(z)^2), stable for large |z|.
inline double log_tanh_jacobian(double z) {
  const double x = -2.0 * z;
  const double softplus = x > 30.0 ? x : std::log1p(std::exp(x));
  return 2.0 * (std::numbers::ln2 - z - softplus);
}

/// Log density of pre-squash actions z under Normal(mean, exp(log_std)),
/// without the squashing correction.
inline double gaussian_log_prob(const Vector& z, const Vector& mean, const Vector& log_std) {
  constexpr double half_log_2pi = 0.91893853320467274178;
  double lp = 0.0;
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    const double u = (z[k] - mean[k]) * std::exp(-log_std[k]);
    lp += -0.5 * u * u - log_std[k] - half_log_2pi;
  }
  return lp;
}

inline double squash_correction(const Vector& z) {
  double c = 0.0;
  for (Eigen::Index k = 0; k < z.size(); ++k) c += log_tanh_jacobian(z[k]);
  return c;
}

struct ActionSample {
  Vector pre_squash;  // z ~ Normal(mean, std)
  Vector action;      // tanh(z), in (-1, 1)
  double log_prob = 0.0;  // density of `action`, including the tanh correction
  double value = 0.0;
};

/// Sample an action for one observation.
inline ActionSample act(const PolicyParams& policy, const Vector& obs, RandomStream& rng) {
  if (obs.size() != policy.obs_dim()) throw UsageError("observation length does not match policy");
  const Vector mean = policy.actor.forward(obs);
  const double value = policy.critic.forward(obs)[0];
  if (!mean.allFinite() || !std::isfinite(value))
    throw NumericalError("policy network produced a non-finite output");
  ActionSample s;
  s.pre_squash.resize(mean.size());
  for (Eigen::Index k = 0; k < mean.size(); ++k)
    s.pre_squash[k] = mean[k] + std::exp(policy.log_std[k]) * rng.normal(0.0, 1.0);
  s.action = s.pre_squash.array().tanh().matrix();
  s.log_prob = gaussian_log_prob(s.pre_squash, mean, policy.log_std) - squash_correction(s.pre_squash);
  s.value = value;
  if (!std::isfinite(s.log_prob)) throw NumericalError("action log-probability is not finite");
  return s;
}

/// Noise-free action tanh(mean); used for evaluation of frozen agents.
inline Vector act_deterministic(const PolicyParams& policy, const Vector& obs) {
  const Vector mean = policy.actor.forward(obs);
  if (!mean.allFinite()) throw NumericalError("policy network produced a non-finite output");
  return mean.array().tanh().matrix();
}

/// Map squashed actions in [-1, 1] to one platform's rates and commissions.
/// Layout: off-diagonal rates row-major, then commissions in the same order.
struct PlatformPrices {
  Matrix rate;
  Matrix commission;
};

inline PlatformPrices map_action(const Vector& action, int n_nodes, double price_min,
                                 double price_max) {
  if (action.size() != action_dim(n_nodes)) throw UsageError("action length does not match N");
  PlatformPrices out{Matrix::Zero(n_nodes, n_nodes), Matrix::Zero(n_nodes, n_nodes)};
  const int half = action_dim(n_nodes) / 2;
  int k = 0;
  for (int i = 0; i < n_nodes; ++i)
    for (int j = 0; j < n_nodes; ++j) {
      if (i == j) continue;
      auto scale = [&](double a) {
        return price_min + (std::clamp(a, -1.0, 1.0) + 1.0) * 0.5 * (price_max - price_min);
      };
      out.rate(i, j) = scale(action[k]);
      out.commission(i, j) = scale(action[k + half]);
      ++k;
    }
  return out;
}

inline PriceSchedule combine_prices(const PlatformPrices& u, const PlatformPrices& l) {
  return {u.rate, u.commission, l.rate, l.commission};
}

}  // namespace rideshare
