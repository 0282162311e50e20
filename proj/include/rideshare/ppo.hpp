#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rideshare/config.hpp"
#include "rideshare/policy.hpp"
#include "rideshare/random.hpp"

namespace rideshare {

/// One episode of experience for a single agent.
struct TrajectoryBuffer {
  std::vector<Vector> observations;
  std::vector<Vector> pre_squash;
  std::vector<double> log_probs;
  std::vector<double> values;
  std::vector<double> rewards;
  double terminal_value = 0.0;

  std::size_t size() const { return rewards.size(); }

  void push(const Vector& obs, const ActionSample& sample, double reward) {
    observations.push_back(obs);
    pre_squash.push_back(sample.pre_squash);
    log_probs.push_back(sample.log_prob);
    values.push_back(sample.value);
    rewards.push_back(reward);
  }
};

/// Per-step reward: the profit integrated over one time step, scaled.
inline double compute_reward(double profit, double dt, double reward_scale) {
  return profit * dt / reward_scale;
}

struct AdvantageEstimate {
  std::vector<double> advantages;  // normalized
  std::vector<double> raw_advantages;
  std::vector<double> returns;  // raw advantages + values
};

/// Generalized advantage estimation with a bootstrap value after the last step.
inline AdvantageEstimate gae(std::span<const double> rewards, std::span<const double> values,
                             double terminal_value, double gamma, double lambda) {
  if (rewards.size() != values.size()) throw UsageError("rewards and values must have equal length");
  const std::size_t n = rewards.size();
  AdvantageEstimate out;
  out.raw_advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next_adv = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double next_value = (t + 1 < n) ? values[t + 1] : terminal_value;
    const double delta = rewards[t] + gamma * next_value - values[t];
    next_adv = delta + gamma * lambda * next_adv;
    out.raw_advantages[t] = next_adv;
    out.returns[t] = next_adv + values[t];
  }
  out.advantages = out.raw_advantages;
  if (n > 1) {
    const double mean = std::accumulate(out.advantages.begin(), out.advantages.end(), 0.0) / n;
    double var = 0.0;
    for (double a : out.advantages) var += (a - mean) * (a - mean);
    const double stddev = std::sqrt(var / n);
    for (double& a : out.advantages) a = (a - mean) / (stddev + 1e-8);
  }
  return out;
}

/// Adaptive-moment optimizer over a flat parameter vector.
struct Adam {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-5;
  Vector m, v;
  long long step_count = 0;

  void reset(Eigen::Index n) {
    m = Vector::Zero(n);
    v = Vector::Zero(n);
    step_count = 0;
  }

  void step(Vector& params, const Vector& grad, double lr) {
    if (m.size() != params.size()) reset(params.size());
    ++step_count;
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
    params.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
  }
};

/// A platform's learner: its own parameters, optimizer state and random stream.
/// Nothing here refers to the competitor.
struct Agent {
  PolicyParams policy;
  Adam optimizer;
  RandomStream rng;
};

inline Agent make_agent(int obs_dim, int act_dim, const PPOHyperparams& hp, std::uint64_t seed) {
  Agent a{PolicyParams{}, Adam{}, RandomStream(seed)};
  a.policy = make_policy(obs_dim, act_dim, hp, a.rng);
  a.optimizer.reset(a.policy.n_params());
  return a;
}

/// Column-major minibatch assembled from a buffer.
struct Batch {
  Matrix obs;         // obs_dim x B
  Matrix pre_squash;  // act_dim x B
  Vector old_log_prob;
  Vector advantages;
  Vector returns;
};

inline Batch make_batch(const TrajectoryBuffer& buf, const AdvantageEstimate& adv,
                        std::span<const std::size_t> idx) {
  const auto b = static_cast<Eigen::Index>(idx.size());
  Batch out{Matrix(buf.observations.front().size(), b), Matrix(buf.pre_squash.front().size(), b),
            Vector(b), Vector(b), Vector(b)};
  for (Eigen::Index c = 0; c < b; ++c) {
    const auto i = idx[static_cast<std::size_t>(c)];
    out.obs.col(c) = buf.observations[i];
    out.pre_squash.col(c) = buf.pre_squash[i];
    out.old_log_prob[c] = buf.log_probs[i];
    out.advantages[c] = adv.advantages[i];
    out.returns[c] = adv.returns[i];
  }
  return out;
}

struct LossEvaluation {
  double actor_loss = 0.0;   // clipped surrogate loss minus entropy bonus
  double critic_loss = 0.0;  // value_coef * mean squared error
  double entropy = 0.0;
  double mean_ratio = 0.0;
  double clip_fraction = 0.0;
  Vector ratios;
  Vector actor_grad;   // d(actor_loss)/d[actor params, log_std]
  Vector critic_grad;  // d(critic_loss)/d(critic params)

  double total() const { return actor_loss + critic_loss; }
};

/// Clipped-surrogate and value losses on one minibatch, with exact gradients.
inline LossEvaluation ppo_loss(const PolicyParams& policy, const Batch& batch,
                               const PPOHyperparams& hp) {
  constexpr double half_log_2pi = 0.91893853320467274178;
  const Eigen::Index bsz = batch.obs.cols();
  const Eigen::Index act = policy.act_dim();
  LossEvaluation out;

  Mlp::Tape actor_tape;
  const Matrix mean = policy.actor.forward(batch.obs, &actor_tape);
  const Vector inv_std = (-policy.log_std.array()).exp();

  // Standardized residuals u = (z - mean) / std.
  const Matrix u = ((batch.pre_squash - mean).array().colwise() * inv_std.array()).matrix();
  Vector log_prob = -0.5 * u.colwise().squaredNorm().transpose();
  log_prob.array() -= policy.log_std.sum() + static_cast<double>(act) * half_log_2pi;
  for (Eigen::Index c = 0; c < bsz; ++c) {
    double corr = 0.0;
    for (Eigen::Index k = 0; k < act; ++k) corr += log_tanh_jacobian(batch.pre_squash(k, c));
    log_prob[c] -= corr;
  }

  out.ratios = (log_prob - batch.old_log_prob).array().exp().matrix();
  Vector dloss_dlogp(bsz);
  double surrogate = 0.0;
  int clipped = 0;
  for (Eigen::Index c = 0; c < bsz; ++c) {
    const double r = out.ratios[c];
    const double a = batch.advantages[c];
    const double unclipped = r * a;
    const double clipped_term = std::clamp(r, 1.0 - hp.clip_epsilon, 1.0 + hp.clip_epsilon) * a;
    if (unclipped <= clipped_term) {
      surrogate += unclipped;
      dloss_dlogp[c] = -a * r / static_cast<double>(bsz);
    } else {
      surrogate += clipped_term;
      dloss_dlogp[c] = 0.0;
    }
    if (std::abs(r - 1.0) > hp.clip_epsilon) ++clipped;
  }
  surrogate /= static_cast<double>(bsz);
  out.mean_ratio = out.ratios.mean();
  out.clip_fraction = static_cast<double>(clipped) / static_cast<double>(bsz);
  out.entropy = policy.log_std.sum() + static_cast<double>(act) * (0.5 + half_log_2pi);
  out.actor_loss = -surrogate - hp.entropy_coef * out.entropy;

  // d logp / d mean = u / std ; d logp / d log_std = u^2 - 1.
  const Matrix dmean =
      (u.array().colwise() * inv_std.array()).rowwise() * dloss_dlogp.transpose().array();
  Vector dlog_std = (u.array().square() - 1.0).matrix() * dloss_dlogp;
  dlog_std.array() -= hp.entropy_coef;

  out.actor_grad.resize(policy.actor.n_params() + act);
  out.actor_grad << policy.actor.backward(actor_tape, dmean), dlog_std;

  Mlp::Tape critic_tape;
  const Vector values = policy.critic.forward(batch.obs, &critic_tape).row(0).transpose();
  const Vector err = values - batch.returns;
  out.critic_loss = hp.value_coef * err.squaredNorm() / static_cast<double>(bsz);
  const Matrix dvalue = (2.0 * hp.value_coef / static_cast<double>(bsz)) * err.transpose();
  out.critic_grad = policy.critic.backward(critic_tape, dvalue);

  if (!std::isfinite(out.actor_loss) || !std::isfinite(out.critic_loss))
    throw NumericalError("PPO loss is not finite");
  return out;
}

struct UpdateDiagnostics {
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double entropy = 0.0;
  double mean_ratio = 1.0;
  double clip_fraction = 0.0;
  double grad_norm = 0.0;
  int minibatches = 0;
};

/// Clipped-surrogate update of one agent from its own episode buffer.
inline UpdateDiagnostics ppo_update(Agent& agent, const TrajectoryBuffer& buffer,
                                    const PPOHyperparams& hp) {
  UpdateDiagnostics diag;
  if (hp.update_epochs == 0 || buffer.size() == 0) return diag;
  const auto adv = gae(buffer.rewards, buffer.values, buffer.terminal_value, hp.gamma, hp.gae_lambda);

  std::vector<std::size_t> order(buffer.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t mb = std::min<std::size_t>(static_cast<std::size_t>(hp.minibatch_size), order.size());

  double ratio_sum = 0.0;
  for (int epoch = 0; epoch < hp.update_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), agent.rng.engine());
    for (std::size_t start = 0; start < order.size(); start += mb) {
      const std::size_t end = std::min(order.size(), start + mb);
      const auto batch = make_batch(buffer, adv, std::span(order).subspan(start, end - start));
      const auto loss = ppo_loss(agent.policy, batch, hp);

      Vector grad(agent.policy.n_params());
      grad << loss.actor_grad, loss.critic_grad;
      const double norm = grad.norm();
      if (!std::isfinite(norm)) throw NumericalError("PPO gradient is not finite");
      if (norm > hp.grad_clip_norm) grad *= hp.grad_clip_norm / norm;

      Vector params = agent.policy.pack();
      agent.optimizer.step(params, grad, hp.learning_rate);
      agent.policy.unpack(params);

      diag.actor_loss += loss.actor_loss;
      diag.critic_loss += loss.critic_loss;
      diag.entropy += loss.entropy;
      diag.clip_fraction += loss.clip_fraction;
      diag.grad_norm += norm;
      ratio_sum += loss.mean_ratio;
      ++diag.minibatches;
    }
  }
  const double k = diag.minibatches;
  diag.actor_loss /= k;
  diag.critic_loss /= k;
  diag.entropy /= k;
  diag.clip_fraction /= k;
  diag.grad_norm /= k;
  diag.mean_ratio = ratio_sum / k;
  if (!agent.policy.all_finite()) throw NumericalError("policy parameters became non-finite");
  return diag;
}

// -- checkpoints --------------------------------------------------------------

inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json vector_json(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline Vector json_vector(const nlohmann::json& j) {
  const auto raw = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(raw.data(), static_cast<Eigen::Index>(raw.size()));
}

inline nlohmann::json agent_to_json(const Agent& agent, const PPOHyperparams& hp) {
  const auto& p = agent.policy;
  return {{"version", kCheckpointVersion},
          {"actor_sizes", p.actor.sizes()},
          {"critic_sizes", p.critic.sizes()},
          {"actor", vector_json(p.actor.params())},
          {"critic", vector_json(p.critic.params())},
          {"log_std", vector_json(p.log_std)},
          {"adam",
           {{"m", vector_json(agent.optimizer.m)},
            {"v", vector_json(agent.optimizer.v)},
            {"step", agent.optimizer.step_count}}},
          {"rng", agent.rng.serialize()},
          {"hyperparams",
           {{"gamma", hp.gamma},
            {"gae_lambda", hp.gae_lambda},
            {"clip_epsilon", hp.clip_epsilon},
            {"learning_rate", hp.learning_rate},
            {"update_epochs", hp.update_epochs},
            {"minibatch_size", hp.minibatch_size},
            {"entropy_coef", hp.entropy_coef},
            {"value_coef", hp.value_coef},
            {"grad_clip_norm", hp.grad_clip_norm},
            {"hidden_sizes", hp.hidden_sizes},
            {"reward_scale", hp.reward_scale}}}};
}

inline Agent agent_from_json(const nlohmann::json& j) {
  if (j.at("version").get<int>() != kCheckpointVersion)
    throw ConfigError("unsupported checkpoint version");
  Agent a;
  a.policy.actor = Mlp(j.at("actor_sizes").get<std::vector<int>>());
  a.policy.critic = Mlp(j.at("critic_sizes").get<std::vector<int>>());
  a.policy.actor.params() = json_vector(j.at("actor"));
  a.policy.critic.params() = json_vector(j.at("critic"));
  a.policy.log_std = json_vector(j.at("log_std"));
  if (a.policy.actor.params().size() != a.policy.actor.n_params() ||
      a.policy.critic.params().size() != a.policy.critic.n_params())
    throw ConfigError("checkpoint parameter count does not match layer sizes");
  const auto& adam = j.at("adam");
  a.optimizer.m = json_vector(adam.at("m"));
  a.optimizer.v = json_vector(adam.at("v"));
  a.optimizer.step_count = adam.at("step").get<long long>();
  if (a.policy.log_std.size() != a.policy.act_dim() || a.optimizer.m.size() != a.policy.n_params() ||
      a.optimizer.v.size() != a.policy.n_params())
    throw ConfigError("checkpoint optimizer or log_std size does not match the networks");
  a.rng.deserialize(j.at("rng").get<std::string>());
  return a;
}

inline void save_agent(const std::string& path, const Agent& agent, const PPOHyperparams& hp) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  out << agent_to_json(agent, hp).dump();
  if (!out) throw std::runtime_error("failed writing checkpoint " + path);
}

inline Agent load_agent(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open checkpoint " + path);
  nlohmann::json j;
  in >> j;
  return agent_from_json(j);
}

}  // namespace rideshare
