#pragma once

#include <vector>

#include "rideshare/driver_search.hpp"
#include "rideshare/dynamics.hpp"
#include "rideshare/market.hpp"
#include "rideshare/ppo.hpp"

namespace rideshare {

/// Everything observed during one market step.
struct StepRecord {
  int step = 0;
  Populations populations;    // before the step
  PriceSchedule prices;       // set by both agents for this step
  AllocationState allocation; // selected drivers and the induced passenger shares
  FlowSet flows;
  PlatformProfits profits;
  double reward_u = 0.0;
  double reward_l = 0.0;
  double driver_profit = 0.0;
  double clamped = 0.0;
};

struct EpisodeLog {
  int epoch = 0;
  std::uint64_t seed = 0;
  double wall_clock_seconds = 0.0;
  std::vector<StepRecord> steps;
};

struct EpisodeResult {
  EpisodeLog log;
  TrajectoryBuffer buffer_u;
  TrajectoryBuffer buffer_l;
  MarketState final_state;
  int clamp_events = 0;
};

struct EpisodeOptions {
  bool deterministic = false;  // agents play tanh(mean) without sampling
};

inline ActionSample act_frozen(const PolicyParams& policy, const Vector& obs) {
  const Vector mean = policy.actor.forward(obs);
  ActionSample s;
  s.pre_squash = mean;
  s.action = act_deterministic(policy, obs);
  s.log_prob = gaussian_log_prob(mean, mean, policy.log_std) - squash_correction(mean);
  s.value = policy.critic.forward(obs)[0];
  return s;
}

/// Roll one episode of the simultaneous-move pricing game.
///
/// Each step both agents act on the same observation, the drivers search for
/// an allocation given the new prices, and the market moves one Euler step.
inline EpisodeResult run_episode(MarketState state, Agent& agent_u, Agent& agent_l,
                                 const SimConfig& config, const ODGraph& graph,
                                 const PPOHyperparams& hp, RandomStream& market_rng,
                                 EpisodeOptions options = {}) {
  EpisodeResult out;
  out.log.steps.reserve(static_cast<std::size_t>(config.episode_len));
  const int n = graph.n_nodes;

  for (int t = 0; t < config.episode_len; ++t) {
    const Vector obs = state_vector(state, config);
    const ActionSample su =
        options.deterministic ? act_frozen(agent_u.policy, obs) : act(agent_u.policy, obs, agent_u.rng);
    const ActionSample sl =
        options.deterministic ? act_frozen(agent_l.policy, obs) : act(agent_l.policy, obs, agent_l.rng);
    const PriceSchedule prices =
        combine_prices(map_action(su.action, n, config.price_min, config.price_max),
                       map_action(sl.action, n, config.price_min, config.price_max));

    const auto search = search_driver_allocation(state, prices, graph, config, market_rng);
    auto outcome = market_step(state.populations, search.allocation, prices, graph, config.dt);
    if (outcome.populations.clamped > 0.0) ++out.clamp_events;

    StepRecord rec;
    rec.step = t;
    rec.populations = state.populations;
    rec.prices = prices;
    rec.allocation = search.allocation;
    rec.flows = std::move(outcome.flows);
    rec.profits = outcome.profits;
    rec.reward_u = compute_reward(outcome.profits.u, config.dt, hp.reward_scale);
    rec.reward_l = compute_reward(outcome.profits.l, config.dt, hp.reward_scale);
    rec.driver_profit = search.driver_profit;
    rec.clamped = outcome.populations.clamped;

    out.buffer_u.push(obs, su, rec.reward_u);
    out.buffer_l.push(obs, sl, rec.reward_l);

    state.populations = outcome.populations.next;
    state.allocation = search.allocation;
    state.step_index = t + 1;
    out.log.steps.push_back(std::move(rec));
  }

  const Vector last_obs = state_vector(state, config);
  out.buffer_u.terminal_value = agent_u.policy.critic.forward(last_obs)[0];
  out.buffer_l.terminal_value = agent_l.policy.critic.forward(last_obs)[0];
  out.final_state = std::move(state);
  return out;
}

}  // namespace rideshare
