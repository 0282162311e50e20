#pragma once

// Brute-force reference checks used by the test-suite and by `rideshare oracle`.
// Everything here recomputes its quantities from first principles (grids, finite
// differences, plain summation) instead of calling the solver it checks.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "rideshare/driver_search.hpp"
#include "rideshare/dynamics.hpp"
#include "rideshare/episode.hpp"
#include "rideshare/passenger_response.hpp"
#include "rideshare/ppo.hpp"

namespace rideshare::oracle {

// -- passenger QP ------------------------------------------------------------------

/// Passenger edge cost written out directly from the three-option objective.
inline double passenger_cost(const EdgeMarket& m, double lambda, double pu, double pl, double po) {
  double cost = po * (m.d * m.r_o + lambda * po);
  if (pu > 0.0) cost += pu * (m.d * m.r_u + lambda * pu / m.a_u);
  if (pl > 0.0) cost += pl * (m.d * m.r_l + lambda * pl / m.a_l);
  return cost;
}

struct GridResult {
  double best_cost = INFINITY;
  double pu = 0.0, pl = 0.0, po = 0.0;
};

/// Exhaustive search over the simplex with spacing 1/steps.
inline GridResult simplex_grid_min(const EdgeMarket& m, double lambda, int steps = 1000) {
  GridResult g;
  const double h = 1.0 / steps;
  for (int i = 0; i <= steps; ++i)
    for (int j = 0; i + j <= steps; ++j) {
      const double pu = i * h, pl = j * h, po = (steps - i - j) * h;
      const double c = passenger_cost(m, lambda, pu, pl, po);
      if (c < g.best_cost) g = {c, pu, pl, po};
    }
  return g;
}

inline EdgeMarket random_edge_market(RandomStream& rng) {
  EdgeMarket m;
  m.d = rng.uniform(0.5, 10.0);
  m.r_u = rng.uniform(5.0, 20.0);
  m.r_l = rng.uniform(5.0, 20.0);
  m.r_o = rng.uniform(5.0, 20.0);
  m.a_u = rng.uniform(0.02, 0.98);
  m.a_l = 1.0 - m.a_u;
  m.lambda_i = std::exp(rng.uniform(std::log(0.5), std::log(200.0)));
  return m;
}

struct QpSuiteResult {
  int instances = 0;
  int objective_failures = 0;
  int kkt_failures = 0;
  double worst_objective_gap = -INFINITY;  // solver cost - grid cost
  double worst_kkt = 0.0;
  double worst_sum_error = 0.0;
  bool ok() const { return objective_failures == 0 && kkt_failures == 0; }
};

inline QpSuiteResult qp_suite(int instances, std::uint64_t seed, int grid_steps = 1000) {
  RandomStream rng(seed);
  QpSuiteResult out;
  for (int k = 0; k < instances; ++k) {
    const auto m = random_edge_market(rng);
    const auto p = edge_best_response(m);
    const double solver = passenger_cost(m, m.lambda_i, p.p_u, p.p_l, p.p_o);
    const auto grid = simplex_grid_min(m, m.lambda_i, grid_steps);
    const double gap = solver - grid.best_cost;
    out.worst_objective_gap = std::max(out.worst_objective_gap, gap);
    if (gap > 1e-9) ++out.objective_failures;

    const std::vector<double> lin{m.d * m.r_u, m.d * m.r_l, m.d * m.r_o};
    const std::vector<double> curv{m.lambda_i / m.a_u, m.lambda_i / m.a_l, m.lambda_i};
    const std::vector<double> shares{p.p_u, p.p_l, p.p_o};
    // Common multiplier recovered from the active coordinates alone.
    double mu = 0.0;
    int active = 0;
    for (int i = 0; i < 3; ++i)
      if (shares[i] > 0.0) {
        mu += lin[i] + 2.0 * curv[i] * shares[i];
        ++active;
      }
    mu /= active;
    const double kkt = kkt_residual(lin, curv, shares, mu);
    out.worst_kkt = std::max(out.worst_kkt, kkt);
    if (kkt > 1e-10) ++out.kkt_failures;
    out.worst_sum_error = std::max(out.worst_sum_error, std::abs(p.p_u + p.p_l + p.p_o - 1.0));
    ++out.instances;
  }
  return out;
}

// -- driver search -----------------------------------------------------------------

/// Driver profit with the passenger shares of every edge computed from scratch.
inline double driver_profit_at(const Vector& a_u, const Populations& pop, const PriceSchedule& prices,
                               const ODGraph& graph, const SimConfig& config) {
  const Vector a_l = Vector::Ones(a_u.size()) - a_u;
  const auto shares = passenger_responses(a_u, a_l, pop, prices, graph, config);
  double total = 0.0;
  for (int i = 0; i < graph.n_nodes; ++i)
    for (int j = 0; j < graph.n_nodes; ++j)
      if (i != j)
        total += graph.distance(i, j) * (shares.p_u(i, j) * (prices.c_u(i, j) - config.gas_cost) +
                                         shares.p_l(i, j) * (prices.c_l(i, j) - config.gas_cost));
  return total;
}

/// Best driver profit over a regular grid of a_u in [0,1]^N.
inline double driver_grid_best(const Populations& pop, const PriceSchedule& prices,
                               const ODGraph& graph, const SimConfig& config, double spacing = 0.05) {
  const int n = graph.n_nodes;
  const int steps = static_cast<int>(std::lround(1.0 / spacing));
  std::vector<int> idx(static_cast<std::size_t>(n), 0);
  double best = -INFINITY;
  while (true) {
    Vector a_u(n);
    for (int i = 0; i < n; ++i) a_u[i] = idx[static_cast<std::size_t>(i)] * (1.0 / steps);
    best = std::max(best, driver_profit_at(a_u, pop, prices, graph, config));
    int d = 0;
    while (d < n && ++idx[static_cast<std::size_t>(d)] > steps) idx[static_cast<std::size_t>(d++)] = 0;
    if (d == n) break;
  }
  return best;
}

inline PriceSchedule random_prices(int n, double lo, double hi, RandomStream& rng) {
  PriceSchedule s = PriceSchedule::constant(n, 0.0, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j)
        for (Matrix* m : {&s.r_u, &s.c_u, &s.r_l, &s.c_l}) (*m)(i, j) = rng.uniform(lo, hi);
  return s;
}

struct DriverSuiteResult {
  int instances = 0;
  int within_95 = 0;
  std::vector<double> ratios;  // search profit / grid-best profit
  double fraction() const { return instances ? static_cast<double>(within_95) / instances : 0.0; }
  bool ok() const { return fraction() >= 0.90; }
};

/// Single-round search (a_N candidates, width delta_a) against the 0.05 grid.
inline DriverSuiteResult driver_suite(const RunConfig& rc, int instances, std::uint64_t seed,
                                      int n_candidates = 10, double delta_a = 1.0) {
  SimConfig sim = rc.sim;
  sim.n_candidates = n_candidates;
  sim.delta_a = delta_a;
  RandomStream rng(seed);
  DriverSuiteResult out;
  for (int k = 0; k < instances; ++k) {
    const auto state = init_state(sim, rc.graph, rng);
    const auto prices = random_prices(rc.graph.n_nodes, sim.price_min, sim.price_max, rng);
    const auto found = search_driver_allocation(state, prices, rc.graph, sim, rng);
    const double grid = driver_grid_best(state.populations, prices, rc.graph, sim);
    const double ratio = grid > 0.0 ? found.driver_profit / grid : 1.0;
    out.ratios.push_back(ratio);
    if (ratio >= 0.95) ++out.within_95;
    ++out.instances;
  }
  return out;
}

// -- gradients ---------------------------------------------------------------------

struct GradientCheck {
  double actor_rel_error = 0.0;
  double critic_rel_error = 0.0;
};

inline double relative_error(const Vector& a, const Vector& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-12});
  return (a - b).norm() / scale;
}

/// Random batch whose stored log-probabilities are perturbed so ratios differ from one.
inline Batch random_batch(const PolicyParams& policy, int size, RandomStream& rng) {
  Batch b{Matrix(policy.obs_dim(), size), Matrix(policy.act_dim(), size), Vector(size), Vector(size),
          Vector(size)};
  for (int c = 0; c < size; ++c) {
    for (int i = 0; i < policy.obs_dim(); ++i) b.obs(i, c) = rng.normal(0.0, 1.0);
    const Vector mean = policy.actor.forward(Vector(b.obs.col(c)));
    Vector z(policy.act_dim());
    for (int k = 0; k < policy.act_dim(); ++k)
      z[k] = mean[k] + std::exp(policy.log_std[k]) * rng.normal(0.0, 1.0);
    b.pre_squash.col(c) = z;
    b.old_log_prob[c] = gaussian_log_prob(z, mean, policy.log_std) - squash_correction(z) +
                        rng.normal(0.0, 0.3);
    b.advantages[c] = rng.normal(0.0, 1.0);
    b.returns[c] = rng.normal(0.0, 1.0);
  }
  return b;
}

/// Analytic loss gradients against central differences with step h.
inline GradientCheck check_gradients(const PolicyParams& policy, const Batch& batch,
                                     const PPOHyperparams& hp, double h = 1e-5) {
  const auto analytic = ppo_loss(policy, batch, hp);
  const Vector flat = policy.pack();
  const Eigen::Index n_actor = policy.actor.n_params() + policy.log_std.size();
  Vector fd_actor(n_actor), fd_critic(policy.critic.n_params());
  PolicyParams probe = policy;
  for (Eigen::Index k = 0; k < flat.size(); ++k) {
    Vector plus = flat, minus = flat;
    plus[k] += h;
    minus[k] -= h;
    probe.unpack(plus);
    const auto lp = ppo_loss(probe, batch, hp);
    probe.unpack(minus);
    const auto lm = ppo_loss(probe, batch, hp);
    if (k < n_actor)
      fd_actor[k] = (lp.actor_loss - lm.actor_loss) / (2.0 * h);
    else
      fd_critic[k - n_actor] = (lp.critic_loss - lm.critic_loss) / (2.0 * h);
  }
  return {relative_error(analytic.actor_grad, fd_actor), relative_error(analytic.critic_grad, fd_critic)};
}

struct GradientSuiteResult {
  int instances = 0;
  double worst_actor = 0.0;
  double worst_critic = 0.0;
  bool ok() const { return worst_actor < 1e-4 && worst_critic < 1e-4; }
};

inline GradientSuiteResult gradient_suite(int instances, std::uint64_t seed, int obs_dim = 14,
                                          int act_dim = 4, std::vector<int> hidden = {24, 24}) {
  RandomStream rng(seed);
  GradientSuiteResult out;
  PPOHyperparams hp;
  hp.hidden_sizes = std::move(hidden);
  for (int k = 0; k < instances; ++k) {
    hp.log_std_init = rng.uniform(-1.0, 0.5);
    auto policy = make_policy(obs_dim, act_dim, hp, rng);
    // Larger output weights than the default init so the actor is not ~constant.
    policy.actor.params() += 0.3 * Vector::NullaryExpr(policy.actor.n_params(),
                                                       [&] { return rng.normal(0.0, 1.0); });
    for (Eigen::Index i = 0; i < policy.log_std.size(); ++i) policy.log_std[i] += rng.uniform(-0.3, 0.3);
    const auto batch = random_batch(policy, 16, rng);
    const auto g = check_gradients(policy, batch, hp);
    out.worst_actor = std::max(out.worst_actor, g.actor_rel_error);
    out.worst_critic = std::max(out.worst_critic, g.critic_rel_error);
    ++out.instances;
  }
  return out;
}

// -- conservation ------------------------------------------------------------------

struct ConservationResult {
  int steps = 0;
  double passenger_rel_drift = 0.0;
  double driver_rel_drift = 0.0;
  int clamp_events = 0;
  bool ok() const {
    return passenger_rel_drift <= 1e-6 && driver_rel_drift <= 1e-6 && clamp_events == 0;
  }
};

/// One full episode with freshly initialized (untrained, stochastic) agents.
inline ConservationResult conservation_suite(const RunConfig& rc, const std::string& market,
                                             std::uint64_t seed) {
  const SimConfig sim = rc.for_market(market);
  const int n = rc.graph.n_nodes;
  RandomStream root(seed);
  Agent u = make_agent(state_dim(n), action_dim(n), rc.ppo, root.next());
  Agent l = make_agent(state_dim(n), action_dim(n), rc.ppo, root.next());
  RandomStream market_rng(root.next());
  const auto start = init_state(sim, rc.graph, root);
  const auto res = run_episode(start, u, l, sim, rc.graph, rc.ppo, market_rng);

  ConservationResult out;
  out.steps = static_cast<int>(res.log.steps.size());
  const double p0 = start.populations.passengers.sum();
  const double d0 = start.populations.drivers.sum();
  out.passenger_rel_drift = std::abs(res.final_state.populations.passengers.sum() - p0) / p0;
  out.driver_rel_drift = std::abs(res.final_state.populations.drivers.sum() - d0) / d0;
  out.clamp_events = res.clamp_events;
  return out;
}

}  // namespace rideshare::oracle
