#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "rideshare/errors.hpp"

namespace rideshare {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Fully connected origin-destination graph.
///
/// demand_fraction(i, j) is the share of node-i passengers per unit time who
/// want to reach j; distance(i, j) is the trip length in miles and may be
/// asymmetric.
struct ODGraph {
  int n_nodes = 0;
  Matrix demand_fraction;
  Matrix distance;

  int n_edges() const { return n_nodes * n_nodes - n_nodes; }
};

struct SimConfig {
  double gas_cost = 5.0;      // g, currency/mile
  double base_wait = 2.0;     // lambda
  double transit_rate = 10.0; // r_o, currency/mile
  double price_min = 5.0;
  double price_max = 20.0;
  double dt = 0.01;
  int episode_len = 2048;
  int epochs = 500;
  int n_candidates = 10;  // a_N
  double delta_a = 1.0;
  Vector init_driver_pop;
  Vector init_passenger_pop;
  std::vector<std::uint64_t> seeds{0, 1, 2};

  bool include_incumbent = false;
  bool persist_populations = false;

  double availability_floor = 1e-9;
  double wait_floor = 1e-6;        // lambda_i floor inside the passenger solve
  double driver_pop_floor = 1e-6;  // denominator floor of the wait multiplier

  double initial_passengers() const { return init_passenger_pop.sum(); }
  double initial_drivers() const { return init_driver_pop.sum(); }
  double price_range() const { return price_max - price_min; }
};

struct PPOHyperparams {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_epsilon = 0.2;
  double learning_rate = 3e-4;
  int update_epochs = 10;
  int minibatch_size = 256;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  double grad_clip_norm = 0.5;
  std::vector<int> hidden_sizes{64, 64};
  double reward_scale = 100.0;
  double log_std_init = 0.0;
};

struct ReportingConfig {
  double ema_alpha = 0.5;
  int log_every = 25;         // full episode logs for first, last and every k-th
  int checkpoint_every = 25;
  double competitive_band = 0.15;  // fraction of the price range
  double collusive_band = 0.25;    // fraction of the price range
};

/// Everything a run directory needs to be reproduced.
struct RunConfig {
  ODGraph graph;
  SimConfig sim;
  PPOHyperparams ppo;
  ReportingConfig reporting;
  std::map<std::string, double> markets{{"responsive", 1.0}, {"lagging", 0.05}};

  /// Copy of the simulation config with delta_a chosen by market type.
  SimConfig for_market(const std::string& market) const {
    auto it = markets.find(market);
    if (it == markets.end()) throw ConfigError("unknown market type: " + market);
    SimConfig out = sim;
    out.delta_a = it->second;
    return out;
  }
};

inline void validate_graph(const ODGraph& g) {
  if (g.n_nodes < 1) throw ConfigError("graph needs at least one node");
  const auto n = g.n_nodes;
  if (g.demand_fraction.rows() != n || g.demand_fraction.cols() != n ||
      g.distance.rows() != n || g.distance.cols() != n)
    throw ConfigError("graph matrices must be N x N");
  for (int i = 0; i < n; ++i) {
    if (g.demand_fraction(i, i) != 0.0 || g.distance(i, i) != 0.0)
      throw ConfigError("graph diagonal must be zero at node " + std::to_string(i));
    double row = 0.0;
    for (int j = 0; j < n; ++j) {
      const double e = g.demand_fraction(i, j);
      const double d = g.distance(i, j);
      if (!(e >= 0.0 && e <= 1.0)) throw ConfigError("demand fraction outside [0,1]");
      if (!(d >= 0.0) || !std::isfinite(d)) throw ConfigError("distance must be finite and >= 0");
      row += e;
    }
    if (row > 1.0 + 1e-12)
      throw ConfigError("demand fractions of node " + std::to_string(i) + " sum above 1");
  }
}

inline void validate_config(const SimConfig& c, int n_nodes) {
  if (!(c.price_min > 0.0 && c.price_min <= c.price_max))
    throw ConfigError("need 0 < price_min <= price_max");
  if (!(c.gas_cost >= 0.0)) throw ConfigError("gas cost must be >= 0");
  if (!(c.dt > 0.0)) throw ConfigError("dt must be > 0");
  if (c.n_candidates < 1) throw ConfigError("a_N must be >= 1");
  if (!(c.delta_a >= 0.0 && c.delta_a <= 1.0)) throw ConfigError("delta_a must be in [0,1]");
  if (c.episode_len < 1) throw ConfigError("episode_len must be >= 1");
  if (c.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(c.base_wait >= 0.0)) throw ConfigError("lambda must be >= 0");
  if (c.init_driver_pop.size() != n_nodes || c.init_passenger_pop.size() != n_nodes)
    throw ConfigError("initial populations must have one entry per node");
  for (int i = 0; i < n_nodes; ++i)
    if (!(c.init_driver_pop[i] > 0.0) || !(c.init_passenger_pop[i] > 0.0))
      throw ConfigError("initial populations must be > 0");
}

namespace detail {

inline Matrix matrix_from_json(const nlohmann::json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  Matrix m(rows, rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (j[i].size() != j.size()) throw ConfigError("matrix must be square");
    for (Eigen::Index k = 0; k < rows; ++k) m(i, k) = j[i][k].get<double>();
  }
  return m;
}

inline nlohmann::json matrix_to_json(const Matrix& m) {
  auto out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    out.push_back(row);
  }
  return out;
}

inline Vector vector_from_json(const nlohmann::json& j) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

inline nlohmann::json vector_to_json(const Vector& v) {
  return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  using detail::read_opt;
  RunConfig rc;
  try {
    rc.graph.demand_fraction = detail::matrix_from_json(j.at("OD"));
    rc.graph.distance = detail::matrix_from_json(j.at("D"));
    rc.graph.n_nodes = static_cast<int>(rc.graph.demand_fraction.rows());

    auto& s = rc.sim;
    read_opt(j, "g", s.gas_cost);
    read_opt(j, "lambda", s.base_wait);
    read_opt(j, "r_o", s.transit_rate);
    if (j.contains("price_bounds")) {
      s.price_min = j["price_bounds"].at(0).get<double>();
      s.price_max = j["price_bounds"].at(1).get<double>();
    }
    read_opt(j, "dt", s.dt);
    read_opt(j, "episode_len", s.episode_len);
    read_opt(j, "epochs", s.epochs);
    read_opt(j, "a_N", s.n_candidates);
    read_opt(j, "include_incumbent", s.include_incumbent);
    read_opt(j, "persist_populations", s.persist_populations);
    read_opt(j, "availability_floor", s.availability_floor);
    read_opt(j, "wait_floor", s.wait_floor);
    read_opt(j, "driver_pop_floor", s.driver_pop_floor);
    s.init_driver_pop = detail::vector_from_json(j.at("init_driver_pop"));
    s.init_passenger_pop = detail::vector_from_json(j.at("init_passenger_pop"));
    read_opt(j, "seeds", s.seeds);

    if (j.contains("delta_a")) {
      const auto& da = j["delta_a"];
      if (da.is_object()) {
        rc.markets.clear();
        for (auto it = da.begin(); it != da.end(); ++it) rc.markets[it.key()] = it.value().get<double>();
      } else {
        s.delta_a = da.get<double>();
        rc.markets = {{"custom", s.delta_a}};
      }
    }
    s.delta_a = rc.markets.begin()->second;

    if (j.contains("ppo")) {
      const auto& p = j["ppo"];
      auto& h = rc.ppo;
      read_opt(p, "gamma", h.gamma);
      read_opt(p, "gae_lambda", h.gae_lambda);
      read_opt(p, "clip_epsilon", h.clip_epsilon);
      read_opt(p, "learning_rate", h.learning_rate);
      read_opt(p, "update_epochs", h.update_epochs);
      read_opt(p, "minibatch_size", h.minibatch_size);
      read_opt(p, "entropy_coef", h.entropy_coef);
      read_opt(p, "value_coef", h.value_coef);
      read_opt(p, "grad_clip_norm", h.grad_clip_norm);
      read_opt(p, "hidden_sizes", h.hidden_sizes);
      read_opt(p, "reward_scale", h.reward_scale);
      read_opt(p, "log_std_init", h.log_std_init);
    }
    if (j.contains("reporting")) {
      const auto& r = j["reporting"];
      auto& o = rc.reporting;
      read_opt(r, "ema_alpha", o.ema_alpha);
      read_opt(r, "log_every", o.log_every);
      read_opt(r, "checkpoint_every", o.checkpoint_every);
      read_opt(r, "competitive_band", o.competitive_band);
      read_opt(r, "collusive_band", o.collusive_band);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }

  validate_graph(rc.graph);
  validate_config(rc.sim, rc.graph.n_nodes);
  const auto& h = rc.ppo;
  if (!(h.gamma > 0.0 && h.gamma <= 1.0) || !(h.gae_lambda >= 0.0 && h.gae_lambda <= 1.0) ||
      !(h.clip_epsilon > 0.0) || !(h.learning_rate > 0.0) || h.update_epochs < 0 ||
      h.minibatch_size < 1 || !(h.entropy_coef >= 0.0) || !(h.value_coef > 0.0) ||
      !(h.grad_clip_norm > 0.0) || !(h.reward_scale > 0.0))
    throw ConfigError("invalid PPO hyperparameters");
  if (!(rc.reporting.ema_alpha > 0.0 && rc.reporting.ema_alpha <= 1.0))
    throw ConfigError("ema_alpha must be in (0,1]");
  return rc;
}

inline nlohmann::json run_config_to_json(const RunConfig& rc) {
  nlohmann::json j;
  j["OD"] = detail::matrix_to_json(rc.graph.demand_fraction);
  j["D"] = detail::matrix_to_json(rc.graph.distance);
  const auto& s = rc.sim;
  j["g"] = s.gas_cost;
  j["lambda"] = s.base_wait;
  j["r_o"] = s.transit_rate;
  j["price_bounds"] = {s.price_min, s.price_max};
  j["dt"] = s.dt;
  j["episode_len"] = s.episode_len;
  j["epochs"] = s.epochs;
  j["a_N"] = s.n_candidates;
  j["delta_a"] = rc.markets;
  j["init_driver_pop"] = detail::vector_to_json(s.init_driver_pop);
  j["init_passenger_pop"] = detail::vector_to_json(s.init_passenger_pop);
  j["seeds"] = s.seeds;
  j["include_incumbent"] = s.include_incumbent;
  j["persist_populations"] = s.persist_populations;
  j["availability_floor"] = s.availability_floor;
  j["wait_floor"] = s.wait_floor;
  j["driver_pop_floor"] = s.driver_pop_floor;
  const auto& h = rc.ppo;
  j["ppo"] = {{"gamma", h.gamma},
              {"gae_lambda", h.gae_lambda},
              {"clip_epsilon", h.clip_epsilon},
              {"learning_rate", h.learning_rate},
              {"update_epochs", h.update_epochs},
              {"minibatch_size", h.minibatch_size},
              {"entropy_coef", h.entropy_coef},
              {"value_coef", h.value_coef},
              {"grad_clip_norm", h.grad_clip_norm},
              {"hidden_sizes", h.hidden_sizes},
              {"reward_scale", h.reward_scale},
              {"log_std_init", h.log_std_init}};
  const auto& r = rc.reporting;
  j["reporting"] = {{"ema_alpha", r.ema_alpha},
                    {"log_every", r.log_every},
                    {"checkpoint_every", r.checkpoint_every},
                    {"competitive_band", r.competitive_band},
                    {"collusive_band", r.collusive_band}};
  return j;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("cannot parse config: ") + e.what());
  }
  return run_config_from_json(j);
}

/// The two-node experiment used throughout the test-suite.
inline RunConfig two_node_config() {
  nlohmann::json j = {
      {"OD", {{0.0, 0.9}, {0.2, 0.0}}},
      {"D", {{0.0, 5.0}, {2.0, 0.0}}},
      {"g", 5.0},
      {"lambda", 2.0},
      {"r_o", 10.0},
      {"price_bounds", {5.0, 20.0}},
      {"a_N", 10},
      {"dt", 0.01},
      {"episode_len", 2048},
      {"epochs", 500},
      {"delta_a", {{"responsive", 1.0}, {"lagging", 0.05}}},
      {"init_driver_pop", {500.0, 1000.0}},
      {"init_passenger_pop", {2000.0, 3000.0}},
      {"seeds", {0, 1, 2}},
  };
  return run_config_from_json(j);
}

}  // namespace rideshare
