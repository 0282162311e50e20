#pragma once

#include <cctype>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rideshare/csv.hpp"
#include "rideshare/episode.hpp"
#include "rideshare/metrics.hpp"
#include "rideshare/svg_plot.hpp"

namespace rideshare {

namespace fs = std::filesystem;

// -- episode log files ---------------------------------------------------------

inline std::string edge_tag(int i, int j) { return std::to_string(i) + "_" + std::to_string(j); }

inline std::vector<std::string> episode_log_header(int n) {
  std::vector<std::string> h{"step"};
  for (int i = 0; i < n; ++i) h.push_back("P_" + std::to_string(i));
  for (int i = 0; i < n; ++i) h.push_back("D_" + std::to_string(i));
  for (int i = 0; i < n; ++i) h.push_back("a_u_" + std::to_string(i));
  for (int i = 0; i < n; ++i) h.push_back("a_l_" + std::to_string(i));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      for (const char* f : {"r_u", "c_u", "r_l", "c_l", "p_u", "p_l", "p_o", "avail_p_u", "avail_p_l",
                            "avail_p_o", "avail_d_u", "avail_d_l", "flow_u", "flow_l", "flow_o"})
        h.push_back(std::string(f) + "_" + edge_tag(i, j));
    }
  for (const char* f : {"profit_u", "profit_l", "reward_u", "reward_l", "driver_profit", "clamped"})
    h.emplace_back(f);
  return h;
}

inline std::vector<std::string> episode_log_row(const StepRecord& r, int n) {
  std::vector<std::string> row{std::to_string(r.step)};
  for (int i = 0; i < n; ++i) row.push_back(exact(r.populations.passengers[i]));
  for (int i = 0; i < n; ++i) row.push_back(exact(r.populations.drivers[i]));
  for (int i = 0; i < n; ++i) row.push_back(exact(r.allocation.a_u[i]));
  for (int i = 0; i < n; ++i) row.push_back(exact(r.allocation.a_l[i]));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      for (const Matrix* m : {&r.prices.r_u, &r.prices.c_u, &r.prices.r_l, &r.prices.c_l,
                              &r.allocation.p_u, &r.allocation.p_l, &r.allocation.p_o,
                              &r.flows.avail_p_u, &r.flows.avail_p_l, &r.flows.avail_p_o,
                              &r.flows.avail_d_u, &r.flows.avail_d_l, &r.flows.flow_u,
                              &r.flows.flow_l, &r.flows.flow_o})
        row.push_back(exact((*m)(i, j)));
    }
  for (double v : {r.profits.u, r.profits.l, r.reward_u, r.reward_l, r.driver_profit, r.clamped})
    row.push_back(exact(v));
  return row;
}

inline void write_episode_log(const std::string& path, const EpisodeLog& log, int n) {
  CsvTable t{episode_log_header(n), {}};
  t.rows.reserve(log.steps.size());
  for (const auto& s : log.steps) t.rows.push_back(episode_log_row(s, n));
  write_csv(path, t);
}

inline EpisodeLog read_episode_log(const std::string& path, int n) {
  const auto t = read_csv(path);
  EpisodeLog log;
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    StepRecord r;
    r.step = static_cast<int>(t.number(k, "step"));
    r.populations = {Vector(n), Vector(n)};
    r.allocation = AllocationState::zeros(n);
    r.prices = PriceSchedule::constant(n, 0.0, 0.0);
    for (Matrix* m : {&r.flows.avail_p_u, &r.flows.avail_p_l, &r.flows.avail_p_o, &r.flows.avail_d_u,
                      &r.flows.avail_d_l, &r.flows.flow_u, &r.flows.flow_l, &r.flows.flow_o})
      *m = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      const auto s = std::to_string(i);
      r.populations.passengers[i] = t.number(k, "P_" + s);
      r.populations.drivers[i] = t.number(k, "D_" + s);
      r.allocation.a_u[i] = t.number(k, "a_u_" + s);
      r.allocation.a_l[i] = t.number(k, "a_l_" + s);
    }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        const auto e = "_" + edge_tag(i, j);
        r.prices.r_u(i, j) = t.number(k, "r_u" + e);
        r.prices.c_u(i, j) = t.number(k, "c_u" + e);
        r.prices.r_l(i, j) = t.number(k, "r_l" + e);
        r.prices.c_l(i, j) = t.number(k, "c_l" + e);
        r.allocation.p_u(i, j) = t.number(k, "p_u" + e);
        r.allocation.p_l(i, j) = t.number(k, "p_l" + e);
        r.allocation.p_o(i, j) = t.number(k, "p_o" + e);
        r.flows.avail_p_u(i, j) = t.number(k, "avail_p_u" + e);
        r.flows.avail_p_l(i, j) = t.number(k, "avail_p_l" + e);
        r.flows.avail_p_o(i, j) = t.number(k, "avail_p_o" + e);
        r.flows.avail_d_u(i, j) = t.number(k, "avail_d_u" + e);
        r.flows.avail_d_l(i, j) = t.number(k, "avail_d_l" + e);
        r.flows.flow_u(i, j) = t.number(k, "flow_u" + e);
        r.flows.flow_l(i, j) = t.number(k, "flow_l" + e);
        r.flows.flow_o(i, j) = t.number(k, "flow_o" + e);
      }
    r.profits = {t.number(k, "profit_u"), t.number(k, "profit_l")};
    r.reward_u = t.number(k, "reward_u");
    r.reward_l = t.number(k, "reward_l");
    r.driver_profit = t.number(k, "driver_profit");
    r.clamped = t.number(k, "clamped");
    log.steps.push_back(std::move(r));
  }
  return log;
}

// -- metrics files ---------------------------------------------------------------

inline CsvTable metrics_table(const RunMetrics& m) {
  CsvTable t;
  t.header = {"epoch", "seed"};
  const auto& cols = metric_columns();
  for (const auto& c : cols) t.header.push_back(c);
  for (const auto& c : cols) t.header.push_back(c + "_ema");
  std::vector<std::vector<double>> smooth;
  for (const auto& c : cols) smooth.push_back(m.smoothed(c));
  for (std::size_t r = 0; r < m.rows.size(); ++r) {
    std::vector<std::string> row{std::to_string(m.rows[r].epoch), std::to_string(m.rows[r].seed)};
    for (std::size_t c = 0; c < cols.size(); ++c) row.push_back(exact(metric_value(m.rows[r], c)));
    for (std::size_t c = 0; c < cols.size(); ++c) row.push_back(exact(smooth[c][r]));
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline RunMetrics read_metrics(const std::string& path, double alpha) {
  const auto t = read_csv(path);
  RunMetrics m;
  m.alpha = alpha;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    EpochMetrics e;
    e.epoch = static_cast<int>(t.number(r, "epoch"));
    e.seed = std::stoull(t.rows[r][t.index("seed")]);
    double* fields[] = {&e.profit_u, &e.profit_l, &e.mean_r_u, &e.mean_c_u, &e.mean_r_l,
                        &e.mean_c_l, &e.margin_u, &e.margin_l, &e.gap_cu_g, &e.gap_cl_g};
    for (std::size_t c = 0; c < metric_columns().size(); ++c)
      *fields[c] = t.number(r, metric_columns()[c]);
    m.rows.push_back(e);
  }
  return m;
}

/// Per-edge mean prices for every epoch, one row each.
struct EdgePriceHistory {
  int n = 0;
  std::vector<int> epochs;
  std::vector<EdgePriceMeans> means;

  CsvTable table() const {
    CsvTable t;
    t.header = {"epoch"};
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j)
          for (const char* f : {"r_u", "c_u", "r_l", "c_l"})
            t.header.push_back(std::string(f) + "_" + edge_tag(i, j));
    for (std::size_t k = 0; k < means.size(); ++k) {
      std::vector<std::string> row{std::to_string(epochs[k])};
      const auto& m = means[k];
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          if (i != j)
            for (const Matrix* x : {&m.r_u, &m.c_u, &m.r_l, &m.c_l}) row.push_back(exact((*x)(i, j)));
      t.rows.push_back(std::move(row));
    }
    return t;
  }
};

/// Training diagnostics per epoch (no wall-clock, so replays compare equal).
struct TrainRow {
  int epoch = 0;
  double return_u = 0.0, return_l = 0.0;
  UpdateDiagnostics diag_u, diag_l;
  double log_std_u = 0.0, log_std_l = 0.0;
  int clamp_events = 0;
  double passengers_total = 0.0, drivers_total = 0.0;
};

inline CsvTable train_table(const std::vector<TrainRow>& rows) {
  CsvTable t;
  t.header = {"epoch",        "return_u",      "return_l",      "actor_loss_u", "actor_loss_l",
              "critic_loss_u", "critic_loss_l", "mean_ratio_u", "mean_ratio_l", "clip_frac_u",
              "clip_frac_l",   "log_std_u",     "log_std_l",     "clamp_events", "passengers_total",
              "drivers_total"};
  for (const auto& r : rows)
    t.rows.push_back({std::to_string(r.epoch), exact(r.return_u), exact(r.return_l),
                      exact(r.diag_u.actor_loss), exact(r.diag_l.actor_loss),
                      exact(r.diag_u.critic_loss), exact(r.diag_l.critic_loss),
                      exact(r.diag_u.mean_ratio), exact(r.diag_l.mean_ratio),
                      exact(r.diag_u.clip_fraction), exact(r.diag_l.clip_fraction),
                      exact(r.log_std_u), exact(r.log_std_l), std::to_string(r.clamp_events),
                      exact(r.passengers_total), exact(r.drivers_total)});
  return t;
}

// -- plots -------------------------------------------------------------------------

inline void write_plots(const fs::path& dir, const RunMetrics& metrics,
                        const EdgePriceHistory& edges, const SimConfig& sim, double alpha) {
  fs::create_directories(dir);
  const std::string cu = "#1f77b4", cl = "#d62728";
  {
    std::vector<PlotSeries> s{
        {"U raw", metrics.column("profit_u"), cu, 0.25, false, false},
        {"L raw", metrics.column("profit_l"), cl, 0.25, false, false},
        {"U (EMA)", metrics.smoothed("profit_u"), cu},
        {"L (EMA)", metrics.smoothed("profit_l"), cl},
    };
    write_svg((dir / "profits.svg").string(),
              svg_line_chart("End-of-episode profit", "epoch", "profit per unit time", s));
  }
  const int n = edges.n;
  for (const char platform : {'u', 'l'}) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        std::vector<double> rate, commission;
        for (const auto& m : edges.means) {
          rate.push_back(platform == 'u' ? m.r_u(i, j) : m.r_l(i, j));
          commission.push_back(platform == 'u' ? m.c_u(i, j) : m.c_l(i, j));
        }
        const std::vector<PlotSeries> s{
            {"rate raw", rate, cu, 0.25, false, false},
            {"commission raw", commission, cl, 0.25, false, false},
            {"rate (EMA)", ema(rate, alpha), cu},
            {"commission (EMA)", ema(commission, alpha), cl},
            {"gas cost g", std::vector<double>(rate.size(), sim.gas_cost), "#555", 0.8, true},
        };
        const std::string name = std::string("prices_") + platform + "_" + edge_tag(i, j) + ".svg";
        const std::string title = std::string("Rates and commissions for ") +
                                  static_cast<char>(std::toupper(platform)) + " on edge " +
                                  std::to_string(i) + " -> " + std::to_string(j);
        write_svg((dir / name).string(), svg_line_chart(title, "epoch", "currency / mile", s));
      }
  }
}

// -- experiment driver -------------------------------------------------------------

struct RunOptions {
  bool resume = true;
  bool write_plots = true;
  std::function<void(const std::string&)> progress;  // optional status sink
};

inline bool sampled_episode(int epoch, int epochs, int every) {
  return epoch == 0 || epoch == epochs - 1 || (every > 0 && epoch % every == 0);
}

struct SeedStreams {
  std::uint64_t agent_u, agent_l, market, init;
};

inline SeedStreams derive_streams(std::uint64_t seed) {
  RandomStream root(seed);
  return {root.next(), root.next(), root.next(), root.next()};
}

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

inline nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  nlohmann::json j;
  in >> j;
  return j;
}

/// Train both agents for `sim.epochs` episodes under one seed, writing all
/// artifacts to `dir`. Resumes from the last checkpoint when one exists.
inline RunMetrics run_seed(const RunConfig& rc, const std::string& market, std::uint64_t seed,
                           const fs::path& dir, const RunOptions& opts = {}) {
  const SimConfig sim = rc.for_market(market);
  const ODGraph& graph = rc.graph;
  const int n = graph.n_nodes;
  fs::create_directories(dir / "episodes");
  fs::create_directories(dir / "checkpoints");

  auto snapshot = run_config_to_json(rc);
  snapshot["market"] = market;
  snapshot["seed"] = seed;
  const fs::path state_path = dir / "checkpoints" / "run_state.json";
  if (opts.resume && fs::exists(state_path) && fs::exists(dir / "config.json")) {
    // Extending the epoch count is fine; anything else would splice two experiments.
    auto previous = read_json(dir / "config.json");
    auto current = snapshot;
    previous.erase("epochs");
    current.erase("epochs");
    if (previous != current)
      throw ConfigError("checkpoint in " + dir.string() + " was written with a different configuration");
  }
  write_json(dir / "config.json", snapshot);

  const auto streams = derive_streams(seed);
  Agent agent_u = make_agent(state_dim(n), action_dim(n), rc.ppo, streams.agent_u);
  Agent agent_l = make_agent(state_dim(n), action_dim(n), rc.ppo, streams.agent_l);
  RandomStream market_rng(streams.market);
  RandomStream init_rng(streams.init);

  RunMetrics metrics;
  metrics.alpha = rc.reporting.ema_alpha;
  EdgePriceHistory edges{n, {}, {}};
  std::vector<TrainRow> train;
  std::vector<std::pair<int, double>> timing;
  std::optional<Populations> carried;
  int start = 0;

  if (opts.resume && fs::exists(state_path)) {
    const auto st = read_json(state_path);
    start = st.at("next_epoch").get<int>();
    agent_u = load_agent((dir / "checkpoints" / "agent_u.json").string());
    agent_l = load_agent((dir / "checkpoints" / "agent_l.json").string());
    market_rng.deserialize(st.at("market_rng").get<std::string>());
    init_rng.deserialize(st.at("init_rng").get<std::string>());
    const auto all = read_metrics((dir / "metrics.csv").string(), metrics.alpha);
    for (const auto& r : all.rows)
      if (r.epoch < start) metrics.rows.push_back(r);
    const auto et = read_csv((dir / "edge_prices.csv").string());
    for (std::size_t k = 0; k < et.rows.size(); ++k) {
      const int e = static_cast<int>(et.number(k, "epoch"));
      if (e >= start) continue;
      EdgePriceMeans m{Matrix::Zero(n, n), Matrix::Zero(n, n), Matrix::Zero(n, n), Matrix::Zero(n, n)};
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          if (i != j) {
            const auto tag = "_" + edge_tag(i, j);
            m.r_u(i, j) = et.number(k, "r_u" + tag);
            m.c_u(i, j) = et.number(k, "c_u" + tag);
            m.r_l(i, j) = et.number(k, "r_l" + tag);
            m.c_l(i, j) = et.number(k, "c_l" + tag);
          }
      edges.epochs.push_back(e);
      edges.means.push_back(m);
    }
    for (const auto& row : st.at("train"))
      train.push_back({row.at(0).get<int>(), row.at(1).get<double>(), row.at(2).get<double>(),
                       UpdateDiagnostics{row.at(3).get<double>(), row.at(4).get<double>(), 0.0,
                                         row.at(5).get<double>(), row.at(6).get<double>()},
                       UpdateDiagnostics{row.at(7).get<double>(), row.at(8).get<double>(), 0.0,
                                         row.at(9).get<double>(), row.at(10).get<double>()},
                       row.at(11).get<double>(), row.at(12).get<double>(), row.at(13).get<int>(),
                       row.at(14).get<double>(), row.at(15).get<double>()});
    if (st.contains("carried_passengers"))
      carried = Populations{json_vector(st["carried_passengers"]), json_vector(st["carried_drivers"])};
  }

  auto save_checkpoint = [&](int next_epoch) {
    save_agent((dir / "checkpoints" / "agent_u.json").string(), agent_u, rc.ppo);
    save_agent((dir / "checkpoints" / "agent_l.json").string(), agent_l, rc.ppo);
    nlohmann::json st{{"next_epoch", next_epoch},
                      {"market_rng", market_rng.serialize()},
                      {"init_rng", init_rng.serialize()}};
    auto rows = nlohmann::json::array();
    for (const auto& r : train)
      rows.push_back({r.epoch, r.return_u, r.return_l, r.diag_u.actor_loss, r.diag_u.critic_loss,
                      r.diag_u.mean_ratio, r.diag_u.clip_fraction, r.diag_l.actor_loss,
                      r.diag_l.critic_loss, r.diag_l.mean_ratio, r.diag_l.clip_fraction, r.log_std_u,
                      r.log_std_l, r.clamp_events, r.passengers_total, r.drivers_total});
    st["train"] = rows;
    if (carried) {
      st["carried_passengers"] = vector_json(carried->passengers);
      st["carried_drivers"] = vector_json(carried->drivers);
    }
    write_json(state_path, st);
  };

  for (int epoch = start; epoch < sim.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    MarketState state = init_state(sim, graph, init_rng);
    if (sim.persist_populations && carried) state.populations = *carried;

    auto result = run_episode(state, agent_u, agent_l, sim, graph, rc.ppo, market_rng);
    result.log.epoch = epoch;
    result.log.seed = seed;
    if (sim.persist_populations) carried = result.final_state.populations;

    TrainRow tr;
    tr.epoch = epoch;
    for (double r : result.buffer_u.rewards) tr.return_u += r;
    for (double r : result.buffer_l.rewards) tr.return_l += r;
    tr.clamp_events = result.clamp_events;
    tr.passengers_total = result.final_state.populations.passengers.sum();
    tr.drivers_total = result.final_state.populations.drivers.sum();

    // Each agent learns from its own buffer only.
    tr.diag_u = ppo_update(agent_u, result.buffer_u, rc.ppo);
    tr.diag_l = ppo_update(agent_l, result.buffer_l, rc.ppo);
    tr.log_std_u = agent_u.policy.log_std.mean();
    tr.log_std_l = agent_l.policy.log_std.mean();
    train.push_back(tr);

    metrics.rows.push_back(epoch_metrics(result.log, n, sim.gas_cost));
    edges.epochs.push_back(epoch);
    edges.means.push_back(edge_price_means(result.log, n));

    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.wall_clock_seconds = secs;
    timing.emplace_back(epoch, secs);
    if (sampled_episode(epoch, sim.epochs, rc.reporting.log_every))
      write_episode_log((dir / "episodes" / ("episode_" + std::to_string(epoch) + ".csv")).string(),
                        result.log, n);

    write_csv((dir / "metrics.csv").string(), metrics_table(metrics));
    write_csv((dir / "edge_prices.csv").string(), edges.table());
    write_csv((dir / "train_log.csv").string(), train_table(train));
    {
      std::ofstream tf(dir / "timing.csv", epoch == 0 ? std::ios::trunc : std::ios::app);
      if (epoch == 0) tf << "epoch,wall_clock_seconds\n";
      tf << epoch << ',' << exact(secs) << '\n';
    }
    const bool last = epoch + 1 == sim.epochs;
    if (last || (rc.reporting.checkpoint_every > 0 && (epoch + 1) % rc.reporting.checkpoint_every == 0))
      save_checkpoint(epoch + 1);
    if (opts.progress && (last || epoch % 10 == 0)) {
      const auto& m = metrics.rows.back();
      opts.progress(market + " seed " + std::to_string(seed) + " epoch " + std::to_string(epoch) +
                    ": r_u=" + detail::fmt(m.mean_r_u) + " c_u=" + detail::fmt(m.mean_c_u) +
                    " r_l=" + detail::fmt(m.mean_r_l) + " c_l=" + detail::fmt(m.mean_c_l) +
                    " profit=" + detail::fmt(m.profit_u) + "/" + detail::fmt(m.profit_l));
    }
  }
  if (sim.epochs == 0) save_checkpoint(0);

  if (opts.write_plots && !metrics.rows.empty())
    write_plots(dir / "plots", metrics, edges, sim, rc.reporting.ema_alpha);
  return metrics;
}

inline fs::path seed_dir(const fs::path& out, const std::string& market, std::uint64_t seed) {
  return out / market / ("seed_" + std::to_string(seed));
}

/// All seeds of one market type, sequentially. Returns the market directory.
inline fs::path run_experiment(const RunConfig& rc, const std::string& market,
                               const std::vector<std::uint64_t>& seeds, const fs::path& out,
                               const RunOptions& opts = {}) {
  for (auto seed : seeds) run_seed(rc, market, seed, seed_dir(out, market, seed), opts);
  return out / market;
}

// -- replay / audit ------------------------------------------------------------------

struct AuditReport {
  int steps = 0;
  int failures = 0;
  double max_share_error = 0.0;
  double max_flow_error = 0.0;
  double max_profit_error = 0.0;
  double max_population_error = 0.0;
  double max_metrics_error = 0.0;
  std::vector<std::string> messages;

  bool ok() const { return failures == 0; }
};

/// Re-derive a logged episode from its own prices and driver allocations and
/// compare every recorded quantity, plus the epoch's metrics row.
inline AuditReport audit_episode(const fs::path& run_dir, int episode) {
  const auto cfg_json = read_json(run_dir / "config.json");
  const RunConfig rc = run_config_from_json(cfg_json);
  const SimConfig sim = rc.for_market(cfg_json.at("market").get<std::string>());
  const int n = rc.graph.n_nodes;
  const auto path = run_dir / "episodes" / ("episode_" + std::to_string(episode) + ".csv");
  if (!fs::exists(path)) throw UsageError("episode " + std::to_string(episode) + " was not logged");
  EpisodeLog log = read_episode_log(path.string(), n);
  log.epoch = episode;

  AuditReport rep;
  rep.steps = static_cast<int>(log.steps.size());
  auto fail = [&](const std::string& what, int step, double err) {
    ++rep.failures;
    if (rep.messages.size() < 20)
      rep.messages.push_back(what + " mismatch at step " + std::to_string(step) + " (" + exact(err) + ")");
  };
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };

  for (std::size_t k = 0; k < log.steps.size(); ++k) {
    const auto& s = log.steps[k];
    const auto shares = passenger_responses(s.allocation.a_u, s.allocation.a_l, s.populations,
                                            s.prices, rc.graph, sim);
    const double share_err = std::max({(shares.p_u - s.allocation.p_u).cwiseAbs().maxCoeff(),
                                       (shares.p_l - s.allocation.p_l).cwiseAbs().maxCoeff(),
                                       (shares.p_o - s.allocation.p_o).cwiseAbs().maxCoeff()});
    rep.max_share_error = std::max(rep.max_share_error, share_err);
    if (share_err > 1e-12) fail("passenger share", s.step, share_err);

    const double dp = driver_profit(shares, s.prices, rc.graph, sim.gas_cost);
    if (rel(dp, s.driver_profit) > 1e-9) fail("driver profit", s.step, rel(dp, s.driver_profit));

    const auto outcome = market_step(s.populations, s.allocation, s.prices, rc.graph, sim.dt);
    double flow_err = 0.0;
    const std::pair<const Matrix*, const Matrix*> pairs[] = {
        {&outcome.flows.flow_u, &s.flows.flow_u}, {&outcome.flows.flow_l, &s.flows.flow_l},
        {&outcome.flows.flow_o, &s.flows.flow_o}, {&outcome.flows.avail_p_u, &s.flows.avail_p_u},
        {&outcome.flows.avail_d_u, &s.flows.avail_d_u}, {&outcome.flows.avail_d_l, &s.flows.avail_d_l}};
    for (const auto& [a, b] : pairs) flow_err = std::max(flow_err, (*a - *b).cwiseAbs().maxCoeff());
    rep.max_flow_error = std::max(rep.max_flow_error, flow_err);
    if (flow_err > 1e-9) fail("flow", s.step, flow_err);

    // Profits from the logged flows and prices.
    const auto logged = platform_profit(s.flows, s.prices, rc.graph);
    const double perr = std::max(rel(logged.u, s.profits.u), rel(logged.l, s.profits.l));
    rep.max_profit_error = std::max(rep.max_profit_error, perr);
    if (perr > 1e-9) fail("profit", s.step, perr);
    const double rerr = std::max(
        std::abs(compute_reward(s.profits.u, sim.dt, rc.ppo.reward_scale) - s.reward_u),
        std::abs(compute_reward(s.profits.l, sim.dt, rc.ppo.reward_scale) - s.reward_l));
    if (rerr > 1e-12) fail("reward", s.step, rerr);

    if (k + 1 < log.steps.size()) {
      const auto& next = log.steps[k + 1].populations;
      const double pop_err =
          std::max((outcome.populations.next.passengers - next.passengers).cwiseAbs().maxCoeff(),
                   (outcome.populations.next.drivers - next.drivers).cwiseAbs().maxCoeff());
      rep.max_population_error = std::max(rep.max_population_error, pop_err);
      if (pop_err > 1e-9) fail("population", s.step, pop_err);
    }
  }

  const auto metrics = read_metrics((run_dir / "metrics.csv").string(), rc.reporting.ema_alpha);
  for (const auto& row : metrics.rows) {
    if (row.epoch != episode) continue;
    const auto derived = epoch_metrics(log, n, sim.gas_cost);
    for (std::size_t c = 0; c < metric_columns().size(); ++c) {
      const double err = rel(metric_value(derived, c), metric_value(row, c));
      rep.max_metrics_error = std::max(rep.max_metrics_error, err);
      if (err > 1e-9) fail("metrics column " + metric_columns()[c], -1, err);
    }
  }
  return rep;
}

}  // namespace rideshare
