// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.
// Long training runs live under RIDESHARE_RUN_DIR and are resumed, not redone.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>

#include "rideshare/experiment.hpp"
#include "rideshare/oracles.hpp"

using namespace rideshare;

namespace {

constexpr std::uint64_t kOracleSeed = 7;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& check) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("error: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  char head[96];
  std::snprintf(head, sizeof head, "[%s] %d. %s (%.1fs): ", o.pass ? "PASS" : "FAIL", id, name.c_str(), secs);
  std::cout << head << o.detail << std::endl;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string num(double x) {
  char b[32];
  std::snprintf(b, sizeof b, "%.4g", x);
  return b;
}

double training_seconds(const fs::path& dir) {
  const auto t = read_csv((dir / "timing.csv").string());
  double s = 0.0;
  for (std::size_t r = 0; r < t.rows.size(); ++r) s += t.number(r, "wall_clock_seconds");
  return s;
}

struct MarketRuns {
  std::vector<CollusionSummary> summaries;
  double seconds = 0.0;
};

MarketRuns train(const RunConfig& rc, const std::string& market) {
  MarketRuns out;
  const fs::path root(RIDESHARE_RUN_DIR);
  RunOptions opts;
  run_experiment(rc, market, rc.sim.seeds, root, opts);
  const auto sim = rc.for_market(market);
  for (auto seed : rc.sim.seeds) {
    const auto dir = seed_dir(root, market, seed);
    const auto metrics = read_metrics((dir / "metrics.csv").string(), rc.reporting.ema_alpha);
    out.summaries.push_back(collusion_metrics(metrics, sim, rc.reporting));
    out.seconds += training_seconds(dir);
  }
  return out;
}

}  // namespace

int main() {
  const RunConfig rc = two_node_config();

  report(1, "dimensions", [&] {
    const int obs = state_dim(2), act = action_dim(2);
    RandomStream rng(1);
    const auto s = init_state(rc.sim, rc.graph, rng);
    const auto agent = make_agent(obs, act, rc.ppo, 1);
    const bool ok = obs == 14 && act == 4 && state_vector(s, rc.sim).size() == 14 &&
                    agent.policy.obs_dim() == 14 && agent.policy.act_dim() == 4;
    return Outcome{ok, "observation " + std::to_string(obs) + ", action " + std::to_string(act)};
  });

  report(2, "passenger-response oracle", [&] {
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = oracle::qp_suite(1000, kOracleSeed);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return Outcome{r.ok() && r.instances == 1000 && secs < 60.0,
                   std::to_string(r.instances) + " instances, worst gap vs grid " + num(r.worst_objective_gap) +
                       ", worst KKT " + num(r.worst_kkt)};
  });

  report(3, "conservation", [&] {
    const auto r = oracle::conservation_suite(rc, "responsive", kOracleSeed);
    return Outcome{r.ok() && r.steps == 2048,
                   std::to_string(r.steps) + " steps, drift P " + num(r.passenger_rel_drift) + " D " +
                       num(r.driver_rel_drift) + ", clamps " + std::to_string(r.clamp_events)};
  });

  report(4, "gradient checks", [&] {
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = oracle::gradient_suite(20, kOracleSeed);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return Outcome{r.ok() && r.instances >= 20 && secs < 60.0,
                   std::to_string(r.instances) + " instances, worst relative error actor " + num(r.worst_actor) +
                       " critic " + num(r.worst_critic)};
  });

  report(5, "determinism", [&] {
    auto short_rc = rc;
    short_rc.sim.epochs = 3;
    short_rc.sim.episode_len = 256;
    const fs::path root = fs::path(RIDESHARE_RUN_DIR) / "determinism";
    fs::remove_all(root);
    RunOptions opts;
    opts.write_plots = false;
    run_experiment(short_rc, "responsive", {11}, root / "a", opts);
    run_experiment(short_rc, "responsive", {11}, root / "b", opts);
    const auto a = slurp(seed_dir(root / "a", "responsive", 11) / "metrics.csv");
    const auto b = slurp(seed_dir(root / "b", "responsive", 11) / "metrics.csv");
    return Outcome{!a.empty() && a == b, std::to_string(a.size()) + " bytes, identical: " + (a == b ? "yes" : "no")};
  });

  MarketRuns responsive, lagging;
  report(6, "responsive market", [&] {
    responsive = train(rc, "responsive");
    int good = 0;
    std::string detail;
    for (std::size_t k = 0; k < responsive.summaries.size(); ++k) {
      const auto& s = responsive.summaries[k];
      bool ok = true;
      for (const auto* p : {&s.u, &s.l}) {
        ok = ok && std::abs(p->mean_commission - p->mean_rate) <= 0.15 * p->mean_rate;
        ok = ok && p->window_profit < p->peak_profit;
      }
      good += ok;
      detail += "seed " + std::to_string(rc.sim.seeds[k]) + (ok ? " ok" : " no") + " (u r " + num(s.u.mean_rate) +
                " c " + num(s.u.mean_commission) + " profit " + num(s.u.window_profit) + "/peak " +
                num(s.u.peak_profit) + "; l r " + num(s.l.mean_rate) + " c " + num(s.l.mean_commission) +
                " profit " + num(s.l.window_profit) + "/peak " + num(s.l.peak_profit) + "); ";
    }
    detail += "training " + num(responsive.seconds / 60.0) + " min";
    return Outcome{good >= 2, std::to_string(good) + "/3 seeds: " + detail};
  });

  report(7, "lagging market", [&] {
    lagging = train(rc, "lagging");
    if (responsive.summaries.size() != lagging.summaries.size())
      return Outcome{false, "responsive runs unavailable"};
    const double band = 0.25 * rc.sim.price_range();
    int good = 0;
    std::string detail;
    for (std::size_t k = 0; k < lagging.summaries.size(); ++k) {
      const auto& s = lagging.summaries[k];
      const auto& base = responsive.summaries[k];
      bool ok = true;
      for (auto [p, q] : {std::pair{&s.u, &base.u}, std::pair{&s.l, &base.l}}) {
        ok = ok && std::abs(p->mean_commission - rc.sim.gas_cost) <= band;
        ok = ok && p->mean_rate > p->mean_commission;
        ok = ok && p->window_profit > 0.0 && p->window_profit >= 2.0 * std::max(q->window_profit, 0.0);
      }
      good += ok;
      detail += "seed " + std::to_string(rc.sim.seeds[k]) + (ok ? " ok" : " no") + " (u r " + num(s.u.mean_rate) +
                " c " + num(s.u.mean_commission) + " profit " + num(s.u.window_profit) + " vs " +
                num(base.u.window_profit) + "; l r " + num(s.l.mean_rate) + " c " + num(s.l.mean_commission) +
                " profit " + num(s.l.window_profit) + " vs " + num(base.l.window_profit) + "); ";
    }
    detail += "training " + num(lagging.seconds / 60.0) + " min";
    return Outcome{good >= 2, std::to_string(good) + "/3 seeds: " + detail};
  });

  report(8, "driver-search optimality gap", [&] {
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = oracle::driver_suite(rc, 200, kOracleSeed);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return Outcome{r.ok() && secs < 300.0,
                   std::to_string(r.within_95) + "/" + std::to_string(r.instances) +
                       " instances reach 95% of the grid optimum (" + num(100.0 * r.fraction()) +
                       "%, need 90%)"};
  });

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
