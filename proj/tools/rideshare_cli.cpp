// Command-line entry point: simulate, oracle, analyze, replay.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "rideshare/experiment.hpp"
#include "rideshare/oracles.hpp"

namespace fs = std::filesystem;
using namespace rideshare;

namespace {

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(std::stoull(item));
  return out;
}

nlohmann::json summary_json(const CollusionSummary& s) {
  auto platform = [](const PlatformSummary& p) {
    return nlohmann::json{{"mean_rate", p.mean_rate},
                          {"mean_commission", p.mean_commission},
                          {"mean_margin", p.mean_margin},
                          {"commission_gap", p.commission_gap},
                          {"rate_gap_transit", p.rate_gap_transit},
                          {"end_profit", p.end_profit},
                          {"window_profit", p.window_profit},
                          {"peak_profit", p.peak_profit},
                          {"classification", p.classification}};
  };
  return {{"epochs", s.epochs}, {"window", s.window}, {"u", platform(s.u)}, {"l", platform(s.l)}};
}

nlohmann::json analyze_seed_dir(const fs::path& dir) {
  const auto cfg = read_json(dir / "config.json");
  const auto rc = run_config_from_json(cfg);
  const auto sim = rc.for_market(cfg.at("market").get<std::string>());
  const auto metrics = read_metrics((dir / "metrics.csv").string(), rc.reporting.ema_alpha);
  auto j = summary_json(collusion_metrics(metrics, sim, rc.reporting));
  j["market"] = cfg.at("market");
  j["seed"] = cfg.at("seed");
  return j;
}

int run_oracle(const std::string& suite, const std::string& config_path, std::uint64_t seed) {
  const RunConfig rc = config_path.empty() ? two_node_config() : load_run_config(config_path);
  bool ok = false;
  if (suite == "qp") {
    const auto r = oracle::qp_suite(1000, seed);
    std::cout << "qp: " << r.instances << " instances, worst objective gap " << r.worst_objective_gap
              << ", worst KKT residual " << r.worst_kkt << ", worst sum error " << r.worst_sum_error
              << '\n';
    ok = r.ok();
  } else if (suite == "driver") {
    const auto r = oracle::driver_suite(rc, 200, seed);
    auto sorted = r.ratios;
    std::sort(sorted.begin(), sorted.end());
    std::cout << "driver: " << r.within_95 << "/" << r.instances
              << " instances within 95% of the grid optimum; ratio quantiles min "
              << sorted.front() << " p10 " << sorted[sorted.size() / 10] << " median "
              << sorted[sorted.size() / 2] << '\n';
    ok = r.ok();
  } else if (suite == "gradient") {
    const auto r = oracle::gradient_suite(20, seed);
    std::cout << "gradient: " << r.instances << " instances, worst relative error actor "
              << r.worst_actor << ", critic " << r.worst_critic << '\n';
    ok = r.ok();
  } else if (suite == "conservation") {
    const auto r = oracle::conservation_suite(rc, "responsive", seed);
    std::cout << "conservation: " << r.steps << " steps, passenger drift " << r.passenger_rel_drift
              << ", driver drift " << r.driver_rel_drift << ", clamps " << r.clamp_events << '\n';
    ok = r.ok();
  } else {
    throw UsageError("unknown oracle suite " + suite);
  }
  std::cout << (ok ? "PASS" : "FAIL") << '\n';
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-platform rideshare pricing simulator with decentralized PPO agents"};
  app.require_subcommand(1);

  std::string config_path, market = "responsive", seeds_text, out_dir = "runs";
  int epochs = -1, episode_len = -1;
  bool fresh = false, quiet = false;
  auto* simulate = app.add_subcommand("simulate", "train both agents and write run artifacts");
  simulate->add_option("--config", config_path, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
  simulate->add_option("--market", market, "market type")->check(CLI::IsMember({"responsive", "lagging"}));
  simulate->add_option("--seeds", seeds_text, "comma separated seeds (default: from config)");
  simulate->add_option("--out", out_dir, "output directory");
  simulate->add_option("--epochs", epochs, "override the number of epochs");
  simulate->add_option("--episode-len", episode_len, "override the episode length");
  simulate->add_flag("--fresh", fresh, "ignore existing checkpoints");
  simulate->add_flag("--quiet", quiet, "no progress output");

  std::string suite;
  std::string oracle_config;
  std::uint64_t oracle_seed = 7;
  auto* oracle_cmd = app.add_subcommand("oracle", "run a brute-force verification suite");
  oracle_cmd->add_option("--suite", suite, "suite to run")
      ->required()
      ->check(CLI::IsMember({"qp", "driver", "gradient", "conservation"}));
  oracle_cmd->add_option("--config", oracle_config, "configuration (default: two-node experiment)");
  oracle_cmd->add_option("--seed", oracle_seed, "random seed");

  std::string run_dir;
  auto* analyze = app.add_subcommand("analyze", "summarize a run as JSON");
  analyze->add_option("--run", run_dir, "seed directory or market directory")->required()->check(CLI::ExistingDirectory);

  int episode = 0;
  auto* replay = app.add_subcommand("replay", "re-derive and audit a logged episode");
  replay->add_option("--run", run_dir, "seed directory")->required()->check(CLI::ExistingDirectory);
  replay->add_option("--episode", episode, "episode (epoch) index")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) {
      RunConfig rc = load_run_config(config_path);
      if (epochs >= 0) rc.sim.epochs = epochs;
      if (episode_len > 0) rc.sim.episode_len = episode_len;
      const auto seeds = seeds_text.empty() ? rc.sim.seeds : parse_seeds(seeds_text);
      RunOptions opts;
      opts.resume = !fresh;
      if (!quiet) opts.progress = [](const std::string& s) { std::cerr << s << '\n'; };
      const auto dir = run_experiment(rc, market, seeds, out_dir, opts);
      std::cout << dir.string() << '\n';
      return 0;
    }
    if (*oracle_cmd) return run_oracle(suite, oracle_config, oracle_seed);
    if (*analyze) {
      const fs::path dir(run_dir);
      nlohmann::json out;
      if (fs::exists(dir / "metrics.csv")) {
        out = analyze_seed_dir(dir);
      } else {
        out["seeds"] = nlohmann::json::array();
        std::vector<fs::path> seeds;
        for (const auto& e : fs::directory_iterator(dir))
          if (e.is_directory() && fs::exists(e.path() / "metrics.csv")) seeds.push_back(e.path());
        std::sort(seeds.begin(), seeds.end());
        if (seeds.empty()) throw UsageError("no metrics.csv found under " + run_dir);
        for (const auto& s : seeds) out["seeds"].push_back(analyze_seed_dir(s));
      }
      std::cout << out.dump(2) << '\n';
      return 0;
    }
    if (*replay) {
      const auto rep = audit_episode(run_dir, episode);
      std::cout << "replayed " << rep.steps << " steps: max share error " << rep.max_share_error
                << ", flow error " << rep.max_flow_error << ", profit error " << rep.max_profit_error
                << ", population error " << rep.max_population_error << ", metrics error "
                << rep.max_metrics_error << '\n';
      for (const auto& m : rep.messages) std::cout << "  " << m << '\n';
      std::cout << (rep.ok() ? "AUDIT OK" : "AUDIT FAILED") << '\n';
      return rep.ok() ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
