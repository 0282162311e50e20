#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "rideshare/config.hpp"
#include "rideshare/episode.hpp"

namespace rideshare {

/// Exponential moving average: out[0] = x[0], out[t] = a x[t] + (1 - a) out[t-1].
inline std::vector<double> ema(std::span<const double> series, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw UsageError("EMA alpha must be in (0,1]");
  std::vector<double> out;
  out.reserve(series.size());
  for (double x : series) out.push_back(out.empty() ? x : alpha * x + (1.0 - alpha) * out.back());
  return out;
}

/// Per-epoch summary. Prices are averaged over every off-diagonal edge and every
/// step of the episode; profits are those of the final step.
struct EpochMetrics {
  int epoch = 0;
  std::uint64_t seed = 0;
  double profit_u = 0.0, profit_l = 0.0;
  double mean_r_u = 0.0, mean_c_u = 0.0, mean_r_l = 0.0, mean_c_l = 0.0;
  double margin_u = 0.0, margin_l = 0.0;
  double gap_cu_g = 0.0, gap_cl_g = 0.0;
};

/// Per-edge price means over one episode, for the rate/commission plots.
struct EdgePriceMeans {
  Matrix r_u, c_u, r_l, c_l;
};

inline EdgePriceMeans edge_price_means(const EpisodeLog& log, int n) {
  EdgePriceMeans m{Matrix::Zero(n, n), Matrix::Zero(n, n), Matrix::Zero(n, n), Matrix::Zero(n, n)};
  if (log.steps.empty()) return m;
  for (const auto& s : log.steps) {
    m.r_u += s.prices.r_u;
    m.c_u += s.prices.c_u;
    m.r_l += s.prices.r_l;
    m.c_l += s.prices.c_l;
  }
  const double k = static_cast<double>(log.steps.size());
  for (Matrix* x : {&m.r_u, &m.c_u, &m.r_l, &m.c_l}) *x /= k;
  return m;
}

inline EpochMetrics epoch_metrics(const EpisodeLog& log, int n, double gas_cost) {
  EpochMetrics e;
  e.epoch = log.epoch;
  e.seed = log.seed;
  if (log.steps.empty()) return e;
  e.profit_u = log.steps.back().profits.u;
  e.profit_l = log.steps.back().profits.l;
  const auto means = edge_price_means(log, n);
  const double edges = static_cast<double>(n * n - n);
  if (edges > 0) {
    // Diagonals are zero, so plain sums cover exactly the off-diagonal edges.
    e.mean_r_u = means.r_u.sum() / edges;
    e.mean_c_u = means.c_u.sum() / edges;
    e.mean_r_l = means.r_l.sum() / edges;
    e.mean_c_l = means.c_l.sum() / edges;
  }
  e.margin_u = e.mean_r_u - e.mean_c_u;
  e.margin_l = e.mean_r_l - e.mean_c_l;
  e.gap_cu_g = e.mean_c_u - gas_cost;
  e.gap_cl_g = e.mean_c_l - gas_cost;
  return e;
}

/// Column names of the metrics table, raw columns first.
inline const std::vector<std::string>& metric_columns() {
  static const std::vector<std::string> cols{"profit_u", "profit_l", "mean_r_u", "mean_c_u",
                                             "mean_r_l", "mean_c_l", "margin_u", "margin_l",
                                             "gap_cu_g", "gap_cl_g"};
  return cols;
}

inline double metric_value(const EpochMetrics& m, std::size_t column) {
  const double values[] = {m.profit_u, m.profit_l, m.mean_r_u, m.mean_c_u, m.mean_r_l,
                           m.mean_c_l, m.margin_u, m.margin_l, m.gap_cu_g, m.gap_cl_g};
  return values[column];
}

/// Full run history: raw per-epoch rows plus their EMA-smoothed columns.
struct RunMetrics {
  std::vector<EpochMetrics> rows;
  double alpha = 0.5;

  std::vector<double> column(std::size_t c) const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(metric_value(r, c));
    return out;
  }

  std::vector<double> column(const std::string& name) const {
    const auto& cols = metric_columns();
    const auto it = std::find(cols.begin(), cols.end(), name);
    if (it == cols.end()) throw UsageError("unknown metric column " + name);
    return column(static_cast<std::size_t>(it - cols.begin()));
  }

  std::vector<double> smoothed(const std::string& name) const { return ema(column(name), alpha); }
};

struct PlatformSummary {
  double mean_rate = 0.0;
  double mean_commission = 0.0;
  double mean_margin = 0.0;
  double commission_gap = 0.0;  // commission - g
  double rate_gap_transit = 0.0;  // rate - r_o
  double end_profit = 0.0;        // last EMA profit
  double window_profit = 0.0;     // mean EMA profit over the window
  double peak_profit = 0.0;       // maximum EMA profit over the run
  std::string classification;
};

struct CollusionSummary {
  int epochs = 0;
  int window = 0;
  PlatformSummary u, l;
};

inline std::string classify(double mean_rate, double mean_commission, const SimConfig& sim,
                            const ReportingConfig& rep) {
  const double range = sim.price_range();
  if (mean_commission >= mean_rate - rep.competitive_band * range) return "competitive-like";
  if (std::abs(mean_commission - sim.gas_cost) <= rep.collusive_band * range) return "collusive-like";
  return "indeterminate";
}

/// Summary of the final 10% of epochs, computed on the EMA-smoothed series.
inline CollusionSummary collusion_metrics(const RunMetrics& metrics, const SimConfig& sim,
                                          const ReportingConfig& rep) {
  const int n = static_cast<int>(metrics.rows.size());
  if (n < 10) throw UsageError("collusion metrics need at least 10 epochs");
  CollusionSummary out;
  out.epochs = n;
  out.window = std::max(1, n / 10);

  auto window_mean = [&](const std::vector<double>& v) {
    double s = 0.0;
    for (int k = n - out.window; k < n; ++k) s += v[static_cast<std::size_t>(k)];
    return s / out.window;
  };
  auto summarize = [&](const char* rate, const char* commission, const char* profit) {
    PlatformSummary p;
    const auto r = metrics.smoothed(rate);
    const auto c = metrics.smoothed(commission);
    const auto pr = metrics.smoothed(profit);
    p.mean_rate = window_mean(r);
    p.mean_commission = window_mean(c);
    p.mean_margin = p.mean_rate - p.mean_commission;
    p.commission_gap = p.mean_commission - sim.gas_cost;
    p.rate_gap_transit = p.mean_rate - sim.transit_rate;
    p.end_profit = pr.back();
    p.window_profit = window_mean(pr);
    p.peak_profit = *std::max_element(pr.begin(), pr.end());
    p.classification = classify(p.mean_rate, p.mean_commission, sim, rep);
    return p;
  };
  out.u = summarize("mean_r_u", "mean_c_u", "profit_u");
  out.l = summarize("mean_r_l", "mean_c_l", "profit_l");
  return out;
}

}  // namespace rideshare
