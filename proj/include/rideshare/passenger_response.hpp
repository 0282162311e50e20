#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "rideshare/errors.hpp"
#include "rideshare/market.hpp"

namespace rideshare {

/// Inputs of one passenger edge problem.
struct EdgeMarket {
  double d = 0.0;
  double r_u = 0.0, r_l = 0.0, r_o = 0.0;
  double a_u = 0.5, a_l = 0.5;
  double lambda_i = 0.0;
};

struct EdgeResponse {
  double p_u = 0.0, p_l = 0.0, p_o = 1.0;
};

/// Node wait-cost multiplier: base * passengers / max(drivers, floor).
inline double wait_multiplier(const Populations& pop, int node, double base_wait,
                              double floor = 1e-6) {
  return base_wait * pop.passengers[node] / std::max(pop.drivers[node], floor);
}

struct SimplexSolution {
  std::vector<double> p;
  double multiplier = 0.0;  // common marginal cost of the active coordinates
};

/// Exact minimizer of sum_k (linear[k] p_k + curvature[k] p_k^2) over the
/// probability simplex.
///
/// Stationarity gives p_k = max(0, (mu - linear[k]) / (2 curvature[k])); the
/// coverage sum is piecewise linear in mu, so walking the sorted breakpoints
/// locates the segment holding the root and solves it in closed form.
inline SimplexSolution simplex_quadratic_argmin_kkt(std::span<const double> linear,
                                                    std::span<const double> curvature) {
  const std::size_t k = linear.size();
  if (k == 0 || curvature.size() != k) throw UsageError("simplex solve needs matching, non-empty inputs");
  for (double q : curvature)
    if (!(q > 0.0) || !std::isfinite(q)) throw DomainError("curvatures must be strictly positive");

  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return linear[x] < linear[y]; });

  double weight = 0.0;    // sum of 1/(2q) over the active set
  double weighted = 0.0;  // sum of c/(2q) over the active set
  double mu = 0.0;
  for (std::size_t m = 0; m < k; ++m) {
    const std::size_t idx = order[m];
    weight += 0.5 / curvature[idx];
    weighted += 0.5 * linear[idx] / curvature[idx];
    mu = (1.0 + weighted) / weight;
    if (m + 1 == k || mu <= linear[order[m + 1]]) break;
  }

  SimplexSolution out{std::vector<double>(k, 0.0), mu};
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    out.p[i] = std::max(0.0, (mu - linear[i]) / (2.0 * curvature[i]));
    total += out.p[i];
  }
  for (double& x : out.p) x /= total;
  return out;
}

inline std::vector<double> simplex_quadratic_argmin(std::span<const double> linear,
                                                    std::span<const double> curvature) {
  return simplex_quadratic_argmin_kkt(linear, curvature).p;
}

/// Largest violation of the KKT conditions at p: active coordinates must share
/// the marginal cost mu, inactive ones must not be cheaper than mu.
inline double kkt_residual(std::span<const double> linear, std::span<const double> curvature,
                           std::span<const double> p, double mu) {
  double worst = std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double marginal = linear[i] + 2.0 * curvature[i] * p[i];
    if (p[i] > 0.0)
      worst = std::max(worst, std::abs(marginal - mu) / std::max(1.0, std::abs(mu)));
    else
      worst = std::max(worst, (mu - marginal) / std::max(1.0, std::abs(mu)));
    worst = std::max(worst, -p[i]);
  }
  return worst;
}

/// Passenger cost on one edge at shares p (platforms with zero share and zero
/// availability contribute nothing).
inline double edge_cost(const EdgeMarket& m, const EdgeResponse& p, double lambda_floor = 1e-6) {
  const double lam = std::max(m.lambda_i, lambda_floor);
  auto platform = [&](double share, double rate, double avail) {
    if (share == 0.0) return 0.0;
    return share * (m.d * rate + lam * share / avail);
  };
  return platform(p.p_u, m.r_u, m.a_u) + platform(p.p_l, m.r_l, m.a_l) +
         p.p_o * (m.d * m.r_o + lam * p.p_o);
}

/// Passengers' best response on one edge.
///
/// Platforms whose availability is below `availability_floor` are removed
/// from the choice set and receive a zero share.
inline EdgeResponse edge_best_response(const EdgeMarket& m, double availability_floor = 1e-9,
                                       double lambda_floor = 1e-6) {
  const double lam = std::max(m.lambda_i, lambda_floor);
  std::array<double, 3> linear{};
  std::array<double, 3> curvature{};
  std::array<int, 3> slot{};
  std::size_t k = 0;
  if (m.a_u >= availability_floor) {
    linear[k] = m.d * m.r_u;
    curvature[k] = lam / m.a_u;
    slot[k++] = 0;
  }
  if (m.a_l >= availability_floor) {
    linear[k] = m.d * m.r_l;
    curvature[k] = lam / m.a_l;
    slot[k++] = 1;
  }
  linear[k] = m.d * m.r_o;
  curvature[k] = lam;
  slot[k++] = 2;

  const auto p = simplex_quadratic_argmin(std::span(linear.data(), k), std::span(curvature.data(), k));
  std::array<double, 3> shares{0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < k; ++i) shares[slot[i]] = p[i];
  // Close the sum on an active coordinate so an inactive one stays exactly zero.
  if (shares[2] > 0.0) return {shares[0], shares[1], std::max(0.0, 1.0 - shares[0] - shares[1])};
  if (shares[1] > 0.0) return {shares[0], std::max(0.0, 1.0 - shares[0]), 0.0};
  return {1.0, 0.0, 0.0};
}

}  // namespace rideshare
