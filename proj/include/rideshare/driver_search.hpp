#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "rideshare/market.hpp"
#include "rideshare/passenger_response.hpp"

namespace rideshare {

/// Candidate self-allocation of drivers; a_l is always 1 - a_u.
struct DriverCandidate {
  Vector a_u;
  Vector a_l;

  static DriverCandidate from_a_u(Vector a_u) {
    Vector a_l = Vector::Ones(a_u.size()) - a_u;
    return {std::move(a_u), std::move(a_l)};
  }
};

/// Passenger shares on every edge, stored as N x N matrices with zero diagonal.
struct PassengerShares {
  Matrix p_u, p_l, p_o;
};

struct CandidateEvaluation {
  DriverCandidate candidate;
  PassengerShares responses;
  double driver_profit = 0.0;
};

/// a_N perturbed copies of the current allocation. Each node's a_u moves by an
/// independent Uniform(-delta_a, delta_a) draw and is clipped to [0, 1].
template <typename Sampler>
std::vector<DriverCandidate> sample_candidates(const AllocationState& current, double delta_a,
                                               int n_candidates, Sampler& rng) {
  if (n_candidates < 1) throw UsageError("a_N must be >= 1");
  if (!(delta_a >= 0.0 && delta_a <= 1.0)) throw UsageError("delta_a must be in [0,1]");
  const int n = current.n_nodes();
  std::vector<DriverCandidate> out;
  out.reserve(static_cast<std::size_t>(n_candidates));
  for (int c = 0; c < n_candidates; ++c) {
    Vector a_u(n);
    for (int i = 0; i < n; ++i) {
      const double step = delta_a > 0.0 ? rng.uniform(-delta_a, delta_a) : 0.0;
      a_u[i] = std::clamp(current.a_u[i] + step, 0.0, 1.0);
    }
    out.push_back(DriverCandidate::from_a_u(std::move(a_u)));
  }
  return out;
}

/// Passenger best responses on every edge for the given driver availabilities.
inline PassengerShares passenger_responses(const Vector& a_u, const Vector& a_l,
                                           const Populations& populations,
                                           const PriceSchedule& prices, const ODGraph& graph,
                                           const SimConfig& config) {
  const int n = graph.n_nodes;
  PassengerShares out{Matrix::Zero(n, n), Matrix::Zero(n, n), Matrix::Zero(n, n)};
  for (int i = 0; i < n; ++i) {
    const double lam = wait_multiplier(populations, i, config.base_wait, config.driver_pop_floor);
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      EdgeMarket m{graph.distance(i, j), prices.r_u(i, j), prices.r_l(i, j), config.transit_rate,
                   a_u[i], a_l[i], lam};
      const auto p = edge_best_response(m, config.availability_floor, config.wait_floor);
      out.p_u(i, j) = p.p_u;
      out.p_l(i, j) = p.p_l;
      out.p_o(i, j) = p.p_o;
    }
  }
  return out;
}

/// Summed driver profit: sum_i sum_{j != i} d_ij [p_u (c_u - g) + p_l (c_l - g)].
inline double driver_profit(const PassengerShares& shares, const PriceSchedule& prices,
                            const ODGraph& graph, double gas_cost) {
  double total = 0.0;
  const int n = graph.n_nodes;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d = graph.distance(i, j);
      total += d * shares.p_u(i, j) * (prices.c_u(i, j) - gas_cost) +
               d * shares.p_l(i, j) * (prices.c_l(i, j) - gas_cost);
    }
  return total;
}

inline CandidateEvaluation evaluate_candidate(const DriverCandidate& candidate,
                                              const Populations& populations,
                                              const PriceSchedule& prices, const ODGraph& graph,
                                              const SimConfig& config) {
  CandidateEvaluation out{candidate,
                          passenger_responses(candidate.a_u, candidate.a_l, populations, prices,
                                              graph, config),
                          0.0};
  out.driver_profit = driver_profit(out.responses, prices, graph, config.gas_cost);
  return out;
}

/// Index of the most profitable candidate; ties go to the lowest index.
inline std::size_t best_candidate_index(std::span<const CandidateEvaluation> candidates) {
  if (candidates.empty()) throw UsageError("cannot select from an empty candidate list");
  std::size_t best = 0;
  for (std::size_t k = 1; k < candidates.size(); ++k)
    if (candidates[k].driver_profit > candidates[best].driver_profit) best = k;
  return best;
}

inline CandidateEvaluation select_allocation(std::span<const CandidateEvaluation> candidates) {
  return candidates[best_candidate_index(candidates)];
}

struct DriverSearchResult {
  AllocationState allocation;  // selected a and the passenger shares it induces
  double driver_profit = 0.0;
  std::size_t selected = 0;
};

/// One round of the candidate search: sample, evaluate, keep the best.
template <typename Sampler>
DriverSearchResult search_driver_allocation(const MarketState& state, const PriceSchedule& prices,
                                            const ODGraph& graph, const SimConfig& config,
                                            Sampler& rng) {
  auto candidates = sample_candidates(state.allocation, config.delta_a, config.n_candidates, rng);
  if (config.include_incumbent)
    candidates.insert(candidates.begin(), DriverCandidate{state.allocation.a_u, state.allocation.a_l});

  std::vector<CandidateEvaluation> evals;
  evals.reserve(candidates.size());
  for (const auto& c : candidates)
    evals.push_back(evaluate_candidate(c, state.populations, prices, graph, config));

  const auto k = best_candidate_index(evals);
  auto& best = evals[k];
  DriverSearchResult out;
  out.allocation = {best.candidate.a_u, best.candidate.a_l, best.responses.p_u,
                    best.responses.p_l, best.responses.p_o};
  out.driver_profit = best.driver_profit;
  out.selected = k;
  return out;
}

}  // namespace rideshare
