#pragma once

#include <algorithm>
#include <string>
#include <utility>

#include "rideshare/market.hpp"

namespace rideshare {

/// Available (supply/demand) and realized flows per edge, per unit time.
struct FlowSet {
  Matrix avail_p_u, avail_p_l, avail_p_o;
  Matrix avail_d_u, avail_d_l;
  Matrix flow_u, flow_l, flow_o;
};

struct PlatformProfits {
  double u = 0.0;
  double l = 0.0;
};

/// Passengers and drivers ready to travel along each edge:
/// P_m(i,j) = passengers_i e_ij p_m(i,j),  D_m(i,j) = drivers_i e_ij a_m(i).
inline FlowSet available_flows(const Populations& pop, const AllocationState& alloc,
                               const ODGraph& graph) {
  const int n = graph.n_nodes;
  FlowSet f;
  for (Matrix* m : {&f.avail_p_u, &f.avail_p_l, &f.avail_p_o, &f.avail_d_u, &f.avail_d_l,
                    &f.flow_u, &f.flow_l, &f.flow_o})
    *m = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double pe = pop.passengers[i] * graph.demand_fraction(i, j);
      const double de = pop.drivers[i] * graph.demand_fraction(i, j);
      f.avail_p_u(i, j) = pe * alloc.p_u(i, j);
      f.avail_p_l(i, j) = pe * alloc.p_l(i, j);
      f.avail_p_o(i, j) = pe * alloc.p_o(i, j);
      f.avail_d_u(i, j) = de * alloc.a_u[i];
      f.avail_d_l(i, j) = de * alloc.a_l[i];
    }
  return f;
}

/// Transit carries everyone who chooses it; platform trips need one driver
/// per passenger.
inline FlowSet realized_flows(FlowSet f) {
  f.flow_o = f.avail_p_o;
  f.flow_u = f.avail_p_u.cwiseMin(f.avail_d_u);
  f.flow_l = f.avail_p_l.cwiseMin(f.avail_d_l);
  return f;
}

inline PlatformProfits platform_profit(const FlowSet& flows, const PriceSchedule& prices,
                                       const ODGraph& graph) {
  PlatformProfits out;
  const int n = graph.n_nodes;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d = graph.distance(i, j);
      out.u += d * flows.flow_u(i, j) * (prices.r_u(i, j) - prices.c_u(i, j));
      out.l += d * flows.flow_l(i, j) * (prices.r_l(i, j) - prices.c_l(i, j));
    }
  return out;
}

struct PopulationStep {
  Populations next;
  double clamped = 0.0;  // total mass removed by clamping negatives to zero
};

/// Forward-Euler update of node populations from realized flows.
///
/// Passengers move with every mode, drivers only with platform trips.
/// Components pushed below zero are clamped and reported; a clamp larger than
/// 1e-6 of the total population raises InstabilityError.
inline PopulationStep step_populations(const Populations& pop, const FlowSet& flows, double dt) {
  const Matrix passenger_flow = flows.flow_u + flows.flow_l + flows.flow_o;
  const Matrix driver_flow = flows.flow_u + flows.flow_l;
  // Diagonals are zero, so column sums are inflows and row sums are outflows.
  const Vector dp = passenger_flow.colwise().sum().transpose() - passenger_flow.rowwise().sum();
  const Vector dd = driver_flow.colwise().sum().transpose() - driver_flow.rowwise().sum();

  PopulationStep out{{pop.passengers + dt * dp, pop.drivers + dt * dd}, 0.0};
  for (Vector* v : {&out.next.passengers, &out.next.drivers})
    for (Eigen::Index i = 0; i < v->size(); ++i)
      if ((*v)[i] < 0.0) {
        out.clamped += -(*v)[i];
        (*v)[i] = 0.0;
      }
  const double total = pop.passengers.sum() + pop.drivers.sum();
  if (out.clamped > 1e-6 * total)
    throw InstabilityError("population clamp of " + std::to_string(out.clamped) +
                           " exceeds tolerance; reduce dt");
  return out;
}

struct StepOutcome {
  FlowSet flows;
  PlatformProfits profits;
  PopulationStep populations;
};

/// Flows, profits and population update for one market step.
inline StepOutcome market_step(const Populations& pop, const AllocationState& alloc,
                               const PriceSchedule& prices, const ODGraph& graph, double dt) {
  StepOutcome out;
  out.flows = realized_flows(available_flows(pop, alloc, graph));
  out.profits = platform_profit(out.flows, prices, graph);
  out.populations = step_populations(pop, out.flows, dt);
  return out;
}

}  // namespace rideshare
