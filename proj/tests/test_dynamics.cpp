#include <gtest/gtest.h>

#include "rideshare/dynamics.hpp"
#include "rideshare/oracles.hpp"

using namespace rideshare;

namespace {

AllocationState quarter_split() {
  auto a = AllocationState::zeros(2);
  a.a_u.setConstant(0.5);
  a.a_l.setConstant(0.5);
  for (auto [i, j] : {std::pair{0, 1}, std::pair{1, 0}}) {
    a.p_u(i, j) = 0.25;
    a.p_l(i, j) = 0.25;
    a.p_o(i, j) = 0.5;
  }
  return a;
}

Populations initial() {
  const auto rc = two_node_config();
  return {rc.sim.init_passenger_pop, rc.sim.init_driver_pop};
}

}  // namespace

TEST(AvailableFlows, StartingMarketExample) {
  const auto rc = two_node_config();
  const auto f = available_flows(initial(), quarter_split(), rc.graph);
  EXPECT_DOUBLE_EQ(f.avail_p_u(0, 1), 450.0);
  EXPECT_DOUBLE_EQ(f.avail_d_u(0, 1), 225.0);
  EXPECT_DOUBLE_EQ(f.avail_p_o(0, 1), 900.0);
  EXPECT_EQ(f.avail_p_u(0, 0), 0.0);
}

TEST(AvailableFlows, EmptyNodeSendsNothing) {
  const auto rc = two_node_config();
  auto pop = initial();
  pop.passengers[0] = 0.0;
  pop.drivers[0] = 0.0;
  const auto f = realized_flows(available_flows(pop, quarter_split(), rc.graph));
  EXPECT_EQ(f.flow_u.row(0).sum() + f.flow_l.row(0).sum() + f.flow_o.row(0).sum(), 0.0);
}

TEST(RealizedFlows, SupplyConstrained) {
  const auto rc = two_node_config();
  const auto f = realized_flows(available_flows(initial(), quarter_split(), rc.graph));
  EXPECT_DOUBLE_EQ(f.flow_u(0, 1), 225.0);
  EXPECT_TRUE((f.flow_u.array() <= f.avail_p_u.array()).all());
  EXPECT_TRUE((f.flow_u.array() <= f.avail_d_u.array()).all());
  EXPECT_TRUE(f.flow_o == f.avail_p_o);
}

TEST(RealizedFlows, DemandConstrainedAndTransit) {
  FlowSet f;
  f.avail_p_u = f.avail_p_l = f.avail_p_o = f.avail_d_u = f.avail_d_l = Matrix::Zero(2, 2);
  f.avail_p_u(0, 1) = 3.0;
  f.avail_d_u(0, 1) = 10.0;
  f.avail_p_o(1, 0) = 7.0;
  const auto r = realized_flows(f);
  EXPECT_EQ(r.flow_u(0, 1), 3.0);
  EXPECT_EQ(r.flow_o(1, 0), 7.0);
}

TEST(PlatformProfit, Examples) {
  const auto rc = two_node_config();
  FlowSet f;
  f.flow_u = f.flow_l = f.flow_o = Matrix::Zero(2, 2);
  f.flow_u(0, 1) = 225.0;
  const auto margin5 = PriceSchedule::constant(2, 15.0, 10.0);
  EXPECT_DOUBLE_EQ(platform_profit(f, margin5, rc.graph).u, 5625.0);
  EXPECT_DOUBLE_EQ(platform_profit(f, PriceSchedule::constant(2, 9.0, 9.0), rc.graph).u, 0.0);
  f.flow_u.setZero();
  const auto p = platform_profit(f, margin5, rc.graph);
  EXPECT_EQ(p.u + p.l, 0.0);
}

TEST(StepPopulations, ZeroFlowsUnchanged) {
  FlowSet f;
  f.flow_u = f.flow_l = f.flow_o = Matrix::Zero(2, 2);
  const auto pop = initial();
  const auto s = step_populations(pop, f, 0.01);
  EXPECT_EQ(s.next.passengers, pop.passengers);
  EXPECT_EQ(s.next.drivers, pop.drivers);
}

TEST(StepPopulations, BalancedExchangeUnchanged) {
  FlowSet f;
  f.flow_u = f.flow_l = f.flow_o = Matrix::Zero(2, 2);
  f.flow_u(0, 1) = f.flow_u(1, 0) = 40.0;
  f.flow_l(0, 1) = f.flow_l(1, 0) = 12.5;
  f.flow_o(0, 1) = f.flow_o(1, 0) = 90.0;
  const auto pop = initial();
  const auto s = step_populations(pop, f, 0.01);
  EXPECT_DOUBLE_EQ(s.next.passengers[0], pop.passengers[0]);
  EXPECT_DOUBLE_EQ(s.next.drivers[1], pop.drivers[1]);
}

TEST(StepPopulations, ConservesTotalsFromStart) {
  const auto rc = two_node_config();
  const auto pop = initial();
  const auto out = market_step(pop, quarter_split(), PriceSchedule::constant(2, 12, 8), rc.graph, rc.sim.dt);
  EXPECT_NEAR(out.populations.next.passengers.sum(), pop.passengers.sum(), 1e-9);
  EXPECT_NEAR(out.populations.next.drivers.sum(), pop.drivers.sum(), 1e-9);
  EXPECT_EQ(out.populations.clamped, 0.0);
  // Drivers leave with their passengers: node 0 loses 225+225 to node 1 and gains
  // min(3000*0.2/4, 1000*0.2/2) = 100 per platform back.
  EXPECT_NEAR(out.populations.next.drivers[0], 500.0 + 0.01 * (200.0 - 450.0), 1e-9);
}

TEST(StepPopulations, LargeClampThrows) {
  FlowSet f;
  f.flow_u = f.flow_l = f.flow_o = Matrix::Zero(2, 2);
  f.flow_o(0, 1) = 1e6;
  EXPECT_THROW(step_populations(initial(), f, 1.0), InstabilityError);
}

TEST(Conservation, FullEpisode) {
  const auto r = oracle::conservation_suite(two_node_config(), "responsive", 3);
  EXPECT_EQ(r.steps, 2048);
  EXPECT_LE(r.passenger_rel_drift, 1e-6);
  EXPECT_LE(r.driver_rel_drift, 1e-6);
  EXPECT_EQ(r.clamp_events, 0);
}

TEST(Conservation, LaggingEpisode) {
  const auto r = oracle::conservation_suite(two_node_config(), "lagging", 4);
  EXPECT_TRUE(r.ok());
}
