#include <gtest/gtest.h>

#include "rideshare/driver_search.hpp"
#include "rideshare/oracles.hpp"

using namespace rideshare;

namespace {

MarketState start_state(std::uint64_t seed = 1) {
  const auto rc = two_node_config();
  RandomStream rng(seed);
  return init_state(rc.sim, rc.graph, rng);
}

CandidateEvaluation with_profit(double p) {
  CandidateEvaluation e;
  e.driver_profit = p;
  return e;
}

}  // namespace

TEST(SampleCandidates, ZeroWidthKeepsIncumbent) {
  const auto s = start_state();
  RandomStream rng(4);
  for (const auto& c : sample_candidates(s.allocation, 0.0, 10, rng)) {
    EXPECT_EQ(c.a_u, s.allocation.a_u);
    EXPECT_EQ(c.a_l, s.allocation.a_l);
  }
}

TEST(SampleCandidates, ClippedUniformFromZero) {
  auto alloc = AllocationState::zeros(2);
  alloc.a_l.setOnes();
  RandomStream rng(17);
  constexpr int draws = 100000;
  int at_zero = 0;
  std::array<int, 4> quarter{};
  int total = 0;
  for (int k = 0; k < draws / 10; ++k)
    for (const auto& c : sample_candidates(alloc, 1.0, 10, rng))
      for (int i = 0; i < 2; ++i) {
        const double x = c.a_u[i];
        ASSERT_GE(x, 0.0);
        ASSERT_LE(x, 1.0);
        ASSERT_EQ(c.a_u[i] + c.a_l[i], 1.0);
        ++total;
        if (x == 0.0) ++at_zero;
        else ++quarter[std::min(3, static_cast<int>(x * 4))];
      }
  // Half the mass sits at zero, the rest is uniform on (0, 1].
  EXPECT_NEAR(at_zero / double(total), 0.5, 0.01);
  for (int q : quarter) EXPECT_NEAR(q / double(total), 0.125, 0.01);
}

TEST(SampleCandidates, RejectsBadArguments) {
  const auto s = start_state();
  RandomStream rng(1);
  EXPECT_THROW(sample_candidates(s.allocation, 0.5, 0, rng), UsageError);
  EXPECT_THROW(sample_candidates(s.allocation, 1.5, 3, rng), UsageError);
}

TEST(SelectAllocation, TieGoesToLowestIndex) {
  const std::vector<CandidateEvaluation> evals{with_profit(3.0), with_profit(7.0), with_profit(7.0)};
  EXPECT_EQ(best_candidate_index(evals), 1u);
}

TEST(SelectAllocation, SingleAndEmpty) {
  const std::vector<CandidateEvaluation> one{with_profit(-2.0)};
  EXPECT_EQ(best_candidate_index(one), 0u);
  const std::vector<CandidateEvaluation> none;
  EXPECT_THROW(select_allocation(none), UsageError);
}

TEST(EvaluateCandidate, ZeroMarginZeroProfit) {
  const auto rc = two_node_config();
  const auto s = start_state();
  const auto prices = PriceSchedule::constant(2, 12.0, rc.sim.gas_cost);
  const auto e = evaluate_candidate(DriverCandidate{s.allocation.a_u, s.allocation.a_l}, s.populations,
                                    prices, rc.graph, rc.sim);
  EXPECT_EQ(e.driver_profit, 0.0);
}

TEST(EvaluateCandidate, SymmetricStartExample) {
  const auto rc = two_node_config();
  const auto s = start_state();
  const auto prices = PriceSchedule::constant(2, 10.0, 10.0);
  const auto c = DriverCandidate::from_a_u(Vector::Constant(2, 0.5));
  const auto e = evaluate_candidate(c, s.populations, prices, rc.graph, rc.sim);
  // Both edges reduce to (1/4, 1/4, 1/2); profit = 5*0.5*5 + 2*0.5*5.
  for (auto [i, j] : {std::pair{0, 1}, std::pair{1, 0}}) {
    EXPECT_NEAR(e.responses.p_u(i, j), 0.25, 1e-12);
    EXPECT_NEAR(e.responses.p_l(i, j), 0.25, 1e-12);
    EXPECT_NEAR(e.responses.p_o(i, j), 0.5, 1e-12);
  }
  EXPECT_NEAR(e.driver_profit, 17.5, 1e-9);
  EXPECT_NEAR(oracle::driver_profit_at(c.a_u, s.populations, prices, rc.graph, rc.sim), 17.5, 1e-9);
}

TEST(EvaluateCandidate, ProfitLinearInMarginAtFixedShares) {
  const auto rc = two_node_config();
  const auto s = start_state();
  RandomStream rng(3);
  const auto prices = oracle::random_prices(2, 5, 20, rng);
  const auto e = evaluate_candidate(DriverCandidate{s.allocation.a_u, s.allocation.a_l}, s.populations,
                                    prices, rc.graph, rc.sim);
  auto doubled = prices;
  doubled.c_u = (prices.c_u.array() - rc.sim.gas_cost) * 2.0 + rc.sim.gas_cost;
  doubled.c_l = (prices.c_l.array() - rc.sim.gas_cost) * 2.0 + rc.sim.gas_cost;
  for (int i = 0; i < 2; ++i) doubled.c_u(i, i) = doubled.c_l(i, i) = 0.0;
  const double frozen = driver_profit(e.responses, doubled, rc.graph, rc.sim.gas_cost);
  EXPECT_NEAR(frozen, 2.0 * e.driver_profit, 1e-9 * std::abs(e.driver_profit) + 1e-12);
}

TEST(EvaluateCandidate, PlatformRelabelingSymmetry) {
  const auto rc = two_node_config();
  const auto s = start_state();
  RandomStream rng(12);
  for (int k = 0; k < 50; ++k) {
    const auto prices = oracle::random_prices(2, 5, 20, rng);
    Vector a_u(2);
    a_u << rng.uniform(0, 1), rng.uniform(0, 1);
    const auto c = DriverCandidate::from_a_u(a_u);
    const PriceSchedule swapped{prices.r_l, prices.c_l, prices.r_u, prices.c_u};
    const auto a = evaluate_candidate(c, s.populations, prices, rc.graph, rc.sim);
    const auto b = evaluate_candidate(DriverCandidate{c.a_l, c.a_u}, s.populations, swapped, rc.graph, rc.sim);
    EXPECT_NEAR(a.driver_profit, b.driver_profit, 1e-9 * std::max(1.0, std::abs(a.driver_profit)));
    EXPECT_NEAR((a.responses.p_u - b.responses.p_l).norm(), 0.0, 1e-12);
  }
}

TEST(EvaluateCandidate, ProfitRecomputedFromParts) {
  const auto rc = two_node_config();
  const auto s = start_state();
  RandomStream rng(13);
  const auto prices = oracle::random_prices(2, 5, 20, rng);
  const auto e = evaluate_candidate(DriverCandidate{s.allocation.a_u, s.allocation.a_l}, s.populations,
                                    prices, rc.graph, rc.sim);
  double sum = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      if (i != j)
        sum += rc.graph.distance(i, j) * (e.responses.p_u(i, j) * (prices.c_u(i, j) - 5.0) +
                                          e.responses.p_l(i, j) * (prices.c_l(i, j) - 5.0));
  EXPECT_NEAR(e.driver_profit, sum, 1e-9);
}

TEST(Search, ZeroWidthSelectsIncumbent) {
  auto rc = two_node_config();
  rc.sim.delta_a = 0.0;
  const auto s = start_state();
  RandomStream rng(6);
  const auto prices = PriceSchedule::constant(2, 14.0, 9.0);
  const auto r = search_driver_allocation(s, prices, rc.graph, rc.sim, rng);
  EXPECT_EQ(r.allocation.a_u, s.allocation.a_u);
  const auto inc = evaluate_candidate(DriverCandidate{s.allocation.a_u, s.allocation.a_l}, s.populations,
                                      prices, rc.graph, rc.sim);
  EXPECT_EQ(r.driver_profit, inc.driver_profit);
}

TEST(Search, SelectionDominatesEveryCandidate) {
  const auto rc = two_node_config();
  const auto s = start_state();
  RandomStream a(42), b(42);
  const auto prices = PriceSchedule::constant(2, 15.0, 11.0);
  const auto r = search_driver_allocation(s, prices, rc.graph, rc.sim, a);
  for (const auto& c : sample_candidates(s.allocation, rc.sim.delta_a, rc.sim.n_candidates, b))
    EXPECT_GE(r.driver_profit, evaluate_candidate(c, s.populations, prices, rc.graph, rc.sim).driver_profit);
}

TEST(Search, DeterministicPerSeed) {
  const auto rc = two_node_config();
  const auto s = start_state();
  const auto prices = PriceSchedule::constant(2, 15.0, 11.0);
  RandomStream a(5), b(5);
  const auto x = search_driver_allocation(s, prices, rc.graph, rc.sim, a);
  const auto y = search_driver_allocation(s, prices, rc.graph, rc.sim, b);
  EXPECT_EQ(x.selected, y.selected);
  EXPECT_TRUE(x.allocation == y.allocation);
}

TEST(Search, IncumbentFlagPrependsCurrentAllocation) {
  auto rc = two_node_config();
  rc.sim.include_incumbent = true;
  rc.sim.delta_a = 0.0;
  const auto s = start_state();
  RandomStream rng(1);
  const auto r = search_driver_allocation(s, PriceSchedule::constant(2, 12, 8), rc.graph, rc.sim, rng);
  EXPECT_EQ(r.selected, 0u);  // all candidates tie, the incumbent comes first
}

TEST(Search, GridOracleGapIsRecorded) {
  // The sampled search must never exceed what the grid's continuous optimum allows
  // by more than the grid resolution, and the suite must report every ratio.
  const auto r = oracle::driver_suite(two_node_config(), 40, 99);
  ASSERT_EQ(r.ratios.size(), 40u);
  for (double x : r.ratios) {
    EXPECT_GT(x, 0.0);
    EXPECT_LT(x, 1.1);
  }
}
