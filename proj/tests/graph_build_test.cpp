#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

namespace clearing {
namespace {

using testing::Scenario;

std::map<std::string, std::int64_t> nets(const ObligationGraph& g) {
  std::map<std::string, std::int64_t> out;
  for (const auto& p : net_positions(g)) out[p.agent.str()] = p.net;
  return out;
}

TEST(Aggregate, SumsParallelObligations) {
  Scenario s;
  s.owe("A", "B", 10).owe("A", "B", 15);
  const ObligationGraph g = s.graph();
  ASSERT_EQ(g.edges.size(), 1u);
  EXPECT_EQ(g.edges[0].amount.value(), 25);
  EXPECT_EQ(g.edges[0].obligation_ids.size(), 2u);
}

TEST(Aggregate, Triangle) {
  const ObligationGraph g = testing::triangle().graph();
  EXPECT_EQ(g.edges.size(), 3u);
  EXPECT_EQ(g.total_debt().value(), 95);
}

TEST(Aggregate, EmptyPool) {
  const ObligationGraph g = Scenario().graph();
  EXPECT_TRUE(g.edges.empty());
  EXPECT_EQ(g.total_debt().value(), 0);
}

TEST(Aggregate, DuplicateIdRejected) {
  Scenario s;
  s.owe("A", "B", 10, "x").owe("B", "C", 5, "x");
  try {
    (void)s.graph();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDuplicate);
  }
}

TEST(Aggregate, UnsignedExcludedAndReported) {
  Scenario s;
  s.owe("A", "B", 10, "good");
  s.pool().obligations.push_back(
      pooled(Obligation{"forged", AgentId("B"), AgentId("C"), Amount(7), "USD", std::nullopt, "hmac:00"}));
  const ObligationGraph g = s.graph();
  ASSERT_EQ(g.edges.size(), 1u);
  ASSERT_EQ(g.excluded.size(), 1u);
  EXPECT_EQ(g.excluded[0].id, "forged");
}

TEST(Aggregate, ForeignUnitExcluded) {
  Scenario s;
  s.owe("A", "B", 10);
  Obligation eur{"eur", AgentId("A"), AgentId("C"), Amount(3), "EUR", std::nullopt, ""};
  s.pool().obligations.push_back(pooled(signed_copy(eur, testing::key_for("A"))));
  const ObligationGraph g = s.graph();
  EXPECT_EQ(g.edges.size(), 1u);
  ASSERT_EQ(g.excluded.size(), 1u);
  EXPECT_EQ(g.excluded[0].id, "eur");
}

TEST(Aggregate, EligibilityHook) {
  Scenario s;
  s.owe("A", "B", 10, "early", parse_date("2024-01-01")).owe("A", "B", 5, "late", parse_date("2024-12-01"));
  AggregateOptions options;
  options.eligible = [](const PooledObligation& p) {
    return p.obligation.due_date && *p.obligation.due_date <= parse_date("2024-06-30");
  };
  const ObligationGraph g = aggregate(s.pool(), s.keys(), s.config(), options);
  ASSERT_EQ(g.edges.size(), 1u);
  EXPECT_EQ(g.edges[0].amount.value(), 10);
}

TEST(Aggregate, AttributionOrderByDueDateThenId) {
  Scenario s;
  s.owe("A", "B", 1, "z", parse_date("2024-01-01"))
      .owe("A", "B", 1, "b")
      .owe("A", "B", 1, "a")
      .owe("A", "B", 1, "y", parse_date("2024-03-01"))
      .owe("A", "B", 1, "x", parse_date("2024-01-01"));
  const ObligationGraph g = s.graph();
  EXPECT_EQ(g.edges[0].obligation_ids, (std::vector<std::string>{"x", "z", "y", "a", "b"}));
}

TEST(Aggregate, ConflictingSourcesRejected) {
  Scenario s;
  s.owe("A", "B", 10).tender("A", 5, "Bank1", "EUR", Price(1, 1)).accept("B", -1, "Bank2", "EUR");
  try {
    (void)s.graph();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBuild);
  }
}

TEST(Aggregate, ImplicitAcceptanceOnlyWithoutExplicit) {
  Scenario s;
  s.owe("A", "B", 10).accept("B", 4);
  const ObligationGraph g = s.graph();
  std::vector<std::string> refs;
  for (const auto& a : g.acceptance_edges) refs.push_back(a.ref);
  EXPECT_EQ(refs, (std::vector<std::string>{"a/B/USD", implicit_acceptance_ref(AgentId("A"), "USD")}));
}

TEST(Aggregate, OverdraftWithoutLineExcluded) {
  Scenario s;
  s.owe("A", "B", 10).overdraft("A", "Fiona", 10);
  const ObligationGraph g = s.graph();
  EXPECT_TRUE(g.repayment_edges.empty());
  ASSERT_EQ(g.excluded.size(), 1u);
  EXPECT_EQ(g.excluded[0].id, "od/A/Fiona");
}

TEST(Aggregate, TenderCappedByLedgerBalance) {
  Scenario s;
  s.owe("A", "B", 10).tender("A", 8);
  s.ledger().debit(AgentId("A"), "USD", Amount(5));
  const ObligationGraph g = s.graph();
  ASSERT_EQ(g.tender_edges.size(), 1u);
  EXPECT_EQ(g.tender_edges[0].available.value(), 3);
}

TEST(NetPositions, Triangle) {
  // receivables minus payables: A 45-20, B 20-30, C 30-45
  EXPECT_EQ(nets(testing::triangle().graph()),
            (std::map<std::string, std::int64_t>{{"A", 25}, {"B", -10}, {"C", -15}}));
}

TEST(NetPositions, SingleEdge) {
  Scenario s;
  s.owe("A", "B", 20);
  EXPECT_EQ(nets(s.graph()), (std::map<std::string, std::int64_t>{{"A", -20}, {"B", 20}}));
}

TEST(NetPositions, BalancedTwoCycle) {
  Scenario s;
  s.owe("A", "B", 20).owe("B", "A", 20);
  for (const auto& [agent, net] : nets(s.graph())) EXPECT_EQ(net, 0) << agent;
}

TEST(Nid, Examples) {
  EXPECT_EQ(compute_nid(testing::triangle().graph()).value(), 25);
  Scenario cycle;
  cycle.owe("A", "B", 7).owe("B", "C", 7).owe("C", "A", 7);
  EXPECT_EQ(compute_nid(cycle.graph()).value(), 0);
  Scenario single;
  single.owe("A", "B", 20);
  EXPECT_EQ(compute_nid(single.graph()).value(), 20);
}

// Triangle NID cross-checked against exhaustive search: 25 is the least
// injection that clears everything.
TEST(Nid, TriangleMatchesOracle) {
  Scenario s = testing::triangle();
  testing::tender_at_net_debtors(s);
  s.accept("A");
  const ObligationGraph g = s.graph();
  EXPECT_EQ(brute_force_oracle(g, Amount(25)).value(), 95);
  EXPECT_LT(brute_force_oracle(g, Amount(24)).value(), 95);
}

TEST(AggregateProperty, ConservationNetsAndNid) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 12);
    Scenario s = testing::random_scenario(rng, n, static_cast<int>(rng() % 40), 1000);
    // duplicate some pairs to exercise aggregation
    const auto raw = s.pool().obligations;
    for (std::size_t i = 0; i < raw.size(); i += 3) {
      s.owe(raw[i].obligation.debtor.str(), raw[i].obligation.creditor.str(), 1 + static_cast<std::int64_t>(rng() % 50));
    }
    const ObligationGraph g = s.graph();
    std::int64_t raw_total = 0;
    for (const auto& p : s.pool().obligations) raw_total += p.obligation.amount.value();
    EXPECT_EQ(g.total_debt().value(), raw_total);
    std::set<std::pair<AgentId, AgentId>> pairs;
    for (const auto& e : g.edges) EXPECT_TRUE(pairs.insert({e.debtor, e.creditor}).second);

    std::int64_t sum = 0;
    bool all_zero = true;
    for (const auto& p : net_positions(g)) {
      sum += p.net;
      all_zero = all_zero && p.net == 0;
    }
    EXPECT_EQ(sum, 0);
    const Amount nid = compute_nid(g);
    EXPECT_EQ(nid.is_zero(), all_zero);
    EXPECT_LE(nid, g.total_debt());
    for (const Arc& a : build_network(g).arcs) EXPECT_GE(a.capacity, 0);
  }
}

TEST(BuildNetwork, FundedChain) {
  const ObligationGraph g = testing::chain(4).graph();
  const FlowNetwork n = build_network(g);
  int obligations = 0;
  for (const Arc& a : n.arcs) {
    switch (a.kind) {
      case ArcKind::kObligation:
        ++obligations;
        EXPECT_EQ(a.capacity, 20);
        EXPECT_EQ(a.cost, -1);
        break;
      case ArcKind::kTender:
        EXPECT_EQ(a.from, FlowNetwork::kSource);
        EXPECT_EQ(a.to, n.node_of(AgentId("Alice")));
        EXPECT_EQ(a.capacity, 20);
        EXPECT_EQ(a.cost, 0);
        break;
      case ArcKind::kAcceptance:
        EXPECT_EQ(a.to, FlowNetwork::kSink);
        EXPECT_EQ(a.capacity, kUnbounded);
        EXPECT_EQ(a.cost, 0);
        break;
      case ArcKind::kRepayment:
        ADD_FAILURE();
    }
  }
  EXPECT_EQ(obligations, 4);
}

TEST(BuildNetwork, PricedTenderCapacity) {
  Scenario s;
  s.owe("A", "B", 100).tender("A", 10, "Chain", "BTC", Price(3, 1));
  const FlowNetwork n = build_network(s.graph());
  const auto it = std::find_if(n.arcs.begin(), n.arcs.end(),
                               [](const Arc& a) { return a.kind == ArcKind::kTender; });
  ASSERT_NE(it, n.arcs.end());
  EXPECT_EQ(it->capacity, 30);
  EXPECT_EQ(it->currency, "BTC");
}

TEST(BuildNetwork, MissingPriceNamesTender) {
  Scenario s;
  s.owe("A", "B", 100).tender("A", 10, "Chain", "BTC", std::nullopt, "btc-tender");
  const ObligationGraph g = s.graph();
  try {
    (void)build_network(g);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBuild);
    EXPECT_NE(std::string(e.what()).find("btc-tender"), std::string::npos);
  }
}

TEST(BuildNetwork, ObligationsOnlyWithoutLiquidity) {
  Scenario s;
  s.owe("A", "B", 3).owe("B", "C", 4);
  ObligationGraph g = s.graph();
  g.acceptance_edges.clear();  // drop the implicit ones as well
  const FlowNetwork n = build_network(g);
  ASSERT_EQ(n.arcs.size(), 2u);
  for (const Arc& a : n.arcs) EXPECT_EQ(a.kind, ArcKind::kObligation);
}

TEST(BuildNetwork, RepaymentArcFromFacility) {
  const ObligationGraph g = testing::p2p_loan().graph();
  const FlowNetwork n = build_network(g);
  const auto it = std::find_if(n.arcs.begin(), n.arcs.end(),
                               [](const Arc& a) { return a.kind == ArcKind::kRepayment; });
  ASSERT_NE(it, n.arcs.end());
  EXPECT_EQ(it->from, n.node_of(AgentId("Carol")));
  EXPECT_EQ(it->to, n.node_of(AgentId("Alice")));
  EXPECT_EQ(it->capacity, 20);
}

TEST(Dump, Stable) {
  EXPECT_EQ(dump(testing::triangle().graph()), dump(testing::triangle().graph()));
}

}  // namespace
}  // namespace clearing
