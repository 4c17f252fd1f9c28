#ifndef CLEARING_EXPERIMENTS_HPP_
#define CLEARING_EXPERIMENTS_HPP_

#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "clearing/solver.hpp"

namespace clearing {

enum class AmountDistribution { kUniform, kLognormal };

struct SyntheticGraphConfig {
  int n_firms = 10;
  int n_edges = 20;
  AmountDistribution distribution = AmountDistribution::kUniform;
  std::int64_t lo = 1;    // uniform bounds, inclusive
  std::int64_t hi = 100;
  double mu = 4.0;        // lognormal parameters, amounts rounded, at least 1
  double sigma = 1.0;
  std::uint64_t seed = 1;
};

// Who tenders default liquidity in experiments.
enum class LiquidityPlacement {
  kNetDebtors,  // every net debtor tenders its net debit position
  kAllDebtors,  // every firm with payables tenders its full payables
};

// A synthetic epoch: signed pool, the keys that verify it, and its graph.
struct SyntheticNetwork {
  IntentPool pool;
  KeyRing keys;
  ObligationGraph graph;
};

inline std::string synthetic_firm_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "F%04d", i);
  return buf;
}

inline SigningKey synthetic_key(const AgentId& agent) {
  return derive_key("synthetic/" + agent.str());
}

// Random simple digraph with n_edges distinct ordered pairs and no self-edges.
inline SyntheticNetwork generate(const SyntheticGraphConfig& config,
                                 const EpochConfig& epoch = {}) {
  const auto n = static_cast<std::int64_t>(config.n_firms);
  if (config.n_firms < 2 || config.n_edges < 0 || config.n_edges > n * (n - 1)) {
    throw Error(ErrorCode::kInvalidArgument, "need n_edges <= n_firms * (n_firms - 1)");
  }
  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<int> pick(0, config.n_firms - 1);
  std::uniform_int_distribution<std::int64_t> uniform(config.lo, config.hi);
  std::lognormal_distribution<double> lognormal(config.mu, config.sigma);

  SyntheticNetwork out;
  std::vector<AgentId> firms;
  for (int i = 0; i < config.n_firms; ++i) {
    firms.emplace_back(synthetic_firm_name(i));
    out.keys.add(firms.back(), synthetic_key(firms.back()));
  }
  std::set<std::pair<int, int>> used;
  // Dense requests are cheaper to fill by sampling the complement.
  const bool dense = config.n_edges * 2 > n * (n - 1);
  std::vector<std::pair<int, int>> pairs;
  if (dense) {
    for (int a = 0; a < config.n_firms; ++a) {
      for (int b = 0; b < config.n_firms; ++b) {
        if (a != b) pairs.emplace_back(a, b);
      }
    }
    std::shuffle(pairs.begin(), pairs.end(), rng);
    pairs.resize(static_cast<std::size_t>(config.n_edges));
  } else {
    while (static_cast<int>(pairs.size()) < config.n_edges) {
      const int a = pick(rng);
      const int b = pick(rng);
      if (a == b || !used.insert({a, b}).second) continue;
      pairs.emplace_back(a, b);
    }
  }
  int serial = 0;
  for (const auto& [a, b] : pairs) {
    std::int64_t amount = 0;
    if (config.distribution == AmountDistribution::kUniform) {
      amount = uniform(rng);
    } else {
      amount = std::max<std::int64_t>(1, std::llround(lognormal(rng)));
    }
    char id[24];
    std::snprintf(id, sizeof(id), "inv%06d", serial++);
    Obligation o{id, firms[static_cast<std::size_t>(a)], firms[static_cast<std::size_t>(b)],
                 Amount(amount), epoch.unit, std::nullopt, ""};
    out.pool.obligations.push_back(pooled(signed_copy(o, synthetic_key(o.debtor))));
  }
  out.graph = aggregate(out.pool, out.keys, epoch);
  return out;
}

// Adds default-source assignment tenders per the placement rule and rebuilds
// the graph. Every firm already holds the implicit unbounded acceptance.
inline void add_default_liquidity(SyntheticNetwork& net,
                                  LiquidityPlacement placement = LiquidityPlacement::kNetDebtors) {
  const EpochConfig& epoch = net.graph.config;
  for (const NetPosition& p : net_positions(net.graph)) {
    Amount tender;
    if (placement == LiquidityPlacement::kNetDebtors) {
      if (p.net < 0) tender = Amount(-p.net);
    } else {
      tender = p.payables;
    }
    if (tender.is_zero()) continue;
    Tender t{"tender/" + p.agent.str(), p.agent, epoch.default_source, TenderKind::kAssignment,
             tender, epoch.default_currency, std::nullopt, ""};
    if (!net.keys.find(p.agent)) net.keys.add(p.agent, synthetic_key(p.agent));
    net.pool.tenders.push_back(signed_copy(t, synthetic_key(p.agent)));
  }
  net.graph = aggregate(net.pool, net.keys, epoch);
}

// Ledger in which every assignment tender in the pool is fully funded.
inline Ledger funded_ledger(const IntentPool& pool) {
  Ledger ledger;
  for (const Tender& t : pool.tenders) {
    if (t.kind == TenderKind::kAssignment) ledger.credit(t.sender, t.currency, t.max_amount);
  }
  return ledger;
}

struct MultiplierPoint {
  double liquidity_fraction = 0;
  Amount budget;
  Amount cleared;
  Amount total;
  double avg_ap_cleared_fraction = 0;

  double debt_cleared_fraction() const {
    return total.is_zero() ? 1.0 : static_cast<double>(cleared.value()) / static_cast<double>(total.value());
  }
};

inline Amount budget_for_fraction(double fraction, Amount total) {
  if (fraction < 0 || fraction > 1) throw Error(ErrorCode::kInvalidArgument, "fraction outside [0,1]");
  return Amount(std::llround(fraction * static_cast<double>(total.value())));
}

// Runs the solver at budget = fraction x total debt for each fraction. The
// set-off phase is shared; each budget is funded from a copy of it.
inline std::vector<MultiplierPoint> multiplier_curve(const ObligationGraph& g,
                                                     const std::vector<double>& fractions,
                                                     std::uint64_t seed = 0) {
  const FlowNetwork network = build_network(g);
  MtcsSolver base(network, seed);
  base.cancel_cycles();
  const Amount total = g.total_debt();
  std::map<AgentId, std::int64_t> payables;
  for (const auto& e : g.edges) payables[e.debtor] += e.amount.value();

  std::vector<MultiplierPoint> out;
  for (double fraction : fractions) {
    MultiplierPoint point;
    point.liquidity_fraction = fraction;
    point.budget = budget_for_fraction(fraction, total);
    point.total = total;
    MtcsSolver run = base;
    run.fund_chains(point.budget);
    const FlowSolution s = run.solution();
    point.cleared = s.cleared_debt;
    std::map<AgentId, std::int64_t> cleared_payables;
    for (std::size_t i = 0; i < network.arcs.size(); ++i) {
      if (network.arcs[i].kind != ArcKind::kObligation) continue;
      cleared_payables[g.edges[network.arcs[i].edge].debtor] += s.arc_flows[i];
    }
    double sum = 0;
    for (const auto& [agent, owed] : payables) {
      sum += static_cast<double>(cleared_payables[agent]) / static_cast<double>(owed);
    }
    point.avg_ap_cleared_fraction = payables.empty() ? 1.0 : sum / static_cast<double>(payables.size());
    out.push_back(point);
  }
  return out;
}

inline std::string curve_csv(const std::vector<MultiplierPoint>& points) {
  std::ostringstream out;
  out << "liquidity_fraction,debt_cleared_fraction,avg_ap_cleared_fraction\n";
  char buf[96];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f\n", p.liquidity_fraction,
                  p.debt_cleared_fraction(), p.avg_ap_cleared_fraction);
    out << buf;
  }
  return out.str();
}

inline constexpr std::size_t kOracleMaxNodes = 5;
inline constexpr double kOracleMaxSearchSpace = 4294967296.0;  // 2^32 assignments

// Exhaustive search over integer obligation sub-flows. A node whose outflow
// exceeds its inflow needs that much injected through its tenders; surplus
// must fit its acceptances. Returns the most debt dischargeable with total
// injection <= budget. Single currency, no credit lines.
inline Amount brute_force_oracle(const ObligationGraph& g, Amount budget) {
  std::set<AgentId> agents;
  double space = 1;
  for (const auto& e : g.edges) {
    agents.insert(e.debtor);
    agents.insert(e.creditor);
    space *= static_cast<double>(e.amount.value() + 1);
  }
  if (agents.size() > kOracleMaxNodes || space > kOracleMaxSearchSpace) {
    throw Error(ErrorCode::kRefused, "instance exceeds oracle bounds");
  }
  if (!g.repayment_edges.empty()) throw Error(ErrorCode::kRefused, "oracle does not model credit lines");
  std::set<std::string> currencies;
  for (const auto& t : g.tender_edges) currencies.insert(t.currency);
  for (const auto& a : g.acceptance_edges) currencies.insert(a.currency);
  if (currencies.size() > 1) throw Error(ErrorCode::kRefused, "oracle is single-currency");

  const std::vector<AgentId> nodes(agents.begin(), agents.end());
  auto index = [&](const AgentId& a) {
    return static_cast<std::size_t>(std::lower_bound(nodes.begin(), nodes.end(), a) - nodes.begin());
  };
  std::vector<std::int64_t> inject_cap(nodes.size(), 0);
  std::vector<std::int64_t> absorb_cap(nodes.size(), 0);
  for (const auto& t : g.tender_edges) {
    if (!agents.contains(t.sender)) continue;
    const Price price = t.price.value_or(Price(1, 1));
    inject_cap[index(t.sender)] += price.to_unit_floor(t.available).value();
  }
  for (const auto& a : g.acceptance_edges) {
    if (!agents.contains(a.origin)) continue;
    auto& cap = absorb_cap[index(a.origin)];
    cap = a.limit ? std::min(kUnbounded, cap + a.limit->value()) : kUnbounded;
  }

  struct Edge {
    std::size_t from, to;
    std::int64_t cap;
  };
  std::vector<Edge> edges;
  for (const auto& e : g.edges) edges.push_back({index(e.debtor), index(e.creditor), e.amount.value()});
  // Nodes whose balance becomes final after edge k.
  std::vector<std::vector<std::size_t>> settles(edges.size());
  std::vector<std::int64_t> remaining_cap(edges.size() + 1, 0);
  for (std::size_t k = edges.size(); k-- > 0;) remaining_cap[k] = remaining_cap[k + 1] + edges[k].cap;
  for (std::size_t v = 0; v < nodes.size(); ++v) {
    std::size_t last = 0;
    for (std::size_t k = 0; k < edges.size(); ++k) {
      if (edges[k].from == v || edges[k].to == v) last = k;
    }
    settles[last].push_back(v);
  }

  std::vector<std::int64_t> balance(nodes.size(), 0);  // outflow - inflow
  std::int64_t best = 0;
  const std::int64_t limit = budget.value();
  auto search = [&](auto&& self, std::size_t k, std::int64_t cleared, std::int64_t injected) -> void {
    if (cleared + remaining_cap[k] <= best) return;
    if (k == edges.size()) {
      best = cleared;
      return;
    }
    const Edge& e = edges[k];
    for (std::int64_t x = e.cap; x >= 0; --x) {
      balance[e.from] += x;
      balance[e.to] -= x;
      std::int64_t extra = 0;
      bool ok = true;
      for (std::size_t v : settles[k]) {
        const std::int64_t b = balance[v];
        if (b > 0) {
          ok = ok && b <= inject_cap[v];
          extra += b;
        } else if (b < 0) {
          ok = ok && -b <= absorb_cap[v];
        }
      }
      if (ok && injected + extra <= limit) self(self, k + 1, cleared + x, injected + extra);
      balance[e.from] -= x;
      balance[e.to] += x;
    }
  };
  search(search, 0, 0, 0);
  return Amount(best);
}

}  // namespace clearing

#endif  // CLEARING_EXPERIMENTS_HPP_
