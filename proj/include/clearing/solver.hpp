#ifndef CLEARING_SOLVER_HPP_
#define CLEARING_SOLVER_HPP_

#include <algorithm>
#include <deque>
#include <map>
#include <numeric>
#include <optional>
#include <queue>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "clearing/graph_build.hpp"

namespace clearing {

struct FlowSolution {
  std::vector<std::int64_t> arc_flows;
  Amount cleared_debt;
  std::map<std::string, Amount> liquidity_used;
  std::int64_t objective = 0;  // negated cost, i.e. debt discharged

  friend bool operator==(const FlowSolution&, const FlowSolution&) = default;
};

// Residual view of a FlowNetwork. Arc i owns residual edges 2i (forward) and
// 2i+1 (reverse). Liquidity arcs are switched on one currency at a time.
class ResidualNetwork {
 public:
  explicit ResidualNetwork(const FlowNetwork& network, std::uint64_t seed = 0)
      : network_(&network),
        nodes_(network.node_count()),
        adjacency_(static_cast<std::size_t>(nodes_)) {
    const std::size_t m = network.arcs.size();
    head_.resize(2 * m);
    residual_.resize(2 * m);
    cost_.resize(2 * m);
    enabled_.assign(m, 0);
    for (std::size_t i = 0; i < m; ++i) {
      const Arc& a = network.arcs[i];
      head_[2 * i] = a.to;
      head_[2 * i + 1] = a.from;
      residual_[2 * i] = a.capacity;
      residual_[2 * i + 1] = 0;
      cost_[2 * i] = a.cost;
      cost_[2 * i + 1] = -a.cost;
      enabled_[i] = a.currency.empty() ? 1 : 0;
    }
    // Adjacency order fixes tie-breaking among equally optimal solutions.
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (seed != 0) {
      std::mt19937_64 rng(seed);
      std::shuffle(order.begin(), order.end(), rng);
    }
    for (std::size_t i : order) {
      adjacency_[static_cast<std::size_t>(network.arcs[i].from)].push_back(static_cast<int>(2 * i));
      adjacency_[static_cast<std::size_t>(network.arcs[i].to)].push_back(static_cast<int>(2 * i + 1));
    }
  }

  std::int64_t flow(std::size_t arc) const { return residual_[2 * arc + 1]; }

  void set_flow(std::size_t arc, std::int64_t flow) {
    const std::int64_t cap = network_->arcs[arc].capacity;
    if (flow < 0 || flow > cap) throw Error(ErrorCode::kInvalidArgument, "flow outside capacity");
    residual_[2 * arc] = cap - flow;
    residual_[2 * arc + 1] = flow;
  }

  void enable_currency(const std::string& currency, bool on) {
    for (std::size_t i = 0; i < network_->arcs.size(); ++i) {
      if (network_->arcs[i].currency == currency) enabled_[i] = on ? 1 : 0;
    }
  }

  // Cancels negative-cost residual cycles until none remain. Returns the
  // number of cycles canceled.
  std::size_t cancel_negative_cycles() {
    std::size_t canceled = 0;
    for (;;) {
      const std::vector<int> cycle = find_negative_cycle();
      if (cycle.empty()) return canceled;
      std::int64_t push = kUnbounded;
      for (int e : cycle) push = std::min(push, residual_[static_cast<std::size_t>(e)]);
      for (int e : cycle) augment(e, push);
      ++canceled;
    }
  }

  // Successive shortest S->T paths while the path cost is negative. Returns
  // the total S-outflow added. `budget` bounds that outflow.
  std::int64_t augment_shortest_paths(std::int64_t budget) {
    std::int64_t pushed = 0;
    if (budget <= 0) return pushed;
    std::vector<std::int64_t> potential = bellman_ford_from(FlowNetwork::kSource);
    const auto n = static_cast<std::size_t>(nodes_);
    std::vector<std::int64_t> dist(n);
    std::vector<int> parent(n);
    while (pushed < budget) {
      std::fill(dist.begin(), dist.end(), kInfinity);
      std::fill(parent.begin(), parent.end(), -1);
      using Entry = std::pair<std::int64_t, int>;
      std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
      dist[FlowNetwork::kSource] = 0;
      heap.push({0, FlowNetwork::kSource});
      while (!heap.empty()) {
        const auto [d, u] = heap.top();
        heap.pop();
        if (d != dist[static_cast<std::size_t>(u)]) continue;
        for (int e : adjacency_[static_cast<std::size_t>(u)]) {
          if (!usable(e)) continue;
          const int v = head_[static_cast<std::size_t>(e)];
          if (potential[static_cast<std::size_t>(v)] >= kInfinity) continue;
          const std::int64_t reduced = cost_[static_cast<std::size_t>(e)] +
                                       potential[static_cast<std::size_t>(u)] -
                                       potential[static_cast<std::size_t>(v)];
          const std::int64_t nd = d + reduced;
          if (nd < dist[static_cast<std::size_t>(v)]) {
            dist[static_cast<std::size_t>(v)] = nd;
            parent[static_cast<std::size_t>(v)] = e;
            heap.push({nd, v});
          }
        }
      }
      if (dist[FlowNetwork::kSink] >= kInfinity) break;
      const std::int64_t path_cost = dist[FlowNetwork::kSink] +
                                     potential[FlowNetwork::kSink] -
                                     potential[FlowNetwork::kSource];
      if (path_cost >= 0) break;
      std::int64_t push = budget - pushed;
      for (int v = FlowNetwork::kSink; v != FlowNetwork::kSource;) {
        const int e = parent[static_cast<std::size_t>(v)];
        push = std::min(push, residual_[static_cast<std::size_t>(e)]);
        v = tail(e);
      }
      for (int v = FlowNetwork::kSink; v != FlowNetwork::kSource;) {
        const int e = parent[static_cast<std::size_t>(v)];
        augment(e, push);
        v = tail(e);
      }
      pushed += push;
      for (std::size_t v = 0; v < n; ++v) {
        if (dist[v] < kInfinity) potential[v] += dist[v];
      }
    }
    return pushed;
  }

  FlowSolution solution() const {
    FlowSolution out;
    const auto& arcs = network_->arcs;
    out.arc_flows.resize(arcs.size());
    for (std::size_t i = 0; i < arcs.size(); ++i) {
      const std::int64_t f = flow(i);
      out.arc_flows[i] = f;
      if (arcs[i].kind == ArcKind::kObligation) out.cleared_debt += Amount(f);
      if (arcs[i].kind == ArcKind::kTender && f > 0) {
        out.liquidity_used[arcs[i].currency] += Amount(f);
      }
      out.objective -= arcs[i].cost * f;
    }
    return out;
  }

 private:
  static constexpr std::int64_t kInfinity = std::numeric_limits<std::int64_t>::max() / 2;

  bool usable(int e) const {
    return enabled_[static_cast<std::size_t>(e) / 2] != 0 &&
           residual_[static_cast<std::size_t>(e)] > 0;
  }
  int tail(int e) const { return head_[static_cast<std::size_t>(e ^ 1)]; }

  void augment(int e, std::int64_t amount) {
    residual_[static_cast<std::size_t>(e)] -= amount;
    residual_[static_cast<std::size_t>(e ^ 1)] += amount;
  }

  // Shortest distances from `root` over usable residual edges; unreachable
  // nodes get kInfinity. Requires no negative cycle reachable from root.
  std::vector<std::int64_t> bellman_ford_from(int root) const {
    const auto n = static_cast<std::size_t>(nodes_);
    std::vector<std::int64_t> dist(n, kInfinity);
    std::vector<char> queued(n, 0);
    std::deque<int> queue;
    dist[static_cast<std::size_t>(root)] = 0;
    queue.push_back(root);
    queued[static_cast<std::size_t>(root)] = 1;
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      queued[static_cast<std::size_t>(u)] = 0;
      for (int e : adjacency_[static_cast<std::size_t>(u)]) {
        if (!usable(e)) continue;
        const int v = head_[static_cast<std::size_t>(e)];
        const std::int64_t nd = dist[static_cast<std::size_t>(u)] + cost_[static_cast<std::size_t>(e)];
        if (nd < dist[static_cast<std::size_t>(v)]) {
          dist[static_cast<std::size_t>(v)] = nd;
          if (!queued[static_cast<std::size_t>(v)]) {
            queued[static_cast<std::size_t>(v)] = 1;
            queue.push_back(v);
          }
        }
      }
    }
    return dist;
  }

  // Queue-based Bellman-Ford from a virtual root at distance 0 to every node.
  // The parent-edge graph is checked for a cycle every `nodes_` relaxations;
  // any such cycle is negative. Empty result means none exists.
  std::vector<int> find_negative_cycle() const {
    const auto n = static_cast<std::size_t>(nodes_);
    std::vector<std::int64_t> dist(n, 0);
    std::vector<int> parent(n, -1);
    std::vector<char> queued(n, 1);
    std::deque<int> queue;
    for (int v = 0; v < nodes_; ++v) queue.push_back(v);
    std::size_t relaxations = 0;
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      queued[static_cast<std::size_t>(u)] = 0;
      for (int e : adjacency_[static_cast<std::size_t>(u)]) {
        if (!usable(e)) continue;
        const int v = head_[static_cast<std::size_t>(e)];
        const std::int64_t nd = dist[static_cast<std::size_t>(u)] + cost_[static_cast<std::size_t>(e)];
        if (nd < dist[static_cast<std::size_t>(v)]) {
          dist[static_cast<std::size_t>(v)] = nd;
          parent[static_cast<std::size_t>(v)] = e;
          if (++relaxations % n == 0) {
            std::vector<int> cycle = cycle_in_parents(parent);
            if (!cycle.empty()) return cycle;
          }
          if (!queued[static_cast<std::size_t>(v)]) {
            queued[static_cast<std::size_t>(v)] = 1;
            queue.push_back(v);
          }
        }
      }
    }
    return {};
  }

  std::vector<int> cycle_in_parents(const std::vector<int>& parent) const {
    const auto n = static_cast<std::size_t>(nodes_);
    // 0 unvisited, 1 on current walk, 2 done.
    std::vector<char> state(n, 0);
    for (std::size_t start = 0; start < n; ++start) {
      if (state[start] != 0) continue;
      std::size_t v = start;
      while (state[v] == 0) {
        state[v] = 1;
        const int e = parent[v];
        if (e < 0) break;
        v = static_cast<std::size_t>(tail(e));
      }
      if (state[v] == 1 && parent[v] >= 0) {
        // v is on a cycle reached during this walk; collect it in path order.
        std::vector<int> cycle;
        std::size_t u = v;
        do {
          const int e = parent[u];
          cycle.push_back(e);
          u = static_cast<std::size_t>(tail(e));
        } while (u != v);
        std::reverse(cycle.begin(), cycle.end());
        return cycle;
      }
      for (std::size_t u = start; state[u] == 1;) {
        state[u] = 2;
        const int e = parent[u];
        if (e < 0) break;
        u = static_cast<std::size_t>(tail(e));
      }
    }
    return {};
  }

  const FlowNetwork* network_;
  int nodes_;
  std::vector<int> head_;
  std::vector<std::int64_t> residual_;
  std::vector<std::int64_t> cost_;
  std::vector<char> enabled_;
  std::vector<std::vector<int>> adjacency_;
};

// Difference of two solutions on the same network.
inline FlowSolution solution_increment(const FlowNetwork& n, const FlowSolution& total,
                                       const FlowSolution& base) {
  FlowSolution out;
  out.arc_flows.resize(n.arcs.size());
  for (std::size_t i = 0; i < n.arcs.size(); ++i) {
    out.arc_flows[i] = total.arc_flows[i] - base.arc_flows[i];
  }
  out.cleared_debt = total.cleared_debt - base.cleared_debt;
  for (const auto& [currency, used] : total.liquidity_used) {
    const auto it = base.liquidity_used.find(currency);
    const Amount prior = it == base.liquidity_used.end() ? Amount{} : it->second;
    if (used > prior) out.liquidity_used[currency] = used - prior;
  }
  out.objective = total.objective - base.objective;
  return out;
}

// Two-phase MTCS solver over one network. Copyable, so a cycle-canceled state
// can be funded at several budgets.
class MtcsSolver {
 public:
  explicit MtcsSolver(const FlowNetwork& network, std::uint64_t seed = 0)
      : network_(&network), residual_(network, seed) {}

  // Pure set-off: no liquidity arc carries flow.
  const FlowSolution& cancel_cycles() {
    residual_.cancel_negative_cycles();
    after_cycles_ = residual_.solution();
    return *after_cycles_;
  }

  // Funds chains currency by currency (ascending asset code) over the shared
  // obligation residual; returns the increment over the set-off state.
  FlowSolution fund_chains(std::optional<Amount> budget) {
    if (!after_cycles_) cancel_cycles();
    std::int64_t remaining = budget ? budget->value() : kUnbounded;
    for (const std::string& currency : network_->currencies()) {
      if (remaining <= 0) break;
      residual_.enable_currency(currency, true);
      remaining -= residual_.augment_shortest_paths(remaining);
      residual_.enable_currency(currency, false);
    }
    return solution_increment(*network_, residual_.solution(), *after_cycles_);
  }

  FlowSolution solution() const { return residual_.solution(); }

 private:
  const FlowNetwork* network_;
  ResidualNetwork residual_;
  std::optional<FlowSolution> after_cycles_;
};

inline FlowSolution cancel_cycles(const FlowNetwork& network, std::uint64_t seed = 0) {
  MtcsSolver solver(network, seed);
  return solver.cancel_cycles();
}

// Starts from `after_cycles` (a cycle-canceled solution of the same network)
// and returns the liquidity-funded increment.
inline FlowSolution fund_chains(const FlowNetwork& network, const FlowSolution& after_cycles,
                                std::optional<Amount> budget, std::uint64_t seed = 0) {
  ResidualNetwork residual(network, seed);
  for (std::size_t i = 0; i < network.arcs.size(); ++i) {
    residual.set_flow(i, after_cycles.arc_flows.at(i));
  }
  std::int64_t remaining = budget ? budget->value() : kUnbounded;
  for (const std::string& currency : network.currencies()) {
    if (remaining <= 0) break;
    residual.enable_currency(currency, true);
    remaining -= residual.augment_shortest_paths(remaining);
    residual.enable_currency(currency, false);
  }
  return solution_increment(network, residual.solution(), after_cycles);
}

namespace solver_detail {

struct Inflow {
  AgentId payer;
  std::int64_t unit = 0;
  Price price;
  std::size_t tender = 0;
};

struct Outflow {
  AgentId payee;
  std::int64_t unit = 0;
  std::size_t acceptance = 0;
};

}  // namespace solver_detail

// Turns arc flows into paired settlement records and direct transfers.
inline SettlementFlow to_settlement_flow(const ObligationGraph& g, const FlowNetwork& n,
                                         const FlowSolution& s) {
  SettlementFlow flow;
  flow.epoch_id = g.pool.epoch_id;
  std::unordered_map<std::string, const PooledObligation*> by_id;
  for (const auto& p : g.pool.obligations) by_id.emplace(p.obligation.id, &p);

  auto pair_records = [&](const std::string& ref, const AgentId& from, const AgentId& to,
                          Amount amount, std::optional<CurrencyAmount> ca) {
    flow.records.push_back({ref, from, amount, ca});
    flow.records.push_back({ref, to, amount, ca});
  };

  std::map<std::string, std::vector<solver_detail::Inflow>> inflows;
  std::map<std::string, std::vector<solver_detail::Outflow>> outflows;
  std::vector<std::int64_t> tender_currency(g.tender_edges.size(), 0);
  std::vector<std::int64_t> accept_currency(g.acceptance_edges.size(), 0);

  for (std::size_t i = 0; i < n.arcs.size(); ++i) {
    const Arc& arc = n.arcs[i];
    const std::int64_t f = s.arc_flows[i];
    if (f <= 0) continue;
    switch (arc.kind) {
      case ArcKind::kObligation: {
        const ObligationEdge& e = g.edges[arc.edge];
        std::int64_t left = f;
        for (const std::string& id : e.obligation_ids) {
          if (left == 0) break;
          const std::int64_t take = std::min(left, by_id.at(id)->outstanding.value());
          if (take > 0) pair_records(id, e.debtor, e.creditor, Amount(take), std::nullopt);
          left -= take;
        }
        break;
      }
      case ArcKind::kRepayment: {
        const RepaymentEdge& r = g.repayment_edges[arc.edge];
        pair_records(r.acceptance_id, r.facility, r.borrower, Amount(f), std::nullopt);
        break;
      }
      case ArcKind::kTender: {
        const TenderEdge& t = g.tender_edges[arc.edge];
        const Price price = t.price.value_or(Price(1, 1));
        inflows[t.currency].push_back({t.sender, f, price, arc.edge});
        break;
      }
      case ArcKind::kAcceptance: {
        const AcceptanceEdge& a = g.acceptance_edges[arc.edge];
        outflows[a.currency].push_back({a.origin, f, arc.edge});
        break;
      }
    }
  }

  // Pair tender inflows with acceptance outflows per currency: self matches
  // first, then greedily in edge order.
  std::map<std::tuple<AgentId, AgentId, std::string>, Amount> transfers;
  for (auto& [currency, ins] : inflows) {
    auto& outs = outflows[currency];
    auto take = [&](solver_detail::Inflow& in, solver_detail::Outflow& out) {
      const std::int64_t u = std::min(in.unit, out.unit);
      in.unit -= u;
      out.unit -= u;
      if (u == 0 || in.payer == out.payee) return;
      const Amount q = in.price.to_currency_floor(Amount(u));
      if (q.is_zero()) return;
      tender_currency[in.tender] += q.value();
      accept_currency[out.acceptance] += q.value();
      transfers[{in.payer, out.payee, currency}] += q;
    };
    for (auto& in : ins) {
      for (auto& out : outs) {
        if (in.payer == out.payee) take(in, out);
      }
    }
    std::size_t j = 0;
    for (auto& in : ins) {
      while (in.unit > 0 && j < outs.size()) {
        take(in, outs[j]);
        if (outs[j].unit == 0) ++j;
      }
    }
  }

  for (std::size_t i = 0; i < n.arcs.size(); ++i) {
    const Arc& arc = n.arcs[i];
    const std::int64_t f = s.arc_flows[i];
    if (f <= 0) continue;
    if (arc.kind == ArcKind::kTender) {
      const TenderEdge& t = g.tender_edges[arc.edge];
      std::optional<CurrencyAmount> ca;
      if (tender_currency[arc.edge] > 0) ca = CurrencyAmount{t.currency, Amount(tender_currency[arc.edge])};
      pair_records(t.tender_id, t.source, t.sender, Amount(f), ca);
    } else if (arc.kind == ArcKind::kAcceptance) {
      const AcceptanceEdge& a = g.acceptance_edges[arc.edge];
      std::optional<CurrencyAmount> ca;
      if (accept_currency[arc.edge] > 0) ca = CurrencyAmount{a.currency, Amount(accept_currency[arc.edge])};
      pair_records(a.ref, a.origin, a.target, Amount(f), ca);
    }
  }

  for (const auto& [key, amount] : transfers) {
    flow.transfers.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), amount});
  }
  return flow;
}

struct SolveResult {
  FlowNetwork network;
  FlowSolution after_cycles;
  FlowSolution solution;
  SettlementFlow flow;
};

inline SolveResult solve_detailed(const ObligationGraph& g, std::optional<Amount> budget,
                                  std::uint64_t seed = 0) {
  SolveResult out;
  out.network = build_network(g, budget);
  MtcsSolver solver(out.network, seed);
  out.after_cycles = solver.cancel_cycles();
  solver.fund_chains(budget);
  out.solution = solver.solution();
  out.flow = to_settlement_flow(g, out.network, out.solution);
  return out;
}

// Discharges the most debt with the least liquidity, bounded by `budget`.
inline SettlementFlow solve(const ObligationGraph& g, std::optional<Amount> budget = std::nullopt,
                            std::uint64_t seed = 0) {
  return solve_detailed(g, budget, seed).flow;
}

}  // namespace clearing

#endif  // CLEARING_SOLVER_HPP_
