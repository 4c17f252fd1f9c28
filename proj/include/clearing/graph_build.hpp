#ifndef CLEARING_GRAPH_BUILD_HPP_
#define CLEARING_GRAPH_BUILD_HPP_

#include <algorithm>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "clearing/ascertain.hpp"
#include "clearing/model.hpp"

namespace clearing {

// All obligations of one ordered (debtor, creditor) pair, summed. Ids are in
// discharge-attribution order: earliest due date first, undated last, then id.
struct ObligationEdge {
  AgentId debtor;
  AgentId creditor;
  Amount amount;
  std::vector<std::string> obligation_ids;
};

// Assignment tender: `sender` spends up to `available` of `currency` held at
// `source`.
struct TenderEdge {
  std::string tender_id;
  AgentId source;
  AgentId sender;
  Amount available;
  std::string currency;
  std::optional<Price> price;
};

struct BackingTender {
  std::string tender_id;
  Amount max_amount;
  std::optional<Price> price;
};

// Credit line from `facility` to `borrower`, drawable through the overdraft
// tenders that back it.
struct RepaymentEdge {
  std::string acceptance_id;
  AgentId facility;
  AgentId borrower;
  Amount limit;
  std::string currency;
  std::optional<Date> repayment_due;
  std::vector<BackingTender> backing;
};

// Deposit acceptance from `origin` to the liquidity source `target`.
struct AcceptanceEdge {
  std::string ref;
  AgentId origin;
  AgentId target;
  std::optional<Amount> limit;
  std::string currency;
  bool implicit = false;
};

struct Exclusion {
  std::string id;
  std::string reason;
};

struct ObligationGraph {
  EpochConfig config;
  IntentPool pool;
  std::vector<AgentId> nodes;
  std::vector<ObligationEdge> edges;
  std::vector<TenderEdge> tender_edges;
  std::vector<RepaymentEdge> repayment_edges;
  std::vector<AcceptanceEdge> acceptance_edges;
  std::map<std::string, AgentId> asset_sources;
  std::vector<Exclusion> excluded;

  Amount total_debt() const {
    Amount total;
    for (const auto& e : edges) total += e.amount;
    return total;
  }
};

struct AggregateOptions {
  // When set, assignment tenders are capped at the sender's balance.
  const Ledger* ledger = nullptr;
  // Epoch-level eligibility filter; by default every obligation is eligible.
  std::function<bool(const PooledObligation&)> eligible;
  const SignatureScheme* scheme = nullptr;
};

namespace graph_detail {

inline bool attribution_before(const PooledObligation& a, const PooledObligation& b) {
  const auto& da = a.obligation.due_date;
  const auto& db = b.obligation.due_date;
  if (da.has_value() != db.has_value()) return da.has_value();
  if (da && *da != *db) return *da < *db;
  return a.obligation.id < b.obligation.id;
}

inline void register_source(std::map<std::string, AgentId>& sources,
                            const std::string& currency, const AgentId& source,
                            const std::string& id) {
  const auto [it, inserted] = sources.emplace(currency, source);
  if (!inserted && it->second != source) {
    throw Error(ErrorCode::kBuild, "asset " + currency + " has two sources (" +
                                       it->second.str() + ", " + source.str() +
                                       ") at " + id);
  }
}

}  // namespace graph_detail

// Sorts the epoch order of contributing obligations; exposed so settlement and
// the validator attribute partial discharges identically.
inline void sort_for_attribution(std::vector<const PooledObligation*>& obligations) {
  std::sort(obligations.begin(), obligations.end(),
            [](const PooledObligation* a, const PooledObligation* b) {
              return graph_detail::attribution_before(*a, *b);
            });
}

inline ObligationGraph aggregate(const IntentPool& pool, const KeyRing& keys,
                                 const EpochConfig& config = {},
                                 const AggregateOptions& options = {}) {
  const SignatureScheme& scheme =
      options.scheme != nullptr ? *options.scheme : default_scheme();
  ObligationGraph g;
  g.config = config;
  g.pool = pool;

  std::unordered_set<std::string> ids;
  auto claim = [&](const std::string& id) {
    if (!ids.insert(id).second) {
      throw Error(ErrorCode::kDuplicate, "duplicate intent id: " + id);
    }
  };
  for (const auto& p : pool.obligations) claim(p.obligation.id);
  for (const auto& a : pool.acceptances) claim(a.id);
  for (const auto& t : pool.tenders) claim(t.id);

  std::set<AgentId> nodes;
  auto exclude = [&](const std::string& id, std::string reason) {
    g.excluded.push_back({id, std::move(reason)});
  };
  auto usable = [&](const auto& intent) {
    if (auto err = well_formedness_error(intent)) {
      exclude(intent.id, *err);
      return false;
    }
    if (!verify_ascertainment(intent, keys, scheme)) {
      exclude(intent.id, "ascertainment failed");
      return false;
    }
    return true;
  };

  // Obligations, aggregated per ordered pair.
  std::map<std::pair<AgentId, AgentId>, std::vector<const PooledObligation*>> pairs;
  for (const auto& p : pool.obligations) {
    const Obligation& o = p.obligation;
    if (!p.carried && !usable(o)) continue;
    if (o.unit != config.unit) {
      exclude(o.id, "unit " + o.unit + " differs from epoch unit " + config.unit);
      continue;
    }
    if (p.outstanding > o.amount) {
      exclude(o.id, "outstanding exceeds original amount");
      continue;
    }
    if (p.outstanding.is_zero()) continue;
    if (options.eligible && !options.eligible(p)) {
      exclude(o.id, "not eligible this epoch");
      continue;
    }
    pairs[{o.debtor, o.creditor}].push_back(&p);
    nodes.insert(o.debtor);
    nodes.insert(o.creditor);
  }
  for (auto& [key, members] : pairs) {
    sort_for_attribution(members);
    ObligationEdge edge{key.first, key.second, Amount{}, {}};
    for (const PooledObligation* p : members) {
      edge.amount += p->outstanding;
      edge.obligation_ids.push_back(p->obligation.id);
    }
    g.edges.push_back(std::move(edge));
  }

  graph_detail::register_source(g.asset_sources, config.default_currency,
                                config.default_source, "epoch default");

  std::vector<const Acceptance*> deposits;
  std::vector<const Acceptance*> repayments;
  for (const auto& a : pool.acceptances) {
    if (!usable(a)) continue;
    if (a.kind == AcceptanceKind::kDeposit) {
      graph_detail::register_source(g.asset_sources, a.currency, a.target, a.id);
      deposits.push_back(&a);
    } else {
      repayments.push_back(&a);
    }
  }
  auto by_id = [](const auto* x, const auto* y) { return x->id < y->id; };
  std::sort(deposits.begin(), deposits.end(), by_id);
  std::sort(repayments.begin(), repayments.end(), by_id);

  std::vector<const Tender*> tenders;
  for (const auto& t : pool.tenders) {
    if (usable(t)) tenders.push_back(&t);
  }
  std::sort(tenders.begin(), tenders.end(), by_id);

  std::map<std::string, RepaymentEdge> lines;
  for (const Tender* t : tenders) {
    if (t->price && t->currency == config.unit && t->price != Price(1, 1)) {
      exclude(t->id, "unit-of-account tender with price other than 1");
      continue;
    }
    if (t->kind == TenderKind::kAssignment) {
      graph_detail::register_source(g.asset_sources, t->currency, t->source, t->id);
      Amount available = t->max_amount;
      if (options.ledger != nullptr) {
        available = min(available, options.ledger->balance(t->sender, t->currency));
      }
      if (available.is_zero()) {
        exclude(t->id, "no balance available");
        continue;
      }
      g.tender_edges.push_back(
          {t->id, t->source, t->sender, available, t->currency, t->price});
      nodes.insert(t->sender);
      nodes.insert(t->source);
      continue;
    }
    const auto match = std::find_if(repayments.begin(), repayments.end(), [&](const Acceptance* a) {
      return a->origin == t->source && a->target == t->sender &&
             a->currency == t->currency;
    });
    if (match == repayments.end()) {
      exclude(t->id, "no matching repayment acceptance");
      continue;
    }
    const Acceptance& a = **match;
    auto [it, fresh] = lines.try_emplace(a.id);
    if (fresh) {
      it->second = RepaymentEdge{a.id, a.origin, a.target, *a.limit, a.currency,
                                 a.repayment_due, {}};
    }
    it->second.backing.push_back({t->id, t->max_amount, t->price});
    nodes.insert(a.origin);
    nodes.insert(a.target);
  }
  for (auto& [id, line] : lines) g.repayment_edges.push_back(std::move(line));

  std::set<AgentId> explicit_default;
  for (const Acceptance* a : deposits) {
    g.acceptance_edges.push_back({a->id, a->origin, a->target, a->limit, a->currency, false});
    if (a->currency == config.default_currency) explicit_default.insert(a->origin);
    nodes.insert(a->origin);
    nodes.insert(a->target);
  }
  std::set<AgentId> firms;
  for (const auto& e : g.edges) {
    firms.insert(e.debtor);
    firms.insert(e.creditor);
  }
  for (const AgentId& firm : firms) {
    if (firm == config.default_source || explicit_default.contains(firm)) continue;
    g.acceptance_edges.push_back({implicit_acceptance_ref(firm, config.default_currency),
                                  firm, config.default_source, std::nullopt,
                                  config.default_currency, true});
  }
  std::sort(g.acceptance_edges.begin(), g.acceptance_edges.end(),
            [](const AcceptanceEdge& x, const AcceptanceEdge& y) { return x.ref < y.ref; });

  g.nodes.assign(nodes.begin(), nodes.end());
  return g;
}

struct NetPosition {
  AgentId agent;
  Amount payables;
  Amount receivables;
  std::int64_t net = 0;  // receivables - payables

  friend bool operator==(const NetPosition&, const NetPosition&) = default;
};

// Net positions over obligation edges only, sorted by agent.
inline std::vector<NetPosition> net_positions(const ObligationGraph& g) {
  std::map<AgentId, NetPosition> by_agent;
  for (const auto& e : g.edges) {
    auto& debtor = by_agent[e.debtor];
    debtor.agent = e.debtor;
    debtor.payables += e.amount;
    auto& creditor = by_agent[e.creditor];
    creditor.agent = e.creditor;
    creditor.receivables += e.amount;
  }
  std::vector<NetPosition> out;
  out.reserve(by_agent.size());
  for (auto& [agent, pos] : by_agent) {
    pos.net = checked_add(pos.receivables.value(), -pos.payables.value());
    out.push_back(pos);
  }
  return out;
}

// Net Internal Debt: the sum of net debit positions, i.e. the least liquidity
// that can discharge every obligation.
inline Amount compute_nid(const ObligationGraph& g) {
  Amount nid;
  for (const auto& p : net_positions(g)) {
    if (p.net < 0) nid += Amount(-p.net);
  }
  return nid;
}

// One line per edge; used for fixtures and debugging.
//   O <debtor> <creditor> <amount> <id,id,...>
//   T <tender> <source> <sender> <available> <currency> <price|->
//   R <acceptance> <facility> <borrower> <limit> <currency> <tender,tender,...>
//   A <ref> <origin> <target> <limit|inf> <currency>
inline std::string dump(const ObligationGraph& g) {
  std::ostringstream out;
  auto join = [](const auto& items, auto project) {
    std::string s;
    for (const auto& item : items) {
      if (!s.empty()) s += ',';
      s += project(item);
    }
    return s;
  };
  for (const auto& e : g.edges) {
    out << "O " << e.debtor.str() << ' ' << e.creditor.str() << ' '
        << e.amount.value() << ' '
        << join(e.obligation_ids, [](const std::string& id) { return id; }) << '\n';
  }
  for (const auto& t : g.tender_edges) {
    out << "T " << t.tender_id << ' ' << t.source.str() << ' ' << t.sender.str()
        << ' ' << t.available.value() << ' ' << t.currency << ' '
        << (t.price ? t.price->str() : "-") << '\n';
  }
  for (const auto& r : g.repayment_edges) {
    out << "R " << r.acceptance_id << ' ' << r.facility.str() << ' '
        << r.borrower.str() << ' ' << r.limit.value() << ' ' << r.currency << ' '
        << join(r.backing, [](const BackingTender& b) { return b.tender_id; }) << '\n';
  }
  for (const auto& a : g.acceptance_edges) {
    out << "A " << a.ref << ' ' << a.origin.str() << ' ' << a.target.str() << ' '
        << (a.limit ? std::to_string(a.limit->value()) : "inf") << ' '
        << a.currency << '\n';
  }
  return out.str();
}

inline constexpr std::int64_t kUnbounded = std::numeric_limits<std::int64_t>::max() / 4;

enum class ArcKind { kObligation, kTender, kRepayment, kAcceptance };

struct Arc {
  int from = 0;
  int to = 0;
  std::int64_t capacity = 0;
  std::int64_t cost = 0;
  ArcKind kind = ArcKind::kObligation;
  std::size_t edge = 0;   // index into the matching ObligationGraph vector
  std::string currency;   // empty for obligation and repayment arcs
};

// Node 0 is the super-source, node 1 the super-sink, agents follow in
// ObligationGraph::nodes order.
struct FlowNetwork {
  static constexpr int kSource = 0;
  static constexpr int kSink = 1;

  std::vector<AgentId> agents;
  std::vector<Arc> arcs;
  std::optional<Amount> budget;

  int node_count() const { return static_cast<int>(agents.size()) + 2; }

  int node_of(const AgentId& agent) const {
    const auto it = std::lower_bound(agents.begin(), agents.end(), agent);
    if (it == agents.end() || *it != agent) {
      throw Error(ErrorCode::kBuild, "unknown agent " + agent.str());
    }
    return static_cast<int>(it - agents.begin()) + 2;
  }

  // Currencies with liquidity arcs, ascending.
  std::vector<std::string> currencies() const {
    std::set<std::string> out;
    for (const auto& a : arcs) {
      if (!a.currency.empty()) out.insert(a.currency);
    }
    return {out.begin(), out.end()};
  }
};

namespace graph_detail {

inline Price price_for(const std::string& id, const std::string& currency,
                       const std::optional<Price>& price, const std::string& unit) {
  if (price) return *price;
  if (currency == unit) return Price(1, 1);
  throw Error(ErrorCode::kBuild, "tender " + id + " in " + currency +
                                     " needs a price in " + unit);
}

}  // namespace graph_detail

// Super-source/super-sink network: obligation arcs cost -1 per unit, liquidity
// arcs cost 0, so negative cycles are exactly set-off cycles.
inline FlowNetwork build_network(const ObligationGraph& g,
                                 std::optional<Amount> budget = std::nullopt) {
  FlowNetwork n;
  n.agents = g.nodes;
  n.budget = budget;
  const std::string& unit = g.config.unit;
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    const auto& e = g.edges[i];
    n.arcs.push_back({n.node_of(e.debtor), n.node_of(e.creditor), e.amount.value(),
                      -1, ArcKind::kObligation, i, ""});
  }
  for (std::size_t i = 0; i < g.tender_edges.size(); ++i) {
    const auto& t = g.tender_edges[i];
    const Price price = graph_detail::price_for(t.tender_id, t.currency, t.price, unit);
    n.arcs.push_back({FlowNetwork::kSource, n.node_of(t.sender),
                      price.to_unit_floor(t.available).value(), 0, ArcKind::kTender,
                      i, t.currency});
  }
  for (std::size_t i = 0; i < g.repayment_edges.size(); ++i) {
    const auto& r = g.repayment_edges[i];
    Amount drawable;
    for (const auto& b : r.backing) {
      drawable += graph_detail::price_for(b.tender_id, r.currency, b.price, unit)
                      .to_unit_floor(b.max_amount);
    }
    n.arcs.push_back({n.node_of(r.facility), n.node_of(r.borrower),
                      min(drawable, r.limit).value(), 0, ArcKind::kRepayment, i, ""});
  }
  for (std::size_t i = 0; i < g.acceptance_edges.size(); ++i) {
    const auto& a = g.acceptance_edges[i];
    n.arcs.push_back({n.node_of(a.origin), FlowNetwork::kSink,
                      a.limit ? a.limit->value() : kUnbounded, 0, ArcKind::kAcceptance,
                      i, a.currency});
  }
  return n;
}

}  // namespace clearing

#endif  // CLEARING_GRAPH_BUILD_HPP_
