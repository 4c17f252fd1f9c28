#pragma once

#include <random>
#include <string>

#include "clearing/experiments.hpp"
#include "clearing/settlement.hpp"
#include "clearing/solver.hpp"

namespace clearing::testing {

inline SigningKey key_for(const std::string& agent) { return derive_key("test/" + agent); }

// Builds a signed intent pool plus the matching key ring.
class Scenario {
 public:
  explicit Scenario(EpochConfig config = {}) : config_(std::move(config)) {}

  Scenario& owe(const std::string& debtor, const std::string& creditor, std::int64_t amount,
                std::string id = {}, std::optional<Date> due = std::nullopt) {
    if (id.empty()) id = "o" + std::to_string(serial_++);
    Obligation o{id, AgentId(debtor), AgentId(creditor), Amount(amount), config_.unit, due, ""};
    pool_.obligations.push_back(pooled(signed_copy(o, signer(debtor))));
    return *this;
  }

  Scenario& tender(const std::string& sender, std::int64_t max, std::string source = "L",
                   std::string currency = {}, std::optional<Price> price = std::nullopt,
                   std::string id = {}) {
    if (currency.empty()) currency = config_.default_currency;
    if (id.empty()) id = "t/" + sender + "/" + currency;
    Tender t{id, AgentId(sender), AgentId(source), TenderKind::kAssignment, Amount(max),
             currency, price, ""};
    pool_.tenders.push_back(signed_copy(t, signer(sender)));
    ledger_.credit(AgentId(sender), currency, Amount(max));
    return *this;
  }

  Scenario& overdraft(const std::string& sender, const std::string& facility, std::int64_t max,
                      std::string currency = {}, std::string id = {}) {
    if (currency.empty()) currency = config_.default_currency;
    if (id.empty()) id = "od/" + sender + "/" + facility;
    Tender t{id, AgentId(sender), AgentId(facility), TenderKind::kOverdraft, Amount(max),
             currency, std::nullopt, ""};
    pool_.tenders.push_back(signed_copy(t, signer(sender)));
    return *this;
  }

  // Deposit acceptance; limit < 0 means unbounded.
  Scenario& accept(const std::string& origin, std::int64_t limit = -1, std::string source = "L",
                   std::string currency = {}, std::string id = {}) {
    if (currency.empty()) currency = config_.default_currency;
    if (id.empty()) id = "a/" + origin + "/" + currency;
    Acceptance a{id, AgentId(origin), AgentId(source), AcceptanceKind::kDeposit,
                 limit < 0 ? std::nullopt : std::optional<Amount>(Amount(limit)), currency,
                 std::nullopt, ""};
    pool_.acceptances.push_back(signed_copy(a, signer(origin)));
    return *this;
  }

  Scenario& credit_line(const std::string& facility, const std::string& borrower, std::int64_t limit,
                        std::optional<Date> due = std::nullopt, std::string currency = {},
                        std::string id = {}) {
    if (currency.empty()) currency = config_.default_currency;
    if (id.empty()) id = "line/" + facility + "/" + borrower;
    Acceptance a{id, AgentId(facility), AgentId(borrower), AcceptanceKind::kRepayment,
                 Amount(limit), currency, due, ""};
    pool_.acceptances.push_back(signed_copy(a, signer(facility)));
    return *this;
  }

  Scenario& fund(const std::string& agent, std::int64_t amount, std::string currency = {}) {
    if (currency.empty()) currency = config_.default_currency;
    ledger_.credit(AgentId(agent), currency, Amount(amount));
    return *this;
  }

  const IntentPool& pool() const { return pool_; }
  IntentPool& pool() { return pool_; }
  const KeyRing& keys() const { return keys_; }
  const Ledger& ledger() const { return ledger_; }
  Ledger& ledger() { return ledger_; }
  const EpochConfig& config() const { return config_; }

  ObligationGraph graph() const {
    AggregateOptions options;
    options.ledger = &ledger_;
    return aggregate(pool_, keys_, config_, options);
  }

 private:
  SigningKey signer(const std::string& agent) {
    const SigningKey key = key_for(agent);
    keys_.add(AgentId(agent), key);
    return key;
  }

  EpochConfig config_;
  IntentPool pool_;
  KeyRing keys_;
  Ledger ledger_;
  int serial_ = 0;
};

inline Scenario triangle() {
  Scenario s;
  s.owe("A", "B", 20, "ab").owe("B", "C", 30, "bc").owe("C", "A", 45, "ca");
  return s;
}

// k obligations of 20 along a chain, 20 tendered at the head, unbounded
// acceptance at the tail.
inline Scenario chain(int k) {
  static const char* names[] = {"Alice", "Bob", "Bill", "Ben", "Carol", "Cora", "Cy"};
  Scenario s;
  for (int i = 0; i < k; ++i) s.owe(names[i], names[i + 1], 20, "c" + std::to_string(i));
  s.tender(names[0], 20).accept(names[k]);
  return s;
}

// Alice owes Bob owes Carol; Carol extends a repayment acceptance to Alice.
inline Scenario p2p_loan() {
  Scenario s;
  s.owe("Alice", "Bob", 20, "ab").owe("Bob", "Carol", 20, "bc");
  s.credit_line("Carol", "Alice", 20, Date{std::chrono::year{2025}, std::chrono::month{6},
                                           std::chrono::day{30}});
  s.overdraft("Alice", "Carol", 20);
  return s;
}

// Random simple graph on `n` agents; amounts in [1, max_amount].
inline Scenario random_scenario(std::mt19937_64& rng, int n, int edges, std::int64_t max_amount) {
  Scenario s;
  std::uniform_int_distribution<int> node(0, n - 1);
  std::uniform_int_distribution<std::int64_t> amount(1, max_amount);
  std::set<std::pair<int, int>> used;
  int tries = 0;
  while (static_cast<int>(used.size()) < edges && tries++ < edges * 20) {
    const int a = node(rng);
    const int b = node(rng);
    if (a == b || !used.insert({a, b}).second) continue;
    s.owe("N" + std::to_string(a), "N" + std::to_string(b), amount(rng));
  }
  return s;
}

// Adds tenders at net debtors for their full debit position.
inline void tender_at_net_debtors(Scenario& s) {
  const ObligationGraph g = s.graph();
  for (const NetPosition& p : net_positions(g)) {
    if (p.net < 0) s.tender(p.agent.str(), -p.net);
  }
}

inline Amount debtor_side_cleared(const ObligationGraph& g, const SettlementFlow& f) {
  std::map<std::string, AgentId> debtor;
  for (const auto& p : g.pool.obligations) debtor.emplace(p.obligation.id, p.obligation.debtor);
  Amount total;
  for (const auto& r : f.records) {
    const auto it = debtor.find(r.edge_ref);
    if (it != debtor.end() && it->second == r.party) total += r.amount;
  }
  return total;
}

}  // namespace clearing::testing
