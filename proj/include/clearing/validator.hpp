#ifndef CLEARING_VALIDATOR_HPP_
#define CLEARING_VALIDATOR_HPP_

// Validity predicate for a proposed settlement flow. Everything here is
// re-derived from the raw intents in the frozen pool and the ledger; nothing
// produced by graph_build beyond the pool and config is trusted.

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "clearing/graph_build.hpp"

namespace clearing {

inline constexpr std::string_view kCheckAscertainment = "Ascertainment";
inline constexpr std::string_view kCheckSubsetFlow = "SubsetFlow";
inline constexpr std::string_view kCheckBalancedFlow = "BalancedFlow";
inline constexpr std::string_view kCheckPairedRecords = "PairedRecords";
inline constexpr std::string_view kCheckNonNegativeBalance = "NonNegativeBalance";

struct Violation {
  std::string check;
  std::vector<std::string> ids;

  friend bool operator==(const Violation&, const Violation&) = default;
};

struct ValidationReport {
  bool valid = true;
  std::vector<Violation> violations;

  bool has(std::string_view check) const {
    return std::any_of(violations.begin(), violations.end(),
                       [&](const Violation& v) { return v.check == check; });
  }

  friend bool operator==(const ValidationReport&, const ValidationReport&) = default;
};

namespace validator_detail {

enum class RefKind { kObligation, kAssignment, kRepayment, kDeposit, kImplicit };

// What a record's edge_ref resolves to: its two endpoints and capacity in
// units of account, plus the intents whose signatures back it.
struct ResolvedRef {
  RefKind kind = RefKind::kObligation;
  AgentId from;
  AgentId to;
  std::int64_t capacity = 0;
  std::string currency;
  std::vector<Intent> signers;
  bool trusted = false;  // carried ledger obligation or implicit acceptance
};

class RefIndex {
 public:
  RefIndex(const ObligationGraph& g, const Ledger& ledger) : g_(&g), ledger_(&ledger) {
    for (const auto& p : g.pool.obligations) {
      obligations_.emplace(p.obligation.id, &p);
      parties_.insert(p.obligation.debtor);
      parties_.insert(p.obligation.creditor);
    }
    for (const auto& a : g.pool.acceptances) {
      acceptances_.emplace(a.id, &a);
      if (a.kind == AcceptanceKind::kDeposit && a.currency == g.config.default_currency) {
        explicit_default_.insert(a.origin);
      }
    }
    for (const auto& t : g.pool.tenders) tenders_.emplace(t.id, &t);
    for (const auto& t : g.pool.tenders) {
      if (t.kind != TenderKind::kOverdraft) continue;
      const Acceptance* line = nullptr;
      for (const auto& a : g.pool.acceptances) {
        if (a.kind == AcceptanceKind::kRepayment && a.origin == t.source &&
            a.target == t.sender && a.currency == t.currency &&
            (line == nullptr || a.id < line->id)) {
          line = &a;
        }
      }
      if (line != nullptr) backing_[line->id].push_back(&t);
    }
  }

  std::optional<ResolvedRef> resolve(const std::string& ref) const {
    if (const auto it = obligations_.find(ref); it != obligations_.end()) {
      const PooledObligation& p = *it->second;
      return ResolvedRef{RefKind::kObligation, p.obligation.debtor, p.obligation.creditor,
                         p.outstanding.value(), "", {Intent(p.obligation)}, p.carried};
    }
    if (const auto it = tenders_.find(ref); it != tenders_.end()) {
      const Tender& t = *it->second;
      if (t.kind != TenderKind::kAssignment) return std::nullopt;
      const Amount available = min(t.max_amount, ledger_->balance(t.sender, t.currency));
      return ResolvedRef{RefKind::kAssignment, t.source, t.sender,
                         unit_capacity(t.currency, t.price, available), t.currency,
                         {Intent(t)}, false};
    }
    if (const auto it = acceptances_.find(ref); it != acceptances_.end()) {
      const Acceptance& a = *it->second;
      if (a.kind == AcceptanceKind::kDeposit) {
        return ResolvedRef{RefKind::kDeposit, a.origin, a.target,
                           a.limit ? a.limit->value() : kUnbounded, a.currency,
                           {Intent(a)}, false};
      }
      ResolvedRef out{RefKind::kRepayment, a.origin, a.target, 0, "", {Intent(a)}, false};
      std::int64_t drawable = 0;
      if (const auto b = backing_.find(a.id); b != backing_.end()) {
        for (const Tender* t : b->second) {
          drawable += unit_capacity(t->currency, t->price, t->max_amount);
          out.signers.emplace_back(*t);
        }
      }
      out.capacity = std::min(drawable, a.limit ? a.limit->value() : 0);
      return out;
    }
    if (const auto parsed = parse_implicit_acceptance_ref(ref)) {
      const auto& [currency, agent] = *parsed;
      if (currency != g_->config.default_currency) return std::nullopt;
      const AgentId origin(agent);
      if (!parties_.contains(origin) || explicit_default_.contains(origin) ||
          origin == g_->config.default_source) {
        return std::nullopt;
      }
      return ResolvedRef{RefKind::kImplicit, origin, g_->config.default_source, kUnbounded,
                         currency, {}, true};
    }
    return std::nullopt;
  }

 private:
  std::int64_t unit_capacity(const std::string& currency, const std::optional<Price>& price,
                             Amount amount) const {
    if (price) return price->to_unit_floor(amount).value();
    if (currency == g_->config.unit) return amount.value();
    return 0;
  }

  const ObligationGraph* g_;
  const Ledger* ledger_;
  std::unordered_map<std::string, const PooledObligation*> obligations_;
  std::unordered_map<std::string, const Acceptance*> acceptances_;
  std::unordered_map<std::string, const Tender*> tenders_;
  std::map<std::string, std::vector<const Tender*>> backing_;
  std::set<AgentId> parties_;
  std::set<AgentId> explicit_default_;
};

}  // namespace validator_detail

// Runs, in order: Ascertainment, SubsetFlow, BalancedFlow, PairedRecords,
// NonNegativeBalance. Unknown refs are violations, never exceptions.
inline ValidationReport is_valid_flow(const ObligationGraph& g, const SettlementFlow& f,
                                      const Ledger& ledger, const KeyRing& keys,
                                      const SignatureScheme& scheme = default_scheme()) {
  using validator_detail::ResolvedRef;
  const validator_detail::RefIndex index(g, ledger);

  std::map<std::string, std::vector<const SettlementRecord*>> by_ref;
  for (const auto& r : f.records) by_ref[r.edge_ref].push_back(&r);
  std::map<std::string, std::optional<ResolvedRef>> resolved;
  for (const auto& [ref, records] : by_ref) resolved.emplace(ref, index.resolve(ref));

  std::map<std::string, std::set<std::string>> found;

  for (const auto& [ref, r] : resolved) {
    if (!r || r->trusted) continue;
    for (const Intent& signer : r->signers) {
      if (!verify_ascertainment(signer, keys, scheme)) {
        found[std::string(kCheckAscertainment)].insert(intent_id(signer));
      }
    }
  }

  for (const auto& [ref, records] : by_ref) {
    const auto& r = resolved.at(ref);
    if (!r) {
      found[std::string(kCheckSubsetFlow)].insert(ref);
      continue;
    }
    std::int64_t out_side = 0;
    std::int64_t in_side = 0;
    for (const SettlementRecord* rec : records) {
      if (rec->amount.is_zero()) found[std::string(kCheckSubsetFlow)].insert(ref);
      if (rec->party == r->from) out_side = checked_add(out_side, rec->amount.value());
      if (rec->party == r->to) in_side = checked_add(in_side, rec->amount.value());
    }
    if (out_side > r->capacity || in_side > r->capacity) {
      found[std::string(kCheckSubsetFlow)].insert(ref);
    }
  }

  // Per-agent balance of unit-of-account records, and per (agent, asset)
  // currency that records say each agent pays out or receives.
  std::map<AgentId, std::int64_t> record_net;
  std::map<BalanceKey, std::int64_t> currency_expected;
  for (const auto& [ref, records] : by_ref) {
    const auto& r = resolved.at(ref);
    if (!r) continue;
    for (const SettlementRecord* rec : records) {
      const std::int64_t v = rec->amount.value();
      if (rec->party == r->from) record_net[rec->party] = checked_add(record_net[rec->party], -v);
      if (rec->party == r->to) record_net[rec->party] = checked_add(record_net[rec->party], v);
      if (!rec->currency_amount) continue;
      if (rec->currency_amount->asset != r->currency) {
        found[std::string(kCheckBalancedFlow)].insert(ref);
        continue;
      }
      const std::int64_t q = rec->currency_amount->amount.value();
      if (r->kind == validator_detail::RefKind::kAssignment && rec->party == r->to) {
        auto& slot = currency_expected[{rec->party, r->currency}];
        slot = checked_add(slot, -q);
      } else if ((r->kind == validator_detail::RefKind::kDeposit ||
                  r->kind == validator_detail::RefKind::kImplicit) &&
                 rec->party == r->from) {
        auto& slot = currency_expected[{rec->party, r->currency}];
        slot = checked_add(slot, q);
      }
    }
  }
  for (const auto& [agent, net] : record_net) {
    if (net != 0) found[std::string(kCheckBalancedFlow)].insert(agent.str());
  }
  std::map<BalanceKey, std::int64_t> transfer_net;
  for (const Transfer& t : f.transfers) {
    if (t.amount.is_zero() || t.from == t.to) {
      found[std::string(kCheckBalancedFlow)].insert(t.from.str() + "->" + t.to.str());
    }
    auto& out = transfer_net[{t.from, t.asset}];
    out = checked_add(out, -t.amount.value());
    auto& in = transfer_net[{t.to, t.asset}];
    in = checked_add(in, t.amount.value());
  }
  std::set<BalanceKey> currency_keys;
  for (const auto& [key, v] : transfer_net) currency_keys.insert(key);
  for (const auto& [key, v] : currency_expected) currency_keys.insert(key);
  for (const BalanceKey& key : currency_keys) {
    const auto a = transfer_net.find(key);
    const auto b = currency_expected.find(key);
    const std::int64_t moved = a == transfer_net.end() ? 0 : a->second;
    const std::int64_t expected = b == currency_expected.end() ? 0 : b->second;
    if (moved != expected) {
      found[std::string(kCheckBalancedFlow)].insert(key.first.str() + "/" + key.second);
    }
  }

  for (const auto& [ref, records] : by_ref) {
    const auto& r = resolved.at(ref);
    if (!r) continue;
    const SettlementRecord* from_rec = nullptr;
    const SettlementRecord* to_rec = nullptr;
    bool ok = records.size() == 2;
    for (const SettlementRecord* rec : records) {
      if (rec->party == r->from && from_rec == nullptr) {
        from_rec = rec;
      } else if (rec->party == r->to && to_rec == nullptr) {
        to_rec = rec;
      } else {
        ok = false;
      }
    }
    ok = ok && from_rec != nullptr && to_rec != nullptr &&
         from_rec->amount == to_rec->amount &&
         from_rec->currency_amount == to_rec->currency_amount;
    if (!ok) found[std::string(kCheckPairedRecords)].insert(ref);
  }

  for (const auto& [key, net] : transfer_net) {
    if (ledger.balance(key.first, key.second).value() + net < 0) {
      found[std::string(kCheckNonNegativeBalance)].insert(key.first.str() + "/" + key.second);
    }
  }

  ValidationReport report;
  for (std::string_view check : {kCheckAscertainment, kCheckSubsetFlow, kCheckBalancedFlow,
                                 kCheckPairedRecords, kCheckNonNegativeBalance}) {
    const auto it = found.find(std::string(check));
    if (it == found.end()) continue;
    report.violations.push_back({std::string(check), {it->second.begin(), it->second.end()}});
  }
  report.valid = report.violations.empty();
  return report;
}

// True iff every party named in an obligation record has exactly one notice,
// whose entries are exactly (obligation, discharged, remaining) for the
// obligations it has records on.
inline bool verify_notices(const ObligationGraph& g, const SettlementFlow& f,
                           const std::vector<SetOffNotice>& notices) {
  std::unordered_map<std::string, const PooledObligation*> obligations;
  for (const auto& p : g.pool.obligations) obligations.emplace(p.obligation.id, &p);

  std::map<AgentId, std::map<std::string, std::int64_t>> expected;
  for (const auto& r : f.records) {
    if (!obligations.contains(r.edge_ref)) continue;
    auto& slot = expected[r.party][r.edge_ref];
    slot = checked_add(slot, r.amount.value());
  }

  std::set<AgentId> seen;
  for (const SetOffNotice& notice : notices) {
    if (notice.epoch_id != f.epoch_id || !seen.insert(notice.party).second) return false;
    const auto it = expected.find(notice.party);
    if (it == expected.end() || it->second.size() != notice.entries.size()) return false;
    std::set<std::string> ids;
    for (const NoticeEntry& entry : notice.entries) {
      if (!ids.insert(entry.obligation_id).second) return false;
      const auto want = it->second.find(entry.obligation_id);
      if (want == it->second.end()) return false;
      const std::int64_t outstanding = obligations.at(entry.obligation_id)->outstanding.value();
      if (entry.discharged.value() != want->second ||
          entry.discharged.value() + entry.remaining.value() != outstanding) {
        return false;
      }
    }
  }
  return seen.size() == expected.size();
}

}  // namespace clearing

#endif  // CLEARING_VALIDATOR_HPP_
