#ifndef CLEARING_SETTLEMENT_HPP_
#define CLEARING_SETTLEMENT_HPP_

#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "clearing/validator.hpp"

namespace clearing {

struct AppliedEpoch {
  std::int64_t epoch_id = 0;
  Ledger ledger_before;
  Ledger ledger_after;
  std::vector<Obligation> new_obligations;
  std::vector<SetOffNotice> notices;

  friend bool operator==(const AppliedEpoch&, const AppliedEpoch&) = default;
};

class ValidationFailed : public Error {
 public:
  explicit ValidationFailed(ValidationReport report)
      : Error(ErrorCode::kValidation, describe(report)), report_(std::move(report)) {}

  const ValidationReport& report() const noexcept { return report_; }

 private:
  static std::string describe(const ValidationReport& report) {
    std::string out = "settlement flow rejected:";
    for (const auto& v : report.violations) out += " " + v.check;
    return out;
  }

  ValidationReport report_;
};

// Test hook called at named stages of apply_flow. Throwing from it aborts the
// apply; the caller's ledger is left untouched.
struct ApplyHooks {
  std::function<void(std::string_view stage)> at_stage;
};

inline constexpr std::string_view kApplyStages[] = {"load", "discharge", "transfer",
                                                    "draw", "notices", "commit"};

inline std::string draw_obligation_id(std::int64_t epoch_id, const std::string& acceptance_id) {
  return "draw/" + std::to_string(epoch_id) + "/" + acceptance_id;
}

// One notice per party named in an obligation record, entries sorted by id.
inline std::vector<SetOffNotice> emit_notices(const SettlementFlow& f, const ObligationGraph& g) {
  std::unordered_map<std::string, const PooledObligation*> obligations;
  for (const auto& p : g.pool.obligations) obligations.emplace(p.obligation.id, &p);
  std::map<AgentId, std::map<std::string, Amount>> discharged;
  for (const auto& r : f.records) {
    if (obligations.contains(r.edge_ref)) discharged[r.party][r.edge_ref] += r.amount;
  }
  std::vector<SetOffNotice> notices;
  for (const auto& [party, entries] : discharged) {
    SetOffNotice notice{f.epoch_id, party, {}};
    for (const auto& [id, amount] : entries) {
      notice.entries.push_back({id, amount, obligations.at(id)->outstanding - amount});
    }
    notices.push_back(std::move(notice));
  }
  return notices;
}

// Validates, then applies the flow to a private copy of the ledger and swaps
// it in only when every step succeeded.
inline AppliedEpoch apply_flow(Ledger& ledger, const ObligationGraph& g, const SettlementFlow& f,
                               const KeyRing& keys, const ApplyHooks& hooks = {}) {
  ValidationReport report = is_valid_flow(g, f, ledger, keys);
  if (!report.valid) throw ValidationFailed(std::move(report));

  auto stage = [&](std::string_view name) {
    if (hooks.at_stage) hooks.at_stage(name);
  };
  Ledger after = ledger;
  AppliedEpoch applied;
  applied.epoch_id = f.epoch_id;

  stage("load");
  std::unordered_map<std::string, const PooledObligation*> pooled_by_id;
  for (const auto& p : g.pool.obligations) {
    pooled_by_id.emplace(p.obligation.id, &p);
    if (p.outstanding.is_zero()) continue;
    after.open_obligations.try_emplace(p.obligation.id,
                                       OpenObligation{p.obligation, p.outstanding});
  }

  stage("discharge");
  for (const auto& r : f.records) {
    const auto it = pooled_by_id.find(r.edge_ref);
    if (it == pooled_by_id.end() || r.party != it->second->obligation.debtor) continue;
    auto open = after.open_obligations.find(r.edge_ref);
    if (open == after.open_obligations.end()) {
      throw Error(ErrorCode::kState, "obligation " + r.edge_ref + " is not open");
    }
    open->second.outstanding -= r.amount;
    if (open->second.outstanding.is_zero()) after.open_obligations.erase(open);
  }

  stage("transfer");
  std::map<BalanceKey, std::int64_t> net;
  for (const Transfer& t : f.transfers) {
    net[{t.from, t.asset}] -= t.amount.value();
    net[{t.to, t.asset}] += t.amount.value();
  }
  for (const auto& [key, delta] : net) {
    if (delta < 0) after.debit(key.first, key.second, Amount(-delta));
    if (delta > 0) after.credit(key.first, key.second, Amount(delta));
  }

  stage("draw");
  std::map<std::string, const Acceptance*> lines;
  for (const Acceptance& a : g.pool.acceptances) {
    if (a.kind == AcceptanceKind::kRepayment) lines.emplace(a.id, &a);
  }
  std::map<std::string, Amount> drawn_by_line;
  for (const auto& r : f.records) {
    const auto it = lines.find(r.edge_ref);
    if (it != lines.end() && r.party == it->second->origin) drawn_by_line[r.edge_ref] += r.amount;
  }
  for (const auto& [id, drawn] : drawn_by_line) {
    const Acceptance& line = *lines.at(id);
    Obligation debt{draw_obligation_id(f.epoch_id, line.id), line.target, line.origin,
                    drawn, g.config.unit, line.repayment_due, ""};
    if (!after.open_obligations.try_emplace(debt.id, OpenObligation{debt, drawn}).second) {
      throw Error(ErrorCode::kDuplicate, "draw obligation already exists: " + debt.id);
    }
    applied.new_obligations.push_back(std::move(debt));
  }

  stage("notices");
  applied.notices = emit_notices(f, g);
  after.last_applied_epoch = f.epoch_id;

  Ledger committed = after;
  applied.ledger_before = ledger;
  applied.ledger_after = std::move(after);
  stage("commit");
  ledger = std::move(committed);
  return applied;
}

}  // namespace clearing

#endif  // CLEARING_SETTLEMENT_HPP_
