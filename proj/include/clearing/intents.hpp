#ifndef CLEARING_INTENTS_HPP_
#define CLEARING_INTENTS_HPP_

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "clearing/types.hpp"

namespace clearing {

// A dated debt from debtor to creditor, ascertained by the debtor.
struct Obligation {
  std::string id;
  AgentId debtor;
  AgentId creditor;
  Amount amount;
  std::string unit;
  std::optional<Date> due_date;
  std::string ascertainment;

  friend bool operator==(const Obligation&, const Obligation&) = default;
};

enum class AcceptanceKind { kDeposit, kRepayment };

// Willingness to be owed. A deposit acceptance is held by a creditor towards
// a liquidity source; a repayment acceptance is a credit line from a facility
// (origin) to a borrower (target). Limits are in the unit of account;
// nullopt means unbounded.
struct Acceptance {
  std::string id;
  AgentId origin;
  AgentId target;
  AcceptanceKind kind = AcceptanceKind::kDeposit;
  std::optional<Amount> limit;
  std::string currency;
  std::optional<Date> repayment_due;
  std::string ascertainment;

  friend bool operator==(const Acceptance&, const Acceptance&) = default;
};

enum class TenderKind { kAssignment, kOverdraft };

// Offer by `sender` to spend up to `max_amount` (currency minor units) of the
// asset held at `source`, or drawn from the facility `source` for overdrafts.
struct Tender {
  std::string id;
  AgentId sender;
  AgentId source;
  TenderKind kind = TenderKind::kAssignment;
  Amount max_amount;
  std::string currency;
  std::optional<Price> price;
  std::string ascertainment;

  friend bool operator==(const Tender&, const Tender&) = default;
};

using Intent = std::variant<Obligation, Acceptance, Tender>;

inline const std::string& intent_id(const Intent& intent) {
  return std::visit([](const auto& x) -> const std::string& { return x.id; },
                    intent);
}

// Party whose key must ascertain the intent.
inline const AgentId& bound_party(const Obligation& o) { return o.debtor; }
inline const AgentId& bound_party(const Acceptance& a) { return a.origin; }
inline const AgentId& bound_party(const Tender& t) { return t.sender; }
inline const AgentId& bound_party(const Intent& intent) {
  return std::visit([](const auto& x) -> const AgentId& { return bound_party(x); },
                    intent);
}

inline const std::string& ascertainment_of(const Intent& intent) {
  return std::visit(
      [](const auto& x) -> const std::string& { return x.ascertainment; },
      intent);
}

inline std::string_view kind_name(AcceptanceKind kind) {
  return kind == AcceptanceKind::kDeposit ? "deposit" : "repayment";
}
inline std::string_view kind_name(TenderKind kind) {
  return kind == TenderKind::kAssignment ? "assignment" : "overdraft";
}

// Structural checks that do not need keys or a ledger. Returns the first
// problem found, or nullopt.
inline std::optional<std::string> well_formedness_error(const Obligation& o) {
  if (o.id.empty()) return "obligation without id";
  if (o.debtor == o.creditor) return "obligation " + o.id + ": debtor equals creditor";
  if (o.amount.is_zero()) return "obligation " + o.id + ": zero amount";
  if (o.unit.empty()) return "obligation " + o.id + ": missing unit";
  return std::nullopt;
}

inline std::optional<std::string> well_formedness_error(const Acceptance& a) {
  if (a.id.empty()) return "acceptance without id";
  if (a.origin == a.target) return "acceptance " + a.id + ": origin equals target";
  if (a.currency.empty()) return "acceptance " + a.id + ": missing currency";
  if (a.kind == AcceptanceKind::kRepayment && !a.limit) {
    return "acceptance " + a.id + ": repayment acceptance needs a finite limit";
  }
  if (a.kind == AcceptanceKind::kDeposit && a.repayment_due) {
    return "acceptance " + a.id + ": repayment_due on a deposit acceptance";
  }
  return std::nullopt;
}

inline std::optional<std::string> well_formedness_error(const Tender& t) {
  if (t.id.empty()) return "tender without id";
  if (t.sender == t.source) return "tender " + t.id + ": sender equals source";
  if (t.currency.empty()) return "tender " + t.id + ": missing currency";
  return std::nullopt;
}

inline std::optional<std::string> well_formedness_error(const Intent& intent) {
  return std::visit([](const auto& x) { return well_formedness_error(x); },
                    intent);
}

}  // namespace clearing

#endif  // CLEARING_INTENTS_HPP_
