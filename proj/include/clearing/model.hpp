#ifndef CLEARING_MODEL_HPP_
#define CLEARING_MODEL_HPP_

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "clearing/intents.hpp"

namespace clearing {

// Per-epoch conventions shared by graph building and validation.
struct EpochConfig {
  std::string unit = "USD";
  // Source of the currency every firm implicitly accepts without limit.
  AgentId default_source{"L"};
  std::string default_currency = "USD";
};

// An obligation as it enters an epoch. `outstanding` is the still-open part;
// `carried` marks obligations already held by the ledger (verified when they
// first entered, or created by a validated overdraft draw).
struct PooledObligation {
  Obligation obligation;
  Amount outstanding;
  bool carried = false;

  friend bool operator==(const PooledObligation&, const PooledObligation&) = default;
};

inline PooledObligation pooled(Obligation o) {
  const Amount amount = o.amount;
  return PooledObligation{std::move(o), amount, false};
}

struct IntentPool {
  std::int64_t epoch_id = 0;
  std::vector<PooledObligation> obligations;
  std::vector<Acceptance> acceptances;
  std::vector<Tender> tenders;

  void add(Intent intent) {
    std::visit(
        [this](auto&& x) {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, Obligation>) {
            obligations.push_back(pooled(std::move(x)));
          } else if constexpr (std::is_same_v<T, Acceptance>) {
            acceptances.push_back(std::move(x));
          } else {
            tenders.push_back(std::move(x));
          }
        },
        std::move(intent));
  }

  std::size_t size() const {
    return obligations.size() + acceptances.size() + tenders.size();
  }

  friend bool operator==(const IntentPool&, const IntentPool&) = default;
};

struct CurrencyAmount {
  std::string asset;
  Amount amount;

  friend bool operator==(const CurrencyAmount&, const CurrencyAmount&) = default;
};

// Quantity of one intent discharged, addressed to one of its two endpoints.
struct SettlementRecord {
  std::string edge_ref;
  AgentId party;
  Amount amount;
  std::optional<CurrencyAmount> currency_amount;

  friend bool operator==(const SettlementRecord&, const SettlementRecord&) = default;
};

struct Transfer {
  AgentId from;
  AgentId to;
  std::string asset;
  Amount amount;

  friend bool operator==(const Transfer&, const Transfer&) = default;
};

struct SettlementFlow {
  std::int64_t epoch_id = 0;
  std::vector<SettlementRecord> records;
  std::vector<Transfer> transfers;

  bool empty() const { return records.empty() && transfers.empty(); }

  friend bool operator==(const SettlementFlow&, const SettlementFlow&) = default;
};

struct NoticeEntry {
  std::string obligation_id;
  Amount discharged;
  Amount remaining;

  friend bool operator==(const NoticeEntry&, const NoticeEntry&) = default;
};

struct SetOffNotice {
  std::int64_t epoch_id = 0;
  AgentId party;
  std::vector<NoticeEntry> entries;

  friend bool operator==(const SetOffNotice&, const SetOffNotice&) = default;
};

struct OpenObligation {
  Obligation obligation;
  Amount outstanding;

  friend bool operator==(const OpenObligation&, const OpenObligation&) = default;
};

using BalanceKey = std::pair<AgentId, std::string>;

struct Ledger {
  std::map<BalanceKey, Amount> balances;
  std::map<std::string, OpenObligation> open_obligations;
  std::int64_t last_applied_epoch = -1;  // none yet

  Amount balance(const AgentId& agent, const std::string& asset) const {
    const auto it = balances.find({agent, asset});
    return it == balances.end() ? Amount{} : it->second;
  }

  void credit(const AgentId& agent, const std::string& asset, Amount amount) {
    if (amount.is_zero()) return;
    balances[{agent, asset}] += amount;
  }

  // Throws on underflow; balances never go negative.
  void debit(const AgentId& agent, const std::string& asset, Amount amount) {
    const Amount current = balance(agent, asset);
    if (amount > current) {
      throw Error(ErrorCode::kOverflow,
                  "balance underflow for " + agent.str() + " in " + asset);
    }
    if (amount == current) {
      balances.erase({agent, asset});
    } else {
      balances[{agent, asset}] = current - amount;
    }
  }

  Amount total_open_debt() const {
    Amount total;
    for (const auto& [id, open] : open_obligations) total += open.outstanding;
    return total;
  }

  friend bool operator==(const Ledger&, const Ledger&) = default;
};

// Edge reference for the acceptance every firm implicitly holds towards the
// default source. These refs need no ascertainment.
inline constexpr std::string_view kImplicitAcceptancePrefix = "~accept/";

inline std::string implicit_acceptance_ref(const AgentId& agent,
                                           const std::string& currency) {
  return std::string(kImplicitAcceptancePrefix) + currency + "/" + agent.str();
}

// Splits an implicit acceptance ref into (currency, agent).
inline std::optional<std::pair<std::string, std::string>> parse_implicit_acceptance_ref(
    std::string_view ref) {
  if (ref.substr(0, kImplicitAcceptancePrefix.size()) != kImplicitAcceptancePrefix) {
    return std::nullopt;
  }
  ref.remove_prefix(kImplicitAcceptancePrefix.size());
  const auto slash = ref.find('/');
  if (slash == std::string_view::npos || slash == 0 || slash + 1 == ref.size()) {
    return std::nullopt;
  }
  return std::make_pair(std::string(ref.substr(0, slash)),
                        std::string(ref.substr(slash + 1)));
}

}  // namespace clearing

#endif  // CLEARING_MODEL_HPP_
