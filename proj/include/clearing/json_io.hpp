#ifndef CLEARING_JSON_IO_HPP_
#define CLEARING_JSON_IO_HPP_

// JSON forms of the domain types. Intent objects list fields in canonical
// serialization order, preceded by "type" and followed by "ascertainment":
//
//   {"type":"obligation","id":s,"debtor":s,"creditor":s,"amount":int,
//    "unit":s,"due_date":"YYYY-MM-DD"?,"ascertainment":s}
//   {"type":"acceptance","id":s,"origin":s,"target":s,
//    "kind":"deposit"|"repayment","limit":int|"inf","currency":s,
//    "repayment_due":"YYYY-MM-DD"?,"ascertainment":s}
//   {"type":"tender","id":s,"sender":s,"source":s,
//    "kind":"assignment"|"overdraft","max_amount":int,"currency":s,
//    "price":"n"|"n/d"?,"ascertainment":s}
//
// Optional fields marked `?` are omitted when absent. Amounts are integers in
// minor units.

#include <nlohmann/json.hpp>

#include <sstream>
#include <string>
#include <vector>

#include "clearing/settlement.hpp"

namespace clearing {

using Json = nlohmann::ordered_json;

namespace json_detail {

inline const Json& field(const Json& j, const char* name) {
  if (!j.is_object() || !j.contains(name)) {
    throw Error(ErrorCode::kParse, std::string("missing field '") + name + "'");
  }
  return j.at(name);
}

inline std::string str(const Json& j, const char* name) {
  const Json& v = field(j, name);
  if (!v.is_string()) throw Error(ErrorCode::kParse, std::string("field '") + name + "' must be a string");
  return v.get<std::string>();
}

inline Amount amount(const Json& j, const char* name) {
  const Json& v = field(j, name);
  if (!v.is_number_integer()) {
    throw Error(ErrorCode::kParse, std::string("field '") + name + "' must be an integer");
  }
  return Amount(v.get<std::int64_t>());
}

inline std::optional<Date> date(const Json& j, const char* name) {
  if (!j.contains(name) || j.at(name).is_null()) return std::nullopt;
  return parse_date(str(j, name));
}

}  // namespace json_detail

inline Json to_json(const Obligation& o) {
  Json j;
  j["type"] = "obligation";
  j["id"] = o.id;
  j["debtor"] = o.debtor.str();
  j["creditor"] = o.creditor.str();
  j["amount"] = o.amount.value();
  j["unit"] = o.unit;
  if (o.due_date) j["due_date"] = format_date(*o.due_date);
  j["ascertainment"] = o.ascertainment;
  return j;
}

inline Json to_json(const Acceptance& a) {
  Json j;
  j["type"] = "acceptance";
  j["id"] = a.id;
  j["origin"] = a.origin.str();
  j["target"] = a.target.str();
  j["kind"] = kind_name(a.kind);
  if (a.limit) {
    j["limit"] = a.limit->value();
  } else {
    j["limit"] = "inf";
  }
  j["currency"] = a.currency;
  if (a.repayment_due) j["repayment_due"] = format_date(*a.repayment_due);
  j["ascertainment"] = a.ascertainment;
  return j;
}

inline Json to_json(const Tender& t) {
  Json j;
  j["type"] = "tender";
  j["id"] = t.id;
  j["sender"] = t.sender.str();
  j["source"] = t.source.str();
  j["kind"] = kind_name(t.kind);
  j["max_amount"] = t.max_amount.value();
  j["currency"] = t.currency;
  if (t.price) j["price"] = t.price->str();
  j["ascertainment"] = t.ascertainment;
  return j;
}

inline Json to_json(const Intent& intent) {
  return std::visit([](const auto& x) { return to_json(x); }, intent);
}

inline Intent intent_from_json(const Json& j) {
  using namespace json_detail;
  const std::string type = str(j, "type");
  const std::string token = j.contains("ascertainment") ? str(j, "ascertainment") : "";
  if (type == "obligation") {
    return Obligation{str(j, "id"), AgentId(str(j, "debtor")), AgentId(str(j, "creditor")),
                      amount(j, "amount"), str(j, "unit"), date(j, "due_date"), token};
  }
  if (type == "acceptance") {
    Acceptance a;
    a.id = str(j, "id");
    a.origin = AgentId(str(j, "origin"));
    a.target = AgentId(str(j, "target"));
    const std::string kind = str(j, "kind");
    if (kind != "deposit" && kind != "repayment") throw Error(ErrorCode::kParse, "bad acceptance kind: " + kind);
    a.kind = kind == "deposit" ? AcceptanceKind::kDeposit : AcceptanceKind::kRepayment;
    if (j.contains("limit") && !j.at("limit").is_null() &&
        !(j.at("limit").is_string() && j.at("limit").get<std::string>() == "inf")) {
      a.limit = amount(j, "limit");
    }
    a.currency = str(j, "currency");
    a.repayment_due = date(j, "repayment_due");
    a.ascertainment = token;
    return a;
  }
  if (type == "tender") {
    Tender t;
    t.id = str(j, "id");
    t.sender = AgentId(str(j, "sender"));
    t.source = AgentId(str(j, "source"));
    const std::string kind = str(j, "kind");
    if (kind != "assignment" && kind != "overdraft") throw Error(ErrorCode::kParse, "bad tender kind: " + kind);
    t.kind = kind == "assignment" ? TenderKind::kAssignment : TenderKind::kOverdraft;
    t.max_amount = amount(j, "max_amount");
    t.currency = str(j, "currency");
    if (j.contains("price") && !j.at("price").is_null()) {
      const Json& p = j.at("price");
      t.price = p.is_string() ? Price::parse(p.get<std::string>()) : Price(p.get<std::int64_t>(), 1);
    }
    t.ascertainment = token;
    return t;
  }
  throw Error(ErrorCode::kParse, "unknown intent type: " + type);
}

inline Intent parse_intent_line(const std::string& line) {
  Json j;
  try {
    j = Json::parse(line);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::kParse, std::string("bad JSON: ") + e.what());
  }
  return intent_from_json(j);
}

inline Json to_json(const PooledObligation& p) {
  Json j = to_json(p.obligation);
  j["outstanding"] = p.outstanding.value();
  j["carried"] = p.carried;
  return j;
}

inline Json to_json(const IntentPool& pool) {
  Json j;
  j["epoch_id"] = pool.epoch_id;
  j["obligations"] = Json::array();
  for (const auto& p : pool.obligations) j["obligations"].push_back(to_json(p));
  j["acceptances"] = Json::array();
  for (const auto& a : pool.acceptances) j["acceptances"].push_back(to_json(a));
  j["tenders"] = Json::array();
  for (const auto& t : pool.tenders) j["tenders"].push_back(to_json(t));
  return j;
}

inline IntentPool pool_from_json(const Json& j) {
  IntentPool pool;
  pool.epoch_id = json_detail::field(j, "epoch_id").get<std::int64_t>();
  for (const Json& o : json_detail::field(j, "obligations")) {
    PooledObligation p{std::get<Obligation>(intent_from_json(o)), json_detail::amount(o, "outstanding"),
                       json_detail::field(o, "carried").get<bool>()};
    pool.obligations.push_back(std::move(p));
  }
  for (const Json& a : json_detail::field(j, "acceptances")) {
    pool.acceptances.push_back(std::get<Acceptance>(intent_from_json(a)));
  }
  for (const Json& t : json_detail::field(j, "tenders")) {
    pool.tenders.push_back(std::get<Tender>(intent_from_json(t)));
  }
  return pool;
}

inline Json to_json(const SettlementFlow& f) {
  Json j;
  j["epoch_id"] = f.epoch_id;
  j["records"] = Json::array();
  for (const auto& r : f.records) {
    Json rec;
    rec["edge_ref"] = r.edge_ref;
    rec["party"] = r.party.str();
    rec["amount"] = r.amount.value();
    if (r.currency_amount) {
      rec["currency_amount"] = {{"asset", r.currency_amount->asset},
                                {"amount", r.currency_amount->amount.value()}};
    }
    j["records"].push_back(std::move(rec));
  }
  j["transfers"] = Json::array();
  for (const auto& t : f.transfers) {
    j["transfers"].push_back(
        {{"from", t.from.str()}, {"to", t.to.str()}, {"asset", t.asset}, {"amount", t.amount.value()}});
  }
  return j;
}

inline SettlementFlow flow_from_json(const Json& j) {
  using namespace json_detail;
  SettlementFlow f;
  f.epoch_id = field(j, "epoch_id").get<std::int64_t>();
  for (const Json& r : field(j, "records")) {
    SettlementRecord rec{str(r, "edge_ref"), AgentId(str(r, "party")), amount(r, "amount"), std::nullopt};
    if (r.contains("currency_amount")) {
      const Json& ca = r.at("currency_amount");
      rec.currency_amount = CurrencyAmount{str(ca, "asset"), amount(ca, "amount")};
    }
    f.records.push_back(std::move(rec));
  }
  for (const Json& t : field(j, "transfers")) {
    f.transfers.push_back({AgentId(str(t, "from")), AgentId(str(t, "to")), str(t, "asset"), amount(t, "amount")});
  }
  return f;
}

inline Json to_json(const ValidationReport& report) {
  Json j;
  j["valid"] = report.valid;
  j["violations"] = Json::array();
  for (const auto& v : report.violations) j["violations"].push_back({{"check", v.check}, {"ids", v.ids}});
  return j;
}

inline Json to_json(const Ledger& ledger) {
  Json j;
  j["last_applied_epoch"] = ledger.last_applied_epoch;
  j["balances"] = Json::array();
  for (const auto& [key, amount] : ledger.balances) {
    j["balances"].push_back({{"agent", key.first.str()}, {"asset", key.second}, {"amount", amount.value()}});
  }
  j["open_obligations"] = Json::array();
  for (const auto& [id, open] : ledger.open_obligations) {
    Json o = to_json(open.obligation);
    o["outstanding"] = open.outstanding.value();
    j["open_obligations"].push_back(std::move(o));
  }
  return j;
}

inline Ledger ledger_from_json(const Json& j) {
  using namespace json_detail;
  Ledger ledger;
  ledger.last_applied_epoch = field(j, "last_applied_epoch").get<std::int64_t>();
  for (const Json& b : field(j, "balances")) {
    ledger.balances[{AgentId(str(b, "agent")), str(b, "asset")}] = amount(b, "amount");
  }
  for (const Json& o : field(j, "open_obligations")) {
    Obligation ob = std::get<Obligation>(intent_from_json(o));
    const std::string id = ob.id;
    ledger.open_obligations.emplace(id, OpenObligation{std::move(ob), amount(o, "outstanding")});
  }
  return ledger;
}

inline Json to_json(const SetOffNotice& n) {
  Json j;
  j["epoch_id"] = n.epoch_id;
  j["party"] = n.party.str();
  j["entries"] = Json::array();
  for (const auto& e : n.entries) {
    j["entries"].push_back({{"obligation_id", e.obligation_id},
                            {"discharged", e.discharged.value()},
                            {"remaining", e.remaining.value()}});
  }
  return j;
}

inline Json to_json(const AppliedEpoch& a) {
  Json j;
  j["epoch_id"] = a.epoch_id;
  j["ledger_before"] = to_json(a.ledger_before);
  j["ledger_after"] = to_json(a.ledger_after);
  j["new_obligations"] = Json::array();
  for (const auto& o : a.new_obligations) j["new_obligations"].push_back(to_json(o));
  j["notices"] = Json::array();
  for (const auto& n : a.notices) j["notices"].push_back(to_json(n));
  return j;
}

inline AppliedEpoch applied_from_json(const Json& j) {
  using namespace json_detail;
  AppliedEpoch a;
  a.epoch_id = field(j, "epoch_id").get<std::int64_t>();
  a.ledger_before = ledger_from_json(field(j, "ledger_before"));
  a.ledger_after = ledger_from_json(field(j, "ledger_after"));
  for (const Json& o : field(j, "new_obligations")) {
    a.new_obligations.push_back(std::get<Obligation>(intent_from_json(o)));
  }
  for (const Json& n : field(j, "notices")) {
    SetOffNotice notice{field(n, "epoch_id").get<std::int64_t>(), AgentId(str(n, "party")), {}};
    for (const Json& e : field(n, "entries")) {
      notice.entries.push_back({str(e, "obligation_id"), amount(e, "discharged"), amount(e, "remaining")});
    }
    a.notices.push_back(std::move(notice));
  }
  return a;
}

// CSV export: party,obligation_id,discharged,remaining
inline std::string notices_csv(const std::vector<SetOffNotice>& notices) {
  std::ostringstream out;
  out << "party,obligation_id,discharged,remaining\n";
  for (const auto& n : notices) {
    for (const auto& e : n.entries) {
      out << n.party.str() << ',' << e.obligation_id << ',' << e.discharged.value() << ','
          << e.remaining.value() << '\n';
    }
  }
  return out.str();
}

}  // namespace clearing

#endif  // CLEARING_JSON_IO_HPP_
