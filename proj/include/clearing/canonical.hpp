#ifndef CLEARING_CANONICAL_HPP_
#define CLEARING_CANONICAL_HPP_

// Canonical byte encoding of intents. This is what ascertainment tokens sign,
// so the layout is frozen:
//
//   magic    4 bytes  "CLR1"
//   tag      1 byte   'O' obligation, 'A' acceptance, 'T' tender
//   fields   in the order listed below
//
// Field encodings:
//   str      u32 big-endian byte length, then UTF-8 bytes
//   amt      u64 big-endian
//   enum     1 byte
//   opt<x>   1 byte presence flag (0 absent, 1 present), then x if present
//   date     str holding YYYY-MM-DD
//   price    amt numerator, amt denominator (reduced)
//
//   Obligation:  id:str debtor:str creditor:str amount:amt unit:str
//                due_date:opt<date>
//   Acceptance:  id:str origin:str target:str kind:enum(0 deposit,1 repayment)
//                limit:opt<amt> (absent = unbounded) currency:str
//                repayment_due:opt<date>
//   Tender:      id:str sender:str source:str kind:enum(0 assignment,1 overdraft)
//                max_amount:amt currency:str price:opt<price>
//
// The ascertainment token is never part of the encoding.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "clearing/intents.hpp"

namespace clearing {

using Bytes = std::vector<std::uint8_t>;

namespace canonical_detail {

inline constexpr char kMagic[4] = {'C', 'L', 'R', '1'};

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) u8(static_cast<std::uint8_t>(v >> shift));
  }
  void u64(std::uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8) u8(static_cast<std::uint8_t>(v >> shift));
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }
  void amount(Amount a) { u64(static_cast<std::uint64_t>(a.value())); }
  void date(const std::optional<Date>& d) {
    u8(d ? 1 : 0);
    if (d) str(format_date(*d));
  }
  Bytes take() && { return std::move(out_); }

 private:
  Bytes out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | u8();
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | u8();
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(in_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  in_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  Amount amount() {
    const std::uint64_t v = u64();
    if (v > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
      throw Error(ErrorCode::kParse, "amount out of range");
    }
    return Amount(static_cast<std::int64_t>(v));
  }
  bool flag() {
    const std::uint8_t f = u8();
    if (f > 1) throw Error(ErrorCode::kParse, "bad presence flag");
    return f == 1;
  }
  std::optional<Date> date() {
    if (!flag()) return std::nullopt;
    return parse_date(str());
  }
  void expect_end() const {
    if (pos_ != in_.size()) throw Error(ErrorCode::kParse, "trailing bytes");
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) throw Error(ErrorCode::kParse, "truncated intent");
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

inline void header(Writer& w, char tag) {
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u8(static_cast<std::uint8_t>(tag));
}

}  // namespace canonical_detail

inline Bytes canonical_serialize(const Obligation& o) {
  canonical_detail::Writer w;
  canonical_detail::header(w, 'O');
  w.str(o.id);
  w.str(o.debtor.str());
  w.str(o.creditor.str());
  w.amount(o.amount);
  w.str(o.unit);
  w.date(o.due_date);
  return std::move(w).take();
}

inline Bytes canonical_serialize(const Acceptance& a) {
  canonical_detail::Writer w;
  canonical_detail::header(w, 'A');
  w.str(a.id);
  w.str(a.origin.str());
  w.str(a.target.str());
  w.u8(a.kind == AcceptanceKind::kDeposit ? 0 : 1);
  w.u8(a.limit ? 1 : 0);
  if (a.limit) w.amount(*a.limit);
  w.str(a.currency);
  w.date(a.repayment_due);
  return std::move(w).take();
}

inline Bytes canonical_serialize(const Tender& t) {
  canonical_detail::Writer w;
  canonical_detail::header(w, 'T');
  w.str(t.id);
  w.str(t.sender.str());
  w.str(t.source.str());
  w.u8(t.kind == TenderKind::kAssignment ? 0 : 1);
  w.amount(t.max_amount);
  w.str(t.currency);
  w.u8(t.price ? 1 : 0);
  if (t.price) {
    w.u64(static_cast<std::uint64_t>(t.price->numerator()));
    w.u64(static_cast<std::uint64_t>(t.price->denominator()));
  }
  return std::move(w).take();
}

inline Bytes canonical_serialize(const Intent& intent) {
  return std::visit([](const auto& x) { return canonical_serialize(x); }, intent);
}

// Inverse of canonical_serialize. The returned intent has an empty
// ascertainment token.
inline Intent parse_canonical(std::span<const std::uint8_t> bytes) {
  canonical_detail::Reader r(bytes);
  for (char c : canonical_detail::kMagic) {
    if (r.u8() != static_cast<std::uint8_t>(c)) {
      throw Error(ErrorCode::kParse, "bad magic");
    }
  }
  const char tag = static_cast<char>(r.u8());
  Intent out;
  switch (tag) {
    case 'O': {
      Obligation o;
      o.id = r.str();
      o.debtor = AgentId(r.str());
      o.creditor = AgentId(r.str());
      o.amount = r.amount();
      o.unit = r.str();
      o.due_date = r.date();
      out = std::move(o);
      break;
    }
    case 'A': {
      Acceptance a;
      a.id = r.str();
      a.origin = AgentId(r.str());
      a.target = AgentId(r.str());
      const std::uint8_t kind = r.u8();
      if (kind > 1) throw Error(ErrorCode::kParse, "bad acceptance kind");
      a.kind = kind == 0 ? AcceptanceKind::kDeposit : AcceptanceKind::kRepayment;
      if (r.flag()) a.limit = r.amount();
      a.currency = r.str();
      a.repayment_due = r.date();
      out = std::move(a);
      break;
    }
    case 'T': {
      Tender t;
      t.id = r.str();
      t.sender = AgentId(r.str());
      t.source = AgentId(r.str());
      const std::uint8_t kind = r.u8();
      if (kind > 1) throw Error(ErrorCode::kParse, "bad tender kind");
      t.kind = kind == 0 ? TenderKind::kAssignment : TenderKind::kOverdraft;
      t.max_amount = r.amount();
      t.currency = r.str();
      if (r.flag()) {
        const auto num = static_cast<std::int64_t>(r.u64());
        const auto den = static_cast<std::int64_t>(r.u64());
        t.price = Price(num, den);
      }
      out = std::move(t);
      break;
    }
    default:
      throw Error(ErrorCode::kParse, "unknown intent tag");
  }
  r.expect_end();
  return out;
}

}  // namespace clearing

#endif  // CLEARING_CANONICAL_HPP_
