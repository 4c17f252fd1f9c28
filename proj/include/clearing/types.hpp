#ifndef CLEARING_TYPES_HPP_
#define CLEARING_TYPES_HPP_

#include <charconv>
#include <chrono>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace clearing {

enum class ErrorCode {
  kInvalidArgument,
  kOverflow,
  kDuplicate,
  kBuild,
  kState,
  kValidation,
  kParse,
  kIo,
  kRefused,
  kQuota,
};

inline std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kOverflow: return "overflow";
    case ErrorCode::kDuplicate: return "duplicate";
    case ErrorCode::kBuild: return "build";
    case ErrorCode::kState: return "state";
    case ErrorCode::kValidation: return "validation";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kRefused: return "refused";
    case ErrorCode::kQuota: return "quota";
  }
  return "unknown";
}

// All recoverable failures in the library are reported with this type.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Non-negative quantity in minor units. Arithmetic is checked: overflow and
// underflow throw instead of wrapping.
class Amount {
 public:
  constexpr Amount() = default;
  constexpr explicit Amount(std::int64_t value) : value_(value) {
    if (value < 0) throw Error(ErrorCode::kInvalidArgument, "negative amount");
  }

  constexpr std::int64_t value() const noexcept { return value_; }
  constexpr bool is_zero() const noexcept { return value_ == 0; }

  friend Amount operator+(Amount a, Amount b) {
    std::int64_t out = 0;
    if (__builtin_add_overflow(a.value_, b.value_, &out)) {
      throw Error(ErrorCode::kOverflow, "amount overflow");
    }
    return Amount(out);
  }
  friend Amount operator-(Amount a, Amount b) {
    if (b.value_ > a.value_) {
      throw Error(ErrorCode::kOverflow, "amount underflow");
    }
    return Amount(a.value_ - b.value_);
  }
  Amount& operator+=(Amount other) { return *this = *this + other; }
  Amount& operator-=(Amount other) { return *this = *this - other; }

  friend constexpr auto operator<=>(Amount, Amount) = default;

 private:
  std::int64_t value_ = 0;
};

inline Amount min(Amount a, Amount b) { return a < b ? a : b; }

// Checked signed addition used for net positions.
inline std::int64_t checked_add(std::int64_t a, std::int64_t b) {
  std::int64_t out = 0;
  if (__builtin_add_overflow(a, b, &out)) {
    throw Error(ErrorCode::kOverflow, "integer overflow");
  }
  return out;
}

inline constexpr std::size_t kMaxAgentIdLength = 64;

class AgentId {
 public:
  AgentId() = default;
  explicit AgentId(std::string id) : id_(std::move(id)) {
    if (id_.empty() || id_.size() > kMaxAgentIdLength) {
      throw Error(ErrorCode::kInvalidArgument,
                  "agent id must be 1-64 characters: '" + id_ + "'");
    }
  }

  const std::string& str() const noexcept { return id_; }

  friend auto operator<=>(const AgentId&, const AgentId&) = default;
  friend bool operator==(const AgentId&, const AgentId&) = default;

 private:
  std::string id_;
};

// Minor units of account per minor unit of currency, kept reduced.
class Price {
 public:
  constexpr Price() = default;
  Price(std::int64_t numerator, std::int64_t denominator)
      : num_(numerator), den_(denominator) {
    if (num_ <= 0 || den_ <= 0) {
      throw Error(ErrorCode::kInvalidArgument, "price must be positive");
    }
    const std::int64_t g = std::gcd(num_, den_);
    num_ /= g;
    den_ /= g;
  }

  std::int64_t numerator() const noexcept { return num_; }
  std::int64_t denominator() const noexcept { return den_; }

  // Currency amount -> unit-of-account amount, rounded down.
  Amount to_unit_floor(Amount currency) const {
    const __int128 scaled =
        static_cast<__int128>(currency.value()) * num_ / den_;
    if (scaled > std::numeric_limits<std::int64_t>::max()) {
      throw Error(ErrorCode::kOverflow, "price conversion overflow");
    }
    return Amount(static_cast<std::int64_t>(scaled));
  }

  // Unit-of-account amount -> currency amount, rounded down.
  Amount to_currency_floor(Amount unit) const {
    const __int128 scaled = static_cast<__int128>(unit.value()) * den_ / num_;
    return Amount(static_cast<std::int64_t>(scaled));
  }

  std::string str() const {
    if (den_ == 1) return std::to_string(num_);
    return std::to_string(num_) + "/" + std::to_string(den_);
  }

  // Accepts "n" or "n/d".
  static Price parse(std::string_view text) {
    const auto slash = text.find('/');
    auto parse_int = [&](std::string_view part) {
      std::int64_t v = 0;
      const auto [ptr, ec] =
          std::from_chars(part.data(), part.data() + part.size(), v);
      if (ec != std::errc() || ptr != part.data() + part.size()) {
        throw Error(ErrorCode::kParse, "bad price: " + std::string(text));
      }
      return v;
    };
    if (slash == std::string_view::npos) return Price(parse_int(text), 1);
    return Price(parse_int(text.substr(0, slash)),
                 parse_int(text.substr(slash + 1)));
  }

  friend bool operator==(const Price&, const Price&) = default;

 private:
  std::int64_t num_ = 1;
  std::int64_t den_ = 1;
};

using Date = std::chrono::year_month_day;

// ISO calendar date, YYYY-MM-DD.
inline Date parse_date(std::string_view text) {
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
    throw Error(ErrorCode::kParse, "bad date: " + std::string(text));
  }
  auto field = [&](std::size_t pos, std::size_t len, auto& out) {
    const auto [ptr, ec] =
        std::from_chars(text.data() + pos, text.data() + pos + len, out);
    if (ec != std::errc() || ptr != text.data() + pos + len) {
      throw Error(ErrorCode::kParse, "bad date: " + std::string(text));
    }
  };
  field(0, 4, y);
  field(5, 2, m);
  field(8, 2, d);
  const Date date{std::chrono::year{y}, std::chrono::month{m},
                  std::chrono::day{d}};
  if (!date.ok()) throw Error(ErrorCode::kParse, "bad date: " + std::string(text));
  return date;
}

inline std::string format_date(const Date& date) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(date.year()),
                static_cast<unsigned>(date.month()),
                static_cast<unsigned>(date.day()));
  return buf;
}

}  // namespace clearing

template <>
struct std::hash<clearing::AgentId> {
  std::size_t operator()(const clearing::AgentId& id) const noexcept {
    return std::hash<std::string>{}(id.str());
  }
};

#endif  // CLEARING_TYPES_HPP_
