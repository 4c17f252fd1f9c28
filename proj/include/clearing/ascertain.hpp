#ifndef CLEARING_ASCERTAIN_HPP_
#define CLEARING_ASCERTAIN_HPP_

#include <sodium.h>

#include <array>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>

#include "clearing/canonical.hpp"

namespace clearing {

using SigningKey = std::array<std::uint8_t, crypto_auth_KEYBYTES>;

// Pluggable signature scheme over canonical bytes. Tokens are text so they
// can travel in JSON unchanged.
class SignatureScheme {
 public:
  virtual ~SignatureScheme() = default;
  virtual std::string sign(std::span<const std::uint8_t> message,
                           const SigningKey& key) const = 0;
  virtual bool verify(std::span<const std::uint8_t> message,
                      std::string_view token, const SigningKey& key) const = 0;
};

namespace ascertain_detail {

inline void ensure_sodium() {
  static const bool ready = [] { return sodium_init() >= 0; }();
  if (!ready) throw Error(ErrorCode::kIo, "libsodium initialisation failed");
}

}  // namespace ascertain_detail

inline std::string to_hex(std::span<const std::uint8_t> bytes) {
  std::string out(bytes.size() * 2 + 1, '\0');
  sodium_bin2hex(out.data(), out.size(), bytes.data(), bytes.size());
  out.pop_back();
  return out;
}

// Keyed hash (HMAC-SHA-512-256). Symmetric, so the registered key doubles as
// the verification key; adequate for tests and single-operator deployments.
class KeyedHashScheme final : public SignatureScheme {
 public:
  std::string sign(std::span<const std::uint8_t> message,
                   const SigningKey& key) const override {
    ascertain_detail::ensure_sodium();
    std::array<std::uint8_t, crypto_auth_BYTES> mac{};
    crypto_auth(mac.data(), message.data(), message.size(), key.data());
    return "hmac:" + to_hex(mac);
  }

  bool verify(std::span<const std::uint8_t> message, std::string_view token,
              const SigningKey& key) const override {
    ascertain_detail::ensure_sodium();
    constexpr std::string_view kPrefix = "hmac:";
    if (token.substr(0, kPrefix.size()) != kPrefix) return false;
    const std::string_view hex = token.substr(kPrefix.size());
    std::array<std::uint8_t, crypto_auth_BYTES> mac{};
    std::size_t len = 0;
    if (sodium_hex2bin(mac.data(), mac.size(), hex.data(), hex.size(), nullptr,
                       &len, nullptr) != 0 ||
        len != mac.size() || hex.size() != mac.size() * 2) {
      return false;
    }
    return crypto_auth_verify(mac.data(), message.data(), message.size(),
                              key.data()) == 0;
  }
};

inline const SignatureScheme& default_scheme() {
  static const KeyedHashScheme scheme;
  return scheme;
}

// Deterministic key from a seed phrase; used by fixtures and the CLI keygen.
inline SigningKey derive_key(std::string_view seed) {
  ascertain_detail::ensure_sodium();
  SigningKey key{};
  crypto_generichash(key.data(), key.size(),
                     reinterpret_cast<const unsigned char*>(seed.data()),
                     seed.size(), nullptr, 0);
  return key;
}

inline SigningKey key_from_hex(std::string_view hex) {
  ascertain_detail::ensure_sodium();
  SigningKey key{};
  std::size_t len = 0;
  if (sodium_hex2bin(key.data(), key.size(), hex.data(), hex.size(), nullptr,
                     &len, nullptr) != 0 ||
      len != key.size()) {
    throw Error(ErrorCode::kParse, "key must be 64 hex characters");
  }
  return key;
}

// Registered verification keys per agent.
class KeyRing {
 public:
  void add(const AgentId& agent, const SigningKey& key) { keys_[agent] = key; }

  const SigningKey* find(const AgentId& agent) const {
    const auto it = keys_.find(agent);
    return it == keys_.end() ? nullptr : &it->second;
  }

  const std::map<AgentId, SigningKey>& entries() const { return keys_; }

 private:
  std::map<AgentId, SigningKey> keys_;
};

template <typename T>
std::string ascertain(const T& intent, const SigningKey& key,
                      const SignatureScheme& scheme = default_scheme()) {
  return scheme.sign(canonical_serialize(intent), key);
}

// Signs in place and returns the intent for chaining in fixtures.
template <typename T>
T signed_copy(T intent, const SigningKey& key,
              const SignatureScheme& scheme = default_scheme()) {
  intent.ascertainment = ascertain(intent, key, scheme);
  return intent;
}

// True iff the token was produced over the canonical bytes by the bound
// party's registered key. Unknown keys verify false.
template <typename T>
bool verify_ascertainment(const T& intent, const KeyRing& keys,
                          const SignatureScheme& scheme = default_scheme()) {
  const SigningKey* key = keys.find(bound_party(intent));
  if (key == nullptr || intent.ascertainment.empty()) return false;
  return scheme.verify(canonical_serialize(intent), intent.ascertainment, *key);
}

inline bool verify_ascertainment(const Intent& intent, const KeyRing& keys,
                                 const SignatureScheme& scheme = default_scheme()) {
  return std::visit(
      [&](const auto& x) { return verify_ascertainment(x, keys, scheme); },
      intent);
}

}  // namespace clearing

#endif  // CLEARING_ASCERTAIN_HPP_
