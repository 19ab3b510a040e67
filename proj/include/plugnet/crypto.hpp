#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>

#include "plugnet/identity.hpp"
#include "plugnet/util.hpp"

namespace plugnet {

// ---------------------------------------------------------------------------
// SHA-1 / HMAC-SHA1

inline constexpr std::size_t kDigestSize = 20;

using Digest = std::array<std::uint8_t, kDigestSize>;

class Sha1 {
 public:
  static constexpr std::size_t kBlockSize = 64;

  void update(std::span<const std::uint8_t> data);
  Digest finish();

  static Digest digest(std::span<const std::uint8_t> data) {
    Sha1 h;
    h.update(data);
    return h.finish();
  }

 private:
  void process_block(const std::uint8_t* block);

  std::array<std::uint32_t, 5> state_{0x67452301u, 0xEFCDAB89u, 0x98BADCFEu,
                                      0x10325476u, 0xC3D2E1F0u};
  std::uint64_t total_bytes_ = 0;
  std::array<std::uint8_t, kBlockSize> buffer_{};
  std::size_t buffered_ = 0;
};

// Throws InvalidKey on an empty key.
Digest hmac_sha1(std::span<const std::uint8_t> key,
                 std::span<const std::uint8_t> message);

// ---------------------------------------------------------------------------
// Keys

enum class KeyRole : std::uint8_t { PlugKey, PhoneKey, TempKey };

const char* key_role_name(KeyRole role);

// An HMAC secret issued by the HTTPS server. 1..64 bytes, role fixed at
// creation.
class SecretKey {
 public:
  SecretKey(Bytes bytes, KeyRole role);

  const Bytes& bytes() const noexcept { return bytes_; }
  KeyRole role() const noexcept { return role_; }

  bool operator==(const SecretKey& other) const {
    return role_ == other.role_ && constant_time_equal(bytes_, other.bytes_);
  }

  bool same_bytes(const SecretKey& other) const {
    return constant_time_equal(bytes_, other.bytes_);
  }

 private:
  Bytes bytes_;
  KeyRole role_;
};

inline constexpr std::size_t kIssuedKeySize = 20;

SecretKey make_random_key(DeterministicRng& rng, KeyRole role);

// ---------------------------------------------------------------------------
// Authorization fields

inline constexpr std::size_t kNonceSize = 8;
using Nonce = std::array<std::uint8_t, kNonceSize>;

inline const std::string kDummyAuthValue = "dummy";

// Authorization material attached to authenticated requests. digest holds
// exactly 20 bytes, except the dummy form where it holds the ASCII bytes
// "dummy".
struct AuthField {
  std::string serial;  // identity reference of the subject device
  std::uint64_t timestamp = 0;
  Nonce nonce{};
  Bytes digest;
  bool is_dummy = false;

  bool operator==(const AuthField&) const = default;
};

// serial ":" decimal(timestamp) ":" lowercase-hex(nonce)
std::string canonical_auth_string(const std::string& serial,
                                  std::uint64_t timestamp,
                                  const Nonce& nonce);

AuthField compute_authorization(const SecretKey& key,
                                const DeviceIdentity& identity,
                                std::uint64_t timestamp, const Nonce& nonce);

AuthField dummy_authorization(const DeviceIdentity& identity,
                              std::uint64_t timestamp);

enum class AuthDecision : std::uint8_t {
  Accept,
  RejectDummy,
  RejectStale,
  RejectBadDigest,
};

const char* auth_decision_name(AuthDecision d);

AuthDecision verify_authorization(const SecretKey& key, const AuthField& field,
                                  std::uint64_t now, std::uint64_t window);

inline bool auth_accepted(AuthDecision d) { return d == AuthDecision::Accept; }

// ---------------------------------------------------------------------------
// CHAP

inline constexpr std::size_t kChapChallengeSize = 16;
using ChapChallenge = std::array<std::uint8_t, kChapChallengeSize>;

struct ChapExchange {
  ChapChallenge challenge{};
  Digest response{};
  std::string peer_serial;

  bool operator==(const ChapExchange&) const = default;
};

// response = HMAC-SHA1(plug key, challenge || peer serial).
// Throws WrongKeyRole unless key.role() == PlugKey.
ChapExchange chap_respond(const SecretKey& key, const ChapChallenge& challenge,
                          const DeviceIdentity& peer);

bool chap_verify(const SecretKey& key, const ChapExchange& exchange);

// ---------------------------------------------------------------------------
// MESSAGE-INTEGRITY

struct IntegrityAttribute {
  Digest digest{};

  bool operator==(const IntegrityAttribute&) const = default;
};

// message_bytes must already carry a zeroed integrity attribute; callers at
// the message layer zero the slot before invoking.
IntegrityAttribute compute_message_integrity(
    const SecretKey& key, std::span<const std::uint8_t> message_bytes);

bool verify_message_integrity(const SecretKey& key,
                              std::span<const std::uint8_t> message_bytes,
                              const IntegrityAttribute& attribute);

// ---------------------------------------------------------------------------
// Serial derivation

// "221" + uppercase hex of all six MAC bytes. Fixed injective map standing in
// for the vendor's (undisclosed but MAC-predictable) scheme.
std::string derive_serial(const Mac& mac);

}  // namespace plugnet
