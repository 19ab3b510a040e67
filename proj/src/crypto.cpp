#include "plugnet/crypto.hpp"

#include <cstring>

#include "plugnet/errors.hpp"

namespace plugnet {

namespace {

inline std::uint32_t rotl32(std::uint32_t v, int n) {
  return (v << n) | (v >> (32 - n));
}

}  // namespace

void Sha1::process_block(const std::uint8_t* block) {
  std::uint32_t w[80];
  for (int i = 0; i < 16; ++i) {
    w[i] = (std::uint32_t(block[i * 4]) << 24) |
           (std::uint32_t(block[i * 4 + 1]) << 16) |
           (std::uint32_t(block[i * 4 + 2]) << 8) |
           std::uint32_t(block[i * 4 + 3]);
  }
  for (int i = 16; i < 80; ++i) {
    w[i] = rotl32(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1);
  }

  std::uint32_t a = state_[0], b = state_[1], c = state_[2], d = state_[3],
                e = state_[4];
  for (int i = 0; i < 80; ++i) {
    std::uint32_t f, k;
    if (i < 20) {
      f = (b & c) | (~b & d);
      k = 0x5A827999u;
    } else if (i < 40) {
      f = b ^ c ^ d;
      k = 0x6ED9EBA1u;
    } else if (i < 60) {
      f = (b & c) | (b & d) | (c & d);
      k = 0x8F1BBCDCu;
    } else {
      f = b ^ c ^ d;
      k = 0xCA62C1D6u;
    }
    std::uint32_t tmp = rotl32(a, 5) + f + e + k + w[i];
    e = d;
    d = c;
    c = rotl32(b, 30);
    b = a;
    a = tmp;
  }

  state_[0] += a;
  state_[1] += b;
  state_[2] += c;
  state_[3] += d;
  state_[4] += e;
}

void Sha1::update(std::span<const std::uint8_t> data) {
  total_bytes_ += data.size();
  std::size_t pos = 0;
  if (buffered_ > 0) {
    std::size_t take = std::min(kBlockSize - buffered_, data.size());
    std::memcpy(buffer_.data() + buffered_, data.data(), take);
    buffered_ += take;
    pos += take;
    if (buffered_ == kBlockSize) {
      process_block(buffer_.data());
      buffered_ = 0;
    }
  }
  while (data.size() - pos >= kBlockSize) {
    process_block(data.data() + pos);
    pos += kBlockSize;
  }
  if (pos < data.size()) {
    std::memcpy(buffer_.data(), data.data() + pos, data.size() - pos);
    buffered_ = data.size() - pos;
  }
}

Digest Sha1::finish() {
  std::uint64_t bit_len = total_bytes_ * 8;
  const std::uint8_t pad = 0x80;
  update(std::span<const std::uint8_t>(&pad, 1));
  const std::uint8_t zero = 0x00;
  while (buffered_ != 56) {
    update(std::span<const std::uint8_t>(&zero, 1));
  }
  std::uint8_t len_bytes[8];
  for (int i = 0; i < 8; ++i) {
    len_bytes[i] = static_cast<std::uint8_t>(bit_len >> (56 - 8 * i));
  }
  update(std::span<const std::uint8_t>(len_bytes, 8));

  Digest out{};
  for (int i = 0; i < 5; ++i) {
    out[i * 4] = static_cast<std::uint8_t>(state_[i] >> 24);
    out[i * 4 + 1] = static_cast<std::uint8_t>(state_[i] >> 16);
    out[i * 4 + 2] = static_cast<std::uint8_t>(state_[i] >> 8);
    out[i * 4 + 3] = static_cast<std::uint8_t>(state_[i]);
  }
  return out;
}

Digest hmac_sha1(std::span<const std::uint8_t> key,
                 std::span<const std::uint8_t> message) {
  if (key.empty()) {
    throw InvalidKey("hmac_sha1: empty key");
  }

  std::array<std::uint8_t, Sha1::kBlockSize> block{};
  if (key.size() > Sha1::kBlockSize) {
    Digest hashed = Sha1::digest(key);
    std::memcpy(block.data(), hashed.data(), hashed.size());
  } else {
    std::memcpy(block.data(), key.data(), key.size());
  }

  std::array<std::uint8_t, Sha1::kBlockSize> ipad{};
  std::array<std::uint8_t, Sha1::kBlockSize> opad{};
  for (std::size_t i = 0; i < Sha1::kBlockSize; ++i) {
    ipad[i] = block[i] ^ 0x36;
    opad[i] = block[i] ^ 0x5c;
  }

  Sha1 inner;
  inner.update(ipad);
  inner.update(message);
  Digest inner_digest = inner.finish();

  Sha1 outer;
  outer.update(opad);
  outer.update(inner_digest);
  return outer.finish();
}

const char* key_role_name(KeyRole role) {
  switch (role) {
    case KeyRole::PlugKey:
      return "PlugKey";
    case KeyRole::PhoneKey:
      return "PhoneKey";
    case KeyRole::TempKey:
      return "TempKey";
  }
  return "?";
}

SecretKey::SecretKey(Bytes bytes, KeyRole role)
    : bytes_(std::move(bytes)), role_(role) {
  if (bytes_.empty() || bytes_.size() > 64) {
    throw InvalidKey("secret key must be 1..64 bytes, got " +
                     std::to_string(bytes_.size()));
  }
}

SecretKey make_random_key(DeterministicRng& rng, KeyRole role) {
  return SecretKey(rng.next_bytes(kIssuedKeySize), role);
}

std::string canonical_auth_string(const std::string& serial,
                                  std::uint64_t timestamp,
                                  const Nonce& nonce) {
  return serial + ":" + std::to_string(timestamp) + ":" + to_hex(nonce);
}

AuthField compute_authorization(const SecretKey& key,
                                const DeviceIdentity& identity,
                                std::uint64_t timestamp, const Nonce& nonce) {
  AuthField field;
  field.serial = identity.serial;
  field.timestamp = timestamp;
  field.nonce = nonce;
  field.is_dummy = false;
  Bytes msg = to_bytes(canonical_auth_string(identity.serial, timestamp, nonce));
  Digest d = hmac_sha1(key.bytes(), msg);
  field.digest.assign(d.begin(), d.end());
  return field;
}

AuthField dummy_authorization(const DeviceIdentity& identity,
                              std::uint64_t timestamp) {
  AuthField field;
  field.serial = identity.serial;
  field.timestamp = timestamp;
  field.nonce = Nonce{};
  field.is_dummy = true;
  field.digest = to_bytes(kDummyAuthValue);
  return field;
}

const char* auth_decision_name(AuthDecision d) {
  switch (d) {
    case AuthDecision::Accept:
      return "Accept";
    case AuthDecision::RejectDummy:
      return "RejectDummy";
    case AuthDecision::RejectStale:
      return "RejectStale";
    case AuthDecision::RejectBadDigest:
      return "RejectBadDigest";
  }
  return "?";
}

AuthDecision verify_authorization(const SecretKey& key, const AuthField& field,
                                  std::uint64_t now, std::uint64_t window) {
  if (field.is_dummy) {
    return AuthDecision::RejectDummy;
  }
  std::uint64_t age =
      now >= field.timestamp ? now - field.timestamp : field.timestamp - now;
  if (age > window) {
    return AuthDecision::RejectStale;
  }
  Bytes msg = to_bytes(
      canonical_auth_string(field.serial, field.timestamp, field.nonce));
  Digest expected = hmac_sha1(key.bytes(), msg);
  if (!constant_time_equal(expected, field.digest)) {
    return AuthDecision::RejectBadDigest;
  }
  return AuthDecision::Accept;
}

ChapExchange chap_respond(const SecretKey& key, const ChapChallenge& challenge,
                          const DeviceIdentity& peer) {
  if (key.role() != KeyRole::PlugKey) {
    throw WrongKeyRole(std::string("chap_respond requires a PlugKey, got ") +
                       key_role_name(key.role()));
  }
  ChapExchange ex;
  ex.challenge = challenge;
  ex.peer_serial = peer.serial;
  Bytes msg(challenge.begin(), challenge.end());
  Bytes serial_bytes = to_bytes(peer.serial);
  msg.insert(msg.end(), serial_bytes.begin(), serial_bytes.end());
  ex.response = hmac_sha1(key.bytes(), msg);
  return ex;
}

bool chap_verify(const SecretKey& key, const ChapExchange& exchange) {
  if (key.role() != KeyRole::PlugKey) {
    throw WrongKeyRole(std::string("chap_verify requires a PlugKey, got ") +
                       key_role_name(key.role()));
  }
  Bytes msg(exchange.challenge.begin(), exchange.challenge.end());
  Bytes serial_bytes = to_bytes(exchange.peer_serial);
  msg.insert(msg.end(), serial_bytes.begin(), serial_bytes.end());
  Digest expected = hmac_sha1(key.bytes(), msg);
  return constant_time_equal(expected, exchange.response);
}

IntegrityAttribute compute_message_integrity(
    const SecretKey& key, std::span<const std::uint8_t> message_bytes) {
  IntegrityAttribute attr;
  attr.digest = hmac_sha1(key.bytes(), message_bytes);
  return attr;
}

bool verify_message_integrity(const SecretKey& key,
                              std::span<const std::uint8_t> message_bytes,
                              const IntegrityAttribute& attribute) {
  Digest expected = hmac_sha1(key.bytes(), message_bytes);
  return constant_time_equal(expected, attribute.digest);
}

std::string derive_serial(const Mac& mac) {
  return "221" + to_hex_upper(mac);
}

}  // namespace plugnet
