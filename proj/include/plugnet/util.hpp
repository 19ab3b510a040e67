#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "plugnet/errors.hpp"

namespace plugnet {

using Bytes = std::vector<std::uint8_t>;

std::string to_hex(std::span<const std::uint8_t> data);        // lowercase
std::string to_hex_upper(std::span<const std::uint8_t> data);  // uppercase
Bytes from_hex(const std::string& hex);  // throws ParseError on odd/garbage

inline Bytes to_bytes(const std::string& s) {
  return Bytes(s.begin(), s.end());
}

// Byte equality that always touches every byte of the shorter-length check;
// used for key and digest comparison.
bool constant_time_equal(std::span<const std::uint8_t> a,
                         std::span<const std::uint8_t> b);

// Seeded RNG with stable cross-platform output. std::mt19937_64 is fully
// specified by the standard; the distributions are not, so raw draws are
// mapped here directly.
class DeterministicRng {
 public:
  explicit DeterministicRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, bound). bound must be nonzero.
  std::uint64_t next_below(std::uint64_t bound) { return engine_() % bound; }

  Bytes next_bytes(std::size_t n) {
    Bytes out(n);
    for (auto& b : out) b = static_cast<std::uint8_t>(engine_() & 0xff);
    return out;
  }

  template <std::size_t N>
  std::array<std::uint8_t, N> next_array() {
    std::array<std::uint8_t, N> out{};
    for (auto& b : out) b = static_cast<std::uint8_t>(engine_() & 0xff);
    return out;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace plugnet
