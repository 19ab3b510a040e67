#pragma once

#include <array>
#include <cstdint>
#include <string>

namespace plugnet {

using Mac = std::array<std::uint8_t, 6>;

std::string mac_to_string(const Mac& mac);  // "aa:bb:cc:dd:ee:ff"
Mac mac_from_string(const std::string& s);  // throws ParseError

// Identity material a plug advertises and binding requests carry. Genuine
// devices satisfy serial == derive_serial(mac); attackers may forge.
struct DeviceIdentity {
  Mac mac{};
  std::string serial;
  std::string description;

  bool operator==(const DeviceIdentity&) const = default;
};

}  // namespace plugnet
