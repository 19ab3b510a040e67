#include "plugnet/identity.hpp"

#include <cstdio>

#include "plugnet/errors.hpp"
#include "plugnet/util.hpp"

namespace plugnet {

std::string mac_to_string(const Mac& mac) {
  char buf[18];
  std::snprintf(buf, sizeof buf, "%02x:%02x:%02x:%02x:%02x:%02x", mac[0],
                mac[1], mac[2], mac[3], mac[4], mac[5]);
  return buf;
}

Mac mac_from_string(const std::string& s) {
  Mac mac{};
  if (s.size() != 17) {
    throw ParseError("MAC address must look like aa:bb:cc:dd:ee:ff", 0);
  }
  std::string hex;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i % 3 == 2) {
      if (s[i] != ':' && s[i] != '-') {
        throw ParseError("MAC address separator expected", i);
      }
    } else {
      hex.push_back(s[i]);
    }
  }
  Bytes bytes = from_hex(hex);
  std::copy(bytes.begin(), bytes.end(), mac.begin());
  return mac;
}

}  // namespace plugnet
