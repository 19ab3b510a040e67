#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "plugnet/actors.hpp"
#include "plugnet/errors.hpp"

using namespace plugnet;

namespace {

const Mac kPlugMac{0xEC, 0x1A, 0x59, 0x00, 0x00, 0x01};
const Mac kApMac{0xC8, 0x3A, 0x35, 0x00, 0x00, 0x07};

struct Rig {
  Network net;
  SmartPlug plug;
  Smartphone phone;
  HttpsServer https;
  TurnServer turn;
  WifiInfo wifi{"home-net-home", kApMac, "pass-pass-0000"};

  explicit Rig(std::uint64_t seed = 7, bool patched = false)
      : net(seed),
        plug("plug", kPlugMac, "wemo plug wemo", "https", "turn"),
        phone("phone", "phone-0001", "home phone home", "https"),
        https("https", "turn", patched),
        turn("turn", "https") {
    net.add_lan("home", wifi.ssid, kApMac);
    net.add_node("plug", "plug", std::string("home"), kPlugMac);
    net.add_node("phone", "phone", std::string("home"));
    net.add_node("https", "https-server");
    net.add_node("turn", "turn-server");
    net.attach_actor("plug", &plug);
    net.attach_actor("phone", &phone);
    net.attach_actor("https", &https);
    net.attach_actor("turn", &turn);
  }

  void pair() {
    plug.enter_ap_mode();
    phone.pair(net, "plug", wifi);
    net.run_until_idle();
  }

  void bind() {
    plug.start_bind(net);
    net.run_until_idle();
  }

  void go_online() {
    plug.request_allocation(net);
    net.run_until_idle();
  }

  void full_setup() {
    pair();
    bind();
    go_online();
    plug.sync_status(net);
    net.run_until_idle();
  }

  std::size_t count_kind(const std::string& kind) const {
    std::size_t n = 0;
    for (const auto& r : net.trace()) {
      if (r.kind == kind) ++n;
    }
    return n;
  }
};

}  // namespace

// ---------------------------------------------------------------------------
// Pairing

TEST_CASE("pairing: fresh plug and phone reach Paired with the home SSID") {
  Rig rig;
  rig.pair();
  CHECK(rig.plug.phase() == PlugPhase::Paired);
  CHECK(rig.plug.home_wifi().ssid == rig.wifi.ssid);
  CHECK(rig.plug.home_wifi().passphrase == rig.wifi.passphrase);
  CHECK(rig.plug.paired_phone_id() == "phone-0001");
  REQUIRE(rig.phone.known_plug().has_value());
  CHECK(rig.phone.known_plug()->serial == derive_serial(kPlugMac));
  CHECK(rig.phone.known_plug()->mac == kPlugMac);
}

TEST_CASE("pairing across networks is a channel error") {
  Network net(1);
  net.add_lan("home", "home-net-home", kApMac);
  net.add_node("plug", "plug", std::string("home"), kPlugMac);
  net.add_node("phone", "phone");  // directly on the internet
  SmartPlug plug("plug", kPlugMac, "wemo plug wemo", "https", "turn");
  Smartphone phone("phone", "phone-0001", "home phone home", "https");
  net.attach_actor("plug", &plug);
  net.attach_actor("phone", &phone);
  plug.enter_ap_mode();
  WifiInfo wifi{"home-net-home", kApMac, "pw"};
  CHECK_THROWS_AS(phone.pair(net, "plug", wifi), ChannelError);
}

TEST_CASE("a LocalAp sniffer captures the pairing exchange (redacted)") {
  Rig rig;
  int sniffer = rig.net.attach_sniffer({Channel::LocalAp, std::nullopt});
  rig.pair();
  auto records = rig.net.sniffed(sniffer);
  bool saw_setup = false;
  for (const auto& r : records) {
    if (r.kind != "PairSetupRequest") continue;
    saw_setup = true;
    auto msg = std::get<PairSetupRequest>(deserialize(from_hex(r.payload_hex)));
    CHECK(msg.wifi.ssid == rig.wifi.ssid);   // attack-surface material
    CHECK(msg.wifi.ap_mac == rig.wifi.ap_mac);
    CHECK(msg.phone_id == "phone-0001");
    CHECK(msg.wifi.passphrase ==
          std::string(rig.wifi.passphrase.size(), '*'));  // never in traces
  }
  CHECK(saw_setup);
}

// ---------------------------------------------------------------------------
// Binding

TEST_CASE("first bind: dummy request, temp key, then both keys issued") {
  Rig rig;
  rig.pair();
  rig.bind();

  CHECK(rig.plug.phase() == PlugPhase::Bound);
  REQUIRE(rig.plug.plug_key().has_value());
  REQUIRE(rig.plug.stored_phone_key().has_value());
  CHECK(rig.plug.plug_key()->role() == KeyRole::PlugKey);
  CHECK(rig.count_kind("BindRequest") == 2);

  const auto* binding = rig.https.binding(rig.plug.identity().serial);
  REQUIRE(binding != nullptr);
  CHECK(binding->plug_key == *rig.plug.plug_key());
  REQUIRE(binding->phones.size() == 1);
  CHECK(binding->phones[0].phone_id == "phone-0001");

  // Phone on the same LAN got the key without asking the server.
  CHECK(rig.count_kind("LocalKeyDelivery") == 1);
  REQUIRE(rig.phone.phone_key().has_value());
  CHECK(*rig.phone.phone_key() == binding->phones[0].key);
}

TEST_CASE("second binding request with a wrong temp key is rejected") {
  Rig rig;
  rig.pair();
  DeviceIdentity id = rig.plug.identity();

  // First (dummy) request, sent raw so the plug actor stays out of the loop.
  BindRequest first;
  first.plug = id;
  first.phone_id = "phone-0001";
  first.phone_description = "home phone home";
  first.wifi = WifiInfo{rig.wifi.ssid, rig.wifi.ap_mac, ""};
  first.timestamp = rig.net.now();
  first.auth = dummy_authorization(id, rig.net.now());
  first.re_register = false;
  rig.net.send("plug", "https", first, Channel::Internet);
  rig.net.run_until_idle();
  REQUIRE(rig.https.has_pending_temp(id.serial));

  // Second request authorized under a random key instead of the temp key.
  BindRequest second = first;
  SecretKey wrong = make_random_key(rig.net.rng(), KeyRole::TempKey);
  second.timestamp = rig.net.now();
  second.auth = compute_authorization(wrong, id, rig.net.now(),
                                      rig.net.rng().next_array<8>());
  rig.net.send("plug", "https", second, Channel::Internet);
  rig.net.run_until_idle();

  CHECK_FALSE(rig.https.has_binding(id.serial));
  bool saw_reject = false;
  for (const auto& r : rig.net.trace()) {
    if (r.kind == "ErrorReply") {
      auto err = std::get<ErrorReply>(deserialize(from_hex(r.payload_hex)));
      if (err.code == ErrorCode::BindRejected) saw_reject = true;
    }
  }
  CHECK(saw_reject);
}

TEST_CASE("temporary keys expire after 60 virtual time units") {
  Rig rig;
  rig.pair();
  DeviceIdentity id = rig.plug.identity();

  BindRequest first;
  first.plug = id;
  first.phone_id = "phone-0001";
  first.phone_description = "home phone home";
  first.wifi = WifiInfo{rig.wifi.ssid, rig.wifi.ap_mac, ""};
  first.timestamp = rig.net.now();
  first.auth = dummy_authorization(id, rig.net.now());
  rig.net.send("plug", "https", first, Channel::Internet);
  rig.net.run_until_idle();

  // Capture the temp key off the wire, as the plug would.
  std::optional<SecretKey> temp;
  for (const auto& r : rig.net.trace()) {
    if (r.kind == "BindResponse") {
      auto resp = std::get<BindResponse>(deserialize(from_hex(r.payload_hex)));
      temp = resp.temp_key;
    }
  }
  REQUIRE(temp.has_value());

  std::uint64_t late = rig.net.now() + kTempKeyTtl + 5;
  rig.net.schedule_call(late, [&](Network& n) {
    BindRequest second = first;
    second.timestamp = n.now();
    second.auth =
        compute_authorization(*temp, id, n.now(), n.rng().next_array<8>());
    n.send("plug", "https", second, Channel::Internet);
  });
  rig.net.run_until_idle();

  CHECK_FALSE(rig.https.has_binding(id.serial));
  bool expired = false;
  for (const auto& r : rig.net.trace()) {
    auto it = r.annotations.find("bind");
    if (it != r.annotations.end() &&
        it->second.find("expired") != std::string::npos) {
      expired = true;
    }
  }
  CHECK(expired);
}

TEST_CASE("reset keeps the plug key byte-for-byte and clears pairing") {
  Rig rig;
  rig.pair();
  rig.bind();
  Bytes key_before = rig.plug.plug_key()->bytes();

  rig.plug.reset();
  CHECK(rig.plug.phase() == PlugPhase::Factory);
  CHECK(rig.plug.paired_phone_id().empty());
  CHECK_FALSE(rig.plug.stored_phone_key().has_value());
  REQUIRE(rig.plug.plug_key().has_value());
  CHECK(rig.plug.plug_key()->bytes() == key_before);

  rig.plug.reset();  // idempotent in Factory
  CHECK(rig.plug.phase() == PlugPhase::Factory);
  CHECK(rig.plug.plug_key()->bytes() == key_before);
}

TEST_CASE("rebind after reset: one request, original key, both phones work") {
  Rig rig;
  rig.pair();
  rig.bind();
  rig.go_online();
  Bytes original_plug_key = rig.plug.plug_key()->bytes();
  SecretKey old_phone_key = *rig.phone.phone_key();
  std::size_t binds_before = rig.count_kind("BindRequest");

  // Reset, pair a second phone, rebind.
  rig.plug.reset();
  Smartphone phone2("phone2", "phone-0002", "home phone home", "https");
  rig.net.add_node("phone2", "phone", std::string("home"));
  rig.net.attach_actor("phone2", &phone2);
  rig.plug.enter_ap_mode();
  phone2.pair(rig.net, "plug", rig.wifi);
  rig.net.run_until_idle();
  rig.plug.start_bind(rig.net);
  rig.net.run_until_idle();

  // Exactly one rebinding request, reRegister set, not dummy.
  CHECK(rig.count_kind("BindRequest") == binds_before + 1);
  BindRequest rebind;
  for (const auto& r : rig.net.trace()) {
    if (r.kind == "BindRequest") {
      rebind = std::get<BindRequest>(deserialize(from_hex(r.payload_hex)));
    }
  }
  CHECK(rebind.re_register);
  CHECK_FALSE(rebind.auth.is_dummy);

  // Original plug key came back; a fresh phone key went to the new phone.
  CHECK(rig.plug.plug_key()->bytes() == original_plug_key);
  REQUIRE(phone2.phone_key().has_value());
  CHECK_FALSE(phone2.phone_key()->same_bytes(old_phone_key));

  // Sharing: both the original and the new phone control the plug.
  rig.plug.request_allocation(rig.net);
  rig.net.run_until_idle();
  rig.phone.control(rig.net, SwitchAction::On);
  rig.net.run_until_idle();
  CHECK(rig.plug.switch_state() == SwitchStatus::On);
  phone2.control(rig.net, SwitchAction::Off);
  rig.net.run_until_idle();
  CHECK(rig.plug.switch_state() == SwitchStatus::Off);
  CHECK(rig.phone.errors_seen() == 0);
  CHECK(phone2.errors_seen() == 0);
}

TEST_CASE("dummy rebinding against an unpatched server leaks the original key") {
  Rig rig;
  rig.pair();
  rig.bind();
  Bytes original = rig.plug.plug_key()->bytes();
  DeviceIdentity id = rig.plug.identity();

  BindRequest req;
  req.plug = id;
  req.phone_id = "atk-phone-0001";
  req.phone_description = "atk phone atk";
  req.wifi = WifiInfo{rig.wifi.ssid, rig.wifi.ap_mac, ""};
  req.timestamp = rig.net.now();
  req.auth = dummy_authorization(id, rig.net.now());
  req.re_register = true;
  rig.net.send("plug", "https", req, Channel::Internet);
  rig.net.run_until_idle();

  std::optional<SecretKey> temp;
  for (const auto& r : rig.net.trace()) {
    if (r.kind == "BindResponse") {
      auto resp = std::get<BindResponse>(deserialize(from_hex(r.payload_hex)));
      if (resp.kind == BindResponseKind::TempKeyIssued) temp = resp.temp_key;
    }
  }
  REQUIRE(temp.has_value());

  BindRequest second = req;
  second.timestamp = rig.net.now();
  second.auth = compute_authorization(*temp, id, rig.net.now(),
                                      rig.net.rng().next_array<8>());
  rig.net.send("plug", "https", second, Channel::Internet);
  rig.net.run_until_idle();

  std::optional<SecretKey> leaked;
  for (const auto& r : rig.net.trace()) {
    if (r.kind == "BindResponse") {
      auto resp = std::get<BindResponse>(deserialize(from_hex(r.payload_hex)));
      if (resp.kind == BindResponseKind::KeysIssued) leaked = resp.plug_key;
    }
  }
  REQUIRE(leaked.has_value());
  CHECK(leaked->bytes() == original);  // the vulnerability, reproduced
}

// ---------------------------------------------------------------------------
// Patched server

namespace {

// Drives a dummy+temp rebinding from `src_node` and returns the issued plug
// key, if any.
std::optional<SecretKey> drive_dummy_rebind(Rig& rig, const NodeId& src_node) {
  DeviceIdentity id = rig.plug.identity();
  BindRequest req;
  req.plug = id;
  req.phone_id = "atk-phone-0001";
  req.phone_description = "atk phone atk";
  req.wifi = WifiInfo{rig.wifi.ssid, rig.wifi.ap_mac, ""};
  req.timestamp = rig.net.now();
  req.auth = dummy_authorization(id, rig.net.now());
  req.re_register = true;
  std::uint64_t from = rig.net.trace().empty() ? 1 : rig.net.trace().back().seq + 1;
  rig.net.send(src_node, "https", req, Channel::Internet);
  rig.net.run_until_idle();

  std::optional<SecretKey> temp;
  for (const auto& r : rig.net.trace()) {
    if (r.seq >= from && r.kind == "BindResponse") {
      auto resp = std::get<BindResponse>(deserialize(from_hex(r.payload_hex)));
      if (resp.kind == BindResponseKind::TempKeyIssued) temp = resp.temp_key;
    }
  }
  if (!temp) return std::nullopt;

  BindRequest second = req;
  second.timestamp = rig.net.now();
  second.auth = compute_authorization(*temp, id, rig.net.now(),
                                      rig.net.rng().next_array<8>());
  from = rig.net.trace().back().seq + 1;
  rig.net.send(src_node, "https", second, Channel::Internet);
  rig.net.run_until_idle();

  for (const auto& r : rig.net.trace()) {
    if (r.seq >= from && r.kind == "BindResponse") {
      auto resp = std::get<BindResponse>(deserialize(from_hex(r.payload_hex)));
      if (resp.kind == BindResponseKind::KeysIssued) return resp.plug_key;
    }
  }
  return std::nullopt;
}

}  // namespace

TEST_CASE("patched server: same-IP rebind with the original key stays stable") {
  Rig rig(7, /*patched=*/true);
  rig.pair();
  rig.bind();
  Bytes original = rig.plug.plug_key()->bytes();

  rig.plug.reset();
  Smartphone phone2("phone2", "phone-0002", "home phone home", "https");
  rig.net.add_node("phone2", "phone", std::string("home"));
  rig.net.attach_actor("phone2", &phone2);
  rig.plug.enter_ap_mode();
  phone2.pair(rig.net, "plug", rig.wifi);
  rig.net.run_until_idle();
  rig.plug.start_bind(rig.net);  // same public IP as the first bind
  rig.net.run_until_idle();

  CHECK(rig.plug.plug_key()->bytes() == original);
}

TEST_CASE("patched server: changed-IP rebind issues a new key and locks the plug out") {
  Rig rig(7, /*patched=*/true);
  rig.pair();
  rig.bind();
  rig.go_online();
  Bytes original = rig.plug.plug_key()->bytes();

  // Attacker node behind its own NAT, hence a different public IP.
  rig.net.add_lan("attacker-lan", "atk-net-atk", Mac{2, 0, 0, 0, 0, 0xAA});
  rig.net.add_node("atk", "fake-plug", std::string("attacker-lan"));

  auto issued = drive_dummy_rebind(rig, "atk");
  REQUIRE(issued.has_value());
  CHECK_FALSE(issued->bytes() == original);  // fresh key, not the original

  const auto* binding = rig.https.binding(rig.plug.identity().serial);
  REQUIRE(binding != nullptr);
  CHECK(binding->plug_key.bytes() == issued->bytes());

  // The real plug still holds the old key: sync and CHAP now fail.
  std::uint64_t rejections = rig.plug.auth_rejections();
  rig.plug.sync_status(rig.net);
  rig.net.run_until_idle();
  CHECK(rig.plug.auth_rejections() == rejections + 1);

  std::uint64_t from = rig.net.trace().back().seq + 1;
  rig.plug.request_allocation(rig.net);
  rig.net.run_until_idle();
  bool denied = false;
  for (const auto& r : rig.net.trace()) {
    if (r.seq >= from && r.kind == "TurnAllocateRequest") {
      auto it = r.annotations.find("allocation");
      denied = it != r.annotations.end() &&
               it->second.rfind("denied", 0) == 0;
    }
  }
  CHECK(denied);
}

TEST_CASE("patched server reacts to the home connection's own IP change") {
  // A legitimate rebind after the home public IP changes also trips the
  // patch: the plug gets a fresh key and keeps working (it stores it).
  Rig rig(7, /*patched=*/true);
  rig.pair();
  rig.bind();
  Bytes original = rig.plug.plug_key()->bytes();

  rig.plug.reset();
  rig.plug.enter_ap_mode();
  rig.phone.pair(rig.net, "plug", rig.wifi);
  rig.net.run_until_idle();

  rig.net.change_public_ip("plug");  // ISP handed out a new address
  rig.plug.start_bind(rig.net);
  rig.net.run_until_idle();

  REQUIRE(rig.plug.plug_key().has_value());
  CHECK_FALSE(rig.plug.plug_key()->bytes() == original);
  const auto* binding = rig.https.binding(rig.plug.identity().serial);
  REQUIRE(binding != nullptr);
  CHECK(binding->plug_key.bytes() == rig.plug.plug_key()->bytes());
}

TEST_CASE("temporary keys are single-use") {
  Rig rig;
  rig.pair();
  DeviceIdentity id = rig.plug.identity();

  BindRequest first;
  first.plug = id;
  first.phone_id = "phone-0001";
  first.phone_description = "home phone home";
  first.wifi = WifiInfo{rig.wifi.ssid, rig.wifi.ap_mac, ""};
  first.timestamp = rig.net.now();
  first.auth = dummy_authorization(id, rig.net.now());
  rig.net.send("plug", "https", first, Channel::Internet);
  rig.net.run_until_idle();

  std::optional<SecretKey> temp;
  for (const auto& r : rig.net.trace()) {
    if (r.kind == "BindResponse") {
      auto resp = std::get<BindResponse>(deserialize(from_hex(r.payload_hex)));
      if (resp.temp_key) temp = resp.temp_key;
    }
  }
  REQUIRE(temp.has_value());

  BindRequest second = first;
  second.timestamp = rig.net.now();
  second.auth = compute_authorization(*temp, id, rig.net.now(),
                                      rig.net.rng().next_array<8>());
  rig.net.send("plug", "https", second, Channel::Internet);
  rig.net.run_until_idle();
  REQUIRE(rig.https.has_binding(id.serial));
  CHECK_FALSE(rig.https.has_pending_temp(id.serial));

  // Replaying the completed second request finds no pending context.
  std::uint64_t from = rig.net.trace().back().seq + 1;
  rig.net.send("plug", "https", second, Channel::Internet);
  rig.net.run_until_idle();
  bool rejected = false;
  for (const auto& r : rig.net.trace()) {
    if (r.seq >= from && r.kind == "ErrorReply") {
      auto err = std::get<ErrorReply>(deserialize(from_hex(r.payload_hex)));
      rejected = rejected || err.code == ErrorCode::BindRejected;
    }
  }
  CHECK(rejected);
}

TEST_CASE("unpatched server returns the original key even from a changed IP") {
  Rig rig(7, /*patched=*/false);
  rig.pair();
  rig.bind();
  Bytes original = rig.plug.plug_key()->bytes();

  rig.net.add_lan("attacker-lan", "atk-net-atk", Mac{2, 0, 0, 0, 0, 0xAA});
  rig.net.add_node("atk", "fake-plug", std::string("attacker-lan"));
  auto issued = drive_dummy_rebind(rig, "atk");
  REQUIRE(issued.has_value());
  CHECK(issued->bytes() == original);
}

// ---------------------------------------------------------------------------
// Key fetch

TEST_CASE("remote key fetch: bound phone gets its key, unknown ids do not") {
  Rig rig;
  rig.pair();
  rig.bind();
  SecretKey expected = *rig.phone.phone_key();

  rig.phone.fetch_key_remote(rig.net);
  rig.net.run_until_idle();
  CHECK(*rig.phone.phone_key() == expected);
  CHECK(rig.count_kind("KeyFetchResponse") == 1);

  // Unknown association.
  KeyFetchRequest req;
  req.phone_id = "phone-9999";
  req.serial = rig.plug.identity().serial;
  req.timestamp = rig.net.now();
  Bytes msg = to_bytes(req.phone_id + req.serial + std::to_string(req.timestamp));
  req.mac_field = hmac_sha1(to_bytes(req.serial), msg);
  rig.net.send("phone", "https", req, Channel::Internet);
  rig.net.run_until_idle();
  CHECK(rig.phone.last_error() == ErrorCode::NotBound);

  // Broken message authentication code.
  KeyFetchRequest bad = req;
  bad.phone_id = "phone-0001";
  bad.mac_field[0] ^= 0x01;
  rig.net.send("phone", "https", bad, Channel::Internet);
  rig.net.run_until_idle();
  CHECK(rig.phone.last_error() == ErrorCode::AuthRejected);
}

// ---------------------------------------------------------------------------
// Status + control

TEST_CASE("status sync, query, command round trip with codes 0/1") {
  Rig rig;
  rig.full_setup();
  rig.phone.query_status(rig.net);
  rig.net.run_until_idle();
  CHECK(rig.phone.last_status() == SwitchStatus::Off);

  rig.phone.control(rig.net, SwitchAction::On);
  rig.net.run_until_idle();
  CHECK(rig.plug.switch_state() == SwitchStatus::On);

  rig.plug.sync_status(rig.net);
  rig.net.run_until_idle();
  rig.phone.query_status(rig.net);
  rig.net.run_until_idle();
  CHECK(rig.phone.last_status() == SwitchStatus::On);
}

TEST_CASE("status goes unavailable after two missed sync periods") {
  Rig rig;
  rig.full_setup();
  std::uint64_t last_sync = rig.net.now();

  rig.net.schedule_call(last_sync + 2 * kSyncPeriod - 1, [&](Network& n) {
    rig.phone.query_status(n);
  });
  rig.net.run_until_idle();
  CHECK(rig.phone.last_status() == SwitchStatus::Off);  // still fresh enough

  rig.net.schedule_call(rig.net.now() + 2 * kSyncPeriod + 5, [&](Network& n) {
    rig.phone.query_status(n);
  });
  rig.net.run_until_idle();
  CHECK(rig.phone.last_status() == SwitchStatus::Unavailable);
}

TEST_CASE("a plug that never synced reads unavailable") {
  Rig rig;
  rig.pair();
  rig.bind();
  rig.go_online();  // no sync yet
  rig.phone.query_status(rig.net);
  rig.net.run_until_idle();
  CHECK(rig.phone.last_status() == SwitchStatus::Unavailable);
}

TEST_CASE("commands with a wrong phone key are rejected and change nothing") {
  Rig rig;
  rig.full_setup();
  SwitchStatus before = rig.plug.switch_state();

  ControlCommand cmd;
  cmd.target_serial = rig.plug.identity().serial;
  cmd.action = SwitchAction::On;
  SecretKey wrong = make_random_key(rig.net.rng(), KeyRole::PhoneKey);
  cmd.auth = compute_authorization(
      wrong, DeviceIdentity{Mac{}, cmd.target_serial, ""}, rig.net.now(),
      rig.net.rng().next_array<8>());
  rig.net.send("phone", "https", cmd, Channel::Internet);
  rig.net.run_until_idle();

  CHECK(rig.phone.last_error() == ErrorCode::AuthRejected);
  CHECK(rig.plug.switch_state() == before);
  CHECK(rig.plug.relayed_commands_received() == 0);
}

TEST_CASE("commands before any TURN allocation return Unavailable") {
  Rig rig;
  rig.pair();
  rig.bind();  // bound but never allocated
  rig.phone.control(rig.net, SwitchAction::On);
  rig.net.run_until_idle();
  CHECK(rig.phone.last_error() == ErrorCode::Unavailable);
  CHECK(rig.plug.switch_state() == SwitchStatus::Off);
}

TEST_CASE("relayed commands with tampered integrity are dropped") {
  Rig rig;
  rig.full_setup();

  ControlCommand cmd;
  cmd.target_serial = rig.plug.identity().serial;
  cmd.action = SwitchAction::On;
  cmd.auth = dummy_authorization(rig.plug.identity(), rig.net.now());
  TurnRelayedCommand relayed;
  relayed.command = cmd;
  // garbage integrity
  for (std::size_t i = 0; i < relayed.integrity.digest.size(); ++i) {
    relayed.integrity.digest[i] = static_cast<std::uint8_t>(i);
  }
  rig.net.send("turn", "plug", relayed, Channel::Internet);
  rig.net.run_until_idle();

  CHECK(rig.plug.switch_state() == SwitchStatus::Off);
  CHECK(rig.plug.relayed_commands_received() == 1);
  CHECK(rig.plug.relayed_commands_applied() == 0);
}

// ---------------------------------------------------------------------------
// Local control

TEST_CASE("local control needs no key; remote path for the same phone is rejected") {
  Rig rig;
  rig.full_setup();

  Smartphone guest("guest", "phone-0002", "home phone home", "https");
  rig.net.add_node("guest", "phone", std::string("home"));
  rig.net.attach_actor("guest", &guest);

  guest.control_local(rig.net, "plug", SwitchAction::On);
  rig.net.run_until_idle();
  CHECK(rig.plug.switch_state() == SwitchStatus::On);
  CHECK(guest.local_acks() == 1);

  guest.control_local(rig.net, "plug", SwitchAction::Off);
  rig.net.run_until_idle();
  CHECK(rig.plug.switch_state() == SwitchStatus::Off);  // involution

  guest.control_remote(rig.net, rig.plug.identity().serial, SwitchAction::On);
  rig.net.run_until_idle();
  CHECK(guest.last_error() == ErrorCode::AuthRejected);
  CHECK(rig.plug.switch_state() == SwitchStatus::Off);
}

TEST_CASE("local control from a different network is a channel error") {
  Rig rig;
  rig.full_setup();
  Smartphone remote("remote", "phone-0003", "home phone home", "https");
  rig.net.add_node("remote", "phone");  // on the internet
  rig.net.attach_actor("remote", &remote);
  CHECK_THROWS_AS(remote.control_local(rig.net, "plug", SwitchAction::On),
                  ChannelError);
}

// ---------------------------------------------------------------------------
// TURN

TEST_CASE("latest allocation wins and is the only delivery target") {
  Rig rig;
  rig.full_setup();
  auto alloc1 = rig.turn.allocation(rig.plug.identity().serial);
  REQUIRE(alloc1.has_value());
  CHECK(alloc1->holder == "plug");

  // A second node allocates with the same (stolen) key bytes.
  rig.net.add_node("imposter", "fake-plug");
  SecretKey stolen(rig.plug.plug_key()->bytes(), KeyRole::PlugKey);
  ChapChallenge challenge = rig.net.rng().next_array<kChapChallengeSize>();
  TurnAllocateRequest req;
  req.serial = rig.plug.identity().serial;
  req.chap = chap_respond(stolen, challenge, rig.plug.identity());
  rig.net.send("imposter", "turn", req, Channel::Internet);
  rig.net.run_until_idle();

  auto alloc2 = rig.turn.allocation(rig.plug.identity().serial);
  REQUIRE(alloc2.has_value());
  CHECK(alloc2->holder == "imposter");
  CHECK(alloc2->port != alloc1->port);  // unique per active allocation

  // Commands now reach only the imposter.
  std::uint64_t before = rig.plug.relayed_commands_received();
  rig.phone.control(rig.net, SwitchAction::On);
  rig.net.run_until_idle();
  CHECK(rig.plug.relayed_commands_received() == before);
  CHECK(rig.plug.switch_state() == SwitchStatus::Off);
}

TEST_CASE("allocation with a random key is denied") {
  Rig rig;
  rig.full_setup();
  rig.net.add_node("imposter", "fake-plug");
  SecretKey random_key = make_random_key(rig.net.rng(), KeyRole::PlugKey);
  TurnAllocateRequest req;
  req.serial = rig.plug.identity().serial;
  req.chap = chap_respond(random_key, rig.net.rng().next_array<16>(),
                          rig.plug.identity());
  std::uint64_t from = rig.net.trace().back().seq + 1;
  rig.net.send("imposter", "turn", req, Channel::Internet);
  rig.net.run_until_idle();

  auto alloc = rig.turn.allocation(rig.plug.identity().serial);
  REQUIRE(alloc.has_value());
  CHECK(alloc->holder == "plug");  // unchanged
  bool denied = false;
  for (const auto& r : rig.net.trace()) {
    if (r.seq >= from && r.kind == "ErrorReply") {
      auto err = std::get<ErrorReply>(deserialize(from_hex(r.payload_hex)));
      denied = denied || err.code == ErrorCode::AllocationDenied;
    }
  }
  CHECK(denied);
}

// ---------------------------------------------------------------------------
// Key provenance

TEST_CASE("every held key appears in exactly one issuance record") {
  Rig rig;
  rig.full_setup();

  std::vector<std::string> plug_key_issuances;
  std::vector<std::string> phone_key_issuances;
  for (const auto& r : rig.net.trace()) {
    auto msg = deserialize(from_hex(r.payload_hex));
    if (const auto* resp = std::get_if<BindResponse>(&msg)) {
      if (resp->plug_key && r.dst.node_id == "plug") {
        plug_key_issuances.push_back(to_hex(resp->plug_key->bytes()));
      }
      if (resp->phone_key && r.dst.node_id == "plug") {
        // phone key travels to the plug first, then locally to the phone
      }
    }
    if (const auto* del = std::get_if<LocalKeyDelivery>(&msg)) {
      if (r.dst.node_id == "phone") {
        phone_key_issuances.push_back(to_hex(del->phone_key.bytes()));
      }
    }
  }
  REQUIRE(plug_key_issuances.size() == 1);
  CHECK(plug_key_issuances[0] == to_hex(rig.plug.plug_key()->bytes()));
  REQUIRE(phone_key_issuances.size() == 1);
  CHECK(phone_key_issuances[0] == to_hex(rig.phone.phone_key()->bytes()));
}
