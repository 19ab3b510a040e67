#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "plugnet/crypto.hpp"
#include "plugnet/messages.hpp"
#include "plugnet/simnet.hpp"

namespace plugnet {

// Default protocol timing, in virtual time units.
inline constexpr std::uint64_t kAuthWindow = 300;
inline constexpr std::uint64_t kTempKeyTtl = 60;
inline constexpr std::uint64_t kSyncPeriod = 10;
inline constexpr std::uint64_t kStalePeriods = 2;

enum class PlugPhase : std::uint8_t { Factory, ApMode, Paired, Bound, Online };

const char* plug_phase_name(PlugPhase p);

// ---------------------------------------------------------------------------
// SmartPlug

class SmartPlug : public Actor {
 public:
  SmartPlug(NodeId node, const Mac& mac, std::string description,
            NodeId https_node, NodeId turn_node);

  // Driver operations -----------------------------------------------------
  void enter_ap_mode();

  // First-ever bind: dummy-authorized request, then a temp-key-authorized
  // second request. After a reset with a retained key: a single reRegister
  // request authorized with the original plug key.
  void start_bind(Network& net);

  // CHAP to the TURN server; Online once the relay port arrives.
  void request_allocation(Network& net);

  void sync_status(Network& net);

  // Clears pairing state, keeps the plug key.
  void reset();

  // Views -------------------------------------------------------------
  const DeviceIdentity& identity() const { return identity_; }
  PlugPhase phase() const { return phase_; }
  SwitchStatus switch_state() const { return switch_; }
  const std::optional<SecretKey>& plug_key() const { return plug_key_; }
  const std::optional<SecretKey>& stored_phone_key() const {
    return stored_phone_key_;
  }
  std::optional<std::uint16_t> relay_port() const { return relay_port_; }
  const std::string& paired_phone_id() const { return pairing_.phone_id; }
  const WifiInfo& home_wifi() const { return pairing_.wifi; }
  std::uint64_t relayed_commands_received() const {
    return relayed_received_;
  }
  std::uint64_t relayed_commands_applied() const { return relayed_applied_; }
  std::uint64_t bind_rejections() const { return bind_rejections_; }
  std::uint64_t auth_rejections() const { return auth_rejections_; }

  void on_message(Network& net, const Delivery& d) override;

 private:
  void send_bind_request(Network& net, const SecretKey* auth_key);

  struct Pairing {
    std::string phone_id;
    std::string phone_description;
    std::uint64_t timestamp = 0;
    WifiInfo wifi;
    NodeId phone_node;
  };

  NodeId node_;
  NodeId https_node_;
  NodeId turn_node_;
  DeviceIdentity identity_;
  PlugPhase phase_ = PlugPhase::Factory;
  SwitchStatus switch_ = SwitchStatus::Off;
  Pairing pairing_;
  std::optional<SecretKey> plug_key_;
  std::optional<SecretKey> stored_phone_key_;
  std::optional<SecretKey> temp_key_;
  std::optional<std::uint16_t> relay_port_;
  bool bind_pending_ = false;
  bool bind_re_register_ = false;
  // The vendor's plugs keep the key across factory resets; that retention is
  // what makes rebinding (and the sharing attack) possible.
  static constexpr bool kRetainsKeyAfterReset = true;
  std::uint64_t relayed_received_ = 0;
  std::uint64_t relayed_applied_ = 0;
  std::uint64_t bind_rejections_ = 0;
  std::uint64_t auth_rejections_ = 0;
};

// ---------------------------------------------------------------------------
// Smartphone

class Smartphone : public Actor {
 public:
  Smartphone(NodeId node, std::string phone_id, std::string description,
             NodeId https_node);

  // Local pairing against a plug in AP mode. Throws ChannelError unless both
  // nodes share a LAN.
  void pair(Network& net, const NodeId& plug_node, const WifiInfo& wifi);

  // Remote phone-key fetch from the HTTPS server.
  void fetch_key_remote(Network& net);

  void query_status(Network& net);
  void control(Network& net, SwitchAction action);

  // Remote command addressed by explicit serial; what a phone without a
  // completed pairing can still attempt against the HTTPS server.
  void control_remote(Network& net, const std::string& target_serial,
                      SwitchAction action);

  // Direct command over the local network; no key involved. Throws
  // ChannelError unless both nodes share a LAN.
  void control_local(Network& net, const NodeId& plug_node,
                     SwitchAction action);

  const std::string& phone_id() const { return phone_id_; }
  const std::optional<SecretKey>& phone_key() const { return phone_key_; }
  const std::optional<DeviceIdentity>& known_plug() const {
    return known_plug_;
  }
  std::optional<SwitchStatus> last_status() const { return last_status_; }
  const std::vector<SwitchStatus>& statuses_seen() const {
    return statuses_seen_;
  }
  std::optional<ErrorCode> last_error() const { return last_error_; }
  std::uint64_t errors_seen() const { return errors_seen_; }
  std::uint64_t local_acks() const { return local_acks_; }

  void on_message(Network& net, const Delivery& d) override;

 private:
  AuthField make_auth(Network& net, const std::string& serial) const;

  NodeId node_;
  NodeId https_node_;
  std::string phone_id_;
  std::string description_;
  std::optional<SecretKey> phone_key_;
  std::optional<DeviceIdentity> known_plug_;
  WifiInfo pending_wifi_;
  bool pairing_pending_ = false;
  std::optional<SwitchStatus> last_status_;
  std::vector<SwitchStatus> statuses_seen_;
  std::optional<ErrorCode> last_error_;
  std::uint64_t errors_seen_ = 0;
  std::uint64_t local_acks_ = 0;
};

// ---------------------------------------------------------------------------
// HttpsServer

class HttpsServer : public Actor {
 public:
  HttpsServer(NodeId node, NodeId turn_node, bool patched = false);

  void set_patched(bool patched) { patched_ = patched; }
  bool patched() const { return patched_; }

  struct PhoneAssoc {
    std::string phone_id;
    SecretKey key;
  };

  struct Binding {
    SecretKey plug_key;
    std::vector<PhoneAssoc> phones;  // issuance order; all stay valid (sharing)
    WifiInfo wifi;
    std::string last_public_ip;
  };

  bool has_binding(const std::string& serial) const {
    return bindings_.count(serial) > 0;
  }
  const Binding* binding(const std::string& serial) const;
  std::vector<std::string> bound_serials() const;
  std::optional<SwitchStatus> recorded_status(const std::string& serial) const;
  std::optional<std::uint16_t> relay_port(const std::string& serial) const;
  bool has_pending_temp(const std::string& serial) const {
    return pending_.count(serial) > 0;
  }

  void on_message(Network& net, const Delivery& d) override;

 private:
  struct PendingTemp {
    SecretKey key;
    std::uint64_t issued_at = 0;
    bool re_register = false;
    std::string phone_id;
    std::string phone_description;
    WifiInfo wifi;
    DeviceIdentity plug;
  };

  struct StatusInfo {
    SwitchStatus status = SwitchStatus::Off;
    std::uint64_t at = 0;
  };

  void handle_bind(Network& net, const Delivery& d, const BindRequest& req);
  void issue_keys(Network& net, const Delivery& d, const DeviceIdentity& plug,
                  const std::string& phone_id, const WifiInfo& wifi,
                  bool re_register);
  void handle_key_fetch(Network& net, const Delivery& d,
                        const KeyFetchRequest& req);
  void handle_status_update(Network& net, const Delivery& d,
                            const StatusUpdate& msg);
  void handle_status_query(Network& net, const Delivery& d,
                           const StatusQuery& msg);
  void handle_control(Network& net, const Delivery& d,
                      const ControlCommand& cmd);

  const SecretKey* phone_key_matching(const Binding& b,
                                      const AuthField& auth,
                                      std::uint64_t now) const;

  NodeId node_;
  NodeId turn_node_;
  bool patched_ = false;
  std::map<std::string, Binding> bindings_;
  std::map<std::string, PendingTemp> pending_;
  std::map<std::string, StatusInfo> status_;
  std::map<std::string, std::uint16_t> relay_ports_;
};

// ---------------------------------------------------------------------------
// TurnServer

class TurnServer : public Actor {
 public:
  TurnServer(NodeId node, NodeId https_node);

  struct Allocation {
    NodeId holder;
    std::uint16_t port = 0;
  };

  std::optional<Allocation> allocation(const std::string& serial) const;
  std::vector<std::pair<std::string, Allocation>> all_allocations() const;
  bool knows_key(const std::string& serial) const {
    return plug_keys_.count(serial) > 0;
  }

  void on_message(Network& net, const Delivery& d) override;

 private:
  NodeId node_;
  NodeId https_node_;
  std::map<std::string, SecretKey> plug_keys_;
  std::map<std::string, Allocation> allocations_;
  std::uint16_t next_port_ = 49152;
};

}  // namespace plugnet
