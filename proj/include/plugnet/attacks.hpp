#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "plugnet/actors.hpp"

namespace plugnet {

using VendorOui = std::array<std::uint8_t, 3>;

// Everything the sharing attack starts from: four public or derivable facts,
// plus whatever the attack itself yields.
struct AttackerKnowledge {
  Mac victim_mac{};
  std::string victim_serial;
  std::string ap_ssid;
  Mac ap_mac{};
  std::optional<SecretKey> stolen_plug_key;
  std::optional<SecretKey> attacker_phone_key;
};

// Harvests device MAC + AP identifiers from beacon metadata on local
// networks, filtered to the vendor's OUI block, and predicts serials.
std::vector<AttackerKnowledge> wardrive(const Network& net,
                                        const VendorOui& vendor_oui);

enum class AttackOutcomeKind : std::uint8_t {
  AttackerControls,
  VictimDoS,
  Failed,
};

const char* attack_outcome_name(AttackOutcomeKind k);

struct AttackOutcome {
  AttackOutcomeKind kind = AttackOutcomeKind::Failed;
  std::vector<std::uint64_t> evidence;  // trace seq numbers
  std::vector<std::string> claims;      // parallel to evidence
  std::string note;
};

// Every evidence seq must point at an existing trace record.
bool verify_evidence(const std::vector<TraceRecord>& trace,
                     const AttackOutcome& outcome);

// ---------------------------------------------------------------------------
// Attacker actors

// Software plug impersonating the victim: sends dummy-authorized rebinding
// requests with fabricated smartphone information, then continues the
// two-step exchange with the issued temporary key.
class FakePlug : public Actor {
 public:
  FakePlug(NodeId node, const AttackerKnowledge& knowledge,
           std::string fabricated_phone_id,
           std::string fabricated_phone_description, NodeId https_node,
           NodeId turn_node);

  void start_fake_rebind(Network& net);
  void request_allocation_with(Network& net, const SecretKey& key);

  const DeviceIdentity& forged_identity() const { return identity_; }
  const std::optional<SecretKey>& stolen_plug_key() const {
    return stolen_plug_key_;
  }
  const std::optional<SecretKey>& issued_phone_key() const {
    return issued_phone_key_;
  }
  std::optional<std::uint16_t> relay_port() const { return relay_port_; }
  std::uint64_t received_commands() const { return received_commands_; }
  std::uint64_t bind_rejections() const { return bind_rejections_; }
  std::uint64_t allocation_denials() const { return allocation_denials_; }

  void on_message(Network& net, const Delivery& d) override;

 private:
  void send_fake_bind(Network& net, const SecretKey* auth_key);

  NodeId node_;
  NodeId https_node_;
  NodeId turn_node_;
  DeviceIdentity identity_;  // forged from wardriving knowledge
  WifiInfo wifi_;
  std::string phone_id_;
  std::string phone_description_;
  std::optional<SecretKey> temp_key_;
  std::optional<SecretKey> stolen_plug_key_;
  std::optional<SecretKey> issued_phone_key_;
  std::optional<std::uint16_t> relay_port_;
  std::uint64_t received_commands_ = 0;
  std::uint64_t bind_rejections_ = 0;
  std::uint64_t allocation_denials_ = 0;
};

// Software smartphone using the attacker's issued phone key.
class FakePhone : public Actor {
 public:
  FakePhone(NodeId node, std::string phone_id, NodeId https_node);

  void fetch_key_remote(Network& net, const std::string& serial);
  void query_status(Network& net, const std::string& serial);
  void control(Network& net, const std::string& serial, SwitchAction action);

  const std::string& phone_id() const { return phone_id_; }
  const std::optional<SecretKey>& phone_key() const { return phone_key_; }
  std::optional<SwitchStatus> last_status() const { return last_status_; }
  std::uint64_t errors_seen() const { return errors_seen_; }

  void on_message(Network& net, const Delivery& d) override;

 private:
  NodeId node_;
  NodeId https_node_;
  std::string phone_id_;
  std::optional<SecretKey> phone_key_;
  std::optional<SwitchStatus> last_status_;
  std::uint64_t errors_seen_ = 0;
};

// ---------------------------------------------------------------------------
// Scenario drivers

// Node wiring + omniscient victim references the drivers use to classify the
// outcome and to collect evidence.
struct AttackEnv {
  FakePlug& fake_plug;
  FakePhone& fake_phone;
  SmartPlug& victim_plug;
  Smartphone& victim_phone;
  NodeId fake_plug_node;
  NodeId fake_phone_node;
  NodeId victim_plug_node;
  NodeId https_node;
  NodeId turn_node;
};

// Runs the sharing attack end to end. Against an unpatched server the
// attacker ends up with the original plug key and a valid phone key and the
// victim keeps working (AttackerControls); against a patched server the
// victim plug is locked out (VictimDoS). Updates `knowledge` with stolen
// material.
AttackOutcome run_sharing_attack(Network& net, const AttackEnv& env,
                                 AttackerKnowledge& knowledge);

// Re-allocates the TURN relay with the stolen plug key and measures where the
// victim's commands land.
AttackOutcome run_hijack_attack(Network& net, const AttackEnv& env,
                                const AttackerKnowledge& knowledge);

}  // namespace plugnet
