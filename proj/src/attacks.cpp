#include "plugnet/attacks.hpp"

#include <algorithm>

#include "plugnet/errors.hpp"

namespace plugnet {

const char* attack_outcome_name(AttackOutcomeKind k) {
  switch (k) {
    case AttackOutcomeKind::AttackerControls:
      return "AttackerControls";
    case AttackOutcomeKind::VictimDoS:
      return "VictimDoS";
    case AttackOutcomeKind::Failed:
      return "Failed";
  }
  return "?";
}

std::vector<AttackerKnowledge> wardrive(const Network& net,
                                        const VendorOui& vendor_oui) {
  std::vector<AttackerKnowledge> out;
  auto lans = net.lans();
  for (const NodeInfo& n : net.nodes()) {
    if (!n.mac || !n.lan) continue;
    const Mac& mac = *n.mac;
    if (mac[0] != vendor_oui[0] || mac[1] != vendor_oui[1] ||
        mac[2] != vendor_oui[2]) {
      continue;
    }
    for (const LanInfo& lan : lans) {
      if (lan.lan_id == *n.lan) {
        AttackerKnowledge k;
        k.victim_mac = mac;
        k.victim_serial = derive_serial(mac);
        k.ap_ssid = lan.ssid;
        k.ap_mac = lan.ap_mac;
        out.push_back(std::move(k));
        break;
      }
    }
  }
  return out;
}

bool verify_evidence(const std::vector<TraceRecord>& trace,
                     const AttackOutcome& outcome) {
  if (outcome.evidence.size() != outcome.claims.size()) return false;
  for (std::uint64_t seq : outcome.evidence) {
    bool found = std::any_of(
        trace.begin(), trace.end(),
        [seq](const TraceRecord& rec) { return rec.seq == seq; });
    if (!found) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// FakePlug

FakePlug::FakePlug(NodeId node, const AttackerKnowledge& knowledge,
                   std::string fabricated_phone_id,
                   std::string fabricated_phone_description, NodeId https_node,
                   NodeId turn_node)
    : node_(std::move(node)),
      https_node_(std::move(https_node)),
      turn_node_(std::move(turn_node)),
      phone_id_(std::move(fabricated_phone_id)),
      phone_description_(std::move(fabricated_phone_description)) {
  identity_.mac = knowledge.victim_mac;
  identity_.serial = knowledge.victim_serial;
  identity_.description = "wemo plug";
  wifi_.ssid = knowledge.ap_ssid;
  wifi_.ap_mac = knowledge.ap_mac;
}

void FakePlug::send_fake_bind(Network& net, const SecretKey* auth_key) {
  BindRequest req;
  req.plug = identity_;
  req.phone_id = phone_id_;
  req.phone_description = phone_description_;
  req.wifi.ssid = wifi_.ssid;
  req.wifi.ap_mac = wifi_.ap_mac;
  req.timestamp = net.now();
  req.re_register = true;  // rebinding request, per the attack script
  if (auth_key != nullptr) {
    req.auth = compute_authorization(*auth_key, identity_, net.now(),
                                     net.rng().next_array<kNonceSize>());
  } else {
    req.auth = dummy_authorization(identity_, net.now());
  }
  net.send(node_, https_node_, req, Channel::Internet);
}

void FakePlug::start_fake_rebind(Network& net) {
  send_fake_bind(net, nullptr);  // authorization value "dummy"
}

void FakePlug::request_allocation_with(Network& net, const SecretKey& key) {
  ChapChallenge challenge = net.rng().next_array<kChapChallengeSize>();
  TurnAllocateRequest req;
  req.serial = identity_.serial;
  req.chap = chap_respond(key, challenge, identity_);
  net.send(node_, turn_node_, req, Channel::Internet);
}

void FakePlug::on_message(Network& net, const Delivery& d) {
  if (const auto* resp = std::get_if<BindResponse>(&d.message)) {
    if (resp->kind == BindResponseKind::TempKeyIssued) {
      temp_key_ = resp->temp_key;
      net.annotate_current("attack", "temp key captured; resending with it");
      send_fake_bind(net, &*temp_key_);
    } else {
      stolen_plug_key_ = resp->plug_key;
      issued_phone_key_ = resp->phone_key;
      net.annotate_current("attack", "plug key and new phone key captured");
    }
    return;
  }
  if (const auto* alloc = std::get_if<TurnAllocateResponse>(&d.message)) {
    relay_port_ = alloc->relay_port;
    net.annotate_current("attack", "relay allocation captured");
    return;
  }
  if (std::get_if<TurnRelayedCommand>(&d.message) != nullptr) {
    ++received_commands_;
    net.annotate_current("attack", "victim command hijacked");
    return;
  }
  if (const auto* err = std::get_if<ErrorReply>(&d.message)) {
    if (err->code == ErrorCode::BindRejected) ++bind_rejections_;
    if (err->code == ErrorCode::AllocationDenied) ++allocation_denials_;
    return;
  }
  net.annotate_current("unhandled", message_kind_name(kind_of(d.message)));
}

// ---------------------------------------------------------------------------
// FakePhone

FakePhone::FakePhone(NodeId node, std::string phone_id, NodeId https_node)
    : node_(std::move(node)),
      https_node_(std::move(https_node)),
      phone_id_(std::move(phone_id)) {}

void FakePhone::fetch_key_remote(Network& net, const std::string& serial) {
  KeyFetchRequest req;
  req.phone_id = phone_id_;
  req.serial = serial;
  req.timestamp = net.now();
  Bytes msg = to_bytes(req.phone_id + serial + std::to_string(req.timestamp));
  req.mac_field = hmac_sha1(to_bytes(serial), msg);
  net.send(node_, https_node_, req, Channel::Internet);
}

void FakePhone::query_status(Network& net, const std::string& serial) {
  StatusQuery q;
  DeviceIdentity ref{Mac{}, serial, ""};
  if (phone_key_) {
    q.auth = compute_authorization(*phone_key_, ref, net.now(),
                                   net.rng().next_array<kNonceSize>());
  } else {
    q.auth = dummy_authorization(ref, net.now());
  }
  net.send(node_, https_node_, q, Channel::Internet);
}

void FakePhone::control(Network& net, const std::string& serial,
                        SwitchAction action) {
  ControlCommand cmd;
  cmd.target_serial = serial;
  cmd.action = action;
  DeviceIdentity ref{Mac{}, serial, ""};
  if (phone_key_) {
    cmd.auth = compute_authorization(*phone_key_, ref, net.now(),
                                     net.rng().next_array<kNonceSize>());
  } else {
    cmd.auth = dummy_authorization(ref, net.now());
  }
  net.send(node_, https_node_, cmd, Channel::Internet);
}

void FakePhone::on_message(Network& net, const Delivery& d) {
  if (const auto* fetched = std::get_if<KeyFetchResponse>(&d.message)) {
    phone_key_ = fetched->phone_key;
    net.annotate_current("attack", "fabricated phone id accepted; key fetched");
    return;
  }
  if (const auto* reply = std::get_if<StatusReply>(&d.message)) {
    last_status_ = reply->status;
    return;
  }
  if (std::get_if<ErrorReply>(&d.message) != nullptr) {
    ++errors_seen_;
    return;
  }
  net.annotate_current("unhandled", message_kind_name(kind_of(d.message)));
}

// ---------------------------------------------------------------------------
// Drivers

namespace {

std::uint64_t next_seq(const Network& net) {
  return net.trace().empty() ? 1 : net.trace().back().seq + 1;
}

// Last record at or after `from` with the given kind delivered to `dst`.
std::optional<std::uint64_t> find_delivery(const Network& net,
                                           std::uint64_t from,
                                           const std::string& kind,
                                           const NodeId& dst) {
  std::optional<std::uint64_t> found;
  for (const TraceRecord& rec : net.trace()) {
    if (rec.seq >= from && rec.kind == kind && rec.dst.node_id == dst) {
      found = rec.seq;
    }
  }
  return found;
}

std::string annotation_of(const Network& net, std::uint64_t seq,
                          const std::string& key) {
  for (const TraceRecord& rec : net.trace()) {
    if (rec.seq == seq) {
      auto it = rec.annotations.find(key);
      return it == rec.annotations.end() ? "" : it->second;
    }
  }
  return "";
}

bool annotation_starts_with(const Network& net, std::uint64_t seq,
                            const std::string& key,
                            const std::string& prefix) {
  return annotation_of(net, seq, key).rfind(prefix, 0) == 0;
}

SwitchAction toggled(SwitchStatus current) {
  return current == SwitchStatus::On ? SwitchAction::Off : SwitchAction::On;
}

}  // namespace

AttackOutcome run_sharing_attack(Network& net, const AttackEnv& env,
                                 AttackerKnowledge& knowledge) {
  AttackOutcome out;
  if (!env.victim_plug.plug_key()) {
    out.note = "victim plug is not bound; nothing to steal";
    return out;
  }
  const SecretKey original = *env.victim_plug.plug_key();

  // Step 1-2: dummy rebinding request with fabricated smartphone info, then
  // the temp-key-authorized second request.
  std::uint64_t from = next_seq(net);
  env.fake_plug.start_fake_rebind(net);
  net.run_until_idle();
  if (!env.fake_plug.stolen_plug_key()) {
    out.note = "server issued no keys to the fake plug";
    return out;
  }
  knowledge.stolen_plug_key = env.fake_plug.stolen_plug_key();
  knowledge.attacker_phone_key = env.fake_plug.issued_phone_key();
  auto keys_seq =
      find_delivery(net, from, "BindResponse", env.fake_plug_node);

  bool got_original = env.fake_plug.stolen_plug_key()->same_bytes(original);

  if (got_original) {
    // Step 3: fake phone fetches its (fabricated) association's key over the
    // wire, then commands the victim plug.
    env.fake_phone.fetch_key_remote(net, knowledge.victim_serial);
    net.run_until_idle();
    if (!env.fake_phone.phone_key()) {
      out.note = "phone key fetch for the fabricated id failed";
      return out;
    }
    from = next_seq(net);
    SwitchStatus before = env.victim_plug.switch_state();
    env.fake_phone.control(net, knowledge.victim_serial, toggled(before));
    net.run_until_idle();
    bool controlled =
        env.victim_plug.switch_state() == status_of(toggled(before));
    auto attacker_relay_seq =
        find_delivery(net, from, "TurnRelayedCommand", env.victim_plug_node);

    // Sharing: the victim phone's next command must still be accepted.
    from = next_seq(net);
    SwitchStatus before2 = env.victim_plug.switch_state();
    std::uint64_t victim_errors = env.victim_phone.errors_seen();
    env.victim_phone.control(net, toggled(before2));
    net.run_until_idle();
    bool victim_ok =
        env.victim_plug.switch_state() == status_of(toggled(before2)) &&
        env.victim_phone.errors_seen() == victim_errors;
    auto victim_relay_seq =
        find_delivery(net, from, "TurnRelayedCommand", env.victim_plug_node);

    if (controlled && victim_ok && keys_seq && attacker_relay_seq &&
        victim_relay_seq) {
      out.kind = AttackOutcomeKind::AttackerControls;
      out.evidence = {*keys_seq, *attacker_relay_seq, *victim_relay_seq};
      out.claims = {
          "original plug key and new phone key issued to the fake plug",
          "attacker command relayed to and applied by the victim plug",
          "victim phone command still accepted after the attack"};
    } else {
      out.note = "attack flow incomplete on an unpatched server";
    }
    return out;
  }

  // Patched server: a fresh plug key was issued, so the victim plug can no
  // longer authenticate anywhere.
  from = next_seq(net);
  env.victim_plug.sync_status(net);
  net.run_until_idle();
  auto sync_seq = find_delivery(net, from, "StatusUpdate", env.https_node);
  bool sync_rejected =
      sync_seq && annotation_starts_with(net, *sync_seq, "auth", "rejected");

  from = next_seq(net);
  env.victim_plug.request_allocation(net);
  net.run_until_idle();
  auto alloc_seq =
      find_delivery(net, from, "TurnAllocateRequest", env.turn_node);
  bool alloc_denied =
      alloc_seq &&
      annotation_starts_with(net, *alloc_seq, "allocation", "denied");

  if (sync_rejected && alloc_denied && keys_seq) {
    out.kind = AttackOutcomeKind::VictimDoS;
    out.evidence = {*keys_seq, *sync_seq, *alloc_seq};
    out.claims = {"patched server issued a fresh plug key to the fake plug",
                  "victim plug authorization rejected after the attack",
                  "victim plug CHAP allocation denied after the attack"};
  } else {
    out.note = "patched-server flow incomplete";
  }
  return out;
}

AttackOutcome run_hijack_attack(Network& net, const AttackEnv& env,
                                const AttackerKnowledge& knowledge) {
  AttackOutcome out;
  if (!knowledge.stolen_plug_key) {
    out.note = "no stolen plug key; run the sharing attack first";
    return out;
  }

  std::uint64_t from = next_seq(net);
  env.fake_plug.request_allocation_with(net, *knowledge.stolen_plug_key);
  net.run_until_idle();
  if (!env.fake_plug.relay_port()) {
    out.note = "relay allocation denied";
    return out;
  }
  auto alloc_seq =
      find_delivery(net, from, "TurnAllocateRequest", env.turn_node);

  std::uint64_t to_real_before = env.victim_plug.relayed_commands_received();
  std::uint64_t to_fake_before = env.fake_plug.received_commands();

  std::vector<std::uint64_t> relay_seqs;
  const SwitchAction actions[3] = {SwitchAction::On, SwitchAction::Off,
                                   SwitchAction::On};
  for (SwitchAction action : actions) {
    from = next_seq(net);
    env.victim_phone.control(net, action);
    net.run_until_idle();
    auto seq =
        find_delivery(net, from, "TurnRelayedCommand", env.fake_plug_node);
    if (seq) relay_seqs.push_back(*seq);
  }

  std::uint64_t to_fake = env.fake_plug.received_commands() - to_fake_before;
  std::uint64_t to_real =
      env.victim_plug.relayed_commands_received() - to_real_before;

  if (to_fake == 3 && to_real == 0 && relay_seqs.size() == 3 && alloc_seq) {
    out.kind = AttackOutcomeKind::VictimDoS;
    out.evidence = {*alloc_seq, relay_seqs[0], relay_seqs[1], relay_seqs[2]};
    out.claims = {"fake plug re-allocated the relay with the stolen key",
                  "victim command 1 relayed to the fake plug",
                  "victim command 2 relayed to the fake plug",
                  "victim command 3 relayed to the fake plug"};
  } else {
    out.note = "hijack incomplete: " + std::to_string(to_fake) +
               " commands to fake plug, " + std::to_string(to_real) +
               " to real plug";
  }
  return out;
}

}  // namespace plugnet
