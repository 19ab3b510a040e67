#include "plugnet/scenarios.hpp"

#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "plugnet/errors.hpp"

namespace plugnet {

using ordered_json = nlohmann::ordered_json;

namespace {

// Scenario roster. String constants deliberately repeat characters so that
// plaintext fields stay below the entropy classifier's short-field threshold
// in the benign trace.
const Mac kPlugMac{0xEC, 0x1A, 0x59, 0x00, 0x00, 0x01};
const Mac kHomeApMac{0xC8, 0x3A, 0x35, 0x00, 0x00, 0x07};
const Mac kNeighborCamMac{0x00, 0x11, 0x00, 0x11, 0x00, 0x2A};
const Mac kNeighborApMac{0x30, 0x23, 0x03, 0x00, 0x00, 0x32};
const Mac kAttackerApMac{0x02, 0x00, 0x00, 0x00, 0x00, 0xAA};
constexpr const char* kHomeSsid = "home-wemo-home";
constexpr const char* kHomePassphrase = "let-me-in-0000";
constexpr const char* kPlugDesc = "wemo plug wemo";
constexpr const char* kPhoneId = "phone-0001";
constexpr const char* kPhoneDesc = "home phone home";
constexpr const char* kGuestPhoneId = "phone-0002";
constexpr const char* kNeighborSsid = "cam-net-cam";
constexpr const char* kAttackerSsid = "atk-net-atk";
constexpr const char* kAtkPhoneId = "atk-phone-0001";
constexpr const char* kAtkPhoneDesc = "atk phone atk";

constexpr const char* kPlugNode = "plug-victim";
constexpr const char* kPhoneNode = "phone-victim";
constexpr const char* kGuestNode = "phone-guest";
constexpr const char* kHttpsNode = "https-server";
constexpr const char* kTurnNode = "turn-server";
constexpr const char* kFakePlugNode = "fake-plug";
constexpr const char* kFakePhoneNode = "fake-phone";

struct World {
  Network net;
  SmartPlug plug;
  Smartphone phone;
  HttpsServer https;
  TurnServer turn;
  WifiInfo home_wifi;

  World(std::uint64_t seed, bool patched)
      : net(seed),
        plug(kPlugNode, kPlugMac, kPlugDesc, kHttpsNode, kTurnNode),
        phone(kPhoneNode, kPhoneId, kPhoneDesc, kHttpsNode),
        https(kHttpsNode, kTurnNode, patched),
        turn(kTurnNode, kHttpsNode) {
    net.add_lan("home", kHomeSsid, kHomeApMac);
    net.add_node(kPlugNode, "plug", std::string("home"), kPlugMac);
    net.add_node(kPhoneNode, "phone", std::string("home"));
    net.add_node(kHttpsNode, "https-server");
    net.add_node(kTurnNode, "turn-server");
    net.attach_actor(kPlugNode, &plug);
    net.attach_actor(kPhoneNode, &phone);
    net.attach_actor(kHttpsNode, &https);
    net.attach_actor(kTurnNode, &turn);
    home_wifi = WifiInfo{kHomeSsid, kHomeApMac, kHomePassphrase};
  }

  // Pairing, two-step binding, relay allocation and a first status sync.
  void script_victim_setup() {
    net.schedule_call(1, [this](Network& n) {
      plug.enter_ap_mode();
      phone.pair(n, kPlugNode, home_wifi);
    });
    net.schedule_call(6, [this](Network& n) { plug.start_bind(n); });
    net.schedule_call(12, [this](Network& n) { plug.request_allocation(n); });
    net.schedule_call(16, [this](Network& n) { plug.sync_status(n); });
  }
};

struct Checker {
  std::vector<std::string> failures;

  void require(bool cond, const std::string& what) {
    if (!cond) failures.push_back(what);
  }

  bool ok() const { return failures.empty(); }

  std::string first_failure() const {
    return failures.empty() ? "" : failures.front();
  }
};

std::uint64_t first_seq_of_kind(const Network& net, const std::string& kind) {
  for (const TraceRecord& rec : net.trace()) {
    if (rec.kind == kind) return rec.seq;
  }
  return 0;
}

std::size_t count_kind(const Network& net, const std::string& kind) {
  std::size_t n = 0;
  for (const TraceRecord& rec : net.trace()) {
    if (rec.kind == kind) ++n;
  }
  return n;
}

ordered_json key_json(const std::optional<SecretKey>& key) {
  if (!key) return nullptr;
  return to_hex(key->bytes());
}

ordered_json plug_json(const SmartPlug& plug) {
  ordered_json j;
  j["serial"] = plug.identity().serial;
  j["mac"] = mac_to_string(plug.identity().mac);
  j["phase"] = plug_phase_name(plug.phase());
  j["switch"] = static_cast<int>(plug.switch_state());
  j["plug_key"] = key_json(plug.plug_key());
  j["relayed_commands_received"] = plug.relayed_commands_received();
  j["relayed_commands_applied"] = plug.relayed_commands_applied();
  j["auth_rejections"] = plug.auth_rejections();
  return j;
}

ordered_json phone_json(const Smartphone& phone) {
  ordered_json j;
  j["phone_id"] = phone.phone_id();
  j["phone_key"] = key_json(phone.phone_key());
  j["errors_seen"] = phone.errors_seen();
  ordered_json seen = ordered_json::array();
  for (SwitchStatus s : phone.statuses_seen()) seen.push_back(static_cast<int>(s));
  j["statuses_seen"] = seen;
  return j;
}

ordered_json server_json(const HttpsServer& https) {
  ordered_json j;
  j["patched"] = https.patched();
  ordered_json bindings = ordered_json::array();
  for (const std::string& serial : https.bound_serials()) {
    const HttpsServer::Binding* b = https.binding(serial);
    ordered_json e;
    e["serial"] = serial;
    e["plug_key"] = to_hex(b->plug_key.bytes());
    ordered_json phones = ordered_json::array();
    for (const auto& assoc : b->phones) {
      ordered_json p;
      p["phone_id"] = assoc.phone_id;
      p["phone_key"] = to_hex(assoc.key.bytes());
      phones.push_back(p);
    }
    e["phones"] = phones;
    e["last_public_ip"] = b->last_public_ip;
    auto status = https.recorded_status(serial);
    e["last_status"] = status ? ordered_json(static_cast<int>(*status))
                              : ordered_json(nullptr);
    bindings.push_back(e);
  }
  j["bindings"] = bindings;
  return j;
}

ordered_json turn_json(const TurnServer& turn) {
  ordered_json j;
  ordered_json allocs = ordered_json::array();
  for (const auto& [serial, alloc] : turn.all_allocations()) {
    ordered_json e;
    e["serial"] = serial;
    e["holder"] = alloc.holder;
    e["relay_port"] = alloc.port;
    allocs.push_back(e);
  }
  j["allocations"] = allocs;
  return j;
}

ScenarioRun finish_run(const ScenarioConfig& config, World& w,
                       const Checker& checker, const std::string& outcome,
                       const AttackOutcome* attack, ordered_json detail,
                       ordered_json extra_states) {
  ScenarioRun run;
  run.ok = checker.ok();
  run.outcome = outcome;
  run.failure = checker.first_failure();
  if (attack != nullptr) run.evidence = attack->evidence;
  run.trace_jsonl = w.net.trace_jsonl();

  ordered_json states;
  states["plugs"] = ordered_json::array({plug_json(w.plug)});
  states["phones"] = ordered_json::array({phone_json(w.phone)});
  for (auto& [key, value] : extra_states.items()) states[key] = value;
  states["https_server"] = server_json(w.https);
  states["turn_server"] = turn_json(w.turn);
  run.final_states_json = states.dump(2) + "\n";

  ordered_json report;
  report["scenario"] = config.name;
  report["seed"] = config.seed;
  report["patched"] = w.https.patched();
  report["outcome"] = run.outcome;
  ordered_json ev = ordered_json::array();
  ordered_json evd = ordered_json::array();
  if (attack != nullptr) {
    for (std::size_t i = 0; i < attack->evidence.size(); ++i) {
      ev.push_back(attack->evidence[i]);
      ordered_json e;
      e["seq"] = attack->evidence[i];
      e["claim"] = i < attack->claims.size() ? attack->claims[i] : "";
      evd.push_back(e);
    }
  }
  report["evidence"] = ev;
  report["evidence_detail"] = evd;
  ordered_json post;
  post["ok"] = run.ok;
  ordered_json fails = ordered_json::array();
  for (const std::string& f : checker.failures) fails.push_back(f);
  post["failures"] = fails;
  report["postconditions"] = post;
  report["detail"] = detail;
  report["final_states"] = states;
  run.report_json = report.dump(2) + "\n";
  return run;
}

// ---------------------------------------------------------------------------
// benign

ScenarioRun run_benign(const ScenarioConfig& config) {
  World w(config.seed, config.patched);
  Network& net = w.net;

  net.schedule_call(1, [&w](Network& n) {
    w.plug.enter_ap_mode();
    w.phone.pair(n, kPlugNode, w.home_wifi);
  });
  net.schedule_call(6, [&w](Network& n) { w.plug.start_bind(n); });
  net.schedule_call(12, [&w](Network& n) { w.phone.fetch_key_remote(n); });
  net.schedule_call(15, [&w](Network& n) { w.plug.request_allocation(n); });
  net.schedule_call(20, [&w](Network& n) { w.plug.sync_status(n); });
  net.schedule_call(22, [&w](Network& n) { w.phone.query_status(n); });
  net.schedule_call(24, [&w](Network& n) {
    w.phone.control(n, SwitchAction::On);
  });
  net.schedule_call(30, [&w](Network& n) { w.plug.sync_status(n); });
  net.schedule_call(32, [&w](Network& n) { w.phone.query_status(n); });
  net.schedule_call(34, [&w](Network& n) {
    w.phone.control(n, SwitchAction::Off);
  });
  net.schedule_call(40, [&w](Network& n) { w.plug.sync_status(n); });
  net.schedule_call(42, [&w](Network& n) { w.phone.query_status(n); });
  // The plug stops synchronizing here; by t=65 the server considers it gone.
  net.schedule_call(65, [&w](Network& n) { w.phone.query_status(n); });
  net.run_until_idle();

  Checker c;
  c.require(w.plug.phase() == PlugPhase::Online, "plug reaches Online");
  c.require(w.plug.switch_state() == SwitchStatus::Off,
            "plug ends switched off");
  std::vector<SwitchStatus> expected{SwitchStatus::Off, SwitchStatus::On,
                                     SwitchStatus::Off,
                                     SwitchStatus::Unavailable};
  c.require(w.phone.statuses_seen() == expected,
            "phone observes statuses 0, 1, 0 and finally 3");
  c.require(w.phone.phone_key().has_value(), "phone holds its issued key");

  std::uint64_t pairing = first_seq_of_kind(net, "PairGetInfoRequest");
  std::uint64_t setup = first_seq_of_kind(net, "PairSetupRequest");
  std::uint64_t bind = first_seq_of_kind(net, "BindRequest");
  std::uint64_t sync = first_seq_of_kind(net, "StatusUpdate");
  std::uint64_t control = first_seq_of_kind(net, "ControlCommand");
  c.require(pairing && setup && bind && sync && control,
            "all protocol phases appear in the trace");
  c.require(pairing < setup && setup < bind && bind < sync && sync < control,
            "phases appear in protocol order");

  // Two-step first bind: dummy then temp-key authorization.
  std::vector<bool> bind_dummy_flags;
  for (const TraceRecord& rec : net.trace()) {
    if (rec.kind != "BindRequest") continue;
    auto msg = deserialize(from_hex(rec.payload_hex));
    bind_dummy_flags.push_back(std::get<BindRequest>(msg).auth.is_dummy);
  }
  c.require(bind_dummy_flags == std::vector<bool>{true, false},
            "first bind request is dummy-authorized, second temp-key-authorized");
  c.require(count_kind(net, "ErrorReply") == 0, "no rejections in a benign run");
  c.require(count_kind(net, "LocalKeyDelivery") == 1,
            "phone key delivered over the local network");
  c.require(count_kind(net, "KeyFetchResponse") == 1,
            "remote key fetch answered");

  ordered_json detail;
  detail["statuses_seen"] = ordered_json::array(
      {static_cast<int>(expected[0]), static_cast<int>(expected[1]),
       static_cast<int>(expected[2]), static_cast<int>(expected[3])});
  return finish_run(config, w, c, c.ok() ? "Passed" : "Failed", nullptr,
                    detail, ordered_json::object());
}

// ---------------------------------------------------------------------------
// local-control

ScenarioRun run_local_control(const ScenarioConfig& config) {
  World w(config.seed, config.patched);
  Network& net = w.net;
  Smartphone guest(kGuestNode, kGuestPhoneId, kPhoneDesc, kHttpsNode);
  net.add_node(kGuestNode, "phone", std::string("home"));
  net.attach_actor(kGuestNode, &guest);

  w.script_victim_setup();
  net.run_until_idle();

  Checker c;
  c.require(w.plug.phase() == PlugPhase::Online, "plug online after setup");
  SwitchStatus initial = w.plug.switch_state();

  // Unpaired, keyless guest on the same LAN: toggles the plug freely.
  guest.control_local(net, kPlugNode, SwitchAction::On);
  net.run_until_idle();
  c.require(w.plug.switch_state() == SwitchStatus::On,
            "unpaired guest switches the plug on over the local network");
  guest.control_local(net, kPlugNode, SwitchAction::Off);
  net.run_until_idle();
  c.require(w.plug.switch_state() == initial,
            "second local toggle restores the original state");
  c.require(guest.local_acks() == 2, "plug acknowledged both local commands");

  // The same phone through the cloud path is rejected.
  std::uint64_t errors_before = guest.errors_seen();
  guest.control_remote(net, w.plug.identity().serial, SwitchAction::On);
  net.run_until_idle();
  c.require(guest.errors_seen() == errors_before + 1 &&
                guest.last_error() == ErrorCode::AuthRejected,
            "remote command from the unbound phone is rejected");
  c.require(w.plug.switch_state() == initial,
            "rejected remote command leaves the plug untouched");

  bool saw_local_control = false;
  for (const TraceRecord& rec : net.trace()) {
    if (rec.kind == "ControlCommand" && rec.channel == Channel::LocalAp &&
        rec.annotations.count("local_control")) {
      saw_local_control = true;
    }
  }
  c.require(saw_local_control,
            "trace shows the no-authentication local control path");

  ordered_json extra;
  extra["guest_phones"] = ordered_json::array({phone_json(guest)});
  return finish_run(config, w, c, c.ok() ? "Passed" : "Failed", nullptr,
                    ordered_json::object(), extra);
}

// ---------------------------------------------------------------------------
// sharing attack (and its patched variant)

struct AttackerSetup {
  FakePlug fake_plug;
  FakePhone fake_phone;

  AttackerSetup(Network& net, const AttackerKnowledge& knowledge)
      : fake_plug(kFakePlugNode, knowledge, kAtkPhoneId, kAtkPhoneDesc,
                  kHttpsNode, kTurnNode),
        fake_phone(kFakePhoneNode, kAtkPhoneId, kHttpsNode) {
    net.attach_actor(kFakePlugNode, &fake_plug);
    net.attach_actor(kFakePhoneNode, &fake_phone);
  }
};

void add_attack_topology(Network& net) {
  net.add_lan("neighbor", kNeighborSsid, kNeighborApMac);
  net.add_node("camera-neighbor", "camera", std::string("neighbor"),
               kNeighborCamMac);
  net.add_lan("attacker-lan", kAttackerSsid, kAttackerApMac);
  net.add_node(kFakePlugNode, "fake-plug", std::string("attacker-lan"));
  net.add_node(kFakePhoneNode, "fake-phone", std::string("attacker-lan"));
}

ScenarioRun run_sharing_scenario(const ScenarioConfig& config, bool patched) {
  World w(config.seed, patched);
  Network& net = w.net;
  add_attack_topology(net);
  w.script_victim_setup();
  net.run_until_idle();

  Checker c;
  c.require(w.plug.phase() == PlugPhase::Online,
            "victim plug online before the attack");
  if (!w.plug.plug_key()) {
    c.require(false, "victim plug holds a key before the attack");
    return finish_run(config, w, c, "Failed", nullptr, ordered_json::object(),
                      ordered_json::object());
  }
  SecretKey original = *w.plug.plug_key();

  // Everything the attacker starts from comes out of wardriving.
  std::vector<AttackerKnowledge> found = wardrive(net, config.vendor_oui);
  c.require(found.size() == 1, "wardriving finds exactly the victim plug");
  if (found.empty()) {
    return finish_run(config, w, c, "Failed", nullptr, ordered_json::object(),
                      ordered_json::object());
  }
  AttackerKnowledge knowledge = found.front();
  c.require(knowledge.victim_serial == w.plug.identity().serial,
            "serial predicted from the MAC matches the real serial");

  AttackerSetup attacker(net, knowledge);
  AttackEnv env{attacker.fake_plug, attacker.fake_phone, w.plug, w.phone,
                kFakePlugNode,      kFakePhoneNode,      kPlugNode,
                kHttpsNode,         kTurnNode};
  AttackOutcome outcome = run_sharing_attack(net, env, knowledge);

  if (!patched) {
    c.require(outcome.kind == AttackOutcomeKind::AttackerControls,
              "sharing attack yields AttackerControls on the unpatched server");
    c.require(knowledge.stolen_plug_key &&
                  knowledge.stolen_plug_key->same_bytes(original),
              "attacker holds the byte-identical original plug key");
    c.require(knowledge.attacker_phone_key.has_value(),
              "attacker holds a freshly issued phone key");
  } else {
    c.require(outcome.kind == AttackOutcomeKind::VictimDoS,
              "sharing attack against the patch degrades to a DoS");
    c.require(knowledge.stolen_plug_key &&
                  !knowledge.stolen_plug_key->same_bytes(original),
              "patched server issued a fresh plug key, not the original");
    const HttpsServer::Binding* b = w.https.binding(knowledge.victim_serial);
    c.require(b != nullptr && !b->plug_key.same_bytes(original),
              "binding record now carries the new plug key");
  }
  c.require(verify_evidence(net.trace(), outcome),
            "every evidence seq exists in the trace");

  ordered_json detail;
  detail["original_plug_key"] = to_hex(original.bytes());
  detail["stolen_plug_key"] = key_json(knowledge.stolen_plug_key);
  detail["attacker_phone_key"] = key_json(knowledge.attacker_phone_key);
  detail["note"] = outcome.note;
  ordered_json extra;
  extra["fake_plug"] = ordered_json::object(
      {{"stolen_plug_key", key_json(attacker.fake_plug.stolen_plug_key())},
       {"received_commands", attacker.fake_plug.received_commands()}});
  return finish_run(config, w, c, attack_outcome_name(outcome.kind), &outcome,
                    detail, extra);
}

// ---------------------------------------------------------------------------
// hijack

ScenarioRun run_hijack_scenario(const ScenarioConfig& config) {
  World w(config.seed, /*patched=*/false);
  Network& net = w.net;
  add_attack_topology(net);
  w.script_victim_setup();
  net.run_until_idle();

  Checker c;
  c.require(w.plug.phase() == PlugPhase::Online,
            "victim plug online before the attack");
  if (!w.plug.plug_key()) {
    c.require(false, "victim plug holds a key before the attack");
    return finish_run(config, w, c, "Failed", nullptr, ordered_json::object(),
                      ordered_json::object());
  }
  SecretKey original = *w.plug.plug_key();

  std::vector<AttackerKnowledge> found = wardrive(net, config.vendor_oui);
  c.require(found.size() == 1, "wardriving finds exactly the victim plug");
  if (found.empty()) {
    return finish_run(config, w, c, "Failed", nullptr, ordered_json::object(),
                      ordered_json::object());
  }
  AttackerKnowledge knowledge = found.front();
  AttackerSetup attacker(net, knowledge);
  AttackEnv env{attacker.fake_plug, attacker.fake_phone, w.plug, w.phone,
                kFakePlugNode,      kFakePhoneNode,      kPlugNode,
                kHttpsNode,         kTurnNode};

  // Step 1: key theft via the sharing attack.
  AttackOutcome sharing = run_sharing_attack(net, env, knowledge);
  c.require(sharing.kind == AttackOutcomeKind::AttackerControls,
            "key theft (sharing attack) succeeds first");

  // Snapshot the binding record: hijacking must not touch it.
  const HttpsServer::Binding* before = w.https.binding(knowledge.victim_serial);
  std::string plug_key_before =
      before != nullptr ? to_hex(before->plug_key.bytes()) : "";
  std::size_t phones_before = before != nullptr ? before->phones.size() : 0;

  // Steps 2-3: re-allocate the relay with the stolen key, then watch the
  // victim's commands land on the fake plug.
  AttackOutcome outcome = run_hijack_attack(net, env, knowledge);
  c.require(outcome.kind == AttackOutcomeKind::VictimDoS,
            "hijack denies service to the real plug");
  auto alloc = w.turn.allocation(knowledge.victim_serial);
  c.require(alloc && alloc->holder == kFakePlugNode,
            "TURN allocation now points at the fake plug");

  const HttpsServer::Binding* after = w.https.binding(knowledge.victim_serial);
  c.require(after != nullptr &&
                to_hex(after->plug_key.bytes()) == plug_key_before &&
                after->phones.size() == phones_before,
            "hijack leaves the HTTPS binding record untouched");
  c.require(verify_evidence(net.trace(), outcome),
            "every evidence seq exists in the trace");

  ordered_json detail;
  detail["original_plug_key"] = to_hex(original.bytes());
  detail["stolen_plug_key"] = key_json(knowledge.stolen_plug_key);
  detail["commands_to_fake_plug"] = attacker.fake_plug.received_commands();
  detail["sharing_evidence"] = [&] {
    ordered_json arr = ordered_json::array();
    for (std::uint64_t s : sharing.evidence) arr.push_back(s);
    return arr;
  }();
  ordered_json extra;
  extra["fake_plug"] = ordered_json::object(
      {{"relay_port", attacker.fake_plug.relay_port()
                          ? ordered_json(*attacker.fake_plug.relay_port())
                          : ordered_json(nullptr)},
       {"received_commands", attacker.fake_plug.received_commands()}});
  return finish_run(config, w, c, attack_outcome_name(outcome.kind), &outcome,
                    detail, extra);
}

}  // namespace

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names = {
      "benign", "sharing-attack", "sharing-attack-patched", "hijack",
      "local-control"};
  return names;
}

bool is_known_scenario(const std::string& name) {
  for (const std::string& n : scenario_names()) {
    if (n == name) return true;
  }
  return false;
}

ScenarioRun run_scenario(const ScenarioConfig& config) {
  if (config.name == "benign") return run_benign(config);
  if (config.name == "sharing-attack") {
    return run_sharing_scenario(config, config.patched);
  }
  if (config.name == "sharing-attack-patched") {
    return run_sharing_scenario(config, true);
  }
  if (config.name == "hijack") return run_hijack_scenario(config);
  if (config.name == "local-control") return run_local_control(config);
  throw Error("unknown scenario: " + config.name);
}

void write_artifacts(const ScenarioRun& run, const std::string& output_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(output_dir, ec);
  if (ec) throw IoError("cannot create output directory: " + output_dir);

  auto write_file = [&](const std::string& name, const std::string& content) {
    fs::path path = fs::path(output_dir) / name;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path.string());
    f << content;
    if (!f) throw IoError("failed writing: " + path.string());
  };
  write_file("trace.jsonl", run.trace_jsonl);
  write_file("report.json", run.report_json);
  write_file("final_states.json", run.final_states_json);
}

}  // namespace plugnet
