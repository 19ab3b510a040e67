#include "plugnet/actors.hpp"

#include "plugnet/errors.hpp"

namespace plugnet {

namespace {

// Serialization of a relayed command with the integrity slot zeroed; both
// the TURN server (signing) and the plug (verifying) hash this form.
Bytes relayed_command_base(const TurnRelayedCommand& trc) {
  TurnRelayedCommand zeroed = trc;
  zeroed.integrity = IntegrityAttribute{};
  return serialize(ProtocolMessage(zeroed));
}

Nonce draw_nonce(Network& net) { return net.rng().next_array<kNonceSize>(); }

DeviceIdentity identity_ref(const std::string& serial) {
  return DeviceIdentity{Mac{}, serial, ""};
}

}  // namespace

const char* plug_phase_name(PlugPhase p) {
  switch (p) {
    case PlugPhase::Factory:
      return "Factory";
    case PlugPhase::ApMode:
      return "ApMode";
    case PlugPhase::Paired:
      return "Paired";
    case PlugPhase::Bound:
      return "Bound";
    case PlugPhase::Online:
      return "Online";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// SmartPlug

SmartPlug::SmartPlug(NodeId node, const Mac& mac, std::string description,
                     NodeId https_node, NodeId turn_node)
    : node_(std::move(node)),
      https_node_(std::move(https_node)),
      turn_node_(std::move(turn_node)) {
  identity_.mac = mac;
  identity_.serial = derive_serial(mac);
  identity_.description = std::move(description);
}

void SmartPlug::enter_ap_mode() {
  if (phase_ != PlugPhase::Factory) {
    throw LifecycleError("AP mode is only reachable from the factory state");
  }
  phase_ = PlugPhase::ApMode;
}

void SmartPlug::send_bind_request(Network& net, const SecretKey* auth_key) {
  BindRequest req;
  req.plug = identity_;
  req.phone_id = pairing_.phone_id;
  req.phone_description = pairing_.phone_description;
  req.wifi.ssid = pairing_.wifi.ssid;
  req.wifi.ap_mac = pairing_.wifi.ap_mac;
  req.timestamp = net.now();
  req.re_register = bind_re_register_;
  if (auth_key != nullptr) {
    req.auth =
        compute_authorization(*auth_key, identity_, net.now(), draw_nonce(net));
  } else {
    req.auth = dummy_authorization(identity_, net.now());
  }
  net.send(node_, https_node_, req, Channel::Internet);
}

void SmartPlug::start_bind(Network& net) {
  if (phase_ != PlugPhase::Paired) {
    throw LifecycleError("binding requires a paired plug");
  }
  bind_pending_ = true;
  if (plug_key_.has_value()) {
    // Key retained across the reset: a single reRegister request authorized
    // with the original plug key.
    bind_re_register_ = true;
    send_bind_request(net, &*plug_key_);
  } else {
    bind_re_register_ = false;
    send_bind_request(net, nullptr);
  }
}

void SmartPlug::request_allocation(Network& net) {
  if (!plug_key_.has_value()) {
    throw LifecycleError("relay allocation requires the plug key");
  }
  ChapChallenge challenge = net.rng().next_array<kChapChallengeSize>();
  TurnAllocateRequest req;
  req.serial = identity_.serial;
  req.chap = chap_respond(*plug_key_, challenge, identity_);
  net.send(node_, turn_node_, req, Channel::Internet);
}

void SmartPlug::sync_status(Network& net) {
  if (!plug_key_.has_value()) {
    throw LifecycleError("status sync requires the plug key");
  }
  StatusUpdate msg;
  msg.status = switch_;
  msg.auth =
      compute_authorization(*plug_key_, identity_, net.now(), draw_nonce(net));
  net.send(node_, https_node_, msg, Channel::Internet);
}

void SmartPlug::reset() {
  phase_ = PlugPhase::Factory;
  pairing_ = Pairing{};
  temp_key_.reset();
  stored_phone_key_.reset();
  relay_port_.reset();
  bind_pending_ = false;
  bind_re_register_ = false;
  static_assert(kRetainsKeyAfterReset);  // plug_key_ survives on purpose
}

void SmartPlug::on_message(Network& net, const Delivery& d) {
  if (const auto* get_info = std::get_if<PairGetInfoRequest>(&d.message)) {
    (void)get_info;
    if (d.channel != Channel::LocalAp) {
      net.annotate_current("pairing", "ignored: not on the local AP link");
      return;
    }
    if (phase_ != PlugPhase::ApMode) {
      net.annotate_current("pairing", "ignored: plug not in AP mode");
      return;
    }
    net.send(node_, d.src, PairGetInfoResponse{identity_}, Channel::LocalAp);
    return;
  }

  if (const auto* setup = std::get_if<PairSetupRequest>(&d.message)) {
    if (d.channel != Channel::LocalAp || phase_ != PlugPhase::ApMode) {
      net.annotate_current("pairing", "ignored: wrong channel or phase");
      return;
    }
    pairing_.phone_id = setup->phone_id;
    pairing_.phone_description = setup->phone_description;
    pairing_.timestamp = setup->timestamp;
    pairing_.wifi = setup->wifi;
    pairing_.phone_node = d.src;
    phase_ = PlugPhase::Paired;
    net.annotate_current("pairing", "plug paired; home AP credentials stored");
    return;
  }

  if (const auto* resp = std::get_if<BindResponse>(&d.message)) {
    if (!bind_pending_) {
      net.annotate_current("bind", "ignored: no bind in progress");
      return;
    }
    if (resp->kind == BindResponseKind::TempKeyIssued) {
      temp_key_ = resp->temp_key;
      net.annotate_current("bind", "temp key received; sending second request");
      send_bind_request(net, &*temp_key_);
    } else {
      plug_key_ = resp->plug_key;
      stored_phone_key_ = resp->phone_key;
      temp_key_.reset();
      bind_pending_ = false;
      phase_ = PlugPhase::Bound;
      net.annotate_current("bind", "plug and phone keys stored");
      if (!pairing_.phone_node.empty() &&
          net.same_lan(node_, pairing_.phone_node)) {
        net.send(node_, pairing_.phone_node,
                 LocalKeyDelivery{identity_.serial, *stored_phone_key_},
                 Channel::LocalAp);
      }
    }
    return;
  }

  if (const auto* alloc = std::get_if<TurnAllocateResponse>(&d.message)) {
    relay_port_ = alloc->relay_port;
    if (phase_ == PlugPhase::Bound) phase_ = PlugPhase::Online;
    net.annotate_current("allocation", "relay port stored");
    return;
  }

  if (const auto* relayed = std::get_if<TurnRelayedCommand>(&d.message)) {
    ++relayed_received_;
    if (!plug_key_.has_value()) {
      net.annotate_current("integrity", "rejected: no plug key");
      ++auth_rejections_;
      return;
    }
    Bytes base = relayed_command_base(*relayed);
    if (!verify_message_integrity(*plug_key_, base, relayed->integrity)) {
      net.annotate_current("integrity", "rejected: MESSAGE-INTEGRITY mismatch");
      ++auth_rejections_;
      return;
    }
    if (relayed->command.target_serial != identity_.serial) {
      net.annotate_current("integrity", "rejected: serial mismatch");
      ++auth_rejections_;
      return;
    }
    switch_ = status_of(relayed->command.action);
    ++relayed_applied_;
    net.annotate_current("applied",
                         switch_action_name(relayed->command.action));
    return;
  }

  if (const auto* cmd = std::get_if<ControlCommand>(&d.message)) {
    // Local-network control path: no authentication at all.
    if (d.channel != Channel::LocalAp) {
      net.annotate_current("control", "ignored: remote commands arrive via TURN");
      return;
    }
    switch_ = status_of(cmd->action);
    net.annotate_current("local_control", "accepted without authentication");
    net.send(node_, d.src, StatusReply{switch_}, Channel::LocalAp);
    return;
  }

  if (const auto* err = std::get_if<ErrorReply>(&d.message)) {
    if (err->code == ErrorCode::BindRejected) {
      ++bind_rejections_;
      bind_pending_ = false;
    } else {
      ++auth_rejections_;
    }
    return;
  }

  net.annotate_current("unhandled", message_kind_name(kind_of(d.message)));
}

// ---------------------------------------------------------------------------
// Smartphone

Smartphone::Smartphone(NodeId node, std::string phone_id,
                       std::string description, NodeId https_node)
    : node_(std::move(node)),
      https_node_(std::move(https_node)),
      phone_id_(std::move(phone_id)),
      description_(std::move(description)) {}

void Smartphone::pair(Network& net, const NodeId& plug_node,
                      const WifiInfo& wifi) {
  if (!net.same_lan(node_, plug_node)) {
    throw ChannelError("pairing runs over the plug's local AP link");
  }
  pending_wifi_ = wifi;
  pairing_pending_ = true;
  net.send(node_, plug_node, PairGetInfoRequest{}, Channel::LocalAp);
}

AuthField Smartphone::make_auth(Network& net, const std::string& serial) const {
  if (phone_key_.has_value()) {
    return compute_authorization(*phone_key_, identity_ref(serial), net.now(),
                                 net.rng().next_array<kNonceSize>());
  }
  return dummy_authorization(identity_ref(serial), net.now());
}

void Smartphone::fetch_key_remote(Network& net) {
  if (!known_plug_.has_value()) {
    throw LifecycleError("no plug known; pair first");
  }
  KeyFetchRequest req;
  req.phone_id = phone_id_;
  req.serial = known_plug_->serial;
  req.timestamp = net.now();
  Bytes msg = to_bytes(req.phone_id + req.serial + std::to_string(req.timestamp));
  req.mac_field = hmac_sha1(to_bytes(req.serial), msg);
  net.send(node_, https_node_, req, Channel::Internet);
}

void Smartphone::query_status(Network& net) {
  if (!known_plug_.has_value()) {
    throw LifecycleError("no plug known; pair first");
  }
  StatusQuery q;
  q.auth = make_auth(net, known_plug_->serial);
  net.send(node_, https_node_, q, Channel::Internet);
}

void Smartphone::control(Network& net, SwitchAction action) {
  if (!known_plug_.has_value()) {
    throw LifecycleError("no plug known; pair first");
  }
  control_remote(net, known_plug_->serial, action);
}

void Smartphone::control_remote(Network& net, const std::string& target_serial,
                                SwitchAction action) {
  ControlCommand cmd;
  cmd.target_serial = target_serial;
  cmd.action = action;
  cmd.auth = make_auth(net, target_serial);
  net.send(node_, https_node_, cmd, Channel::Internet);
}

void Smartphone::control_local(Network& net, const NodeId& plug_node,
                               SwitchAction action) {
  if (!net.same_lan(node_, plug_node)) {
    throw ChannelError("local control requires the phone on the plug's LAN");
  }
  std::string serial = known_plug_ ? known_plug_->serial : "";
  ControlCommand cmd;
  cmd.target_serial = serial;
  cmd.action = action;
  cmd.auth = dummy_authorization(identity_ref(serial), net.now());
  net.send(node_, plug_node, cmd, Channel::LocalAp);
}

void Smartphone::on_message(Network& net, const Delivery& d) {
  if (const auto* info = std::get_if<PairGetInfoResponse>(&d.message)) {
    known_plug_ = info->plug;
    if (pairing_pending_) {
      pairing_pending_ = false;
      PairSetupRequest setup;
      setup.phone_id = phone_id_;
      setup.phone_description = description_;
      setup.timestamp = net.now();
      setup.wifi = pending_wifi_;
      net.send(node_, d.src, setup, Channel::LocalAp);
    }
    return;
  }

  if (const auto* delivery = std::get_if<LocalKeyDelivery>(&d.message)) {
    phone_key_ = delivery->phone_key;
    net.annotate_current("key", "phone key delivered over the local network");
    return;
  }

  if (const auto* fetched = std::get_if<KeyFetchResponse>(&d.message)) {
    phone_key_ = fetched->phone_key;
    net.annotate_current("key", "phone key fetched from the HTTPS server");
    return;
  }

  if (const auto* reply = std::get_if<StatusReply>(&d.message)) {
    last_status_ = reply->status;
    statuses_seen_.push_back(reply->status);
    if (d.channel == Channel::LocalAp) ++local_acks_;
    return;
  }

  if (const auto* err = std::get_if<ErrorReply>(&d.message)) {
    last_error_ = err->code;
    ++errors_seen_;
    return;
  }

  net.annotate_current("unhandled", message_kind_name(kind_of(d.message)));
}

// ---------------------------------------------------------------------------
// HttpsServer

HttpsServer::HttpsServer(NodeId node, NodeId turn_node, bool patched)
    : node_(std::move(node)),
      turn_node_(std::move(turn_node)),
      patched_(patched) {}

const HttpsServer::Binding* HttpsServer::binding(
    const std::string& serial) const {
  auto it = bindings_.find(serial);
  return it == bindings_.end() ? nullptr : &it->second;
}

std::vector<std::string> HttpsServer::bound_serials() const {
  std::vector<std::string> out;
  for (const auto& [serial, binding] : bindings_) out.push_back(serial);
  return out;
}

std::optional<SwitchStatus> HttpsServer::recorded_status(
    const std::string& serial) const {
  auto it = status_.find(serial);
  if (it == status_.end()) return std::nullopt;
  return it->second.status;
}

std::optional<std::uint16_t> HttpsServer::relay_port(
    const std::string& serial) const {
  auto it = relay_ports_.find(serial);
  if (it == relay_ports_.end()) return std::nullopt;
  return it->second;
}

void HttpsServer::handle_bind(Network& net, const Delivery& d,
                              const BindRequest& req) {
  const std::string& serial = req.plug.serial;
  const std::uint64_t now = net.now();

  if (req.auth.is_dummy) {
    // Dummy-authorized request: either a bootstrap bind or a plug claiming
    // it lost its key. Either way a single-use temporary key comes back.
    SecretKey temp = make_random_key(net.rng(), KeyRole::TempKey);
    PendingTemp pending{temp,     now,      req.re_register, req.phone_id,
                        req.phone_description, req.wifi,     req.plug};
    pending_.insert_or_assign(serial, std::move(pending));
    net.annotate_current("bind", bindings_.count(serial)
                                     ? "dummy rebinding request; temp key issued"
                                     : "bootstrap bind; temp key issued");
    BindResponse resp;
    resp.kind = BindResponseKind::TempKeyIssued;
    resp.temp_key = temp;
    net.send(node_, d.src, resp, Channel::Internet);
    return;
  }

  auto pit = pending_.find(serial);
  if (pit != pending_.end()) {
    if (now - pit->second.issued_at > kTempKeyTtl) {
      pending_.erase(pit);
      net.annotate_current("bind", "rejected: temporary key expired");
      net.send(node_, d.src,
               ErrorReply{ErrorCode::BindRejected, serial,
                          "temporary key expired"},
               Channel::Internet);
      return;
    }
    AuthDecision dec =
        verify_authorization(pit->second.key, req.auth, now, kAuthWindow);
    if (dec != AuthDecision::Accept) {
      net.annotate_current("bind", std::string("rejected: temp key auth ") +
                                       auth_decision_name(dec));
      net.send(node_, d.src,
               ErrorReply{ErrorCode::BindRejected, serial,
                          "temporary key authorization rejected"},
               Channel::Internet);
      return;
    }
    pending_.erase(pit);  // single use
    issue_keys(net, d, req.plug, req.phone_id, req.wifi, req.re_register);
    return;
  }

  auto bit = bindings_.find(serial);
  if (bit != bindings_.end() && req.re_register) {
    AuthDecision dec =
        verify_authorization(bit->second.plug_key, req.auth, now, kAuthWindow);
    if (dec != AuthDecision::Accept) {
      net.annotate_current("bind", std::string("rejected: rebinding auth ") +
                                       auth_decision_name(dec));
      net.send(node_, d.src,
               ErrorReply{ErrorCode::BindRejected, serial,
                          "rebinding authorization rejected"},
               Channel::Internet);
      return;
    }
    net.annotate_current("bind", "rebinding with original plug key accepted");
    issue_keys(net, d, req.plug, req.phone_id, req.wifi, req.re_register);
    return;
  }

  net.annotate_current("bind", "rejected: no binding context");
  net.send(node_, d.src,
           ErrorReply{ErrorCode::BindRejected, serial, "no binding context"},
           Channel::Internet);
}

void HttpsServer::issue_keys(Network& net, const Delivery& d,
                             const DeviceIdentity& plug,
                             const std::string& phone_id, const WifiInfo& wifi,
                             bool re_register) {
  const std::string& serial = plug.serial;
  const std::string& observed_ip = d.observed_src.public_ip;

  auto existing = bindings_.find(serial);
  bool fresh_plug_key = false;
  std::optional<SecretKey> plug_key;
  if (existing == bindings_.end()) {
    plug_key = make_random_key(net.rng(), KeyRole::PlugKey);
    fresh_plug_key = true;
  } else {
    bool ip_changed = observed_ip != existing->second.last_public_ip;
    if (patched_ && re_register && ip_changed) {
      plug_key = make_random_key(net.rng(), KeyRole::PlugKey);
      fresh_plug_key = true;
      net.annotate_current("patch",
                           "rebinding source IP changed; new plug key issued");
    } else {
      plug_key = existing->second.plug_key;
      if (re_register) {
        net.annotate_current("bind", "original plug key returned");
      }
    }
  }
  SecretKey phone_key = make_random_key(net.rng(), KeyRole::PhoneKey);

  if (existing == bindings_.end()) {
    Binding b{*plug_key, {PhoneAssoc{phone_id, phone_key}}, wifi, observed_ip};
    bindings_.emplace(serial, std::move(b));
  } else {
    Binding& b = existing->second;
    b.plug_key = *plug_key;
    bool replaced = false;
    for (auto& assoc : b.phones) {
      if (assoc.phone_id == phone_id) {
        assoc.key = phone_key;
        replaced = true;
      }
    }
    if (!replaced) b.phones.push_back(PhoneAssoc{phone_id, phone_key});
    b.wifi = wifi;
    b.last_public_ip = observed_ip;
  }

  if (fresh_plug_key) {
    net.send(node_, turn_node_, KeyShare{serial, *plug_key},
             Channel::ServerInternal);
  }

  BindResponse resp;
  resp.kind = BindResponseKind::KeysIssued;
  resp.plug_key = plug_key;
  resp.phone_key = phone_key;
  net.send(node_, d.src, resp, Channel::Internet);
}

void HttpsServer::handle_key_fetch(Network& net, const Delivery& d,
                                   const KeyFetchRequest& req) {
  Bytes msg =
      to_bytes(req.phone_id + req.serial + std::to_string(req.timestamp));
  Digest expected = hmac_sha1(to_bytes(req.serial), msg);
  if (!constant_time_equal(expected, req.mac_field)) {
    net.annotate_current("key_fetch", "rejected: mac check failed");
    net.send(node_, d.src,
             ErrorReply{ErrorCode::AuthRejected, req.serial,
                        "key fetch mac rejected"},
             Channel::Internet);
    return;
  }
  auto bit = bindings_.find(req.serial);
  if (bit != bindings_.end()) {
    for (const auto& assoc : bit->second.phones) {
      if (assoc.phone_id == req.phone_id) {
        net.annotate_current("key_fetch", "phone key returned");
        net.send(node_, d.src, KeyFetchResponse{assoc.key}, Channel::Internet);
        return;
      }
    }
  }
  net.annotate_current("key_fetch", "rejected: no such association");
  net.send(node_, d.src,
           ErrorReply{ErrorCode::NotBound, req.serial, "no such association"},
           Channel::Internet);
}

const SecretKey* HttpsServer::phone_key_matching(const Binding& b,
                                                 const AuthField& auth,
                                                 std::uint64_t now) const {
  for (const auto& assoc : b.phones) {
    if (verify_authorization(assoc.key, auth, now, kAuthWindow) ==
        AuthDecision::Accept) {
      return &assoc.key;
    }
  }
  return nullptr;
}

void HttpsServer::handle_status_update(Network& net, const Delivery& d,
                                       const StatusUpdate& msg) {
  const std::string& serial = msg.auth.serial;
  auto bit = bindings_.find(serial);
  if (bit == bindings_.end()) {
    net.annotate_current("auth", "rejected: unknown plug");
    net.send(node_, d.src,
             ErrorReply{ErrorCode::NotBound, serial, "plug is not bound"},
             Channel::Internet);
    return;
  }
  AuthDecision dec =
      verify_authorization(bit->second.plug_key, msg.auth, net.now(),
                           kAuthWindow);
  if (dec != AuthDecision::Accept) {
    net.annotate_current("auth",
                         std::string("rejected: ") + auth_decision_name(dec));
    net.send(node_, d.src,
             ErrorReply{ErrorCode::AuthRejected, serial,
                        "plug authorization rejected"},
             Channel::Internet);
    return;
  }
  status_[serial] = StatusInfo{msg.status, net.now()};
  net.annotate_current("auth", "accepted");
}

void HttpsServer::handle_status_query(Network& net, const Delivery& d,
                                      const StatusQuery& msg) {
  const std::string& serial = msg.auth.serial;
  auto bit = bindings_.find(serial);
  if (bit == bindings_.end()) {
    net.annotate_current("auth", "rejected: unknown plug");
    net.send(node_, d.src,
             ErrorReply{ErrorCode::NotBound, serial, "plug is not bound"},
             Channel::Internet);
    return;
  }
  if (phone_key_matching(bit->second, msg.auth, net.now()) == nullptr) {
    net.annotate_current("auth", "rejected: no issued phone key matches");
    net.send(node_, d.src,
             ErrorReply{ErrorCode::AuthRejected, serial,
                        "phone authorization rejected"},
             Channel::Internet);
    return;
  }
  SwitchStatus st = SwitchStatus::Unavailable;
  auto sit = status_.find(serial);
  if (sit != status_.end() &&
      net.now() - sit->second.at <= kStalePeriods * kSyncPeriod) {
    st = sit->second.status;
  }
  net.annotate_current("status", switch_status_name(st));
  net.send(node_, d.src, StatusReply{st}, Channel::Internet);
}

void HttpsServer::handle_control(Network& net, const Delivery& d,
                                 const ControlCommand& cmd) {
  const std::string& serial = cmd.target_serial;
  auto bit = bindings_.find(serial);
  if (bit == bindings_.end()) {
    net.annotate_current("auth", "rejected: unknown plug");
    net.send(node_, d.src,
             ErrorReply{ErrorCode::NotBound, serial, "plug is not bound"},
             Channel::Internet);
    return;
  }
  if (phone_key_matching(bit->second, cmd.auth, net.now()) == nullptr) {
    net.annotate_current("auth", "rejected: no issued phone key matches");
    net.send(node_, d.src,
             ErrorReply{ErrorCode::AuthRejected, serial,
                        "phone authorization rejected"},
             Channel::Internet);
    return;
  }
  if (!relay_ports_.count(serial)) {
    net.annotate_current("control", "no TURN allocation for serial");
    net.send(node_, d.src,
             ErrorReply{ErrorCode::Unavailable, serial,
                        "plug has no relay allocation"},
             Channel::Internet);
    return;
  }
  net.annotate_current("control", "accepted; forwarded to TURN");
  net.send(node_, turn_node_, cmd, Channel::ServerInternal);
}

void HttpsServer::on_message(Network& net, const Delivery& d) {
  if (const auto* req = std::get_if<BindRequest>(&d.message)) {
    handle_bind(net, d, *req);
    return;
  }
  if (const auto* req = std::get_if<KeyFetchRequest>(&d.message)) {
    handle_key_fetch(net, d, *req);
    return;
  }
  if (const auto* msg = std::get_if<StatusUpdate>(&d.message)) {
    handle_status_update(net, d, *msg);
    return;
  }
  if (const auto* msg = std::get_if<StatusQuery>(&d.message)) {
    handle_status_query(net, d, *msg);
    return;
  }
  if (const auto* cmd = std::get_if<ControlCommand>(&d.message)) {
    handle_control(net, d, *cmd);
    return;
  }
  if (const auto* share = std::get_if<PortShare>(&d.message)) {
    relay_ports_[share->serial] = share->relay_port;
    net.annotate_current("relay_port", std::to_string(share->relay_port));
    return;
  }
  net.annotate_current("unhandled", message_kind_name(kind_of(d.message)));
}

// ---------------------------------------------------------------------------
// TurnServer

TurnServer::TurnServer(NodeId node, NodeId https_node)
    : node_(std::move(node)), https_node_(std::move(https_node)) {}

std::optional<TurnServer::Allocation> TurnServer::allocation(
    const std::string& serial) const {
  auto it = allocations_.find(serial);
  if (it == allocations_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::pair<std::string, TurnServer::Allocation>>
TurnServer::all_allocations() const {
  std::vector<std::pair<std::string, Allocation>> out;
  for (const auto& [serial, alloc] : allocations_) out.emplace_back(serial, alloc);
  return out;
}

void TurnServer::on_message(Network& net, const Delivery& d) {
  if (const auto* share = std::get_if<KeyShare>(&d.message)) {
    plug_keys_.insert_or_assign(share->serial, share->plug_key);
    net.annotate_current("key_share", "plug key stored");
    return;
  }

  if (const auto* req = std::get_if<TurnAllocateRequest>(&d.message)) {
    auto kit = plug_keys_.find(req->serial);
    if (kit == plug_keys_.end()) {
      net.annotate_current("allocation", "denied: unknown plug");
      net.send(node_, d.src,
               ErrorReply{ErrorCode::AllocationDenied, req->serial,
                          "no plug key for serial"},
               Channel::Internet);
      return;
    }
    if (req->chap.peer_serial != req->serial ||
        !chap_verify(kit->second, req->chap)) {
      net.annotate_current("allocation", "denied: CHAP verification failed");
      net.send(node_, d.src,
               ErrorReply{ErrorCode::AllocationDenied, req->serial,
                          "CHAP verification failed"},
               Channel::Internet);
      return;
    }
    std::uint16_t port = next_port_++;
    // Latest successful allocation supersedes any prior holder.
    allocations_.insert_or_assign(req->serial, Allocation{d.src, port});
    net.annotate_current("allocation",
                         "granted port " + std::to_string(port) + " to " +
                             d.src);
    net.send(node_, https_node_, PortShare{req->serial, port},
             Channel::ServerInternal);
    net.send(node_, d.src, TurnAllocateResponse{port}, Channel::Internet);
    return;
  }

  if (const auto* cmd = std::get_if<ControlCommand>(&d.message)) {
    if (d.channel != Channel::ServerInternal) {
      net.annotate_current("relay", "ignored: commands arrive via the HTTPS server");
      return;
    }
    auto ait = allocations_.find(cmd->target_serial);
    if (ait == allocations_.end()) {
      net.annotate_current("relay", "no allocation for serial");
      return;
    }
    auto kit = plug_keys_.find(cmd->target_serial);
    TurnRelayedCommand relayed;
    relayed.command = *cmd;
    relayed.integrity =
        compute_message_integrity(kit->second, relayed_command_base(relayed));
    net.annotate_current("relay", "to " + ait->second.holder + " port " +
                                      std::to_string(ait->second.port));
    net.send(node_, ait->second.holder, relayed, Channel::Internet);
    return;
  }

  net.annotate_current("unhandled", message_kind_name(kind_of(d.message)));
}

}  // namespace plugnet
