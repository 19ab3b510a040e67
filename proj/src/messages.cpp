#include "plugnet/messages.hpp"

#include <cstring>

#include "plugnet/errors.hpp"

namespace plugnet {

namespace {

constexpr std::size_t kDummyDigestSize = 5;  // strlen("dummy")

void check_auth_shape(const AuthField& auth) {
  if (auth.is_dummy) {
    if (auth.digest != to_bytes(kDummyAuthValue)) {
      throw Error("dummy authorization must carry the ASCII bytes \"dummy\"");
    }
  } else if (auth.digest.size() != kDigestSize) {
    throw Error("authorization digest must be exactly 20 bytes");
  }
}

// --------------------------------------------------------------------------
// Byte-level archives

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }

  void u16(std::uint16_t v) {
    out_.push_back(static_cast<std::uint8_t>(v >> 8));
    out_.push_back(static_cast<std::uint8_t>(v));
  }

  void u64(std::uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8) {
      out_.push_back(static_cast<std::uint8_t>(v >> shift));
    }
  }

  void boolean(bool v) { u8(v ? 1 : 0); }

  void raw(std::span<const std::uint8_t> data) {
    out_.insert(out_.end(), data.begin(), data.end());
  }

  void str(const std::string& s) {
    if (s.size() > 0xffff) {
      throw Error("string field too long for wire format");
    }
    u16(static_cast<std::uint16_t>(s.size()));
    raw(std::span<const std::uint8_t>(
        reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
  }

  // Secret keys travel as lowercase hex strings.
  void key(const SecretKey& k) { str(to_hex(k.bytes())); }

  void auth(const AuthField& a) {
    check_auth_shape(a);
    str(a.serial);
    u64(a.timestamp);
    raw(a.nonce);
    boolean(a.is_dummy);
    raw(a.digest);
  }

  void identity(const DeviceIdentity& id) {
    raw(id.mac);
    str(id.serial);
    str(id.description);
  }

  void chap(const ChapExchange& c) {
    raw(c.challenge);
    raw(c.response);
    str(c.peer_serial);
  }

  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t u8() {
    need(1, "u8");
    return data_[pos_++];
  }

  std::uint16_t u16() {
    need(2, "u16");
    std::uint16_t v = (std::uint16_t(data_[pos_]) << 8) | data_[pos_ + 1];
    pos_ += 2;
    return v;
  }

  std::uint64_t u64() {
    need(8, "u64");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | data_[pos_ + i];
    pos_ += 8;
    return v;
  }

  bool boolean() {
    std::uint8_t v = u8();
    if (v > 1) throw ParseError("boolean field must be 0 or 1", pos_ - 1);
    return v == 1;
  }

  Bytes raw(std::size_t n, const char* what) {
    need(n, what);
    Bytes out(data_.begin() + pos_, data_.begin() + pos_ + n);
    pos_ += n;
    return out;
  }

  template <std::size_t N>
  std::array<std::uint8_t, N> fixed(const char* what) {
    need(N, what);
    std::array<std::uint8_t, N> out{};
    std::memcpy(out.data(), data_.data() + pos_, N);
    pos_ += N;
    return out;
  }

  std::string str() {
    std::uint16_t len = u16();
    need(len, "string body");
    std::string out(reinterpret_cast<const char*>(data_.data() + pos_), len);
    pos_ += len;
    return out;
  }

  SecretKey key(KeyRole role) {
    std::size_t at = pos_;
    std::string hex = str();
    Bytes bytes;
    try {
      bytes = from_hex(hex);
    } catch (const ParseError&) {
      throw ParseError("secret key is not valid hex", at);
    }
    if (bytes.empty() || bytes.size() > 64) {
      throw ParseError("secret key must decode to 1..64 bytes", at);
    }
    return SecretKey(std::move(bytes), role);
  }

  AuthField auth() {
    AuthField a;
    a.serial = str();
    a.timestamp = u64();
    a.nonce = fixed<kNonceSize>("auth nonce");
    a.is_dummy = boolean();
    if (a.is_dummy) {
      std::size_t at = pos_;
      a.digest = raw(kDummyDigestSize, "dummy digest");
      if (a.digest != to_bytes(kDummyAuthValue)) {
        throw ParseError("dummy authorization digest is not \"dummy\"", at);
      }
    } else {
      a.digest = raw(kDigestSize, "auth digest");
    }
    return a;
  }

  DeviceIdentity identity() {
    DeviceIdentity id;
    id.mac = fixed<6>("mac");
    id.serial = str();
    id.description = str();
    return id;
  }

  ChapExchange chap() {
    ChapExchange c;
    c.challenge = fixed<kChapChallengeSize>("chap challenge");
    Digest r = fixed<kDigestSize>("chap response");
    c.response = r;
    c.peer_serial = str();
    return c;
  }

  std::size_t pos() const { return pos_; }

  void expect_end() const {
    if (pos_ != data_.size()) {
      throw ParseError("trailing bytes after message", pos_);
    }
  }

 private:
  void need(std::size_t n, const char* what) const {
    if (data_.size() - pos_ < n) {
      throw ParseError(std::string("truncated input reading ") + what, pos_);
    }
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

// Collects the semantic byte content of each leaf field.
class Collector {
 public:
  void u8(const std::string& name, std::uint8_t v) { add(name, Bytes{v}); }

  void u16(const std::string& name, std::uint16_t v) {
    add(name, Bytes{static_cast<std::uint8_t>(v >> 8),
                    static_cast<std::uint8_t>(v)});
  }

  void u64(const std::string& name, std::uint64_t v) {
    Bytes b(8);
    for (int i = 0; i < 8; ++i) {
      b[i] = static_cast<std::uint8_t>(v >> (56 - 8 * i));
    }
    add(name, std::move(b));
  }

  void boolean(const std::string& name, bool v) {
    u8(name, v ? 1 : 0);
  }

  void str(const std::string& name, const std::string& s) {
    add(name, to_bytes(s));
  }

  void bytes(const std::string& name, std::span<const std::uint8_t> b) {
    add(name, Bytes(b.begin(), b.end()));
  }

  // Raw key material, not the wire hex.
  void key(const std::string& name, const SecretKey& k) {
    add(name, k.bytes());
  }

  void auth(const std::string& prefix, const AuthField& a) {
    str(prefix + ".serial", a.serial);
    u64(prefix + ".timestamp", a.timestamp);
    bytes(prefix + ".nonce", a.nonce);
    boolean(prefix + ".is_dummy", a.is_dummy);
    bytes(prefix + ".digest", a.digest);
  }

  void identity(const std::string& prefix, const DeviceIdentity& id) {
    bytes(prefix + ".mac", id.mac);
    str(prefix + ".serial", id.serial);
    str(prefix + ".description", id.description);
  }

  void chap(const std::string& prefix, const ChapExchange& c) {
    bytes(prefix + ".challenge", c.challenge);
    bytes(prefix + ".response", c.response);
    str(prefix + ".peer_serial", c.peer_serial);
  }

  std::vector<FieldView> take() { return std::move(fields_); }

 private:
  void add(const std::string& name, Bytes b) {
    fields_.push_back(FieldView{name, std::move(b)});
  }

  std::vector<FieldView> fields_;
};

// --------------------------------------------------------------------------
// Per-message bodies. Field order here defines the wire format.

void write_body(Writer&, const PairGetInfoRequest&) {}

void write_body(Writer& w, const PairGetInfoResponse& m) { w.identity(m.plug); }

void write_body(Writer& w, const PairSetupRequest& m) {
  w.str(m.phone_id);
  w.str(m.phone_description);
  w.u64(m.timestamp);
  w.str(m.wifi.ssid);
  w.raw(m.wifi.ap_mac);
  w.str(m.wifi.passphrase);
}

void write_body(Writer& w, const BindRequest& m) {
  if (!m.wifi.passphrase.empty()) {
    throw Error("binding requests never carry the AP passphrase");
  }
  w.identity(m.plug);
  w.str(m.phone_id);
  w.str(m.phone_description);
  w.str(m.wifi.ssid);
  w.raw(m.wifi.ap_mac);
  w.u64(m.timestamp);
  w.auth(m.auth);
  w.boolean(m.re_register);
}

void write_body(Writer& w, const BindResponse& m) {
  w.u8(static_cast<std::uint8_t>(m.kind));
  if (m.kind == BindResponseKind::TempKeyIssued) {
    if (!m.temp_key || m.plug_key || m.phone_key) {
      throw Error("TempKeyIssued carries exactly the temp key");
    }
    w.key(*m.temp_key);
  } else {
    if (m.temp_key || !m.plug_key || !m.phone_key) {
      throw Error("KeysIssued carries exactly the plug and phone keys");
    }
    w.key(*m.plug_key);
    w.key(*m.phone_key);
  }
}

void write_body(Writer& w, const KeyFetchRequest& m) {
  w.str(m.phone_id);
  w.str(m.serial);
  w.u64(m.timestamp);
  w.raw(m.mac_field);
}

void write_body(Writer& w, const KeyFetchResponse& m) { w.key(m.phone_key); }

void write_body(Writer& w, const StatusUpdate& m) {
  w.u8(static_cast<std::uint8_t>(m.status));
  w.auth(m.auth);
}

void write_body(Writer& w, const StatusQuery& m) { w.auth(m.auth); }

void write_body(Writer& w, const StatusReply& m) {
  w.u8(static_cast<std::uint8_t>(m.status));
}

void write_body(Writer& w, const ControlCommand& m) {
  w.str(m.target_serial);
  w.u8(static_cast<std::uint8_t>(m.action));
  w.auth(m.auth);
}

void write_body(Writer& w, const TurnAllocateRequest& m) {
  w.str(m.serial);
  w.chap(m.chap);
}

void write_body(Writer& w, const TurnAllocateResponse& m) {
  w.u16(m.relay_port);
}

void write_body(Writer& w, const TurnRelayedCommand& m) {
  write_body(w, m.command);
  w.raw(m.integrity.digest);
}

void write_body(Writer& w, const LocalKeyDelivery& m) {
  w.str(m.serial);
  w.key(m.phone_key);
}

void write_body(Writer& w, const KeyShare& m) {
  w.str(m.serial);
  w.key(m.plug_key);
}

void write_body(Writer& w, const PortShare& m) {
  w.str(m.serial);
  w.u16(m.relay_port);
}

void write_body(Writer& w, const ErrorReply& m) {
  w.u8(static_cast<std::uint8_t>(m.code));
  w.str(m.serial);
  w.str(m.detail);
}

SwitchStatus read_status(Reader& r) {
  std::size_t at = r.pos();
  std::uint8_t v = r.u8();
  if (v != 0 && v != 1 && v != 3) {
    throw ParseError("status code must be 0, 1 or 3", at);
  }
  return static_cast<SwitchStatus>(v);
}

SwitchAction read_action(Reader& r) {
  std::size_t at = r.pos();
  std::uint8_t v = r.u8();
  if (v > 1) throw ParseError("action must be 0 (off) or 1 (on)", at);
  return static_cast<SwitchAction>(v);
}

ControlCommand read_control_command(Reader& r) {
  ControlCommand m;
  m.target_serial = r.str();
  m.action = read_action(r);
  m.auth = r.auth();
  return m;
}

ProtocolMessage read_body(MessageKind kind, Reader& r) {
  switch (kind) {
    case MessageKind::PairGetInfoRequest:
      return PairGetInfoRequest{};
    case MessageKind::PairGetInfoResponse: {
      PairGetInfoResponse m;
      m.plug = r.identity();
      return m;
    }
    case MessageKind::PairSetupRequest: {
      PairSetupRequest m;
      m.phone_id = r.str();
      m.phone_description = r.str();
      m.timestamp = r.u64();
      m.wifi.ssid = r.str();
      m.wifi.ap_mac = r.fixed<6>("ap mac");
      m.wifi.passphrase = r.str();
      return m;
    }
    case MessageKind::BindRequest: {
      BindRequest m;
      m.plug = r.identity();
      m.phone_id = r.str();
      m.phone_description = r.str();
      m.wifi.ssid = r.str();
      m.wifi.ap_mac = r.fixed<6>("ap mac");
      m.timestamp = r.u64();
      m.auth = r.auth();
      m.re_register = r.boolean();
      return m;
    }
    case MessageKind::BindResponse: {
      BindResponse m;
      std::size_t at = r.pos();
      std::uint8_t k = r.u8();
      if (k > 1) throw ParseError("bind response kind must be 0 or 1", at);
      m.kind = static_cast<BindResponseKind>(k);
      if (m.kind == BindResponseKind::TempKeyIssued) {
        m.temp_key = r.key(KeyRole::TempKey);
      } else {
        m.plug_key = r.key(KeyRole::PlugKey);
        m.phone_key = r.key(KeyRole::PhoneKey);
      }
      return m;
    }
    case MessageKind::KeyFetchRequest: {
      KeyFetchRequest m;
      m.phone_id = r.str();
      m.serial = r.str();
      m.timestamp = r.u64();
      m.mac_field = r.fixed<kDigestSize>("key fetch mac");
      return m;
    }
    case MessageKind::KeyFetchResponse:
      return KeyFetchResponse{r.key(KeyRole::PhoneKey)};
    case MessageKind::StatusUpdate: {
      StatusUpdate m;
      m.status = read_status(r);
      m.auth = r.auth();
      return m;
    }
    case MessageKind::StatusQuery: {
      StatusQuery m;
      m.auth = r.auth();
      return m;
    }
    case MessageKind::StatusReply: {
      StatusReply m;
      m.status = read_status(r);
      return m;
    }
    case MessageKind::ControlCommand:
      return read_control_command(r);
    case MessageKind::TurnAllocateRequest: {
      TurnAllocateRequest m;
      m.serial = r.str();
      m.chap = r.chap();
      return m;
    }
    case MessageKind::TurnAllocateResponse: {
      TurnAllocateResponse m;
      m.relay_port = r.u16();
      return m;
    }
    case MessageKind::TurnRelayedCommand: {
      TurnRelayedCommand m;
      m.command = read_control_command(r);
      m.integrity.digest = r.fixed<kDigestSize>("integrity digest");
      return m;
    }
    case MessageKind::LocalKeyDelivery: {
      std::string serial = r.str();
      return LocalKeyDelivery{std::move(serial), r.key(KeyRole::PhoneKey)};
    }
    case MessageKind::KeyShare: {
      std::string serial = r.str();
      return KeyShare{std::move(serial), r.key(KeyRole::PlugKey)};
    }
    case MessageKind::PortShare: {
      PortShare m;
      m.serial = r.str();
      m.relay_port = r.u16();
      return m;
    }
    case MessageKind::ErrorReply: {
      ErrorReply m;
      std::size_t at = r.pos();
      std::uint8_t c = r.u8();
      if (c < 1 || c > 5) throw ParseError("unknown error code", at);
      m.code = static_cast<ErrorCode>(c);
      m.serial = r.str();
      m.detail = r.str();
      return m;
    }
  }
  throw ParseError("unknown message tag", 0);
}

void collect_body(Collector&, const PairGetInfoRequest&) {}

void collect_body(Collector& c, const PairGetInfoResponse& m) {
  c.identity("plug", m.plug);
}

void collect_body(Collector& c, const PairSetupRequest& m) {
  c.str("phone_id", m.phone_id);
  c.str("phone_description", m.phone_description);
  c.u64("timestamp", m.timestamp);
  c.str("wifi.ssid", m.wifi.ssid);
  c.bytes("wifi.ap_mac", m.wifi.ap_mac);
  c.str("wifi.passphrase", m.wifi.passphrase);
}

void collect_body(Collector& c, const BindRequest& m) {
  c.identity("plug", m.plug);
  c.str("phone_id", m.phone_id);
  c.str("phone_description", m.phone_description);
  c.str("wifi.ssid", m.wifi.ssid);
  c.bytes("wifi.ap_mac", m.wifi.ap_mac);
  c.u64("timestamp", m.timestamp);
  c.auth("auth", m.auth);
  c.boolean("re_register", m.re_register);
}

void collect_body(Collector& c, const BindResponse& m) {
  c.u8("kind", static_cast<std::uint8_t>(m.kind));
  if (m.temp_key) c.key("temp_key", *m.temp_key);
  if (m.plug_key) c.key("plug_key", *m.plug_key);
  if (m.phone_key) c.key("phone_key", *m.phone_key);
}

void collect_body(Collector& c, const KeyFetchRequest& m) {
  c.str("phone_id", m.phone_id);
  c.str("serial", m.serial);
  c.u64("timestamp", m.timestamp);
  c.bytes("mac_field", m.mac_field);
}

void collect_body(Collector& c, const KeyFetchResponse& m) {
  c.key("phone_key", m.phone_key);
}

void collect_body(Collector& c, const StatusUpdate& m) {
  c.u8("status", static_cast<std::uint8_t>(m.status));
  c.auth("auth", m.auth);
}

void collect_body(Collector& c, const StatusQuery& m) { c.auth("auth", m.auth); }

void collect_body(Collector& c, const StatusReply& m) {
  c.u8("status", static_cast<std::uint8_t>(m.status));
}

void collect_body(Collector& c, const ControlCommand& m) {
  c.str("target_serial", m.target_serial);
  c.u8("action", static_cast<std::uint8_t>(m.action));
  c.auth("auth", m.auth);
}

void collect_body(Collector& c, const TurnAllocateRequest& m) {
  c.str("serial", m.serial);
  c.chap("chap", m.chap);
}

void collect_body(Collector& c, const TurnAllocateResponse& m) {
  c.u16("relay_port", m.relay_port);
}

void collect_body(Collector& c, const TurnRelayedCommand& m) {
  c.str("cmd.target_serial", m.command.target_serial);
  c.u8("cmd.action", static_cast<std::uint8_t>(m.command.action));
  c.auth("cmd.auth", m.command.auth);
  c.bytes("integrity.digest", m.integrity.digest);
}

void collect_body(Collector& c, const LocalKeyDelivery& m) {
  c.str("serial", m.serial);
  c.key("phone_key", m.phone_key);
}

void collect_body(Collector& c, const KeyShare& m) {
  c.str("serial", m.serial);
  c.key("plug_key", m.plug_key);
}

void collect_body(Collector& c, const PortShare& m) {
  c.str("serial", m.serial);
  c.u16("relay_port", m.relay_port);
}

void collect_body(Collector& c, const ErrorReply& m) {
  c.u8("code", static_cast<std::uint8_t>(m.code));
  c.str("serial", m.serial);
  c.str("detail", m.detail);
}

}  // namespace

const char* switch_status_name(SwitchStatus s) {
  switch (s) {
    case SwitchStatus::Off:
      return "switch_off";
    case SwitchStatus::On:
      return "switch_on";
    case SwitchStatus::Unavailable:
      return "unavailable";
  }
  return "?";
}

const char* switch_action_name(SwitchAction a) {
  return a == SwitchAction::On ? "on" : "off";
}

const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::BindRejected:
      return "BindRejected";
    case ErrorCode::AuthRejected:
      return "AuthRejected";
    case ErrorCode::NotBound:
      return "NotBound";
    case ErrorCode::AllocationDenied:
      return "AllocationDenied";
    case ErrorCode::Unavailable:
      return "Unavailable";
  }
  return "?";
}

namespace {

struct KindNameEntry {
  MessageKind kind;
  const char* name;
};

constexpr KindNameEntry kKindNames[] = {
    {MessageKind::PairGetInfoRequest, "PairGetInfoRequest"},
    {MessageKind::PairGetInfoResponse, "PairGetInfoResponse"},
    {MessageKind::PairSetupRequest, "PairSetupRequest"},
    {MessageKind::BindRequest, "BindRequest"},
    {MessageKind::BindResponse, "BindResponse"},
    {MessageKind::KeyFetchRequest, "KeyFetchRequest"},
    {MessageKind::KeyFetchResponse, "KeyFetchResponse"},
    {MessageKind::StatusUpdate, "StatusUpdate"},
    {MessageKind::StatusQuery, "StatusQuery"},
    {MessageKind::StatusReply, "StatusReply"},
    {MessageKind::ControlCommand, "ControlCommand"},
    {MessageKind::TurnAllocateRequest, "TurnAllocateRequest"},
    {MessageKind::TurnAllocateResponse, "TurnAllocateResponse"},
    {MessageKind::TurnRelayedCommand, "TurnRelayedCommand"},
    {MessageKind::LocalKeyDelivery, "LocalKeyDelivery"},
    {MessageKind::KeyShare, "KeyShare"},
    {MessageKind::PortShare, "PortShare"},
    {MessageKind::ErrorReply, "ErrorReply"},
};

}  // namespace

const char* message_kind_name(MessageKind kind) {
  for (const auto& e : kKindNames) {
    if (e.kind == kind) return e.name;
  }
  return "?";
}

std::optional<MessageKind> message_kind_from_name(const std::string& name) {
  for (const auto& e : kKindNames) {
    if (name == e.name) return e.kind;
  }
  return std::nullopt;
}

MessageKind kind_of(const ProtocolMessage& msg) {
  return static_cast<MessageKind>(msg.index() + 1);
}

Bytes serialize(const ProtocolMessage& msg) {
  Writer w;
  w.u8(static_cast<std::uint8_t>(kind_of(msg)));
  std::visit([&w](const auto& m) { write_body(w, m); }, msg);
  return w.take();
}

Bytes serialize_redacted(const ProtocolMessage& msg) {
  if (const auto* setup = std::get_if<PairSetupRequest>(&msg)) {
    PairSetupRequest masked = *setup;
    masked.wifi.passphrase.assign(masked.wifi.passphrase.size(), '*');
    return serialize(ProtocolMessage(masked));
  }
  return serialize(msg);
}

ProtocolMessage deserialize(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  std::uint8_t tag = r.u8();
  if (tag < 1 || tag > static_cast<std::uint8_t>(MessageKind::ErrorReply)) {
    throw ParseError("unknown message tag", 0);
  }
  ProtocolMessage msg = read_body(static_cast<MessageKind>(tag), r);
  r.expect_end();
  return msg;
}

MessageKind message_kind(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) {
    throw ParseError("empty input", 0);
  }
  std::uint8_t tag = bytes[0];
  if (tag < 1 || tag > static_cast<std::uint8_t>(MessageKind::ErrorReply)) {
    throw ParseError("unknown message tag", 0);
  }
  return static_cast<MessageKind>(tag);
}

std::vector<FieldView> field_views(const ProtocolMessage& msg) {
  Collector c;
  std::visit([&c](const auto& m) { collect_body(c, m); }, msg);
  return c.take();
}

namespace {

std::string auth_summary(const AuthField& a) {
  if (a.is_dummy) return "auth=dummy";
  return "auth=hmac(" + to_hex(a.digest).substr(0, 8) + "..)";
}

struct Summarizer {
  std::string operator()(const PairGetInfoRequest&) const { return ""; }
  std::string operator()(const PairGetInfoResponse& m) const {
    return "serial=" + m.plug.serial + " mac=" + mac_to_string(m.plug.mac);
  }
  std::string operator()(const PairSetupRequest& m) const {
    return "phone=" + m.phone_id + " ssid=" + m.wifi.ssid +
           " passphrase=" + m.wifi.passphrase;
  }
  std::string operator()(const BindRequest& m) const {
    return "serial=" + m.plug.serial + " phone=" + m.phone_id +
           " re_register=" + (m.re_register ? std::string("1") : "0") + " " +
           auth_summary(m.auth);
  }
  std::string operator()(const BindResponse& m) const {
    return m.kind == BindResponseKind::TempKeyIssued ? "temp key issued"
                                                     : "plug + phone keys issued";
  }
  std::string operator()(const KeyFetchRequest& m) const {
    return "phone=" + m.phone_id + " serial=" + m.serial;
  }
  std::string operator()(const KeyFetchResponse&) const {
    return "phone key returned";
  }
  std::string operator()(const StatusUpdate& m) const {
    return std::string("status=") + switch_status_name(m.status) + " " +
           auth_summary(m.auth);
  }
  std::string operator()(const StatusQuery& m) const {
    return "serial=" + m.auth.serial + " " + auth_summary(m.auth);
  }
  std::string operator()(const StatusReply& m) const {
    return std::string("status=") +
           std::to_string(static_cast<int>(m.status)) + " (" +
           switch_status_name(m.status) + ")";
  }
  std::string operator()(const ControlCommand& m) const {
    return "serial=" + m.target_serial + " action=" +
           switch_action_name(m.action) + " " + auth_summary(m.auth);
  }
  std::string operator()(const TurnAllocateRequest& m) const {
    return "serial=" + m.serial;
  }
  std::string operator()(const TurnAllocateResponse& m) const {
    return "relay_port=" + std::to_string(m.relay_port);
  }
  std::string operator()(const TurnRelayedCommand& m) const {
    return "serial=" + m.command.target_serial + " action=" +
           switch_action_name(m.command.action);
  }
  std::string operator()(const LocalKeyDelivery& m) const {
    return "serial=" + m.serial;
  }
  std::string operator()(const KeyShare& m) const {
    return "serial=" + m.serial;
  }
  std::string operator()(const PortShare& m) const {
    return "serial=" + m.serial + " relay_port=" + std::to_string(m.relay_port);
  }
  std::string operator()(const ErrorReply& m) const {
    std::string out = std::string(error_code_name(m.code));
    if (!m.serial.empty()) out += " serial=" + m.serial;
    if (!m.detail.empty()) out += " (" + m.detail + ")";
    return out;
  }
};

}  // namespace

std::string summarize(const ProtocolMessage& msg) {
  return std::visit(Summarizer{}, msg);
}

}  // namespace plugnet
