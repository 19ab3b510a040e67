#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "plugnet/crypto.hpp"
#include "plugnet/identity.hpp"

namespace plugnet {

// ---------------------------------------------------------------------------
// Shared field types

struct WifiInfo {
  std::string ssid;
  Mac ap_mac{};
  std::string passphrase;  // pairing only; never serialized elsewhere

  bool operator==(const WifiInfo&) const = default;
};

enum class SwitchStatus : std::uint8_t { Off = 0, On = 1, Unavailable = 3 };
enum class SwitchAction : std::uint8_t { Off = 0, On = 1 };

const char* switch_status_name(SwitchStatus s);
const char* switch_action_name(SwitchAction a);

inline SwitchStatus status_of(SwitchAction a) {
  return a == SwitchAction::On ? SwitchStatus::On : SwitchStatus::Off;
}

// ---------------------------------------------------------------------------
// Wire messages (local pairing, binding, key fetch, status, control, relay)

struct PairGetInfoRequest {
  bool operator==(const PairGetInfoRequest&) const = default;
};

struct PairGetInfoResponse {
  DeviceIdentity plug;

  bool operator==(const PairGetInfoResponse&) const = default;
};

struct PairSetupRequest {
  std::string phone_id;
  std::string phone_description;
  std::uint64_t timestamp = 0;
  WifiInfo wifi;  // carries the home AP passphrase

  bool operator==(const PairSetupRequest&) const = default;
};

struct BindRequest {
  DeviceIdentity plug;
  std::string phone_id;
  std::string phone_description;
  WifiInfo wifi;  // ssid + ap_mac only; passphrase must be empty
  std::uint64_t timestamp = 0;
  AuthField auth;
  bool re_register = false;

  bool operator==(const BindRequest&) const = default;
};

enum class BindResponseKind : std::uint8_t { TempKeyIssued = 0, KeysIssued = 1 };

struct BindResponse {
  BindResponseKind kind = BindResponseKind::TempKeyIssued;
  std::optional<SecretKey> temp_key;   // TempKeyIssued only
  std::optional<SecretKey> plug_key;   // KeysIssued only
  std::optional<SecretKey> phone_key;  // KeysIssued only

  bool operator==(const BindResponse&) const = default;
};

struct KeyFetchRequest {
  std::string phone_id;
  std::string serial;
  std::uint64_t timestamp = 0;
  Digest mac_field{};

  bool operator==(const KeyFetchRequest&) const = default;
};

struct KeyFetchResponse {
  SecretKey phone_key;

  bool operator==(const KeyFetchResponse&) const = default;
};

struct StatusUpdate {
  SwitchStatus status = SwitchStatus::Off;
  AuthField auth;  // auth.serial identifies the reporting plug

  bool operator==(const StatusUpdate&) const = default;
};

struct StatusQuery {
  AuthField auth;  // auth.serial identifies the queried plug

  bool operator==(const StatusQuery&) const = default;
};

struct StatusReply {
  SwitchStatus status = SwitchStatus::Off;

  bool operator==(const StatusReply&) const = default;
};

struct ControlCommand {
  std::string target_serial;
  SwitchAction action = SwitchAction::Off;
  AuthField auth;

  bool operator==(const ControlCommand&) const = default;
};

struct TurnAllocateRequest {
  std::string serial;
  ChapExchange chap;

  bool operator==(const TurnAllocateRequest&) const = default;
};

struct TurnAllocateResponse {
  std::uint16_t relay_port = 0;

  bool operator==(const TurnAllocateResponse&) const = default;
};

struct TurnRelayedCommand {
  ControlCommand command;
  IntegrityAttribute integrity;  // HMAC over the serialization with a zeroed slot

  bool operator==(const TurnRelayedCommand&) const = default;
};

// Plug -> phone key hand-off over the local network after binding.
struct LocalKeyDelivery {
  std::string serial;
  SecretKey phone_key;

  bool operator==(const LocalKeyDelivery&) const = default;
};

// HTTPS server -> TURN server plug-key distribution (server-internal).
struct KeyShare {
  std::string serial;
  SecretKey plug_key;

  bool operator==(const KeyShare&) const = default;
};

// TURN server -> HTTPS server relay-port announcement (server-internal).
struct PortShare {
  std::string serial;
  std::uint16_t relay_port = 0;

  bool operator==(const PortShare&) const = default;
};

enum class ErrorCode : std::uint8_t {
  BindRejected = 1,
  AuthRejected = 2,
  NotBound = 3,
  AllocationDenied = 4,
  Unavailable = 5,
};

const char* error_code_name(ErrorCode c);

struct ErrorReply {
  ErrorCode code = ErrorCode::BindRejected;
  std::string serial;
  std::string detail;

  bool operator==(const ErrorReply&) const = default;
};

// ---------------------------------------------------------------------------
// Tagged union + canonical serialization

enum class MessageKind : std::uint8_t {
  PairGetInfoRequest = 1,
  PairGetInfoResponse = 2,
  PairSetupRequest = 3,
  BindRequest = 4,
  BindResponse = 5,
  KeyFetchRequest = 6,
  KeyFetchResponse = 7,
  StatusUpdate = 8,
  StatusQuery = 9,
  StatusReply = 10,
  ControlCommand = 11,
  TurnAllocateRequest = 12,
  TurnAllocateResponse = 13,
  TurnRelayedCommand = 14,
  LocalKeyDelivery = 15,
  KeyShare = 16,
  PortShare = 17,
  ErrorReply = 18,
};

using ProtocolMessage =
    std::variant<PairGetInfoRequest, PairGetInfoResponse, PairSetupRequest,
                 BindRequest, BindResponse, KeyFetchRequest, KeyFetchResponse,
                 StatusUpdate, StatusQuery, StatusReply, ControlCommand,
                 TurnAllocateRequest, TurnAllocateResponse, TurnRelayedCommand,
                 LocalKeyDelivery, KeyShare, PortShare, ErrorReply>;

const char* message_kind_name(MessageKind kind);
std::optional<MessageKind> message_kind_from_name(const std::string& name);

MessageKind kind_of(const ProtocolMessage& msg);

// Canonical serialization: one tag byte then the fields in declared order,
// big-endian scalars, u16-length-prefixed strings, secret keys as lowercase
// hex strings. Equal values always produce equal bytes.
Bytes serialize(const ProtocolMessage& msg);

// Same as serialize() but with the pairing passphrase masked to '*' of equal
// length. This is the form embedded in traces.
Bytes serialize_redacted(const ProtocolMessage& msg);

// Throws ParseError (with byte offset) on malformed or trailing input.
ProtocolMessage deserialize(std::span<const std::uint8_t> bytes);

// Peeks the tag byte without a full parse.
MessageKind message_kind(std::span<const std::uint8_t> bytes);

// Semantic byte content of every leaf field, for entropy analysis. Secret
// keys yield their raw bytes (not the wire hex); scalars yield their
// big-endian encoding; strings yield their UTF-8 bytes.
struct FieldView {
  std::string name;
  Bytes bytes;
};

std::vector<FieldView> field_views(const ProtocolMessage& msg);

// One-line human rendering used by `trace inspect`.
std::string summarize(const ProtocolMessage& msg);

}  // namespace plugnet
