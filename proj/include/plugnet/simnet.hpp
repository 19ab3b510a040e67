#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "plugnet/messages.hpp"
#include "plugnet/util.hpp"

namespace plugnet {

enum class Channel : std::uint8_t { LocalAp, Internet, ServerInternal };

const char* channel_name(Channel c);
std::optional<Channel> channel_from_name(const std::string& name);

using NodeId = std::string;
using LanId = std::string;

struct NodeAddress {
  NodeId node_id;
  std::string private_ip;
  std::string public_ip;  // equals private_ip for nodes directly on the net
  std::string network;    // "lan:<id>" or "internet"

  bool operator==(const NodeAddress&) const = default;
};

// One NAT'd home/office connection: stable public IP plus per-flow port
// bindings.
class NatRouter {
 public:
  NatRouter(std::string public_ip, std::uint16_t first_port)
      : public_ip_(std::move(public_ip)), next_port_(first_port) {}

  const std::string& public_ip() const { return public_ip_; }

  // Allocates (or reuses) the public port for a flow. Distinct flows get
  // distinct ports; a flow keeps its port for its lifetime.
  std::uint16_t bind_flow(const NodeId& src, const NodeId& dst);

  // Maps a public port back to the private node, if a binding exists.
  std::optional<NodeId> route_back(std::uint16_t public_port) const;

  // New public address: all existing flows are invalidated.
  void set_public_ip(std::string ip);

  std::size_t binding_count() const { return by_flow_.size(); }

 private:
  std::string public_ip_;
  std::uint16_t next_port_;
  std::map<std::pair<NodeId, NodeId>, std::uint16_t> by_flow_;
  std::map<std::uint16_t, NodeId> by_port_;
};

struct TraceRecord {
  std::uint64_t seq = 0;
  std::uint64_t vtime = 0;
  NodeAddress src;
  NodeAddress dst;
  Channel channel = Channel::Internet;
  std::string kind;
  std::string payload_hex;
  std::map<std::string, std::string> annotations;
};

// What the registered actor sees when a message arrives.
struct Delivery {
  std::uint64_t vtime = 0;
  NodeId src;
  NodeId dst;
  Channel channel = Channel::Internet;
  ProtocolMessage message;
  NodeAddress observed_src;  // source as visible on the wire (post-NAT)
  std::uint64_t trace_seq = 0;
};

class Network;

class Actor {
 public:
  virtual ~Actor() = default;
  virtual void on_message(Network& net, const Delivery& delivery) = 0;
};

struct SnifferFilter {
  std::optional<Channel> channel;
  std::optional<NodeId> node;  // matches either endpoint

  bool matches(const TraceRecord& rec) const {
    if (channel && rec.channel != *channel) return false;
    if (node && rec.src.node_id != *node && rec.dst.node_id != *node)
      return false;
    return true;
  }
};

// Beacon-level metadata a wireless listener can harvest without joining the
// network.
struct LanInfo {
  LanId lan_id;
  std::string ssid;
  Mac ap_mac{};
};

struct NodeInfo {
  NodeId node_id;
  std::string kind;
  std::optional<LanId> lan;
  std::optional<Mac> mac;  // device MAC, advertised by plugs
};

// Deterministic discrete-event network. Single logical event loop; identical
// seed and scenario script produce an identical trace byte-for-byte.
class Network {
 public:
  explicit Network(std::uint64_t seed);

  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  // Topology -----------------------------------------------------------
  LanId add_lan(const LanId& lan_id, const std::string& ssid,
                const Mac& ap_mac);
  NodeAddress add_node(const NodeId& node_id, const std::string& kind,
                       const std::optional<LanId>& lan = std::nullopt,
                       const std::optional<Mac>& mac = std::nullopt);
  void attach_actor(const NodeId& node_id, Actor* actor);

  // Messaging ----------------------------------------------------------
  void send(const NodeId& src, const NodeId& dst, ProtocolMessage msg,
            Channel channel);
  void schedule_call(std::uint64_t at_vtime, std::function<void(Network&)> fn);
  std::uint64_t run_until_idle();
  void shutdown();

  // Off by default: no loss, no reordering. When set, a delivery for which
  // the hook returns a reason string is recorded as a drop instead of being
  // dispatched.
  using DropHook = std::function<std::optional<std::string>(const Delivery&)>;
  void set_drop_hook(DropHook hook) { drop_hook_ = std::move(hook); }

  // Addressing ---------------------------------------------------------
  NodeAddress address_of(const NodeId& node_id) const;
  std::string change_public_ip(const NodeId& node_id);
  bool same_lan(const NodeId& a, const NodeId& b) const;
  const NatRouter* router_of(const NodeId& node_id) const;

  // Observation --------------------------------------------------------
  std::uint64_t now() const { return vtime_; }
  DeterministicRng& rng() { return rng_; }
  const std::vector<TraceRecord>& trace() const { return trace_; }
  std::vector<LanInfo> lans() const;
  std::vector<NodeInfo> nodes() const;

  int attach_sniffer(SnifferFilter filter);
  std::vector<TraceRecord> sniffed(int sniffer_id) const;

  // Adds an annotation to the record currently being dispatched. Actors use
  // this to mark accept/reject outcomes on the triggering message.
  void annotate_current(const std::string& key, const std::string& value);

  // Trace output: one JSON object per line, stable key order.
  std::string trace_jsonl() const;
  void write_trace_jsonl(const std::string& path) const;

 private:
  struct Node {
    NodeId id;
    std::string kind;
    std::optional<LanId> lan;
    std::optional<Mac> mac;
    std::string private_ip;
    Actor* actor = nullptr;
  };

  struct Lan {
    LanId id;
    std::string ssid;
    Mac ap_mac{};
    std::unique_ptr<NatRouter> router;
    int next_host = 2;  // .1 is the router
  };

  struct Event {
    std::uint64_t vtime;
    std::uint64_t order;  // tie-break: enqueue order
    // Exactly one of the two is active.
    std::optional<Delivery> delivery;
    std::function<void(Network&)> call;
  };

  struct EventLater {
    bool operator()(const Event& a, const Event& b) const {
      if (a.vtime != b.vtime) return a.vtime > b.vtime;
      return a.order > b.order;
    }
  };

  const Node& node_at(const NodeId& id) const;
  Node& node_at(const NodeId& id);
  NodeAddress address_of_node(const Node& n) const;
  std::string next_public_ip();

  std::uint64_t vtime_ = 0;
  std::uint64_t next_order_ = 0;
  std::uint64_t next_seq_ = 1;
  bool shut_down_ = false;
  DeterministicRng rng_;
  std::map<NodeId, Node> nodes_;
  std::map<LanId, Lan> lans_;
  std::vector<NodeId> node_order_;  // insertion order, for deterministic scans
  std::vector<LanId> lan_order_;
  std::priority_queue<Event, std::vector<Event>, EventLater> queue_;
  std::vector<TraceRecord> trace_;
  std::vector<std::pair<SnifferFilter, std::uint64_t>> sniffers_;  // + attach seq
  std::uint32_t ip_counter_ = 0;
  TraceRecord* current_record_ = nullptr;
  DropHook drop_hook_;
};

}  // namespace plugnet
