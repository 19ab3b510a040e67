#include "plugnet/simnet.hpp"

#include <fstream>

#include "json.hpp"
#include "plugnet/errors.hpp"

namespace plugnet {

using ordered_json = nlohmann::ordered_json;

const char* channel_name(Channel c) {
  switch (c) {
    case Channel::LocalAp:
      return "local_ap";
    case Channel::Internet:
      return "internet";
    case Channel::ServerInternal:
      return "server_internal";
  }
  return "?";
}

std::optional<Channel> channel_from_name(const std::string& name) {
  if (name == "local_ap") return Channel::LocalAp;
  if (name == "internet") return Channel::Internet;
  if (name == "server_internal") return Channel::ServerInternal;
  return std::nullopt;
}

std::uint16_t NatRouter::bind_flow(const NodeId& src, const NodeId& dst) {
  auto key = std::make_pair(src, dst);
  auto it = by_flow_.find(key);
  if (it != by_flow_.end()) return it->second;
  std::uint16_t port = next_port_++;
  by_flow_.emplace(key, port);
  by_port_.emplace(port, src);
  return port;
}

std::optional<NodeId> NatRouter::route_back(std::uint16_t public_port) const {
  auto it = by_port_.find(public_port);
  if (it == by_port_.end()) return std::nullopt;
  return it->second;
}

void NatRouter::set_public_ip(std::string ip) {
  public_ip_ = std::move(ip);
  by_flow_.clear();
  by_port_.clear();
}

Network::Network(std::uint64_t seed) : rng_(seed) {}

std::string Network::next_public_ip() {
  // 198.18.0.0/15 is reserved for network interconnect testing; the counter
  // never reuses an address within a run.
  ++ip_counter_;
  if (ip_counter_ > 0xffff) {
    throw AddressError("public IP pool exhausted");
  }
  return "198.18." + std::to_string((ip_counter_ >> 8) & 0xff) + "." +
         std::to_string(ip_counter_ & 0xff);
}

LanId Network::add_lan(const LanId& lan_id, const std::string& ssid,
                       const Mac& ap_mac) {
  if (lans_.count(lan_id)) {
    throw AddressError("lan already exists: " + lan_id);
  }
  Lan lan;
  lan.id = lan_id;
  lan.ssid = ssid;
  lan.ap_mac = ap_mac;
  lan.router = std::make_unique<NatRouter>(next_public_ip(), 40000);
  lans_.emplace(lan_id, std::move(lan));
  lan_order_.push_back(lan_id);
  return lan_id;
}

NodeAddress Network::add_node(const NodeId& node_id, const std::string& kind,
                              const std::optional<LanId>& lan,
                              const std::optional<Mac>& mac) {
  if (nodes_.count(node_id)) {
    throw AddressError("node already exists: " + node_id);
  }
  Node n;
  n.id = node_id;
  n.kind = kind;
  n.lan = lan;
  n.mac = mac;
  if (lan) {
    auto it = lans_.find(*lan);
    if (it == lans_.end()) throw AddressError("unknown lan: " + *lan);
    std::size_t subnet = 0;
    for (std::size_t i = 0; i < lan_order_.size(); ++i) {
      if (lan_order_[i] == *lan) subnet = i + 1;
    }
    n.private_ip = "192.168." + std::to_string(subnet) + "." +
                   std::to_string(it->second.next_host++);
  } else {
    n.private_ip = next_public_ip();
  }
  nodes_.emplace(node_id, std::move(n));
  node_order_.push_back(node_id);
  return address_of(node_id);
}

void Network::attach_actor(const NodeId& node_id, Actor* actor) {
  node_at(node_id).actor = actor;
}

const Network::Node& Network::node_at(const NodeId& id) const {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw AddressError("unknown node: " + id);
  return it->second;
}

Network::Node& Network::node_at(const NodeId& id) {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw AddressError("unknown node: " + id);
  return it->second;
}

NodeAddress Network::address_of_node(const Node& n) const {
  NodeAddress addr;
  addr.node_id = n.id;
  addr.private_ip = n.private_ip;
  if (n.lan) {
    addr.public_ip = lans_.at(*n.lan).router->public_ip();
    addr.network = "lan:" + *n.lan;
  } else {
    addr.public_ip = n.private_ip;
    addr.network = "internet";
  }
  return addr;
}

NodeAddress Network::address_of(const NodeId& node_id) const {
  return address_of_node(node_at(node_id));
}

std::string Network::change_public_ip(const NodeId& node_id) {
  Node& n = node_at(node_id);
  if (!n.lan) {
    throw AddressError("node is not behind a NAT router: " + node_id);
  }
  NatRouter& router = *lans_.at(*n.lan).router;
  router.set_public_ip(next_public_ip());
  return router.public_ip();
}

bool Network::same_lan(const NodeId& a, const NodeId& b) const {
  const Node& na = node_at(a);
  const Node& nb = node_at(b);
  return na.lan && nb.lan && *na.lan == *nb.lan;
}

const NatRouter* Network::router_of(const NodeId& node_id) const {
  const Node& n = node_at(node_id);
  if (!n.lan) return nullptr;
  return lans_.at(*n.lan).router.get();
}

void Network::send(const NodeId& src, const NodeId& dst, ProtocolMessage msg,
                   Channel channel) {
  if (shut_down_) {
    throw LifecycleError("send after network shutdown");
  }
  Node& src_node = node_at(src);
  Node& dst_node = node_at(dst);

  if (channel == Channel::LocalAp) {
    if (!src_node.lan || !dst_node.lan || *src_node.lan != *dst_node.lan) {
      throw ChannelError("local AP channel requires both nodes on one LAN");
    }
  }

  NodeAddress observed = address_of_node(src_node);
  if (channel == Channel::Internet && src_node.lan) {
    lans_.at(*src_node.lan).router->bind_flow(src, dst);
  }

  Delivery d;
  d.vtime = vtime_ + 1;  // each hop costs one time unit
  d.src = src;
  d.dst = dst;
  d.channel = channel;
  d.message = std::move(msg);
  d.observed_src = observed;

  Event ev;
  ev.vtime = d.vtime;
  ev.order = next_order_++;
  ev.delivery = std::move(d);
  queue_.push(std::move(ev));
}

void Network::schedule_call(std::uint64_t at_vtime,
                            std::function<void(Network&)> fn) {
  if (shut_down_) {
    throw LifecycleError("schedule after network shutdown");
  }
  Event ev;
  ev.vtime = at_vtime < vtime_ ? vtime_ : at_vtime;
  ev.order = next_order_++;
  ev.call = std::move(fn);
  queue_.push(std::move(ev));
}

std::uint64_t Network::run_until_idle() {
  while (!queue_.empty()) {
    Event ev = queue_.top();
    queue_.pop();
    vtime_ = ev.vtime;
    if (ev.delivery) {
      Delivery& d = *ev.delivery;
      TraceRecord rec;
      rec.seq = next_seq_++;
      rec.vtime = vtime_;
      rec.src = d.observed_src;
      rec.dst = address_of(d.dst);
      rec.channel = d.channel;
      rec.kind = message_kind_name(kind_of(d.message));
      rec.payload_hex = to_hex(serialize_redacted(d.message));
      d.trace_seq = rec.seq;
      trace_.push_back(std::move(rec));
      current_record_ = &trace_.back();
      std::optional<std::string> drop_reason;
      if (drop_hook_) drop_reason = drop_hook_(d);
      if (drop_reason) {
        annotate_current("dropped", *drop_reason);
      } else {
        Actor* actor = node_at(d.dst).actor;
        if (actor != nullptr) {
          actor->on_message(*this, d);
        } else {
          annotate_current("undelivered", "no actor attached");
        }
      }
      current_record_ = nullptr;
    } else if (ev.call) {
      ev.call(*this);
    }
  }
  return vtime_;
}

void Network::shutdown() { shut_down_ = true; }

std::vector<LanInfo> Network::lans() const {
  std::vector<LanInfo> out;
  for (const auto& id : lan_order_) {
    const Lan& lan = lans_.at(id);
    out.push_back(LanInfo{lan.id, lan.ssid, lan.ap_mac});
  }
  return out;
}

std::vector<NodeInfo> Network::nodes() const {
  std::vector<NodeInfo> out;
  for (const auto& id : node_order_) {
    const Node& n = nodes_.at(id);
    out.push_back(NodeInfo{n.id, n.kind, n.lan, n.mac});
  }
  return out;
}

int Network::attach_sniffer(SnifferFilter filter) {
  sniffers_.emplace_back(std::move(filter), next_seq_);
  return static_cast<int>(sniffers_.size()) - 1;
}

std::vector<TraceRecord> Network::sniffed(int sniffer_id) const {
  if (sniffer_id < 0 || sniffer_id >= static_cast<int>(sniffers_.size())) {
    throw AddressError("unknown sniffer id");
  }
  const auto& [filter, from_seq] = sniffers_[sniffer_id];
  std::vector<TraceRecord> out;
  for (const TraceRecord& rec : trace_) {
    if (rec.seq >= from_seq && filter.matches(rec)) out.push_back(rec);
  }
  return out;
}

void Network::annotate_current(const std::string& key,
                               const std::string& value) {
  if (current_record_ == nullptr) {
    throw LifecycleError("annotate_current outside message dispatch");
  }
  current_record_->annotations[key] = value;
}

namespace {

ordered_json address_json(const NodeAddress& a) {
  ordered_json j;
  j["node"] = a.node_id;
  j["ip"] = a.private_ip;
  j["public_ip"] = a.public_ip;
  j["net"] = a.network;
  return j;
}

}  // namespace

std::string Network::trace_jsonl() const {
  std::string out;
  for (const TraceRecord& rec : trace_) {
    ordered_json j;
    j["seq"] = rec.seq;
    j["vtime"] = rec.vtime;
    j["src"] = address_json(rec.src);
    j["dst"] = address_json(rec.dst);
    j["channel"] = channel_name(rec.channel);
    j["kind"] = rec.kind;
    j["payload_hex"] = rec.payload_hex;
    ordered_json ann = ordered_json::object();
    for (const auto& [k, v] : rec.annotations) ann[k] = v;
    j["annotations"] = ann;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void Network::write_trace_jsonl(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open trace file for writing: " + path);
  f << trace_jsonl();
  if (!f) throw IoError("failed writing trace file: " + path);
}

}  // namespace plugnet
