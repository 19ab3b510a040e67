#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <set>

#include "doctest.h"
#include "plugnet/errors.hpp"
#include "plugnet/simnet.hpp"

using namespace plugnet;

namespace {

const Mac kApMac{0xC8, 0x3A, 0x35, 0x00, 0x00, 0x07};

// Records deliveries; optionally replies to each message.
class Recorder : public Actor {
 public:
  explicit Recorder(NodeId self, std::optional<NodeId> reply_to = std::nullopt)
      : self_(std::move(self)), reply_to_(std::move(reply_to)) {}

  void on_message(Network& net, const Delivery& d) override {
    deliveries.push_back(d);
    if (reply_to_) {
      net.send(self_, *reply_to_, StatusReply{SwitchStatus::On},
               Channel::Internet);
    }
  }

  std::vector<Delivery> deliveries;

 private:
  NodeId self_;
  std::optional<NodeId> reply_to_;
};

ProtocolMessage ping(int n) {
  return StatusReply{n % 2 == 0 ? SwitchStatus::Off : SwitchStatus::On};
}

}  // namespace

TEST_CASE("empty network runs to idle at time zero") {
  Network net(1);
  CHECK(net.run_until_idle() == 0);
  CHECK(net.trace().empty());
}

TEST_CASE("one message, one delivery record with correct endpoints") {
  Network net(1);
  net.add_lan("home", "home-net-home", kApMac);
  net.add_node("a", "phone", std::string("home"));
  net.add_node("b", "plug", std::string("home"));
  Recorder rec("b");
  net.attach_actor("b", &rec);

  net.send("a", "b", ping(1), Channel::LocalAp);
  net.run_until_idle();

  REQUIRE(net.trace().size() == 1);
  const TraceRecord& r = net.trace().front();
  CHECK(r.seq == 1);
  CHECK(r.src.node_id == "a");
  CHECK(r.dst.node_id == "b");
  CHECK(r.channel == Channel::LocalAp);
  CHECK(r.kind == "StatusReply");
  CHECK(r.src.network == "lan:home");
  REQUIRE(rec.deliveries.size() == 1);
  CHECK(rec.deliveries[0].src == "a");
}

TEST_CASE("same seed and script produce byte-identical traces") {
  auto run_once = [](std::uint64_t seed) {
    Network net(seed);
    net.add_lan("home", "home-net-home", kApMac);
    net.add_node("a", "phone", std::string("home"));
    net.add_node("b", "plug", std::string("home"));
    Recorder rec("b");
    net.attach_actor("b", &rec);
    for (int i = 0; i < 10; ++i) {
      net.send("a", "b", ping(i), Channel::LocalAp);
    }
    net.schedule_call(5, [](Network& n) {
      n.send("a", "b", StatusReply{SwitchStatus::Unavailable},
             Channel::LocalAp);
    });
    net.run_until_idle();
    return net.trace_jsonl();
  };
  CHECK(run_once(42) == run_once(42));
}

TEST_CASE("per-link FIFO delivery order") {
  Network net(3);
  net.add_node("a", "phone");
  net.add_node("b", "plug");
  Recorder rec("b");
  net.attach_actor("b", &rec);
  for (int i = 0; i < 20; ++i) {
    net.send("a", "b", StatusReply{i % 2 ? SwitchStatus::On : SwitchStatus::Off},
             Channel::Internet);
  }
  net.run_until_idle();
  REQUIRE(rec.deliveries.size() == 20);
  for (int i = 0; i < 20; ++i) {
    auto st = std::get<StatusReply>(rec.deliveries[i].message).status;
    CHECK(st == (i % 2 ? SwitchStatus::On : SwitchStatus::Off));
  }
}

TEST_CASE("conservation: every send yields exactly one record") {
  Network net(4);
  net.add_node("a", "phone");
  net.add_node("b", "plug");
  Recorder rec("b");
  net.attach_actor("b", &rec);
  for (int i = 0; i < 50; ++i) net.send("a", "b", ping(i), Channel::Internet);
  net.run_until_idle();
  CHECK(net.trace().size() == 50);
  CHECK(rec.deliveries.size() == 50);
  std::set<std::uint64_t> seqs;
  for (const auto& r : net.trace()) seqs.insert(r.seq);
  CHECK(seqs.size() == 50);  // strictly increasing, no duplicates
}

TEST_CASE("NAT flows get distinct stable public ports and route back") {
  Network net(5);
  net.add_lan("home", "home-net-home", kApMac);
  net.add_node("plug", "plug", std::string("home"));
  net.add_node("phone", "phone", std::string("home"));
  net.add_node("server", "https-server");
  Recorder rec("server");
  net.attach_actor("server", &rec);

  net.send("plug", "server", ping(0), Channel::Internet);
  net.send("phone", "server", ping(1), Channel::Internet);
  net.send("plug", "server", ping(2), Channel::Internet);
  net.run_until_idle();

  const NatRouter* router = net.router_of("plug");
  REQUIRE(router != nullptr);
  CHECK(router->binding_count() == 2);  // one per flow, reused on repeat
  std::uint16_t p1 = 40000;
  std::uint16_t p2 = 40001;
  CHECK(router->route_back(p1).has_value());
  CHECK(router->route_back(p2).has_value());
  CHECK(*router->route_back(p1) != *router->route_back(p2));
  CHECK_FALSE(router->route_back(40999).has_value());

  // Observed source on the wire is the router's public address.
  CHECK(net.trace()[0].src.public_ip == router->public_ip());
  CHECK(net.trace()[0].src.private_ip != router->public_ip());
}

TEST_CASE("change_public_ip invalidates flows and never reuses addresses") {
  Network net(6);
  net.add_lan("home", "home-net-home", kApMac);
  net.add_node("plug", "plug", std::string("home"));
  net.add_node("server", "https-server");
  Recorder rec("server");
  net.attach_actor("server", &rec);

  net.send("plug", "server", ping(0), Channel::Internet);
  net.run_until_idle();
  std::string before = net.address_of("plug").public_ip;

  std::string changed = net.change_public_ip("plug");
  CHECK(changed != before);
  CHECK(net.router_of("plug")->binding_count() == 0);

  net.send("plug", "server", ping(1), Channel::Internet);
  net.run_until_idle();
  CHECK(net.trace().back().src.public_ip == changed);

  std::set<std::string> ips{before, changed};
  for (int i = 0; i < 1000; ++i) ips.insert(net.change_public_ip("plug"));
  CHECK(ips.size() == 1002);  // allocator never reuses within a run

  CHECK_THROWS_AS(net.change_public_ip("server"), AddressError);
}

TEST_CASE("sniffers see exactly the records matching their filter") {
  Network net(7);
  net.add_lan("home", "home-net-home", kApMac);
  net.add_node("a", "phone", std::string("home"));
  net.add_node("b", "plug", std::string("home"));
  net.add_node("c", "https-server");
  Recorder rb("b"), rc("c");
  net.attach_actor("b", &rb);
  net.attach_actor("c", &rc);

  int local_sniffer = net.attach_sniffer({Channel::LocalAp, std::nullopt});
  int node_sniffer = net.attach_sniffer({std::nullopt, NodeId("c")});

  net.send("a", "b", ping(0), Channel::LocalAp);
  net.send("a", "c", ping(1), Channel::Internet);
  net.send("a", "b", ping(2), Channel::LocalAp);
  net.run_until_idle();

  auto local = net.sniffed(local_sniffer);
  REQUIRE(local.size() == 2);
  for (const auto& r : local) CHECK(r.channel == Channel::LocalAp);

  auto at_c = net.sniffed(node_sniffer);
  REQUIRE(at_c.size() == 1);
  CHECK(at_c[0].dst.node_id == "c");

  // A sniffer attached later sees only subsequent records.
  int late = net.attach_sniffer({std::nullopt, std::nullopt});
  CHECK(net.sniffed(late).empty());
  net.send("a", "b", ping(3), Channel::LocalAp);
  net.run_until_idle();
  CHECK(net.sniffed(late).size() == 1);
}

TEST_CASE("lifecycle and addressing errors") {
  Network net(8);
  net.add_node("a", "phone");
  CHECK_THROWS_AS(net.send("a", "nobody", ping(0), Channel::Internet),
                  AddressError);
  CHECK_THROWS_AS(net.send("ghost", "a", ping(0), Channel::Internet),
                  AddressError);
  CHECK_THROWS_AS(net.address_of("ghost"), AddressError);

  net.shutdown();
  CHECK_THROWS_AS(net.send("a", "a", ping(0), Channel::Internet),
                  LifecycleError);
  CHECK_THROWS_AS(net.schedule_call(1, [](Network&) {}), LifecycleError);
}

TEST_CASE("local AP channel requires a shared LAN") {
  Network net(9);
  net.add_lan("home", "home-net-home", kApMac);
  net.add_lan("away", "away-net-away", Mac{2, 0, 0, 0, 0, 9});
  net.add_node("a", "phone", std::string("home"));
  net.add_node("b", "plug", std::string("away"));
  net.add_node("s", "https-server");
  CHECK_THROWS_AS(net.send("a", "b", ping(0), Channel::LocalAp), ChannelError);
  CHECK_THROWS_AS(net.send("a", "s", ping(0), Channel::LocalAp), ChannelError);
}

TEST_CASE("scheduled calls and deliveries interleave by virtual time") {
  Network net(10);
  net.add_node("a", "phone");
  net.add_node("b", "plug");
  Recorder rec("b");
  net.attach_actor("b", &rec);

  std::vector<int> order;
  net.schedule_call(5, [&order](Network&) { order.push_back(5); });
  net.schedule_call(0, [&order](Network& n) {
    order.push_back(0);
    n.send("a", "b", ping(0), Channel::Internet);  // delivered at t=1
  });
  net.schedule_call(2, [&order](Network&) { order.push_back(2); });
  std::uint64_t end = net.run_until_idle();

  CHECK(order == std::vector<int>{0, 2, 5});
  REQUIRE(rec.deliveries.size() == 1);
  CHECK(rec.deliveries[0].vtime == 1);
  CHECK(end == 5);
}

TEST_CASE("trace JSON lines use a stable key order") {
  Network net(11);
  net.add_node("a", "phone");
  net.add_node("b", "plug");
  net.send("a", "b", ping(0), Channel::Internet);
  net.run_until_idle();
  std::string jsonl = net.trace_jsonl();
  CHECK(jsonl.rfind("{\"seq\":1,\"vtime\":1,\"src\":{\"node\":\"a\"", 0) == 0);
  CHECK(jsonl.back() == '\n');
}

TEST_CASE("annotate_current outside dispatch is a lifecycle error") {
  Network net(12);
  CHECK_THROWS_AS(net.annotate_current("k", "v"), LifecycleError);
}

TEST_CASE("drop hook records a drop instead of delivering") {
  Network net(13);
  net.add_node("a", "phone");
  net.add_node("b", "plug");
  Recorder rec("b");
  net.attach_actor("b", &rec);
  int seen = 0;
  net.set_drop_hook([&seen](const Delivery&) -> std::optional<std::string> {
    return ++seen % 2 == 0 ? std::optional<std::string>("lossy link")
                           : std::nullopt;
  });
  for (int i = 0; i < 6; ++i) net.send("a", "b", ping(i), Channel::Internet);
  net.run_until_idle();

  // Conservation: six records, three delivered, three marked dropped.
  CHECK(net.trace().size() == 6);
  CHECK(rec.deliveries.size() == 3);
  std::size_t drops = 0;
  for (const auto& r : net.trace()) drops += r.annotations.count("dropped");
  CHECK(drops == 3);
}
