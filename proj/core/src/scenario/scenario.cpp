#include "tunnelguard/scenario/scenario.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tunnelguard/common/rng.hpp"
#include "tunnelguard/server/rules.hpp"

namespace tg::scenario {

using nlohmann::json;

std::string_view to_string(Variant v) noexcept {
  switch (v) {
    case Variant::None: return "NONE";
    case Variant::L2tpLite: return "L2TP_LITE";
    case Variant::PptpLite: return "PPTP_LITE";
  }
  return "?";
}

std::string_view to_string(NodeRole r) noexcept {
  switch (r) {
    case NodeRole::Server: return "server";
    case NodeRole::SecureRouter: return "secure_router";
    case NodeRole::Router: return "router";
    case NodeRole::Room: return "room";
  }
  return "?";
}

const NodeDef* Scenario::node(NodeId id) const {
  for (const auto& n : nodes)
    if (n.id == id) return &n;
  return nullptr;
}

const NodeDef& Scenario::server_node() const {
  for (const auto& n : nodes)
    if (n.role == NodeRole::Server) return n;
  throw ScenarioError("topology.nodes", "no server node");
}

namespace {

// A cursor into the document that remembers how it got there.
struct Field {
  const json& j;
  std::string path;

  [[noreturn]] void fail(const std::string& msg) const { throw ScenarioError(path, msg); }

  Field at(const std::string& key) const {
    auto sub = path.empty() ? key : path + "." + key;
    if (!j.is_object()) fail("expected an object");
    auto it = j.find(key);
    if (it == j.end()) throw ScenarioError(sub, "required field missing");
    return {*it, sub};
  }
  std::optional<Field> opt(const std::string& key) const {
    if (!j.is_object()) fail("expected an object");
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return Field{*it, path.empty() ? key : path + "." + key};
  }
  Field item(std::size_t i) const { return {j[i], path + "[" + std::to_string(i) + "]"}; }

  std::vector<Field> array() const {
    if (!j.is_array()) fail("expected an array");
    std::vector<Field> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(item(i));
    return out;
  }

  std::int64_t integer(std::int64_t lo, std::int64_t hi) const {
    if (!j.is_number_integer()) fail("expected an integer");
    std::int64_t v = j.is_number_unsigned() && j.get<std::uint64_t>() > std::uint64_t(std::numeric_limits<std::int64_t>::max())
                         ? std::numeric_limits<std::int64_t>::max()
                         : j.get<std::int64_t>();
    if (v < lo || v > hi) fail("must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "], got " + j.dump());
    return v;
  }
  std::uint64_t u64() const {
    if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0))
      fail("expected a non-negative integer");
    return j.get<std::uint64_t>();
  }
  double number(double lo, double hi) const {
    if (!j.is_number()) fail("expected a number");
    double v = j.get<double>();
    if (!(v >= lo && v <= hi)) fail("must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return v;
  }
  bool boolean() const {
    if (!j.is_boolean()) fail("expected true or false");
    return j.get<bool>();
  }
  std::string string() const {
    if (!j.is_string()) fail("expected a string");
    return j.get<std::string>();
  }
  Millis time_of_day() const {
    try {
      return server::parse_time_of_day(string());
    } catch (const std::invalid_argument&) {
      fail("expected HH:MM:SS");
    }
  }
};

template <typename T>
T get_int(const Field& f, std::int64_t lo = 0, std::int64_t hi = std::numeric_limits<T>::max()) {
  return static_cast<T>(f.integer(lo, hi));
}

Variant parse_variant(const Field& f) {
  auto s = f.string();
  if (s == "NONE") return Variant::None;
  if (s == "L2TP_LITE") return Variant::L2tpLite;
  if (s == "PPTP_LITE") return Variant::PptpLite;
  f.fail("expected NONE, L2TP_LITE or PPTP_LITE");
}

NodeRole parse_role(const Field& f) {
  auto s = f.string();
  if (s == "server") return NodeRole::Server;
  if (s == "secure_router") return NodeRole::SecureRouter;
  if (s == "router") return NodeRole::Router;
  if (s == "room") return NodeRole::Room;
  f.fail("expected server, secure_router, router or room");
}

std::optional<netsim::AdversaryPolicy> parse_adversary(const Field& f) {
  auto mode = f.at("mode").string();
  netsim::AdversaryPolicy p;
  if (mode == "none") return std::nullopt;
  if (mode == "passive") {
    p.mode = netsim::AdversaryMode::PassiveSniff;
  } else if (mode == "mitm") {
    p.mode = netsim::AdversaryMode::Mitm;
  } else {
    f.at("mode").fail("expected none, passive or mitm");
  }
  if (auto n = f.opt("every_nth")) p.tamper.every_nth = get_int<std::uint32_t>(*n, 1);
  if (auto m = f.opt("xor_mask")) p.tamper.xor_mask = get_int<std::uint8_t>(*m, 1);
  return p;
}

ArmDef parse_arm(const Field& f, const std::string& default_name, bool named = true) {
  ArmDef arm;
  arm.name = named && f.opt("name") ? f.at("name").string() : default_name;
  if (arm.name.empty() || arm.name.find_first_of("/\\ ") != std::string::npos)
    f.at("name").fail("must be non-empty without spaces or slashes");
  arm.variant = parse_variant(f.at("variant"));
  if (auto a = f.opt("adversary")) arm.adversary = parse_adversary(*a);
  if (auto ll = f.opt("link_loss")) {
    if (!ll->j.is_object()) ll->fail("expected an object of link name to loss");
    for (const auto& [name, _] : ll->j.items()) arm.link_loss[name] = ll->at(name).number(0.0, 1.0);
  }
  return arm;
}

void parse_tunnel(const Field& f, TunnelSettings& t) {
  auto secret = f.at("secret");
  auto hex = secret.string();
  if (hex.size() != 64) secret.fail("expected 64 hex digits");
  try {
    t.secret = tunnel::SecretKey::from_hex(hex);
  } catch (const std::exception&) {
    secret.fail("expected 64 hex digits");
  }
  if (auto m = f.opt("mtu")) t.mtu = get_int<std::uint16_t>(*m, 128, 65535);
  if (auto r = f.opt("rto_ms")) t.timers.rto = Millis(get_int<std::int64_t>(*r, 1, 60000));
  if (auto r = f.opt("max_retransmits")) t.timers.max_retransmits = get_int<int>(*r, 0, 16);
  if (auto h = f.opt("hello_interval_ms")) t.timers.hello_interval = Millis(get_int<std::int64_t>(*h, 1, 3600000));
}

void parse_topology(const Field& f, Scenario& s) {
  std::set<NodeId> ids;
  for (const auto& nf : f.at("nodes").array()) {
    NodeDef n;
    n.id = get_int<NodeId>(nf.at("id"), 1);
    if (!ids.insert(n.id).second) nf.at("id").fail("duplicate node id");
    n.name = nf.opt("name") ? nf.at("name").string() : "node" + std::to_string(n.id);
    n.role = parse_role(nf.at("role"));
    if (auto t = nf.opt("tappable")) n.tappable = t->boolean();
    n.tunnel_id = n.id;
    if (auto t = nf.opt("tunnel_id")) {
      if (n.role != NodeRole::SecureRouter) t->fail("only secure routers carry a tunnel id");
      n.tunnel_id = get_int<std::uint32_t>(*t, 1);
    }
    s.nodes.push_back(std::move(n));
  }
  auto links = f.at("links").array();
  for (std::size_t i = 0; i < links.size(); ++i) {
    const auto& lf = links[i];
    LinkDef l;
    l.a = get_int<NodeId>(lf.at("a"), 1);
    l.b = get_int<NodeId>(lf.at("b"), 1);
    if (!ids.count(l.a)) lf.at("a").fail("unknown node " + std::to_string(l.a));
    if (!ids.count(l.b)) lf.at("b").fail("unknown node " + std::to_string(l.b));
    if (auto x = lf.opt("loss")) l.loss = x->number(0.0, 1.0);
    if (auto x = lf.opt("latency_ms")) l.latency = Millis(get_int<std::int64_t>(*x, 0, 60000));
    if (auto x = lf.opt("seed")) l.seed = x->u64();
    l.name = lf.opt("name") ? lf.at("name").string() : "link" + std::to_string(i);
    s.links.push_back(std::move(l));
  }

  std::size_t servers = 0;
  std::set<std::uint32_t> tunnel_ids;
  for (std::size_t i = 0; i < s.nodes.size(); ++i) {
    const auto& n = s.nodes[i];
    if (n.role == NodeRole::Server) ++servers;
    if (n.role == NodeRole::SecureRouter && !tunnel_ids.insert(n.tunnel_id).second)
      throw ScenarioError("topology.nodes[" + std::to_string(i) + "].tunnel_id", "duplicate tunnel id");
  }
  if (servers != 1) f.at("nodes").fail("exactly one server node required");

  std::set<std::string> names;
  for (std::size_t i = 0; i < s.links.size(); ++i)
    if (!names.insert(s.links[i].name).second)
      throw ScenarioError("topology.links[" + std::to_string(i) + "].name", "duplicate link name");

  netsim::Topology t;
  for (const auto& n : s.nodes) t.nodes.push_back({n.id, n.name, n.tappable});
  for (const auto& l : s.links) t.links.push_back({l.a, l.b, l.loss, l.latency, 0, l.name});
  try {
    netsim::validate(t);
  } catch (const netsim::NetError& e) {
    f.fail(e.what());
  }
}

void parse_rooms(const Field& f, Scenario& s) {
  std::set<std::uint32_t> room_ids, sessions;
  std::set<std::uint16_t> ports;
  for (const auto& rf : f.array()) {
    RoomDef r;
    r.room_id = get_int<std::uint32_t>(rf.at("room_id"), 1);
    if (!room_ids.insert(r.room_id).second) rf.at("room_id").fail("duplicate room id");
    r.node = get_int<NodeId>(rf.at("node"), 1);
    auto* node = s.node(r.node);
    if (!node || node->role != NodeRole::Room) rf.at("node").fail("not a room node");
    r.gateway = get_int<NodeId>(rf.at("gateway"), 1);
    auto* gw = s.node(r.gateway);
    if (!gw || gw->role != NodeRole::SecureRouter) rf.at("gateway").fail("not a secure router node");
    r.session_id = rf.opt("session_id") ? get_int<std::uint32_t>(rf.at("session_id"), 1) : r.room_id;
    if (!sessions.insert(r.session_id).second) rf.at("session_id").fail("duplicate session id");
    r.device_port = get_int<std::uint16_t>(rf.at("device_port"), 1);
    if (r.device_port == 1701 || r.device_port == 1723 || r.device_port == 9000 || r.device_port == 40000)
      rf.at("device_port").fail("reserved port");
    if (!ports.insert(r.device_port).second) rf.at("device_port").fail("duplicate device port");
    if (auto x = rf.opt("appliance_on")) r.appliance_on = x->boolean();
    if (auto x = rf.opt("locked")) r.locked = x->boolean();
    for (const auto& pf : rf.at("script").array()) {
      device::SetPoint p;
      p.at = Millis(get_int<std::int64_t>(pf.at("t_ms"), 0, std::numeric_limits<std::int32_t>::max()));
      if (!r.script.empty() && p.at <= r.script.back().at) pf.at("t_ms").fail("set-points must be strictly increasing");
      p.motion = pf.at("motion").boolean();
      p.temperature = static_cast<device::DeciCelsius>(std::lround(pf.at("temp").number(-273.0, 10000.0) * 10.0));
      p.humidity = get_int<std::uint8_t>(pf.at("humidity"), 0, 100);
      r.script.push_back(p);
    }
    if (r.script.empty()) rf.at("script").fail("at least one set-point required");
    s.rooms.push_back(std::move(r));
  }
}

void parse_commands(const Field& f, Scenario& s) {
  for (const auto& cf : f.array()) {
    CommandDef c;
    c.at = Millis(get_int<std::int64_t>(cf.at("at_ms"), 0, std::numeric_limits<std::int32_t>::max()));
    c.room_id = get_int<std::uint32_t>(cf.at("room_id"), 1);
    bool known = false;
    for (const auto& r : s.rooms) known = known || r.room_id == c.room_id;
    if (!known) cf.at("room_id").fail("unknown room");
    auto op = device::opcode_from_string(cf.at("opcode").string());
    if (!op) cf.at("opcode").fail("unknown opcode");
    c.opcode = *op;
    s.commands.push_back(c);
  }
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    // byte offset -> line/column
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::string msg = e.what();
    if (auto p = msg.find("syntax error"); p != std::string::npos) msg = msg.substr(p);
    throw ScenarioError("line " + std::to_string(line) + ", column " + std::to_string(col), msg);
  }
  Field root{doc, ""};
  if (!doc.is_object()) root.fail("expected an object");

  Scenario s;
  s.name = root.opt("name") ? root.at("name").string() : "scenario";
  s.seed = root.at("seed").u64();
  s.duration_s = get_int<std::uint32_t>(root.at("duration_s"), 1, 86400);
  if (auto d = root.opt("drain_ms")) s.drain = Millis(get_int<std::int64_t>(*d, 0, 600000));
  if (auto t = root.opt("start_time")) s.start_time = t->time_of_day();
  if (auto r = root.opt("rules")) {
    if (auto t = r->opt("fire_threshold"))
      s.rules.fire_threshold = static_cast<device::DeciCelsius>(std::lround(t->number(-273.0, 10000.0) * 10.0));
    if (auto e = r->opt("end_of_day")) s.rules.end_of_day = e->time_of_day();
  }
  if (auto d = root.opt("device"))
    if (auto v = d->opt("vacancy_debounce_ms")) s.device.vacancy_debounce = Millis(get_int<std::int64_t>(*v, 0, 86400000));

  parse_topology(root.at("topology"), s);
  parse_rooms(root.at("rooms"), s);
  if (auto c = root.opt("commands")) parse_commands(*c, s);

  if (auto arms = root.opt("arms")) {
    if (root.opt("variant")) root.at("variant").fail("give either variant or arms, not both");
    auto items = arms->array();
    std::set<std::string> names;
    for (std::size_t i = 0; i < items.size(); ++i) {
      auto arm = parse_arm(items[i], "arm" + std::to_string(i));
      if (!names.insert(arm.name).second) items[i].at("name").fail("duplicate arm name");
      s.arms.push_back(std::move(arm));
    }
    if (s.arms.empty()) arms->fail("at least one arm required");
  } else {
    s.arms.push_back(parse_arm(root, "default", false));
  }

  bool tunneled = false;
  for (std::size_t i = 0; i < s.arms.size(); ++i) {
    const auto& arm = s.arms[i];
    tunneled = tunneled || arm.variant != Variant::None;
    for (const auto& [name, _] : arm.link_loss) {
      bool found = false;
      for (const auto& l : s.links) found = found || l.name == name;
      if (!found) throw ScenarioError("arms[" + std::to_string(i) + "].link_loss." + name, "unknown link");
    }
    if (arm.adversary) {
      bool tappable = false;
      for (const auto& n : s.nodes) tappable = tappable || n.tappable;
      if (!tappable) throw ScenarioError("arms[" + std::to_string(i) + "].adversary", "no tappable node in topology");
    }
  }
  if (tunneled) {
    parse_tunnel(root.at("tunnel"), s.tunnel);
  } else if (auto t = root.opt("tunnel")) {
    parse_tunnel(*t, s.tunnel);
  }
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError("file", "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

void override_seeds(Scenario& s, std::uint64_t seed) {
  s.seed = seed;
  for (auto& l : s.links) l.seed.reset();
}

netsim::Topology build_topology(const Scenario& s, const ArmDef& arm) {
  netsim::Topology t;
  for (const auto& n : s.nodes) t.nodes.push_back({n.id, n.name, n.tappable});
  for (std::size_t i = 0; i < s.links.size(); ++i) {
    const auto& l = s.links[i];
    netsim::LinkSpec spec{l.a, l.b, l.loss, l.latency, l.seed.value_or(mix_seed(s.seed, 0x1000 + i)), l.name};
    if (auto it = arm.link_loss.find(l.name); it != arm.link_loss.end()) spec.loss = it->second;
    t.links.push_back(std::move(spec));
  }
  return t;
}

}  // namespace tg::scenario
