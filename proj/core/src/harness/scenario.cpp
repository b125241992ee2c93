#include "dcs/harness/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "json.hpp"

namespace dcs::harness {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ScenarioError("field '" + path + "': " + msg);
}

/// Typed access to one JSON object that remembers which keys were consumed,
/// so leftovers can be reported as unknown.
class Fields {
 public:
  Fields(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) fail(display(), "expected an object");
  }

  bool has(const std::string& key) {
    used_.insert(key);
    return obj_.contains(key) && !obj_.at(key).is_null();
  }

  const json& raw(const std::string& key) {
    used_.insert(key);
    return obj_.at(key);
  }

  std::string child(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  template <class T>
  T uint(const std::string& key, T def, T min = 0, T max = std::numeric_limits<T>::max()) {
    if (!has(key)) return def;
    const auto& v = obj_.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.template get<long long>() >= 0)) {
      fail(child(key), "expected a non-negative integer");
    }
    auto x = v.template get<std::uint64_t>();
    if (x < min || x > max) {
      fail(child(key), "must be in [" + std::to_string(min) + ", " + std::to_string(max) + "]");
    }
    return static_cast<T>(x);
  }

  template <class T>
  std::optional<T> opt_uint(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return uint<T>(key, 0);
  }

  double number(const std::string& key, double def, double min, double max) {
    if (!has(key)) return def;
    const auto& v = obj_.at(key);
    if (!v.is_number()) fail(child(key), "expected a number");
    auto x = v.get<double>();
    if (!std::isfinite(x) || x < min || x > max) {
      fail(child(key), "must be in [" + num(min) + ", " + num(max) + "]");
    }
    return x;
  }

  bool boolean(const std::string& key, bool def) {
    if (!has(key)) return def;
    const auto& v = obj_.at(key);
    if (!v.is_boolean()) fail(child(key), "expected true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key, const std::string& def) {
    if (!has(key)) return def;
    const auto& v = obj_.at(key);
    if (!v.is_string()) fail(child(key), "expected a string");
    return v.get<std::string>();
  }

  void finish() const {
    for (const auto& [key, value] : obj_.items()) {
      if (!used_.contains(key)) fail(child(key), "unknown key");
    }
  }

 private:
  static std::string num(double x) {
    if (x == std::numeric_limits<double>::max()) return "inf";
    auto s = std::to_string(x);
    s.erase(s.find_last_not_of('0') + 1);
    if (s.back() == '.') s.pop_back();
    return s;
  }
  std::string display() const { return path_.empty() ? "<root>" : path_; }

  const json& obj_;
  std::string path_;
  std::set<std::string> used_;
};

constexpr double kInf = std::numeric_limits<double>::max();

Protocol protocol_field(const std::string& path, const std::string& name) {
  try {
    return parse_protocol(name);
  } catch (const std::exception&) {
    fail(path, "unknown protocol '" + name + "' (pbft, hotstuff, hotstuff2)");
  }
}

net::LinkSpec parse_link(Fields& f, const net::LinkSpec& base) {
  net::LinkSpec l;
  l.base_latency_ms = f.uint<std::uint64_t>("base_latency_ms", base.base_latency_ms);
  l.jitter_ms = f.uint<std::uint64_t>("jitter_ms", base.jitter_ms);
  l.bandwidth_bytes_per_ms =
      f.uint<std::uint64_t>("bandwidth_bytes_per_ms", base.bandwidth_bytes_per_ms, 1);
  l.loss_prob = f.number("loss_prob", base.loss_prob, 0.0, 1.0);
  l.buffer_capacity = f.uint<std::uint32_t>("buffer_capacity", base.buffer_capacity, 1);
  return l;
}

std::vector<NodeId> node_list(const json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array of node ids");
  std::vector<NodeId> out;
  for (const auto& x : v) {
    if (!x.is_number_unsigned()) fail(path, "node ids must be non-negative integers");
    out.push_back(x.get<NodeId>());
  }
  return out;
}

const json& array_field(Fields& f, const std::string& key) {
  const auto& v = f.raw(key);
  if (!v.is_array()) fail(f.child(key), "expected an array");
  return v;
}

template <class T, class Fn>
std::vector<T> grid_values(Fields& f, const std::string& key, Fn convert) {
  std::vector<T> out;
  if (!f.has(key)) return out;
  const auto& arr = array_field(f, key);
  for (const auto& x : arr) out.push_back(convert(x, f.child(key)));
  if (out.empty()) fail(f.child(key), "must not be empty");
  return out;
}

std::uint32_t grid_uint(const json& x, const std::string& path) {
  if (!x.is_number_unsigned()) fail(path, "expected non-negative integers");
  return x.get<std::uint32_t>();
}

Protocol grid_protocol(const json& x, const std::string& path) {
  if (!x.is_string()) fail(path, "expected protocol names");
  return protocol_field(path, x.get<std::string>());
}

template <class T>
void normalize(std::vector<T>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

Scenario from_json(const json& root) {
  Scenario s;
  Fields top(root, "");
  s.seed = top.uint<std::uint64_t>("seed", s.seed);
  s.max_nodes = top.uint<std::uint32_t>("max_nodes", s.max_nodes, 4, 1000);
  s.epoch_len = top.uint<std::uint32_t>("epoch_len", s.epoch_len, 1, 1'000'000);
  s.epochs = top.uint<std::uint32_t>("epochs", s.epochs, 1, 1'000'000);
  s.run_limit_ms = top.uint<SimTime>("run_limit_ms", s.run_limit_ms, 1);

  if (top.has("knobs")) {
    Fields k(top.raw("knobs"), "knobs");
    s.knobs.n = k.uint<std::uint32_t>("n", s.knobs.n, 4, 1000);
    s.knobs.protocol =
        protocol_field("knobs.protocol", k.string("protocol", "pbft"));
    s.knobs.batch = k.uint<std::uint32_t>("batch", s.knobs.batch, 1,
                                          static_cast<std::uint32_t>(kMaxBatchSize));
    k.finish();
  }

  if (top.has("topology")) {
    Fields t(top.raw("topology"), "topology");
    if (t.has("link")) {
      Fields l(t.raw("link"), "topology.link");
      s.link = parse_link(l, s.link);
      l.finish();
    }
    if (t.has("links")) {
      const auto& arr = array_field(t, "links");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        Fields l(arr[i], "topology.links[" + std::to_string(i) + "]");
        LinkOverride o;
        o.from = l.uint<NodeId>("from", 0);
        o.to = l.uint<NodeId>("to", 0);
        o.spec = parse_link(l, s.link);
        l.finish();
        s.links.push_back(o);
      }
    }
    t.finish();
  }

  if (top.has("load")) {
    Fields l(top.raw("load"), "load");
    auto mode = l.string("mode", "open");
    if (mode == "none") {
      s.load.mode = LoadMode::kNone;
    } else if (mode == "open") {
      s.load.mode = LoadMode::kOpen;
    } else if (mode == "saturated") {
      s.load.mode = LoadMode::kSaturated;
    } else {
      fail("load.mode", "expected none, open or saturated");
    }
    s.load.rate_tps = l.number("rate_tps", s.load.rate_tps, 0.001, 1e6);
    s.load.depth = l.uint<std::uint32_t>("depth", s.load.depth, 1, 1024);
    s.load.tx_bytes = l.uint<std::uint32_t>("tx_bytes", s.load.tx_bytes, 0,
                                            static_cast<std::uint32_t>(kDefaultMaxPayload));
    s.load.start_ms = l.uint<SimTime>("start_ms", s.load.start_ms);
    s.load.duration_ms = l.opt_uint<SimTime>("duration_ms");
    s.load.max_txs = l.opt_uint<std::uint64_t>("max_txs");
    l.finish();
  }

  if (top.has("faults")) {
    Fields f(top.raw("faults"), "faults");
    if (f.has("crashes")) {
      const auto& arr = array_field(f, "crashes");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        Fields c(arr[i], "faults.crashes[" + std::to_string(i) + "]");
        CrashFault cf;
        cf.node = c.uint<NodeId>("node", 0);
        cf.at_ms = c.uint<SimTime>("at_ms", 0);
        c.finish();
        s.faults.crashes.push_back(cf);
      }
    }
    if (f.has("equivocations")) {
      const auto& arr = array_field(f, "equivocations");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        Fields e(arr[i], "faults.equivocations[" + std::to_string(i) + "]");
        s.faults.equivocations.push_back({e.uint<View>("view", 0)});
        e.finish();
      }
    }
    if (f.has("partitions")) {
      const auto& arr = array_field(f, "partitions");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        std::string path = "faults.partitions[" + std::to_string(i) + "]";
        Fields p(arr[i], path);
        PartitionFault pf;
        pf.a = node_list(p.raw("a"), path + ".a");
        pf.b = node_list(p.raw("b"), path + ".b");
        pf.from_ms = p.uint<SimTime>("from_ms", 0);
        pf.until_ms = p.uint<SimTime>("until_ms", 0);
        p.finish();
        s.faults.partitions.push_back(std::move(pf));
      }
    }
    f.finish();
  }

  if (top.has("consensus")) {
    Fields c(top.raw("consensus"), "consensus");
    s.consensus.base_timeout_ms = c.opt_uint<SimTime>("base_timeout_ms");
    s.consensus.max_timeout_ms = c.opt_uint<SimTime>("max_timeout_ms");
    s.consensus.wait_delta_ms = c.opt_uint<SimTime>("wait_delta_ms");
    s.consensus.noop_interval_ms =
        c.uint<SimTime>("noop_interval_ms", s.consensus.noop_interval_ms, 1);
    s.consensus.packaging_delay_ms =
        c.uint<SimTime>("packaging_delay_ms", s.consensus.packaging_delay_ms, 1);
    auto auth = c.string("auth", "multisig");
    if (auth == "multisig") {
      s.consensus.auth = AuthMode::kMultisig;
    } else if (auth == "threshold") {
      s.consensus.auth = AuthMode::kSimulatedThreshold;
    } else {
      fail("consensus.auth", "expected multisig or threshold");
    }
    if (s.consensus.base_timeout_ms && *s.consensus.base_timeout_ms == 0) {
      fail("consensus.base_timeout_ms", "must be positive");
    }
    c.finish();
  }

  if (top.has("metrics")) {
    Fields m(top.raw("metrics"), "metrics");
    s.log_base = m.number("log_base", s.log_base, 1.000001, 1e9);
    m.finish();
  }

  if (top.has("controller")) {
    Fields c(top.raw("controller"), "controller");
    try {
      s.controller.policy = control::parse_policy(c.string("policy", "static"));
    } catch (const ConfigError& e) {
      fail("controller.policy", e.what());
    }
    auto& obj = s.controller.objective;
    if (c.has("weights")) {
      Fields w(c.raw("weights"), "controller.weights");
      obj.w_d = w.number("d", obj.w_d, 0, 1);
      obj.w_c = w.number("c", obj.w_c, 0, 1);
      obj.w_s = w.number("s", obj.w_s, 0, 1);
      w.finish();
    }
    obj.epsilon = c.number("epsilon", obj.epsilon, 1e-12, 1);
    auto mode = c.string("mode", "weighted");
    if (mode == "weighted") {
      obj.mode = control::ObjectiveMode::kWeighted;
    } else if (mode == "constrained") {
      obj.mode = control::ObjectiveMode::kConstrained;
    } else {
      fail("controller.mode", "expected weighted or constrained");
    }
    obj.d_min = c.number("d_min", obj.d_min, 0, 1);
    obj.c_min = c.number("c_min", obj.c_min, 0, 1);
    try {
      obj.validate();
    } catch (const ConfigError& e) {
      fail("controller.weights", e.what());
    }
    if (c.has("grid")) {
      Fields g(c.raw("grid"), "controller.grid");
      control::CandidateSpace space;
      space.n_values = grid_values<std::uint32_t>(g, "n", grid_uint);
      space.protocols = grid_values<Protocol>(g, "protocol", grid_protocol);
      space.batch_values = grid_values<std::uint32_t>(g, "batch", grid_uint);
      g.finish();
      if (space.n_values.empty()) space.n_values = {s.knobs.n};
      if (space.protocols.empty()) space.protocols = {s.knobs.protocol};
      if (space.batch_values.empty()) space.batch_values = {s.knobs.batch};
      normalize(space.n_values);
      normalize(space.protocols);
      normalize(space.batch_values);
      s.controller.grid = std::move(space);
    }
    c.finish();
  }

  if (top.has("test_hooks")) {
    Fields t(top.raw("test_hooks"), "test_hooks");
    s.force_conflicting_commit = t.boolean("force_conflicting_commit", false);
    t.finish();
  }
  top.finish();
  return s;
}

ojson link_json(const net::LinkSpec& l) {
  ojson j;
  j["base_latency_ms"] = l.base_latency_ms;
  j["jitter_ms"] = l.jitter_ms;
  j["bandwidth_bytes_per_ms"] = l.bandwidth_bytes_per_ms;
  j["loss_prob"] = l.loss_prob;
  j["buffer_capacity"] = l.buffer_capacity;
  return j;
}

template <class T>
ojson opt(const std::optional<T>& v) {
  return v ? ojson(*v) : ojson(nullptr);
}

std::string_view load_mode_name(LoadMode m) {
  switch (m) {
    case LoadMode::kNone:
      return "none";
    case LoadMode::kOpen:
      return "open";
    case LoadMode::kSaturated:
      return "saturated";
  }
  return "?";
}

}  // namespace

Scenario parse_scenario(std::string_view text) {
  json root;
  try {
    root = json::parse(text.begin(), text.end(), nullptr, true, true);
  } catch (const json::parse_error& e) {
    // Translate the byte offset into a line/column pair.
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::string what = e.what();
    auto pos = what.find("syntax error");
    throw ScenarioError("line " + std::to_string(line) + ", column " + std::to_string(col) +
                        ": " + (pos == std::string::npos ? what : what.substr(pos)));
  }
  auto s = from_json(root);
  validate(s);
  return s;
}

void validate(const Scenario& s) {
  if (s.knobs.n > s.max_nodes) fail("knobs.n", "exceeds max_nodes");
  try {
    make_config(s.knobs.n, s.knobs.protocol, s.knobs.batch, s.epoch_len);
  } catch (const ConfigError& e) {
    fail("knobs", e.what());
  }
  try {
    s.link.validate();
  } catch (const std::invalid_argument& e) {
    fail("topology.link", e.what());
  }
  for (std::size_t i = 0; i < s.links.size(); ++i) {
    const auto& o = s.links[i];
    std::string path = "topology.links[" + std::to_string(i) + "]";
    if (o.from >= s.max_nodes || o.to >= s.max_nodes) fail(path, "unknown node");
    try {
      o.spec.validate();
    } catch (const std::invalid_argument& e) {
      fail(path, e.what());
    }
  }
  for (std::size_t i = 0; i < s.faults.crashes.size(); ++i) {
    if (s.faults.crashes[i].node >= s.knobs.n) {
      fail("faults.crashes[" + std::to_string(i) + "].node", "not a member of the initial set");
    }
  }
  for (std::size_t i = 0; i < s.faults.partitions.size(); ++i) {
    const auto& p = s.faults.partitions[i];
    std::string path = "faults.partitions[" + std::to_string(i) + "]";
    std::set<NodeId> a(p.a.begin(), p.a.end());
    for (auto x : p.a) {
      if (x >= s.max_nodes) fail(path + ".a", "unknown node " + std::to_string(x));
    }
    for (auto x : p.b) {
      if (x >= s.max_nodes) fail(path + ".b", "unknown node " + std::to_string(x));
      if (a.contains(x)) fail(path, "groups must be disjoint");
    }
    if (p.until_ms < p.from_ms) fail(path, "until_ms precedes from_ms");
  }
  auto faulty = faulty_nodes(s);
  auto f = fault_bound(s.knobs.n);
  if (faulty.size() > f) {
    fail("faults", std::to_string(faulty.size()) + " faulty nodes exceed the fault bound f=" +
                       std::to_string(f) + " for n=" + std::to_string(s.knobs.n));
  }
  if (s.controller.grid) {
    const auto& g = *s.controller.grid;
    for (auto n : g.n_values) {
      if (n < 4) fail("controller.grid.n", "values must be at least 4");
    }
    for (auto b : g.batch_values) {
      if (b < 1 || b > kMaxBatchSize) fail("controller.grid.batch", "values must lie in [1, 1024]");
    }
  }
}

std::vector<NodeId> faulty_nodes(const Scenario& s) {
  std::set<NodeId> out;
  for (const auto& c : s.faults.crashes) out.insert(c.node);
  for (const auto& e : s.faults.equivocations) {
    out.insert(static_cast<NodeId>(e.view % s.knobs.n));
  }
  return {out.begin(), out.end()};
}

std::string scenario_to_json(const Scenario& s) {
  ojson j;
  j["seed"] = s.seed;
  j["knobs"] = {{"n", s.knobs.n},
                {"protocol", std::string(protocol_name(s.knobs.protocol))},
                {"batch", s.knobs.batch}};
  j["max_nodes"] = s.max_nodes;
  j["epoch_len"] = s.epoch_len;
  j["epochs"] = s.epochs;
  j["run_limit_ms"] = s.run_limit_ms;

  ojson links = ojson::array();
  for (const auto& o : s.links) {
    ojson l;
    l["from"] = o.from;
    l["to"] = o.to;
    l.update(link_json(o.spec));
    links.push_back(std::move(l));
  }
  j["topology"] = {{"link", link_json(s.link)}, {"links", std::move(links)}};

  ojson load;
  load["mode"] = std::string(load_mode_name(s.load.mode));
  load["rate_tps"] = s.load.rate_tps;
  load["depth"] = s.load.depth;
  load["tx_bytes"] = s.load.tx_bytes;
  load["start_ms"] = s.load.start_ms;
  load["duration_ms"] = opt(s.load.duration_ms);
  load["max_txs"] = opt(s.load.max_txs);
  j["load"] = std::move(load);

  ojson crashes = ojson::array();
  for (const auto& c : s.faults.crashes) crashes.push_back({{"node", c.node}, {"at_ms", c.at_ms}});
  ojson equivocations = ojson::array();
  for (const auto& e : s.faults.equivocations) equivocations.push_back({{"view", e.view}});
  ojson partitions = ojson::array();
  for (const auto& p : s.faults.partitions) {
    ojson pj;
    pj["a"] = p.a;
    pj["b"] = p.b;
    pj["from_ms"] = p.from_ms;
    pj["until_ms"] = p.until_ms;
    partitions.push_back(std::move(pj));
  }
  ojson faults;
  faults["crashes"] = std::move(crashes);
  faults["equivocations"] = std::move(equivocations);
  faults["partitions"] = std::move(partitions);
  j["faults"] = std::move(faults);

  ojson cons;
  cons["base_timeout_ms"] = opt(s.consensus.base_timeout_ms);
  cons["max_timeout_ms"] = opt(s.consensus.max_timeout_ms);
  cons["wait_delta_ms"] = opt(s.consensus.wait_delta_ms);
  cons["noop_interval_ms"] = s.consensus.noop_interval_ms;
  cons["packaging_delay_ms"] = s.consensus.packaging_delay_ms;
  cons["auth"] = s.consensus.auth == AuthMode::kMultisig ? "multisig" : "threshold";
  j["consensus"] = std::move(cons);

  j["metrics"] = {{"log_base", s.log_base}};

  const auto& obj = s.controller.objective;
  ojson ctl;
  ctl["policy"] = std::string(control::policy_name(s.controller.policy));
  ctl["weights"] = {{"d", obj.w_d}, {"c", obj.w_c}, {"s", obj.w_s}};
  ctl["epsilon"] = obj.epsilon;
  ctl["mode"] = obj.mode == control::ObjectiveMode::kWeighted ? "weighted" : "constrained";
  ctl["d_min"] = obj.d_min;
  ctl["c_min"] = obj.c_min;
  if (s.controller.grid) {
    ojson protos = ojson::array();
    for (auto p : s.controller.grid->protocols) protos.push_back(std::string(protocol_name(p)));
    ctl["grid"] = {{"n", s.controller.grid->n_values},
                   {"protocol", std::move(protos)},
                   {"batch", s.controller.grid->batch_values}};
  } else {
    ctl["grid"] = nullptr;
  }
  j["controller"] = std::move(ctl);
  j["test_hooks"] = {{"force_conflicting_commit", s.force_conflicting_commit}};
  return j.dump(2);
}

control::CandidateSpace parse_grid(std::string_view spec, const control::Knobs& base) {
  control::CandidateSpace space;
  std::string text(spec);
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find(';', pos);
    if (end == std::string::npos) end = text.size();
    auto part = text.substr(pos, end - pos);
    pos = end + 1;
    if (part.empty()) continue;
    auto eq = part.find('=');
    if (eq == std::string::npos) throw ScenarioError("grid: expected key=values in '" + part + "'");
    auto key = part.substr(0, eq);
    std::vector<std::string> values;
    std::size_t vpos = eq + 1;
    while (vpos <= part.size()) {
      auto comma = part.find(',', vpos);
      if (comma == std::string::npos) comma = part.size();
      auto v = part.substr(vpos, comma - vpos);
      if (!v.empty()) values.push_back(v);
      vpos = comma + 1;
    }
    if (values.empty()) throw ScenarioError("grid: no values for '" + key + "'");
    auto to_uint = [&](const std::string& v) {
      try {
        std::size_t used = 0;
        auto x = std::stoul(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return static_cast<std::uint32_t>(x);
      } catch (const std::exception&) {
        throw ScenarioError("grid: '" + v + "' is not a non-negative integer");
      }
    };
    if (key == "n") {
      for (const auto& v : values) space.n_values.push_back(to_uint(v));
    } else if (key == "batch") {
      for (const auto& v : values) space.batch_values.push_back(to_uint(v));
    } else if (key == "protocol" || key == "protocols") {
      for (const auto& v : values) {
        try {
          space.protocols.push_back(parse_protocol(v));
        } catch (const std::exception&) {
          throw ScenarioError("grid: unknown protocol '" + v + "'");
        }
      }
    } else {
      throw ScenarioError("grid: unknown dimension '" + key + "'");
    }
  }
  if (space.n_values.empty()) space.n_values = {base.n};
  if (space.protocols.empty()) space.protocols = {base.protocol};
  if (space.batch_values.empty()) space.batch_values = {base.batch};
  normalize(space.n_values);
  normalize(space.protocols);
  normalize(space.batch_values);
  for (auto n : space.n_values) {
    if (n < 4) throw ScenarioError("grid: n must be at least 4");
  }
  for (auto b : space.batch_values) {
    if (b < 1 || b > kMaxBatchSize) throw ScenarioError("grid: batch must lie in [1, 1024]");
  }
  return space;
}

}  // namespace dcs::harness
