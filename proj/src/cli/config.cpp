#include "doppler/cli/config.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doppler/rng.hpp"

namespace doppler::cli {

using json = nlohmann::ordered_json;

namespace {

std::string join_errors(const std::vector<std::string>& d) {
  std::string out = "invalid configuration";
  for (const auto& s : d) out += "\n  " + s;
  return out;
}

// Line of every object key and array element, keyed by path such as
// "events[1].links[0].node". Runs only on text that already parsed.
std::map<std::string, int> key_lines(const std::string& text) {
  struct Frame {
    bool object;
    std::string path;
    std::string key;
    std::size_t index = 0;
    bool expect_key = false;
  };
  std::map<std::string, int> lines;
  std::vector<Frame> stack;
  int line = 1;
  auto child = [&]() -> std::string {
    if (stack.empty()) return "";
    const Frame& f = stack.back();
    if (f.object) return f.path.empty() ? f.key : f.path + "." + f.key;
    return f.path + "[" + std::to_string(f.index) + "]";
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\n') {
      ++line;
    } else if (c == '"') {
      std::string s;
      for (++i; i < text.size() && text[i] != '"'; ++i) {
        if (text[i] == '\\' && i + 1 < text.size()) ++i;
        s.push_back(text[i]);
      }
      if (!stack.empty() && stack.back().object && stack.back().expect_key) {
        stack.back().key = s;
        stack.back().expect_key = false;
        lines.emplace(child(), line);
      }
    } else if (c == '{' || c == '[') {
      const std::string path = child();
      if (!stack.empty() && !stack.back().object) lines.emplace(path, line);
      stack.push_back({c == '{', path, {}, 0, c == '{'});
    } else if (c == '}' || c == ']') {
      if (!stack.empty()) stack.pop_back();
    } else if (c == ',' && !stack.empty()) {
      if (stack.back().object) {
        stack.back().expect_key = true;
      } else {
        ++stack.back().index;
      }
    }
  }
  return lines;
}

class Diagnostics {
 public:
  Diagnostics(std::string source, std::map<std::string, int> lines)
      : source_(std::move(source)), lines_(std::move(lines)) {}

  void error(const std::string& path, const std::string& message) {
    std::string where = source_;
    // Fall back to the closest enclosing path that has a known line.
    std::string p = path;
    while (!p.empty()) {
      auto it = lines_.find(p);
      if (it != lines_.end()) {
        where += ":" + std::to_string(it->second);
        break;
      }
      const auto cut = p.find_last_of(".[");
      p = cut == std::string::npos ? "" : p.substr(0, cut);
    }
    messages_.push_back(where + ": " + (path.empty() ? "<root>" : path) + ": " + message);
  }

  const std::vector<std::string>& messages() const { return messages_; }

 private:
  std::string source_;
  std::map<std::string, int> lines_;
  std::vector<std::string> messages_;
};

/// Typed access to one JSON object; remembers which keys were consumed so
/// the rest can be reported as unknown.
class Obj {
 public:
  Obj(const json& j, std::string path, Diagnostics& diag)
      : j_(j), path_(std::move(path)), diag_(diag) {
    if (!j_.is_object()) diag_.error(path_, "expected an object");
  }

  std::string at(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.is_object() && j_.contains(key);
  }

  const json* raw(const std::string& key) {
    if (!has(key)) return nullptr;
    return &j_.at(key);
  }

  void number(const std::string& key, double& out) {
    if (const json* v = raw(key)) {
      if (v->is_number()) {
        out = v->get<double>();
      } else {
        diag_.error(at(key), "expected a number");
      }
    }
  }

  template <class U>
  void integer(const std::string& key, U& out) {
    if (const json* v = raw(key)) {
      if (v->is_number_unsigned() || (v->is_number_integer() && v->get<std::int64_t>() >= 0)) {
        const auto x = v->get<std::uint64_t>();
        if (x > std::numeric_limits<U>::max()) {
          diag_.error(at(key), "value too large");
        } else {
          out = static_cast<U>(x);
        }
      } else {
        diag_.error(at(key), "expected a non-negative integer");
      }
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (const json* v = raw(key)) {
      if (v->is_boolean()) {
        out = v->get<bool>();
      } else {
        diag_.error(at(key), "expected true or false");
      }
    }
  }

  void string(const std::string& key, std::string& out) {
    if (const json* v = raw(key)) {
      if (v->is_string()) {
        out = v->get<std::string>();
      } else {
        diag_.error(at(key), "expected a string");
      }
    }
  }

  void choice(const std::string& key, std::string& out, std::initializer_list<const char*> allowed) {
    string(key, out);
    for (const char* a : allowed) {
      if (out == a) return;
    }
    std::string list;
    for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
    diag_.error(at(key), "'" + out + "' is not one of: " + list);
  }

  /// Rejects every key that was not read, or that is listed in `forbidden`
  /// with the reason given.
  void finish(const std::map<std::string, std::string>& forbidden = {}) {
    if (!j_.is_object()) return;
    for (const auto& [key, value] : j_.items()) {
      auto f = forbidden.find(key);
      if (f != forbidden.end()) {
        diag_.error(at(key), f->second);
      } else if (!seen_.count(key)) {
        diag_.error(at(key), "unknown key");
      }
    }
  }

  Diagnostics& diag() { return diag_; }

 private:
  const json& j_;
  std::string path_;
  Diagnostics& diag_;
  std::set<std::string> seen_;
};

const std::set<std::string> kGenerators = {"geometric", "highway", "tree", "connected",
                                           "complete", "explicit", "trace"};

// Keys each generator understands beyond the generator-independent ones.
const std::map<std::string, std::set<std::string>> kGeneratorKeys = {
    {"geometric", {"n", "width", "height", "comm_range", "speed_min", "speed_max"}},
    {"highway", {"n", "spacing", "comm_range", "speed_min", "speed_max"}},
    {"tree", {"n"}},
    {"connected", {"n", "extra_edge_probability"}},
    {"complete", {"n"}},
    {"explicit", {"nodes", "edges"}},
    {"trace", {"trace_file", "width", "height", "comm_range"}},
};

const std::set<std::string> kAllGeneratorKeys = {
    "n",         "width",     "height",  "comm_range", "speed_min", "speed_max",
    "spacing",   "extra_edge_probability", "trace_file", "nodes",   "edges"};

bool has_kinematics(const std::string& generator) {
  return generator == "geometric" || generator == "highway" || generator == "trace";
}

void read_scenario(Obj& o, ScenarioConfig& s) {
  o.choice("generator", s.generator,
           {"geometric", "highway", "tree", "connected", "complete", "explicit", "trace"});
  const auto& mine = kGeneratorKeys.count(s.generator) ? kGeneratorKeys.at(s.generator)
                                                       : std::set<std::string>{};
  std::map<std::string, std::string> forbidden;
  for (const auto& k : kAllGeneratorKeys) {
    if (!mine.count(k)) forbidden[k] = "not used by generator '" + s.generator + "'";
  }
  if (mine.count("n")) o.integer("n", s.n);
  if (mine.count("width")) o.number("width", s.width);
  if (mine.count("height")) o.number("height", s.height);
  if (mine.count("comm_range")) o.number("comm_range", s.comm_range);
  if (mine.count("speed_min")) o.number("speed_min", s.speed_min);
  if (mine.count("speed_max")) o.number("speed_max", s.speed_max);
  if (mine.count("spacing")) o.number("spacing", s.spacing);
  if (mine.count("extra_edge_probability")) {
    o.number("extra_edge_probability", s.extra_edge_probability);
  }
  if (mine.count("trace_file")) o.string("trace_file", s.trace_file);
  if (mine.count("nodes")) {
    if (const json* v = o.raw("nodes")) {
      if (!v->is_array()) {
        o.diag().error(o.at("nodes"), "expected an array of node ids");
      } else {
        for (std::size_t i = 0; i < v->size(); ++i) {
          const auto& e = (*v)[i];
          if (e.is_number_unsigned() && e.get<std::uint64_t>() >= 1 &&
              e.get<std::uint64_t>() <= std::numeric_limits<NodeId>::max()) {
            s.nodes.push_back(e.get<NodeId>());
          } else {
            o.diag().error(o.at("nodes") + "[" + std::to_string(i) + "]",
                           "node ids are integers >= 1");
          }
        }
      }
    }
  }
  if (mine.count("edges")) {
    if (const json* v = o.raw("edges")) {
      if (!v->is_array()) {
        o.diag().error(o.at("edges"), "expected an array");
      } else {
        for (std::size_t i = 0; i < v->size(); ++i) {
          Obj e((*v)[i], o.at("edges") + "[" + std::to_string(i) + "]", o.diag());
          ExplicitEdge edge;
          e.integer("a", edge.a);
          e.integer("b", edge.b);
          e.number("noise_variance", edge.noise_variance);
          e.number("reliability", edge.reliability);
          e.finish();
          s.edges.push_back(edge);
        }
      }
    }
  }

  o.number("noise_min", s.noise_min);
  o.number("noise_max", s.noise_max);
  o.number("reliability", s.reliability);
  o.number("anchor_value", s.anchor_value);
  o.choice("pairwise", s.pairwise, {"additive", "radial"});
  o.boolean("noiseless", s.noiseless);

  if (const json* t = o.raw("truth")) {
    Obj tr(*t, o.at("truth"), o.diag());
    tr.choice("mode", s.truth, {"uniform", "kinematic", "explicit"});
    std::map<std::string, std::string> off;
    if (s.truth == "uniform") {
      tr.number("min", s.truth_min);
      tr.number("max", s.truth_max);
      off = {{"carrier_hz", "only for mode 'kinematic'"},
             {"wave_speed", "only for mode 'kinematic'"},
             {"offsets", "only for mode 'explicit'"}};
    } else if (s.truth == "kinematic") {
      tr.number("carrier_hz", s.carrier_hz);
      tr.number("wave_speed", s.wave_speed);
      off = {{"min", "only for mode 'uniform'"},
             {"max", "only for mode 'uniform'"},
             {"offsets", "only for mode 'explicit'"}};
    } else if (s.truth == "explicit") {
      if (const json* v = tr.raw("offsets")) {
        if (!v->is_object()) {
          o.diag().error(tr.at("offsets"), "expected an object of id -> offset");
        } else {
          for (const auto& [key, val] : v->items()) {
            const std::string path = tr.at("offsets") + "." + key;
            char* end = nullptr;
            const unsigned long id = std::strtoul(key.c_str(), &end, 10);
            if (key.empty() || *end != '\0' || id == 0) {
              o.diag().error(path, "keys must be node ids");
            } else if (!val.is_number()) {
              o.diag().error(path, "expected a number");
            } else {
              s.offsets[static_cast<NodeId>(id)] = val.get<double>();
            }
          }
        }
      }
      off = {{"min", "only for mode 'uniform'"},
             {"max", "only for mode 'uniform'"},
             {"carrier_hz", "only for mode 'kinematic'"},
             {"wave_speed", "only for mode 'kinematic'"}};
    }
    tr.finish(off);
  }
  o.finish(forbidden);
}

void read_events(const json& arr, const std::string& path, Diagnostics& diag,
                 std::vector<EventConfig>& out) {
  if (!arr.is_array()) {
    diag.error(path, "expected an array");
    return;
  }
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    Obj e(arr[i], p, diag);
    EventConfig ev;
    e.integer("at", ev.at);
    e.choice("kind", ev.kind, {"leave", "join"});
    e.integer("node", ev.node);
    if (ev.kind == "join") {
      if (const json* links = e.raw("links")) {
        if (!links->is_array()) {
          diag.error(e.at("links"), "expected an array");
        } else {
          for (std::size_t k = 0; k < links->size(); ++k) {
            Obj l((*links)[k], e.at("links") + "[" + std::to_string(k) + "]", diag);
            NodeId other = 0;
            scenario::LinkParams params;
            l.integer("node", other);
            l.number("noise_variance", params.noise_variance);
            l.number("reliability", params.reliability);
            l.finish();
            ev.links.emplace_back(other, params);
          }
        }
      }
      if (e.has("offset")) {
        double v = 0.0;
        e.number("offset", v);
        ev.offset = v;
      }
      e.finish();
    } else {
      e.finish({{"links", "only for join events"}, {"offset", "only for join events"}});
    }
    out.push_back(std::move(ev));
  }
}

void check_ranges(const ExperimentConfig& c, Diagnostics& d) {
  const auto& s = c.scenario;
  if (c.algorithm != "gbp" && c.algorithm != "lsbp" && c.algorithm != "ml") {
    d.error("algorithm", "'" + c.algorithm + "' is not one of: gbp, lsbp, ml");
  }
  if (!(c.normalization > 0.0) || !std::isfinite(c.normalization)) {
    d.error("normalization", "must be positive and finite");
  }
  if (!kGenerators.count(s.generator)) return;
  const auto& mine = kGeneratorKeys.at(s.generator);
  if (mine.count("n") && s.n < 2) d.error("scenario.n", "must be >= 2");
  if (mine.count("n") && s.n > 100000) d.error("scenario.n", "must be <= 100000");
  if (mine.count("comm_range") && !(s.comm_range > 0.0)) {
    d.error("scenario.comm_range", "must be > 0");
  }
  if (mine.count("width") && !(s.width > 0.0)) d.error("scenario.width", "must be > 0");
  if (mine.count("height") && !(s.height > 0.0)) d.error("scenario.height", "must be > 0");
  if (mine.count("spacing") && !(s.spacing > 0.0)) d.error("scenario.spacing", "must be > 0");
  if (mine.count("speed_min") && !(s.speed_min >= 0.0 && s.speed_min <= s.speed_max)) {
    d.error("scenario.speed_min", "need 0 <= speed_min <= speed_max");
  }
  if (mine.count("extra_edge_probability") &&
      !(s.extra_edge_probability >= 0.0 && s.extra_edge_probability <= 1.0)) {
    d.error("scenario.extra_edge_probability", "must be in [0, 1]");
  }
  if (s.generator == "trace" && s.trace_file.empty()) {
    d.error("scenario.trace_file", "required for generator 'trace'");
  }
  if (s.generator == "explicit") {
    if (s.nodes.size() < 2) d.error("scenario.nodes", "need at least two nodes");
    for (std::size_t i = 0; i < s.edges.size(); ++i) {
      const auto& e = s.edges[i];
      const std::string p = "scenario.edges[" + std::to_string(i) + "]";
      if (!(e.noise_variance > 0.0) || !std::isfinite(e.noise_variance)) {
        d.error(p + ".noise_variance", "must be positive and finite");
      }
      if (!(e.reliability > 0.0 && e.reliability <= 1.0)) {
        d.error(p + ".reliability", "must be in (0, 1]");
      }
    }
  }
  if (!(s.noise_min > 0.0) || !(s.noise_min <= s.noise_max) || !std::isfinite(s.noise_max)) {
    d.error("scenario.noise_min", "need 0 < noise_min <= noise_max");
  }
  if (!(s.reliability > 0.0 && s.reliability <= 1.0)) {
    d.error("scenario.reliability", "must be in (0, 1]");
  }
  if (s.truth == "uniform" && !(s.truth_min <= s.truth_max)) {
    d.error("scenario.truth.min", "need min <= max");
  }
  if (s.truth == "kinematic") {
    if (!has_kinematics(s.generator)) {
      d.error("scenario.truth.mode", "'kinematic' needs generator geometric, highway or trace");
    }
    if (!(s.carrier_hz > 0.0)) d.error("scenario.truth.carrier_hz", "must be > 0");
    if (!(s.wave_speed > 0.0)) d.error("scenario.truth.wave_speed", "must be > 0");
  }
  if (s.pairwise == "radial" && !has_kinematics(s.generator)) {
    d.error("scenario.pairwise", "'radial' needs generator geometric, highway or trace");
  }

  if (!(c.pdr > 0.0 && c.pdr <= 1.0)) d.error("link.pdr", "must be in (0, 1]");
  if (c.max_delay > 1000) d.error("link.max_delay", "must be <= 1000");
  for (std::size_t i = 0; i < c.link_overrides.size(); ++i) {
    const auto& o = c.link_overrides[i];
    if (!(o.pdr > 0.0 && o.pdr <= 1.0)) {
      d.error("link.overrides[" + std::to_string(i) + "].pdr", "must be in (0, 1]");
    }
  }
  if (!(c.threshold >= 0.0)) d.error("termination.threshold", "must be >= 0");
  if (c.l_max < 1) d.error("termination.l_max", "must be >= 1");
  if (!(c.divergence_factor > 0.0)) d.error("termination.divergence_factor", "must be > 0");
  if (!(c.gbp_precision >= 0.0) || !std::isfinite(c.gbp_precision)) {
    d.error("init.gbp.precision", "must be finite and >= 0");
  }
  if (!(c.lsbp_variance > 0.0)) d.error("init.lsbp.variance", "must be > 0 or \"uninformative\"");
  for (std::size_t i = 0; i < c.lsbp_per_node.size(); ++i) {
    if (!(c.lsbp_per_node[i].variance > 0.0)) {
      d.error("init.lsbp.per_node[" + std::to_string(i) + "].variance", "must be > 0");
    }
  }
  std::uint64_t last = 0;
  for (std::size_t i = 0; i < c.events.size(); ++i) {
    const auto& e = c.events[i];
    const std::string p = "events[" + std::to_string(i) + "]";
    if (e.at < 1) d.error(p + ".at", "must be >= 1");
    if (e.at < last) d.error(p + ".at", "events must be sorted by iteration");
    last = e.at;
    if (e.node == 0) d.error(p + ".node", "node ids are integers >= 1");
    if (e.kind == "join" && e.links.empty()) d.error(p + ".links", "a join needs links");
  }
}

json variance_json(double v) { return std::isinf(v) ? json("uninformative") : json(v); }

}  // namespace

ConfigError::ConfigError(std::vector<std::string> diagnostics)
    : Error(join_errors(diagnostics)), diagnostics_(std::move(diagnostics)) {}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    // Translate the byte offset into a line number.
    int line = 1;
    for (std::size_t i = 0; i < e.byte && i < text.size(); ++i) line += text[i] == '\n';
    throw ConfigError({source + ":" + std::to_string(line) + ": " + e.what()});
  }
  Diagnostics diag(source, key_lines(text));
  ExperimentConfig c;
  Obj top(root, "", diag);
  top.integer("seed", c.seed);
  top.choice("algorithm", c.algorithm, {"gbp", "lsbp", "ml"});
  top.number("normalization", c.normalization);
  if (const json* s = top.raw("scenario")) {
    Obj o(*s, "scenario", diag);
    read_scenario(o, c.scenario);
  }
  if (const json* l = top.raw("link")) {
    Obj o(*l, "link", diag);
    o.number("pdr", c.pdr);
    o.integer("max_delay", c.max_delay);
    if (o.has("seed")) {
      std::uint64_t s = 0;
      o.integer("seed", s);
      c.link_seed = s;
    }
    if (const json* arr = o.raw("overrides")) {
      if (!arr->is_array()) {
        diag.error("link.overrides", "expected an array");
      } else {
        for (std::size_t i = 0; i < arr->size(); ++i) {
          Obj e((*arr)[i], "link.overrides[" + std::to_string(i) + "]", diag);
          LinkOverride ov;
          e.integer("from", ov.from);
          e.integer("to", ov.to);
          e.number("pdr", ov.pdr);
          e.finish();
          c.link_overrides.push_back(ov);
        }
      }
    }
    o.finish();
  }
  if (const json* t = top.raw("termination")) {
    Obj o(*t, "termination", diag);
    o.number("threshold", c.threshold);
    o.integer("l_max", c.l_max);
    o.number("divergence_factor", c.divergence_factor);
    o.finish();
  }
  if (const json* i = top.raw("init")) {
    Obj o(*i, "init", diag);
    if (const json* g = o.raw("gbp")) {
      Obj go(*g, "init.gbp", diag);
      go.number("precision", c.gbp_precision);
      go.number("mean", c.gbp_mean);
      go.finish();
    }
    if (const json* l = o.raw("lsbp")) {
      Obj lo(*l, "init.lsbp", diag);
      if (const json* v = lo.raw("variance")) {
        if (v->is_string() && v->get<std::string>() == "uninformative") {
          c.lsbp_variance = kInfinity;
        } else {
          lo.number("variance", c.lsbp_variance);
        }
      }
      lo.number("mean", c.lsbp_mean);
      if (const json* arr = lo.raw("per_node")) {
        if (!arr->is_array()) {
          diag.error("init.lsbp.per_node", "expected an array");
        } else {
          for (std::size_t k = 0; k < arr->size(); ++k) {
            Obj e((*arr)[k], "init.lsbp.per_node[" + std::to_string(k) + "]", diag);
            NodeInitConfig n;
            e.integer("node", n.node);
            e.number("variance", n.variance);
            e.number("mean", n.mean);
            e.finish();
            c.lsbp_per_node.push_back(n);
          }
        }
      }
      lo.finish();
    }
    o.finish();
  }
  if (const json* e = top.raw("events")) read_events(*e, "events", diag, c.events);
  if (const json* out = top.raw("output")) {
    Obj o(*out, "output", diag);
    o.string("dir", c.out_dir);
    o.string("trace", c.trace_file);
    o.string("metrics", c.metrics_file);
    o.string("resolved", c.resolved_file);
    o.boolean("record_beliefs", c.record_beliefs);
    o.finish();
  }
  top.finish();
  check_ranges(c, diag);
  if (!diag.messages().empty()) throw ConfigError(diag.messages());
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({path + ": cannot open file"});
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

void validate(const ExperimentConfig& config) {
  Diagnostics diag("<overrides>", {});
  check_ranges(config, diag);
  if (!diag.messages().empty()) throw ConfigError(diag.messages());
}

json resolved(const ExperimentConfig& c) {
  const auto& s = c.scenario;
  json scen = {{"generator", s.generator}};
  const auto& mine = kGeneratorKeys.count(s.generator) ? kGeneratorKeys.at(s.generator)
                                                       : std::set<std::string>{};
  if (mine.count("n")) scen["n"] = s.n;
  if (mine.count("width")) scen["width"] = s.width;
  if (mine.count("height")) scen["height"] = s.height;
  if (mine.count("comm_range")) scen["comm_range"] = s.comm_range;
  if (mine.count("speed_min")) scen["speed_min"] = s.speed_min;
  if (mine.count("speed_max")) scen["speed_max"] = s.speed_max;
  if (mine.count("spacing")) scen["spacing"] = s.spacing;
  if (mine.count("extra_edge_probability")) {
    scen["extra_edge_probability"] = s.extra_edge_probability;
  }
  if (mine.count("trace_file")) scen["trace_file"] = s.trace_file;
  if (mine.count("nodes")) scen["nodes"] = s.nodes;
  if (mine.count("edges")) {
    json edges = json::array();
    for (const auto& e : s.edges) {
      edges.push_back({{"a", e.a},
                       {"b", e.b},
                       {"noise_variance", e.noise_variance},
                       {"reliability", e.reliability}});
    }
    scen["edges"] = edges;
  }
  scen["noise_min"] = s.noise_min;
  scen["noise_max"] = s.noise_max;
  scen["reliability"] = s.reliability;
  scen["anchor_value"] = s.anchor_value;
  json truth = {{"mode", s.truth}};
  if (s.truth == "uniform") {
    truth["min"] = s.truth_min;
    truth["max"] = s.truth_max;
  } else if (s.truth == "kinematic") {
    truth["carrier_hz"] = s.carrier_hz;
    truth["wave_speed"] = s.wave_speed;
  } else {
    json offs = json::object();
    for (const auto& [id, v] : s.offsets) offs[std::to_string(id)] = v;
    truth["offsets"] = offs;
  }
  scen["truth"] = truth;
  scen["pairwise"] = s.pairwise;
  scen["noiseless"] = s.noiseless;

  json overrides = json::array();
  for (const auto& o : c.link_overrides) {
    overrides.push_back({{"from", o.from}, {"to", o.to}, {"pdr", o.pdr}});
  }
  json per_node = json::array();
  for (const auto& n : c.lsbp_per_node) {
    per_node.push_back({{"node", n.node}, {"variance", n.variance}, {"mean", n.mean}});
  }
  json events = json::array();
  for (const auto& e : c.events) {
    json ev = {{"at", e.at}, {"kind", e.kind}, {"node", e.node}};
    if (e.kind == "join") {
      json links = json::array();
      for (const auto& [n, p] : e.links) {
        links.push_back(
            {{"node", n}, {"noise_variance", p.noise_variance}, {"reliability", p.reliability}});
      }
      ev["links"] = links;
      if (e.offset) ev["offset"] = *e.offset;
    }
    events.push_back(ev);
  }

  return json{
      {"seed", c.seed},
      {"algorithm", c.algorithm},
      {"normalization", c.normalization},
      {"scenario", scen},
      {"link",
       {{"pdr", c.pdr},
        {"max_delay", c.max_delay},
        {"seed", c.link_seed.value_or(c.seed)},
        {"overrides", overrides}}},
      {"termination",
       {{"threshold", c.threshold},
        {"l_max", c.l_max},
        {"divergence_factor", c.divergence_factor}}},
      {"init",
       {{"gbp", {{"precision", c.gbp_precision}, {"mean", c.gbp_mean}}},
        {"lsbp",
         {{"variance", variance_json(c.lsbp_variance)},
          {"mean", c.lsbp_mean},
          {"per_node", per_node}}}}},
      {"events", events},
      {"output",
       {{"dir", c.out_dir},
        {"trace", c.trace_file},
        {"metrics", c.metrics_file},
        {"resolved", c.resolved_file},
        {"record_beliefs", c.record_beliefs}}},
  };
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const ExperimentConfig& config) {
  json r = resolved(config);
  r.erase("output");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(r.dump())));
  return buf;
}

void apply(ExperimentConfig& c, const Overrides& o) {
  if (o.seed) c.seed = *o.seed;
  if (o.algorithm) c.algorithm = *o.algorithm;
  if (o.pdr) c.pdr = *o.pdr;
  if (o.threshold) c.threshold = *o.threshold;
  if (o.l_max) c.l_max = *o.l_max;
  if (o.out_dir) c.out_dir = *o.out_dir;
  validate(c);
}

BuiltScenario build_scenario(const ExperimentConfig& c) {
  const auto& s = c.scenario;
  const scenario::NoiseRange noise{s.noise_min, s.noise_max};
  BuiltScenario out;
  const auto topo_seed = derive_seed(c.seed, Stream::topology);
  const auto kin_seed = derive_seed(c.seed, Stream::kinematics);
  const auto var_seed = derive_seed(c.seed, Stream::noise_variance);

  if (s.generator == "geometric" || s.generator == "highway" || s.generator == "trace") {
    scenario::KinematicTrace trace;
    scenario::GeometricParams params;
    params.comm_range = s.comm_range;
    params.noise = noise;
    params.reliability = s.reliability;
    if (s.generator == "geometric") {
      trace = scenario::random_kinematics(s.n, s.width, s.height, s.speed_min, s.speed_max,
                                          kin_seed);
      params.width = s.width;
      params.height = s.height;
    } else if (s.generator == "highway") {
      trace = scenario::highway_kinematics(s.n, s.spacing, s.speed_min, s.speed_max, kin_seed);
      params.width = s.spacing * static_cast<double>(s.n);
      params.height = 1.0;
    } else {
      trace = scenario::load_trace(s.trace_file);
      params.width = s.width;
      params.height = s.height;
    }
    out.topology = scenario::generate_geometric(trace, params, var_seed);
    out.kinematics = std::move(trace);
  } else if (s.generator == "tree") {
    out.topology = scenario::generate_tree(s.n, topo_seed, noise);
  } else if (s.generator == "connected") {
    out.topology = scenario::generate_connected(s.n, s.extra_edge_probability, topo_seed, noise);
  } else if (s.generator == "complete") {
    out.topology = scenario::generate_complete(s.n, var_seed, noise);
  } else if (s.generator == "explicit") {
    std::vector<NodeId> nodes = s.nodes;
    std::sort(nodes.begin(), nodes.end());
    scenario::Topology topo(nodes.front());
    for (std::size_t i = 1; i < nodes.size(); ++i) topo.add_node(nodes[i]);
    for (const auto& e : s.edges) topo.add_edge(e.a, e.b, {e.noise_variance, e.reliability});
    out.topology = std::move(topo);
  } else {
    throw ConfigError({"scenario.generator: unknown generator '" + s.generator + "'"});
  }

  if (s.truth == "uniform") {
    out.truth = scenario::synthesize_truth(out.topology,
                                           scenario::UniformTruth{s.truth_min, s.truth_max},
                                           s.anchor_value, derive_seed(c.seed, Stream::truth));
  } else if (s.truth == "kinematic") {
    scenario::KinematicTruth k{s.carrier_hz, s.wave_speed,
                               scenario::projected_speeds(*out.kinematics)};
    out.truth = scenario::synthesize_truth(out.topology, k, s.anchor_value, 0);
  } else {
    for (NodeId n : out.topology.nodes()) {
      auto it = s.offsets.find(n);
      if (it == s.offsets.end()) {
        throw ConfigError({"scenario.truth.offsets: no offset for node " + std::to_string(n)});
      }
      out.truth.offsets[n] = it->second;
    }
    out.truth.anchor_value = out.truth.offsets.at(out.topology.anchor());
  }

  scenario::MeasurementOptions opts;
  opts.noiseless = s.noiseless;
  std::map<Edge, double> radial;
  if (s.pairwise == "radial") {
    radial = scenario::radial_pairwise_shift(out.topology, *out.kinematics, s.carrier_hz,
                                             s.wave_speed);
    opts.pairwise_override = &radial;
  }
  out.measurements = scenario::sample_measurements(out.topology, out.truth,
                                                   derive_seed(c.seed, Stream::measurement), opts);
  return out;
}

netsim::RunSpec make_run_spec(const ExperimentConfig& c, const BuiltScenario& b) {
  netsim::RunSpec spec;
  spec.algorithm = c.algorithm == "gbp" ? netsim::Algorithm::gbp : netsim::Algorithm::lsbp;
  spec.topology = b.topology;
  spec.truth = b.truth;
  spec.measurements = b.measurements;
  spec.measurement_seed = derive_seed(c.seed, Stream::measurement);
  spec.noiseless = c.scenario.noiseless;
  spec.gbp_init.uniform = {c.gbp_precision, c.gbp_mean};
  spec.lsbp_init.uniform = {c.lsbp_variance, c.lsbp_mean};
  for (const auto& n : c.lsbp_per_node) spec.lsbp_init.per_node[n.node] = {n.variance, n.mean};
  spec.link.pdr = c.pdr;
  spec.link.max_delay = c.max_delay;
  spec.link.seed = c.link_seed.value_or(c.seed);
  for (const auto& o : c.link_overrides) spec.link.overrides[{o.from, o.to}] = o.pdr;
  spec.termination = {c.threshold, c.l_max, c.divergence_factor};
  for (const auto& e : c.events) {
    scenario::DynamicEvent ev;
    ev.at_iteration = e.at;
    if (e.kind == "leave") {
      ev.change = scenario::Leave{e.node};
    } else {
      scenario::Join join;
      join.node = e.node;
      join.links = e.links;
      if (e.offset) {
        join.offset = *e.offset;
      } else if (auto it = b.truth.offsets.find(e.node); it != b.truth.offsets.end()) {
        join.offset = it->second;
      } else {
        throw ConfigError({"events: join of node " + std::to_string(e.node) +
                           " needs an offset (node is not in the initial scenario)"});
      }
      ev.change = join;
    }
    spec.events.push_back(std::move(ev));
  }
  spec.normalization = c.normalization;
  spec.record_beliefs = c.record_beliefs;
  spec.config_hash = config_hash(c);
  return spec;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

}  // namespace doppler::cli
