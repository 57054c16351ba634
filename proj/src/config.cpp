#include "mtdc/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mtdc/errors.hpp"

namespace mtdc {
namespace {

using json = nlohmann::ordered_json;

constexpr std::string_view kMirrorLines = "mirror_lines";

struct UnitEntry {
  std::string_view suffix;
  Dimension dimension;
  double factor;
};

constexpr UnitEntry kUnits[] = {
    {"V", Dimension::kVoltage, 1.0},       {"kV", Dimension::kVoltage, 1e3},
    {"A", Dimension::kCurrent, 1.0},       {"F", Dimension::kCapacitance, 1.0},
    {"uF", Dimension::kCapacitance, 1e-6}, {"ohm", Dimension::kResistance, 1.0},
    {"S", Dimension::kConductance, 1.0},   {"s", Dimension::kTime, 1.0},
    {"ms", Dimension::kTime, 1e-3},
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

/// Walks a JSON document keeping the field path for diagnostics.
class Reader {
 public:
  Reader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const std::string& path, const std::string& message) const {
    throw ValidationError(source_ + ": " + path + ": " + message);
  }

  const json& member(const json& obj, const std::string& path, const char* key) const {
    if (!obj.contains(key)) fail(path, std::string("missing required field '") + key + "'");
    return obj.at(key);
  }

  void only_keys(const json& obj, const std::string& path, std::initializer_list<std::string_view> keys) const {
    if (!obj.is_object()) fail(path, "expected an object");
    for (const auto& [k, v] : obj.items()) {
      if (std::find(keys.begin(), keys.end(), k) == keys.end()) fail(path, "unknown field '" + k + "'");
    }
  }

  double quantity(const json& value, const std::string& path, Dimension dim) const {
    if (value.is_number()) {
      const double x = value.get<double>();
      if (!std::isfinite(x)) fail(path, "value must be finite");
      return x;
    }
    if (!value.is_string()) fail(path, "expected a number or a \"<value> <unit>\" string");
    try {
      return parse_quantity(value.get<std::string>(), dim);
    } catch (const ValidationError& e) {
      fail(path, e.what());
    }
  }

  double number(const json& value, const std::string& path) const {
    if (!value.is_number()) fail(path, "expected a number");
    const double x = value.get<double>();
    if (!std::isfinite(x)) fail(path, "value must be finite");
    return x;
  }

  long integer(const json& value, const std::string& path) const {
    if (!value.is_number_integer()) fail(path, "expected an integer");
    return value.get<long>();
  }

  const std::string& source() const { return source_; }

 private:
  std::string source_;
};

Eigen::VectorXd read_injections(const Reader& r, const json& arr, const std::string& path, std::size_t n) {
  if (!arr.is_array()) r.fail(path, "expected an array of currents");
  if (arr.size() != n) {
    r.fail(path, "expected " + std::to_string(n) + " entries, got " + std::to_string(arr.size()));
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < n; ++k) {
    out(static_cast<Eigen::Index>(k)) =
        r.quantity(arr[k], path + "[" + std::to_string(k) + "]", Dimension::kCurrent);
  }
  return out;
}

ConfigDocument build(const json& root, const Reader& r) {
  r.only_keys(root, "$", {"name", "converters", "lines", "comm_links", "controller", "scenario"});
  ConfigDocument doc;
  doc.name = root.contains("name") ? root.at("name").get<std::string>() : std::string("config");

  // Converters.
  const json& converters = r.member(root, "$", "converters");
  if (!converters.is_array() || converters.empty()) r.fail("converters", "expected a non-empty array");
  const std::size_t n = converters.size();
  const auto N = static_cast<Eigen::Index>(n);
  doc.params.capacitance.resize(N);
  doc.params.droop_gain.resize(N);
  doc.params.regulator = Eigen::VectorXd::Zero(N);
  std::map<long, std::size_t> index_of;
  for (std::size_t k = 0; k < n; ++k) {
    const std::string path = "converters[" + std::to_string(k) + "]";
    const json& c = converters[k];
    r.only_keys(c, path, {"id", "capacitance", "kp", "regulator"});
    const long id = c.contains("id") ? r.integer(c.at("id"), path + ".id") : static_cast<long>(k + 1);
    if (!index_of.emplace(id, k).second) r.fail(path + ".id", "duplicate converter id " + std::to_string(id));
    doc.converter_ids.push_back(id);
    const auto K = static_cast<Eigen::Index>(k);
    doc.params.capacitance(K) =
        r.quantity(r.member(c, path, "capacitance"), path + ".capacitance", Dimension::kCapacitance);
    if (!(doc.params.capacitance(K) > 0.0)) r.fail(path + ".capacitance", "must be positive");
    doc.params.droop_gain(K) = r.quantity(r.member(c, path, "kp"), path + ".kp", Dimension::kConductance);
    if (!(doc.params.droop_gain(K) > 0.0)) r.fail(path + ".kp", "must be positive");
    if (c.contains("regulator")) {
      if (!c.at("regulator").is_boolean()) r.fail(path + ".regulator", "expected true or false");
      doc.params.regulator(K) = c.at("regulator").get<bool>() ? 1.0 : 0.0;
    }
  }
  if (doc.params.regulator.sum() > 1.0) r.fail("converters", "more than one converter flagged as regulator");
  if (doc.params.regulator.sum() == 0.0) doc.params.regulator(0) = 1.0;

  const auto resolve = [&](const json& v, const std::string& path) {
    const long id = r.integer(v, path);
    auto it = index_of.find(id);
    if (it == index_of.end()) r.fail(path, "unknown converter id " + std::to_string(id));
    return it->second;
  };
  const auto edge_label = [&](std::size_t i, std::size_t j) {
    return "(" + std::to_string(doc.converter_ids[i]) + ", " + std::to_string(doc.converter_ids[j]) + ")";
  };

  // Lines.
  const json& lines = r.member(root, "$", "lines");
  if (!lines.is_array()) r.fail("lines", "expected an array");
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (std::size_t k = 0; k < lines.size(); ++k) {
    const std::string path = "lines[" + std::to_string(k) + "]";
    const json& l = lines[k];
    r.only_keys(l, path, {"i", "j", "resistance"});
    LineSpec spec;
    spec.i = resolve(r.member(l, path, "i"), path + ".i");
    spec.j = resolve(r.member(l, path, "j"), path + ".j");
    if (spec.i == spec.j) r.fail(path, "line connects converter " + std::to_string(doc.converter_ids[spec.i]) + " to itself");
    if (!seen.insert(std::minmax(spec.i, spec.j)).second) {
      r.fail(path, "duplicate edge " + edge_label(spec.i, spec.j));
    }
    spec.resistance = r.quantity(r.member(l, path, "resistance"), path + ".resistance", Dimension::kResistance);
    if (!(spec.resistance > 0.0)) r.fail(path + ".resistance", "must be positive");
    doc.lines.push_back(spec);
  }
  try {
    (void)doc.line_topology();
  } catch (const ValidationError& e) {
    r.fail("lines", e.what());
  }

  // Communication links.
  if (root.contains("comm_links")) {
    const json& comm = root.at("comm_links");
    if (comm.is_string()) {
      if (comm.get<std::string>() != kMirrorLines) {
        r.fail("comm_links", "unknown directive '" + comm.get<std::string>() + "' (expected \"mirror_lines\")");
      }
      doc.comm_mirrors_lines = true;
      for (const LineSpec& l : doc.lines) doc.comm_links.push_back(Edge{l.i, l.j, 1.0 / l.resistance});
    } else if (comm.is_array()) {
      std::set<std::pair<std::size_t, std::size_t>> seen_comm;
      for (std::size_t k = 0; k < comm.size(); ++k) {
        const std::string path = "comm_links[" + std::to_string(k) + "]";
        const json& c = comm[k];
        r.only_keys(c, path, {"i", "j", "gain"});
        Edge e;
        e.from = resolve(r.member(c, path, "i"), path + ".i");
        e.to = resolve(r.member(c, path, "j"), path + ".j");
        if (e.from == e.to) r.fail(path, "link connects a converter to itself");
        if (!seen_comm.insert(std::minmax(e.from, e.to)).second) {
          r.fail(path, "duplicate edge " + edge_label(e.from, e.to));
        }
        e.weight = r.quantity(r.member(c, path, "gain"), path + ".gain", Dimension::kConductance);
        if (!(e.weight > 0.0)) r.fail(path + ".gain", "must be positive");
        doc.comm_links.push_back(e);
      }
    } else {
      r.fail("comm_links", "expected \"mirror_lines\" or an array of links");
    }
    try {
      (void)doc.comm_topology();
    } catch (const ValidationError& e) {
      r.fail("comm_links", e.what());
    }
  }

  // Controller.
  const json& ctrl = r.member(root, "$", "controller");
  r.only_keys(ctrl, "controller", {"kind", "gamma", "vnom", "tau"});
  const json& kind = r.member(ctrl, "controller", "kind");
  if (!kind.is_string()) r.fail("controller.kind", "expected \"droop\" or \"distributed\"");
  if (kind.get<std::string>() == "droop") {
    doc.controller = ControllerKind::kDroop;
  } else if (kind.get<std::string>() == "distributed") {
    doc.controller = ControllerKind::kDistributed;
  } else {
    r.fail("controller.kind", "expected \"droop\" or \"distributed\", got \"" + kind.get<std::string>() + "\"");
  }
  doc.params.nominal_voltage = r.quantity(r.member(ctrl, "controller", "vnom"), "controller.vnom", Dimension::kVoltage);
  if (!(doc.params.nominal_voltage > 0.0)) r.fail("controller.vnom", "must be positive");
  if (ctrl.contains("gamma")) {
    doc.gamma = r.number(ctrl.at("gamma"), "controller.gamma");
    if (!(doc.gamma > 0.0)) r.fail("controller.gamma", "must be positive");
  } else if (doc.controller == ControllerKind::kDistributed) {
    r.fail("controller", "missing required field 'gamma'");
  }
  if (ctrl.contains("tau")) {
    doc.tau = r.quantity(ctrl.at("tau"), "controller.tau", Dimension::kTime);
    if (!(doc.tau >= 0.0)) r.fail("controller.tau", "must be non-negative");
  }
  if (doc.controller == ControllerKind::kDistributed && !doc.has_comm()) {
    r.fail("comm_links", "the distributed controller needs communication links");
  }

  // Scenario.
  const json& sc = r.member(root, "$", "scenario");
  r.only_keys(sc, "scenario", {"pre_injections", "post_injections", "step_time", "horizon", "sample_interval"});
  doc.scenario.pre_injections = read_injections(r, r.member(sc, "scenario", "pre_injections"), "scenario.pre_injections", n);
  doc.scenario.post_injections = read_injections(r, r.member(sc, "scenario", "post_injections"), "scenario.post_injections", n);
  if (sc.contains("step_time")) doc.scenario.step_time = r.quantity(sc.at("step_time"), "scenario.step_time", Dimension::kTime);
  if (sc.contains("horizon")) doc.scenario.horizon = r.quantity(sc.at("horizon"), "scenario.horizon", Dimension::kTime);
  if (sc.contains("sample_interval")) {
    doc.scenario.sample_interval = r.quantity(sc.at("sample_interval"), "scenario.sample_interval", Dimension::kTime);
  }
  doc.scenario.delay = doc.tau;
  try {
    doc.scenario.validate(n);
    doc.params.validate(false);
  } catch (const ValidationError& e) {
    r.fail("scenario", e.what());
  }
  return doc;
}

json injections_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) arr.push_back(v(k));
  return arr;
}

}  // namespace

double parse_quantity(std::string_view text, Dimension dimension) {
  const std::string_view s = trim(text);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr == s.data()) {
    throw ValidationError("cannot parse a number from \"" + std::string(text) + "\"");
  }
  if (!std::isfinite(value)) throw ValidationError("value must be finite");
  const std::string_view unit = trim(std::string_view(ptr, static_cast<std::size_t>(s.data() + s.size() - ptr)));
  if (unit.empty()) return value;
  for (const UnitEntry& u : kUnits) {
    if (u.suffix == unit) {
      if (u.dimension != dimension) {
        throw ValidationError("unit '" + std::string(unit) + "' has the wrong dimension here");
      }
      return value * u.factor;
    }
  }
  throw ValidationError("unknown unit '" + std::string(unit) + "'");
}

GridTopology ConfigDocument::line_topology() const {
  std::vector<Edge> edges;
  edges.reserve(lines.size());
  for (const LineSpec& l : lines) edges.push_back(Edge{l.i, l.j, 1.0 / l.resistance});
  return GridTopology(node_count(), std::move(edges));
}

GridTopology ConfigDocument::comm_topology() const {
  if (!has_comm()) throw ValidationError("no communication links configured");
  return GridTopology(node_count(), comm_links);
}

Controller ConfigDocument::make_controller() const {
  if (controller == ControllerKind::kDroop) return DroopController::from_params(params);
  return DistributedController::from_params(params, comm_topology(), gamma, tau);
}

ConfigDocument parse_config_text(std::string_view text, std::string_view source) {
  const Reader reader{std::string(source)};
  json root;
  try {
    root = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string(source) + ": " + e.what());
  }
  try {
    return build(root, reader);
  } catch (const json::exception& e) {
    throw ValidationError(std::string(source) + ": " + e.what());
  }
}

ConfigDocument parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open configuration file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), path.string());
}

std::string serialize_config(const ConfigDocument& config) {
  json root;
  root["name"] = config.name;
  json converters = json::array();
  for (std::size_t k = 0; k < config.node_count(); ++k) {
    const auto K = static_cast<Eigen::Index>(k);
    converters.push_back({{"id", config.converter_ids[k]},
                          {"capacitance", config.params.capacitance(K)},
                          {"kp", config.params.droop_gain(K)},
                          {"regulator", config.params.regulator(K) == 1.0}});
  }
  root["converters"] = converters;
  json lines = json::array();
  for (const LineSpec& l : config.lines) {
    lines.push_back({{"i", config.converter_ids[l.i]}, {"j", config.converter_ids[l.j]}, {"resistance", l.resistance}});
  }
  root["lines"] = lines;
  if (config.comm_mirrors_lines) {
    root["comm_links"] = kMirrorLines;
  } else if (!config.comm_links.empty()) {
    json comm = json::array();
    for (const Edge& e : config.comm_links) {
      comm.push_back({{"i", config.converter_ids[e.from]}, {"j", config.converter_ids[e.to]}, {"gain", e.weight}});
    }
    root["comm_links"] = comm;
  }
  json ctrl;
  ctrl["kind"] = config.controller == ControllerKind::kDroop ? "droop" : "distributed";
  if (config.gamma > 0.0) ctrl["gamma"] = config.gamma;
  ctrl["vnom"] = config.params.nominal_voltage;
  ctrl["tau"] = config.tau;
  root["controller"] = ctrl;
  root["scenario"] = {{"pre_injections", injections_json(config.scenario.pre_injections)},
                      {"post_injections", injections_json(config.scenario.post_injections)},
                      {"step_time", config.scenario.step_time},
                      {"horizon", config.scenario.horizon},
                      {"sample_interval", config.scenario.sample_interval}};
  return root.dump(2) + "\n";
}

std::vector<std::string> preset_names() { return {"paper_4term"}; }

std::string preset_text(std::string_view name) {
  if (name == "paper_4term") {
    return R"({
  "name": "paper_4term",
  "converters": [
    {"id": 1, "capacitance": "123.79 uF", "kp": "10 S", "regulator": true},
    {"id": 2, "capacitance": "123.79 uF", "kp": "10 S"},
    {"id": 3, "capacitance": "123.79 uF", "kp": "10 S"},
    {"id": 4, "capacitance": "123.79 uF", "kp": "10 S"}
  ],
  "lines": [
    {"i": 1, "j": 2, "resistance": "0.0154 ohm"},
    {"i": 1, "j": 3, "resistance": "0.0015 ohm"},
    {"i": 2, "j": 4, "resistance": "0.0015 ohm"},
    {"i": 3, "j": 4, "resistance": "0.0154 ohm"}
  ],
  "comm_links": "mirror_lines",
  "controller": {"kind": "distributed", "gamma": 0.005, "vnom": "100 kV", "tau": "0 s"},
  "scenario": {
    "pre_injections": ["300 A", "200 A", "-100 A", "-400 A"],
    "post_injections": ["300 A", "200 A", "-300 A", "-400 A"],
    "step_time": "0 s",
    "horizon": "60 s",
    "sample_interval": "1 ms"
  }
}
)";
  }
  std::string known;
  for (const auto& p : preset_names()) known += (known.empty() ? "" : ", ") + p;
  throw ValidationError("unknown preset '" + std::string(name) + "' (available: " + known + ")");
}

ConfigDocument load_preset(std::string_view name) {
  return parse_config_text(preset_text(name), "preset:" + std::string(name));
}

}  // namespace mtdc
