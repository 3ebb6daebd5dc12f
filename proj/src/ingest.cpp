#include "fgll/ingest.hpp"

#include "fgll/errors.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace fgll {

using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return s;
}

std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream in{std::string(line)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.emplace_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

double parse_number(const std::string& token, const std::string& context) {
  double value = 0.0;
  const char* begin = token.data();
  const char* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw Error(ErrorCode::MalformedRow, fmt::format("{}: '{}' is not a finite number", context, token));
  }
  return value;
}

// m^3/s per unit of each supported INP flow unit.
double inp_flow_factor(const std::string& units) {
  static const std::map<std::string, double> factors = {
      {"LPS", 1e-3}, {"LPM", 1e-3 / 60.0}, {"MLD", 1e3 / 86400.0}, {"CMH", 1.0 / 3600.0}, {"CMD", 1.0 / 86400.0}};
  auto it = factors.find(units);
  if (it == factors.end()) {
    throw Error(ErrorCode::InvalidAttribute, fmt::format("unsupported INP flow units '{}' (SI units only)", units));
  }
  return it->second;
}

const char* kind_name(NodeKind kind) { return kind == NodeKind::Reservoir ? "reservoir" : "junction"; }

}  // namespace

double flow_to_si(double value, FlowUnits units) { return units == FlowUnits::Lps ? value / 1000.0 : value; }
double flow_from_si(double value, FlowUnits units) { return units == FlowUnits::Lps ? value * 1000.0 : value; }

// ---------------------------------------------------------------------------
// Config

void validate(const RunConfig& c) {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw Error(ErrorCode::InvalidConfig, fmt::format("{} must be > 0", name));
  };
  positive(c.noise.temporal, "noise.temporal");
  positive(c.noise.structural, "noise.structural");
  positive(c.noise.demand_head, "noise.demand_head");
  positive(c.noise.pressure_residual, "noise.pressure_residual");
  positive(c.noise.leak_localization, "noise.leak_localization");
  positive(c.noise.demand_measurement, "noise.demand_measurement");
  positive(c.noise.zero_sum, "noise.zero_sum");
  positive(c.solver.cost_tolerance, "solver.cost_tolerance");
  positive(c.solver.lm_initial_damping, "solver.lm_initial_damping");
  if (c.solver.max_iterations < 1) throw Error(ErrorCode::InvalidConfig, "solver.max_iterations must be >= 1");
  if (c.window_T < 2) throw Error(ErrorCode::InvalidConfig, "window_T must be >= 2");
  if (!(c.mu_L >= 0.0) || !std::isfinite(c.mu_L)) throw Error(ErrorCode::InvalidConfig, "mu_L must be >= 0");
}

RunConfig load_config(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::InvalidConfig, "config must be a JSON object");

  RunConfig c;
  auto number = [](const json& v, const std::string& key) {
    if (!v.is_number()) throw Error(ErrorCode::InvalidConfig, key + " must be a number");
    return v.get<double>();
  };
  auto integer = [](const json& v, const std::string& key) {
    if (!v.is_number_integer()) throw Error(ErrorCode::InvalidConfig, key + " must be an integer");
    return v.get<std::int64_t>();
  };

  for (const auto& [key, value] : doc.items()) {
    if (key == "mu_L") {
      c.mu_L = number(value, key);
    } else if (key == "window_T") {
      c.window_T = static_cast<int>(integer(value, key));
    } else if (key == "rng_seed") {
      const auto seed = integer(value, key);
      if (seed < 0) throw Error(ErrorCode::InvalidConfig, "rng_seed must be non-negative");
      c.rng_seed = static_cast<std::uint64_t>(seed);
    } else if (key == "flow_units") {
      const std::string u = value.is_string() ? value.get<std::string>() : "";
      if (u == "lps") c.flow_units = FlowUnits::Lps;
      else if (u == "m3s") c.flow_units = FlowUnits::M3s;
      else throw Error(ErrorCode::InvalidConfig, "flow_units must be \"lps\" or \"m3s\"");
    } else if (key == "pressure_is_gauge") {
      if (!value.is_boolean()) throw Error(ErrorCode::InvalidConfig, "pressure_is_gauge must be a boolean");
      c.pressure_is_gauge = value.get<bool>();
    } else if (key == "noise") {
      if (!value.is_object()) throw Error(ErrorCode::InvalidConfig, "noise must be an object");
      const std::map<std::string, double*> fields = {
          {"temporal", &c.noise.temporal},
          {"structural", &c.noise.structural},
          {"demand_head", &c.noise.demand_head},
          {"pressure_residual", &c.noise.pressure_residual},
          {"leak_localization", &c.noise.leak_localization},
          {"demand_measurement", &c.noise.demand_measurement},
          {"zero_sum", &c.noise.zero_sum}};
      for (const auto& [nk, nv] : value.items()) {
        auto it = fields.find(nk);
        if (it == fields.end()) throw Error(ErrorCode::InvalidConfig, "unknown key noise." + nk);
        *it->second = number(nv, "noise." + nk);
      }
    } else if (key == "solver") {
      if (!value.is_object()) throw Error(ErrorCode::InvalidConfig, "solver must be an object");
      for (const auto& [sk, sv] : value.items()) {
        if (sk == "max_iterations") c.solver.max_iterations = static_cast<int>(integer(sv, "solver." + sk));
        else if (sk == "cost_tolerance") c.solver.cost_tolerance = number(sv, "solver." + sk);
        else if (sk == "lm_initial_damping") c.solver.lm_initial_damping = number(sv, "solver." + sk);
        else throw Error(ErrorCode::InvalidConfig, "unknown key solver." + sk);
      }
    } else {
      throw Error(ErrorCode::InvalidConfig, "unknown key " + key);
    }
  }
  validate(c);
  return c;
}

std::string config_to_json(const RunConfig& c) {
  json doc = {
      {"mu_L", c.mu_L},
      {"window_T", c.window_T},
      {"noise",
       {{"temporal", c.noise.temporal},
        {"structural", c.noise.structural},
        {"demand_head", c.noise.demand_head},
        {"pressure_residual", c.noise.pressure_residual},
        {"leak_localization", c.noise.leak_localization},
        {"demand_measurement", c.noise.demand_measurement},
        {"zero_sum", c.noise.zero_sum}}},
      {"solver",
       {{"max_iterations", c.solver.max_iterations},
        {"cost_tolerance", c.solver.cost_tolerance},
        {"lm_initial_damping", c.solver.lm_initial_damping}}},
      {"rng_seed", c.rng_seed},
      {"flow_units", c.flow_units == FlowUnits::Lps ? "lps" : "m3s"},
      {"pressure_is_gauge", c.pressure_is_gauge}};
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// INP

InpParseResult parse_inp(std::string_view text) {
  InpParseResult result;
  std::set<std::string> seen_sections;
  std::set<std::string> warned;
  std::unordered_set<std::string> node_ids;
  std::unordered_set<std::string> pipe_ids;
  std::unordered_map<std::string, std::pair<double, double>> coordinates;
  // Demands are converted once the Units option is known.
  std::vector<double> raw_demands;
  std::string units = "LPS";
  bool units_given = false;

  std::string section;
  std::size_t line_no = 0;
  for (std::string_view raw : lines_of(text)) {
    ++line_no;
    std::string line = trim(raw.substr(0, raw.find(';')));
    if (line.empty()) continue;
    if (line.front() == '[') {
      const auto close = line.find(']');
      if (close == std::string::npos) {
        throw Error(ErrorCode::MalformedRow, fmt::format("line {}: unterminated section header", line_no));
      }
      section = upper(line.substr(1, close - 1));
      seen_sections.insert(section);
      static const std::set<std::string> known = {"JUNCTIONS", "RESERVOIRS", "PIPES", "COORDINATES", "OPTIONS", "END"};
      if (!known.contains(section) && warned.insert(section).second) {
        result.warnings.push_back(fmt::format("section [{}] ignored", section));
      }
      continue;
    }
    const auto f = split_ws(line);
    const std::string where = fmt::format("line {} [{}]", line_no, section);
    auto expect_fields = [&](std::size_t lo, std::size_t hi) {
      if (f.size() < lo || f.size() > hi) {
        throw Error(ErrorCode::MalformedRow,
                    fmt::format("{}: expected {}-{} fields, got {}", where, lo, hi, f.size()));
      }
    };
    auto add_node_id = [&](const std::string& id) {
      if (!node_ids.insert(id).second) throw Error(ErrorCode::DuplicateId, fmt::format("{}: node '{}'", where, id));
    };

    if (section == "JUNCTIONS") {
      expect_fields(2, 4);
      add_node_id(f[0]);
      NodeRecord r;
      r.id = f[0];
      r.elevation = parse_number(f[1], where);
      r.kind = NodeKind::Junction;
      raw_demands.push_back(f.size() >= 3 ? parse_number(f[2], where) : 0.0);
      result.spec.nodes.push_back(r);
    } else if (section == "RESERVOIRS") {
      expect_fields(2, 3);
      add_node_id(f[0]);
      NodeRecord r;
      r.id = f[0];
      r.kind = NodeKind::Reservoir;
      r.head = parse_number(f[1], where);
      r.elevation = r.head;
      raw_demands.push_back(0.0);
      result.spec.nodes.push_back(r);
    } else if (section == "PIPES") {
      expect_fields(6, 8);
      if (!pipe_ids.insert(f[0]).second) throw Error(ErrorCode::DuplicateId, fmt::format("{}: pipe '{}'", where, f[0]));
      PipeRecord p;
      p.id = f[0];
      p.from = f[1];
      p.to = f[2];
      p.length_m = parse_number(f[3], where);
      p.diameter_m = parse_number(f[4], where) / 1000.0;
      p.roughness = parse_number(f[5], where);
      result.spec.pipes.push_back(p);
    } else if (section == "COORDINATES") {
      expect_fields(3, 3);
      coordinates[f[0]] = {parse_number(f[1], where), parse_number(f[2], where)};
    } else if (section == "OPTIONS") {
      if (upper(f[0]) == "UNITS") {
        expect_fields(2, 2);
        units = upper(f[1]);
        units_given = true;
      }
    }
  }

  for (const char* required : {"JUNCTIONS", "RESERVOIRS", "PIPES"}) {
    if (!seen_sections.contains(required)) throw Error(ErrorCode::MissingSection, required);
  }
  if (!units_given) result.warnings.emplace_back("no Units option; flows read as LPS");
  const double factor = inp_flow_factor(units);
  for (std::size_t i = 0; i < result.spec.nodes.size(); ++i) {
    NodeRecord& r = result.spec.nodes[i];
    r.base_demand = raw_demands[i] * factor;
    if (auto it = coordinates.find(r.id); it != coordinates.end()) {
      r.x = it->second.first;
      r.y = it->second.second;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Native JSON

NetworkSpec parse_network_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::MalformedRow, e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::MalformedRow, "network JSON must be an object");
  for (const auto& [key, _] : doc.items()) {
    if (key != "nodes" && key != "pipes" && key != "sensors") {
      throw Error(ErrorCode::MalformedRow, "unknown network key '" + key + "'");
    }
  }
  if (!doc.contains("nodes") || !doc["nodes"].is_array()) throw Error(ErrorCode::MissingSection, "nodes");
  if (!doc.contains("pipes") || !doc["pipes"].is_array()) throw Error(ErrorCode::MissingSection, "pipes");

  auto req = [](const json& obj, const char* key, const std::string& ctx) -> const json& {
    if (!obj.contains(key)) throw Error(ErrorCode::MalformedRow, fmt::format("{}: missing '{}'", ctx, key));
    return obj.at(key);
  };
  auto num = [&](const json& obj, const char* key, const std::string& ctx) {
    const json& v = req(obj, key, ctx);
    if (!v.is_number()) throw Error(ErrorCode::MalformedRow, fmt::format("{}: '{}' must be a number", ctx, key));
    return v.get<double>();
  };
  auto str = [&](const json& obj, const char* key, const std::string& ctx) {
    const json& v = req(obj, key, ctx);
    if (!v.is_string()) throw Error(ErrorCode::MalformedRow, fmt::format("{}: '{}' must be a string", ctx, key));
    return v.get<std::string>();
  };

  NetworkSpec spec;
  std::unordered_set<std::string> ids;
  for (std::size_t i = 0; i < doc["nodes"].size(); ++i) {
    const json& n = doc["nodes"][i];
    const std::string ctx = fmt::format("nodes[{}]", i);
    NodeRecord r;
    r.id = str(n, "id", ctx);
    if (!ids.insert(r.id).second) throw Error(ErrorCode::DuplicateId, "node '" + r.id + "'");
    r.elevation = num(n, "elevation", ctx);
    const std::string kind = str(n, "kind", ctx);
    if (kind == "junction") {
      r.kind = NodeKind::Junction;
      if (n.contains("base_demand")) r.base_demand = num(n, "base_demand", ctx);
    } else if (kind == "reservoir") {
      r.kind = NodeKind::Reservoir;
      r.head = num(n, "head", ctx);
    } else {
      throw Error(ErrorCode::MalformedRow, ctx + ": kind must be junction or reservoir");
    }
    if (n.contains("x")) r.x = num(n, "x", ctx);
    if (n.contains("y")) r.y = num(n, "y", ctx);
    spec.nodes.push_back(r);
  }
  std::unordered_set<std::string> pipe_ids;
  for (std::size_t k = 0; k < doc["pipes"].size(); ++k) {
    const json& p = doc["pipes"][k];
    const std::string ctx = fmt::format("pipes[{}]", k);
    PipeRecord r;
    r.id = str(p, "id", ctx);
    if (!pipe_ids.insert(r.id).second) throw Error(ErrorCode::DuplicateId, "pipe '" + r.id + "'");
    r.from = str(p, "from", ctx);
    r.to = str(p, "to", ctx);
    r.length_m = num(p, "length_m", ctx);
    r.diameter_m = num(p, "diameter_m", ctx);
    r.roughness = num(p, "roughness", ctx);
    spec.pipes.push_back(r);
  }
  if (doc.contains("sensors")) {
    const json& s = doc["sensors"];
    auto ids_of = [&](const char* key) {
      std::vector<std::string> out;
      if (!s.contains(key)) return out;
      for (const json& v : s.at(key)) {
        if (!v.is_string()) throw Error(ErrorCode::MalformedRow, std::string("sensors.") + key + " must list node ids");
        out.push_back(v.get<std::string>());
      }
      return out;
    };
    spec.pressure_sensors = ids_of("pressure");
    spec.demand_sensors = ids_of("demand");
  }
  return spec;
}

std::string network_to_json(const NetworkSpec& spec) {
  json nodes = json::array();
  for (const NodeRecord& r : spec.nodes) {
    json n = {{"id", r.id}, {"elevation", r.elevation}, {"kind", kind_name(r.kind)}};
    if (r.kind == NodeKind::Reservoir) n["head"] = r.head;
    else n["base_demand"] = r.base_demand;
    if (r.x) n["x"] = *r.x;
    if (r.y) n["y"] = *r.y;
    nodes.push_back(std::move(n));
  }
  json pipes = json::array();
  for (const PipeRecord& p : spec.pipes) {
    pipes.push_back({{"id", p.id},
                     {"from", p.from},
                     {"to", p.to},
                     {"length_m", p.length_m},
                     {"diameter_m", p.diameter_m},
                     {"roughness", p.roughness}});
  }
  json doc = {{"nodes", nodes}, {"pipes", pipes}};
  if (!spec.pressure_sensors.empty() || !spec.demand_sensors.empty()) {
    doc["sensors"] = {{"pressure", spec.pressure_sensors}, {"demand", spec.demand_sensors}};
  }
  return doc.dump(2) + "\n";
}

NetworkSpec to_spec(const Network& net) {
  NetworkSpec spec;
  for (const Node& n : net.nodes()) {
    NodeRecord r;
    r.id = n.id;
    r.elevation = n.elevation;
    r.kind = n.kind;
    r.head = n.reservoir_head;
    r.base_demand = n.base_demand;
    spec.nodes.push_back(r);
  }
  for (const Pipe& p : net.pipes()) {
    spec.pipes.push_back(
        PipeRecord{p.id, net.node(p.source).id, net.node(p.sink).id, p.length, p.diameter, p.roughness});
  }
  return spec;
}

NetworkSpec load_network_spec(const std::filesystem::path& path, std::vector<std::string>* warnings) {
  const std::string text = read_text_file(path);
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".inp") {
    InpParseResult r = parse_inp(text);
    if (warnings) warnings->insert(warnings->end(), r.warnings.begin(), r.warnings.end());
    return std::move(r.spec);
  }
  return parse_network_json(text);
}

SensorLayout layout_from_spec(const Network& net, const NetworkSpec& spec) {
  auto indices = [&](const std::vector<std::string>& ids) {
    std::vector<std::size_t> out;
    for (const std::string& id : ids) out.push_back(net.node_index(id));
    return out;
  };
  return SensorLayout(net, indices(spec.pressure_sensors), indices(spec.demand_sensors));
}

// ---------------------------------------------------------------------------
// Measurements

MeasurementSet parse_measurements(std::string_view csv, const Network& net, const MeasurementOptions& opts) {
  const auto lines = lines_of(csv);
  std::size_t first = 0;
  while (first < lines.size() && trim(lines[first]).empty()) ++first;
  if (first == lines.size() || trim(lines[first]) != "t,node_id,kind,value") {
    throw Error(ErrorCode::MalformedRow, "measurement header must be exactly 't,node_id,kind,value'");
  }

  struct Reading {
    std::size_t t;
    std::size_t node;
    bool pressure;
    double value;
  };
  std::vector<Reading> readings;
  std::set<std::tuple<std::size_t, std::size_t, bool>> seen;
  std::set<std::size_t> pressure_nodes;
  std::set<std::size_t> demand_nodes;
  std::size_t T = 0;

  for (std::size_t li = first + 1; li < lines.size(); ++li) {
    const std::string line = trim(lines[li]);
    if (line.empty()) continue;
    const auto f = split_csv(line);
    const std::string where = fmt::format("measurements line {}", li + 1);
    if (f.size() != 4) throw Error(ErrorCode::MalformedRow, fmt::format("{}: expected 4 fields", where));
    std::size_t t = 0;
    {
      auto [ptr, ec] = std::from_chars(f[0].data(), f[0].data() + f[0].size(), t);
      if (ec != std::errc() || ptr != f[0].data() + f[0].size()) {
        throw Error(ErrorCode::MalformedRow, fmt::format("{}: bad instant '{}'", where, f[0]));
      }
    }
    const auto node = net.find_node(f[1]);
    if (!node) throw Error(ErrorCode::UnknownNode, fmt::format("{}: '{}'", where, f[1]));
    bool pressure = false;
    if (f[2] == "pressure") pressure = true;
    else if (f[2] != "demand") throw Error(ErrorCode::MalformedRow, fmt::format("{}: unknown kind '{}'", where, f[2]));
    const double value = parse_number(f[3], where);
    if (!seen.emplace(t, *node, pressure).second) {
      throw Error(ErrorCode::DuplicateReading, fmt::format("t={} node={} kind={}", t, f[1], f[2]));
    }
    (pressure ? pressure_nodes : demand_nodes).insert(*node);
    T = std::max(T, t + 1);
    readings.push_back({t, *node, pressure, value});
  }

  SensorLayout layout(net, {pressure_nodes.begin(), pressure_nodes.end()}, {demand_nodes.begin(), demand_nodes.end()});
  std::vector<Eigen::Index> p_slot(net.n(), -1);
  std::vector<Eigen::Index> d_slot(net.n(), -1);
  for (std::size_t s = 0; s < layout.n_s(); ++s) p_slot[layout.pressure_nodes()[s]] = static_cast<Eigen::Index>(s);
  for (std::size_t s = 0; s < layout.n_d(); ++s) d_slot[layout.demand_nodes()[s]] = static_cast<Eigen::Index>(s);

  const double nan = std::numeric_limits<double>::quiet_NaN();
  MeasurementSet m{layout, std::vector<Vector>(T, Vector::Constant(static_cast<Eigen::Index>(layout.n_s()), nan)),
                   std::vector<Vector>(T, Vector::Constant(static_cast<Eigen::Index>(layout.n_d()), nan))};
  for (const Reading& r : readings) {
    if (r.pressure) {
      const double head = opts.pressure_is_gauge ? r.value + net.node(r.node).elevation : r.value;
      m.pressure[r.t](p_slot[r.node]) = head;
    } else {
      m.demand[r.t](d_slot[r.node]) = flow_to_si(r.value, opts.flow_units);
    }
  }
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t s = 0; s < layout.n_s(); ++s) {
      if (std::isnan(m.pressure[t](static_cast<Eigen::Index>(s)))) {
        throw Error(ErrorCode::MissingReading,
                    fmt::format("t={} node={} kind=pressure", t, net.node(layout.pressure_nodes()[s]).id));
      }
    }
    for (std::size_t s = 0; s < layout.n_d(); ++s) {
      if (std::isnan(m.demand[t](static_cast<Eigen::Index>(s)))) {
        throw Error(ErrorCode::MissingReading,
                    fmt::format("t={} node={} kind=demand", t, net.node(layout.demand_nodes()[s]).id));
      }
    }
  }
  return m;
}

std::string format_measurements(const MeasurementSet& m, const Network& net, FlowUnits units) {
  std::string out = "t,node_id,kind,value\n";
  for (std::size_t t = 0; t < m.T(); ++t) {
    for (std::size_t s = 0; s < m.layout.n_s(); ++s) {
      out += fmt::format("{},{},pressure,{}\n", t, net.node(m.layout.pressure_nodes()[s]).id,
                         m.pressure[t](static_cast<Eigen::Index>(s)));
    }
    for (std::size_t s = 0; s < m.layout.n_d(); ++s) {
      out += fmt::format("{},{},demand,{}\n", t, net.node(m.layout.demand_nodes()[s]).id,
                         flow_from_si(m.demand[t](static_cast<Eigen::Index>(s)), units));
    }
  }
  return out;
}

std::string format_states(const Network& net, const StateSeries& s, FlowUnits units) {
  const bool demands = !s.d.empty();
  if (demands && s.d.size() != s.h.size()) throw Error(ErrorCode::DimensionMismatch, "head and demand series lengths");
  std::string out = "t,node_id,h,d\n";
  for (std::size_t t = 0; t < s.h.size(); ++t) {
    if (static_cast<std::size_t>(s.h[t].size()) != net.n() ||
        (demands && static_cast<std::size_t>(s.d[t].size()) != net.n())) {
      throw Error(ErrorCode::DimensionMismatch, fmt::format("state at instant {} does not cover every node", t));
    }
    for (std::size_t i = 0; i < net.n(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      if (demands) {
        out += fmt::format("{},{},{},{}\n", t, net.node(i).id, s.h[t](k), flow_from_si(s.d[t](k), units));
      } else {
        out += fmt::format("{},{},{},\n", t, net.node(i).id, s.h[t](k));
      }
    }
  }
  return out;
}

StateSeries parse_states(std::string_view csv, const Network& net, FlowUnits units) {
  const auto lines = lines_of(csv);
  std::size_t first = 0;
  while (first < lines.size() && trim(lines[first]).empty()) ++first;
  if (first == lines.size() || trim(lines[first]) != "t,node_id,h,d") {
    throw Error(ErrorCode::MalformedRow, "state header must be exactly 't,node_id,h,d'");
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  StateSeries s;
  std::optional<bool> demands;
  for (std::size_t li = first + 1; li < lines.size(); ++li) {
    const std::string line = trim(lines[li]);
    if (line.empty()) continue;
    const auto f = split_csv(line);
    const std::string where = fmt::format("states line {}", li + 1);
    if (f.size() != 4) throw Error(ErrorCode::MalformedRow, fmt::format("{}: expected 4 fields", where));
    std::size_t t = 0;
    auto [ptr, ec] = std::from_chars(f[0].data(), f[0].data() + f[0].size(), t);
    if (ec != std::errc() || ptr != f[0].data() + f[0].size()) {
      throw Error(ErrorCode::MalformedRow, fmt::format("{}: bad instant '{}'", where, f[0]));
    }
    const auto node = net.find_node(f[1]);
    if (!node) throw Error(ErrorCode::UnknownNode, fmt::format("{}: '{}'", where, f[1]));
    const bool has_d = !f[3].empty();
    if (demands && *demands != has_d) throw Error(ErrorCode::MalformedRow, where + ": d column must be all or none");
    demands = has_d;
    while (s.h.size() <= t) {
      s.h.push_back(Vector::Constant(static_cast<Eigen::Index>(net.n()), nan));
      if (has_d) s.d.push_back(Vector::Constant(static_cast<Eigen::Index>(net.n()), nan));
    }
    const auto k = static_cast<Eigen::Index>(*node);
    if (!std::isnan(s.h[t](k))) throw Error(ErrorCode::DuplicateReading, fmt::format("t={} node={}", t, f[1]));
    s.h[t](k) = parse_number(f[2], where);
    if (has_d) s.d[t](k) = flow_to_si(parse_number(f[3], where), units);
  }
  for (std::size_t t = 0; t < s.h.size(); ++t) {
    for (std::size_t i = 0; i < net.n(); ++i) {
      if (std::isnan(s.h[t](static_cast<Eigen::Index>(i)))) {
        throw Error(ErrorCode::MissingReading, fmt::format("t={} node={}", t, net.node(i).id));
      }
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Files

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw Error(ErrorCode::IoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "rename to " + path.string() + ": " + ec.message());
}

}  // namespace fgll
