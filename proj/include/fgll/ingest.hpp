#pragma once

#include "fgll/factor_graph.hpp"
#include "fgll/measurements.hpp"
#include "fgll/network.hpp"
#include "fgll/wdn_factors.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace fgll {

enum class FlowUnits { Lps, M3s };

/// Value in the given unit -> m^3/s.
double flow_to_si(double value, FlowUnits units);
/// m^3/s -> value in the given unit.
double flow_from_si(double value, FlowUnits units);

struct RunConfig {
  double mu_L = 1.0;
  int window_T = 12;
  NoiseVariances noise;
  LmOptions solver;
  std::uint64_t rng_seed = 0;
  FlowUnits flow_units = FlowUnits::Lps;
  bool pressure_is_gauge = false;
};

/// Parses a config object; omitted keys take their defaults, unknown keys
/// are rejected with InvalidConfig.
RunConfig load_config(std::string_view json_text);
std::string config_to_json(const RunConfig& config);
void validate(const RunConfig& config);

struct InpParseResult {
  NetworkSpec spec;
  std::vector<std::string> warnings;
};

/// Minimal INP subset: [JUNCTIONS], [RESERVOIRS], [PIPES] (mandatory),
/// [COORDINATES] and the Units entry of [OPTIONS]. Pipe diameters are read
/// in mm; demands in the file's SI flow unit (LPS when unspecified).
InpParseResult parse_inp(std::string_view text);

/// Native JSON form; lengths and diameters in m, base demands in m^3/s.
NetworkSpec parse_network_json(std::string_view text);
std::string network_to_json(const NetworkSpec& spec);

/// Spec describing an existing network (used to write perturbed networks).
NetworkSpec to_spec(const Network& net);

/// Dispatches on the extension: ".inp" or JSON otherwise. INP warnings are
/// appended to `warnings` when given.
NetworkSpec load_network_spec(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr);

/// Default sensor layout declared in the network description.
SensorLayout layout_from_spec(const Network& net, const NetworkSpec& spec);

struct MeasurementOptions {
  FlowUnits flow_units = FlowUnits::Lps;
  bool pressure_is_gauge = false;  // add elevation to pressure readings
};

/// CSV with header `t,node_id,kind,value`. The sensor layout is the set of
/// nodes that appear with each kind; t runs over 0..T-1 and every sensor
/// must report exactly once per instant.
MeasurementSet parse_measurements(std::string_view csv, const Network& net, const MeasurementOptions& opts = {});
/// Writes heads (never gauge pressure) and demands in `units`.
std::string format_measurements(const MeasurementSet& m, const Network& net, FlowUnits units);

/// Full-state series, CSV header `t,node_id,h,d`, one row per instant and
/// node. Heads in m, demands in `units`; the d column may be left empty
/// for every row.
struct StateSeries {
  std::vector<Vector> h;
  std::vector<Vector> d;  // empty when the file carries no demands
};
std::string format_states(const Network& net, const StateSeries& s, FlowUnits units);
StateSeries parse_states(std::string_view csv, const Network& net, FlowUnits units);

std::string read_text_file(const std::filesystem::path& path);
/// Writes to a sibling temporary file and renames it over `path`.
void write_text_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace fgll
