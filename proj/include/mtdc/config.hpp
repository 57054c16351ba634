#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mtdc/controllers.hpp"
#include "mtdc/grid_graph.hpp"
#include "mtdc/model.hpp"
#include "mtdc/simulator.hpp"

namespace mtdc {

/// Physical dimension of a configuration quantity; selects the accepted unit suffixes.
enum class Dimension { kVoltage, kCurrent, kCapacitance, kResistance, kConductance, kTime };

/// Parses "<number> <unit>" into SI units. Accepted suffixes: V, kV, A, F, uF,
/// ohm, S, s, ms, each only for its own dimension. A bare number is taken as SI.
double parse_quantity(std::string_view text, Dimension dimension);

struct LineSpec {
  std::size_t i = 0;  ///< 0-based converter index
  std::size_t j = 0;
  double resistance = 0.0;  ///< ohm
};

/// Validated model inputs read from a configuration document, all in SI units.
struct ConfigDocument {
  std::string name;
  std::vector<long> converter_ids;  ///< ids as written, in converter order
  ConverterParams params;
  std::vector<LineSpec> lines;
  bool comm_mirrors_lines = false;
  std::vector<Edge> comm_links;  ///< resolved c_ij (equals 1/R_ij when mirrored)
  ControllerKind controller = ControllerKind::kDistributed;
  double gamma = 0.0;
  double tau = 0.0;
  Scenario scenario;

  std::size_t node_count() const { return params.size(); }
  GridTopology line_topology() const;
  /// Throws ValidationError when no communication links are configured.
  GridTopology comm_topology() const;
  bool has_comm() const { return comm_mirrors_lines || !comm_links.empty(); }
  Controller make_controller() const;
};

/// Reads and validates a JSON configuration file. Errors carry the file name and
/// either the JSON line/column or the offending field path.
ConfigDocument parse_config(const std::filesystem::path& path);
ConfigDocument parse_config_text(std::string_view text, std::string_view source = "<config>");

/// Canonical JSON with every quantity as a plain SI number; parse → serialize is idempotent.
std::string serialize_config(const ConfigDocument& config);

/// Names of the bundled presets.
std::vector<std::string> preset_names();
/// Bundled preset document text.
std::string preset_text(std::string_view name);
ConfigDocument load_preset(std::string_view name);

}  // namespace mtdc
