#pragma once

#include <cstddef>
#include <optional>

#include <Eigen/Dense>

#include "mtdc/grid_graph.hpp"

namespace mtdc {

/// Per-converter physical and control parameters, strict SI units.
struct ConverterParams {
  Eigen::VectorXd capacitance;  ///< C_i in farads, > 0
  Eigen::VectorXd droop_gain;   ///< K^P_i in siemens, > 0
  Eigen::VectorXd regulator;    ///< K^V_i, 1 for the voltage regulator and 0 elsewhere (units 1/s)
  double nominal_voltage = 0.0; ///< V^nom in volts, > 0

  std::size_t size() const { return static_cast<std::size_t>(capacitance.size()); }

  /// Uniform parameters with the regulator on node `regulator_node`.
  static ConverterParams uniform(std::size_t n, double capacitance, double droop_gain,
                                 double nominal_voltage, std::size_t regulator_node = 0);

  /// Throws ValidationError unless capacitances and gains are positive, flags are 0/1 and
  /// sizes agree. With `require_regulator` exactly one node must carry the flag.
  void validate(bool require_regulator) const;

  /// Diagonal of the inverse-capacitance matrix diag(1/C_i).
  Eigen::VectorXd inverse_capacitance() const { return capacitance.cwiseInverse(); }
};

/// Voltages, plus the controller references V̂ when the distributed controller runs.
struct NetworkState {
  Eigen::VectorXd voltage;
  std::optional<Eigen::VectorXd> reference;
};

enum class ControllerKind { kDroop, kDistributed };

/// Assembled LTI closed loop  x' = A x + b.
///
/// Droop layout: x = V (size n). Distributed layout: x = (V̂, V) (size 2n).
/// `injection_map` F is the m×n matrix through which I^inj enters the forcing,
/// so b = b_reference + F·I^inj, and in deviation coordinates x − V^nom·1 the
/// forcing is exactly F·I^inj.
struct ClosedLoopSystem {
  ControllerKind kind = ControllerKind::kDroop;
  ConverterParams params;
  Eigen::MatrixXd line_laplacian;
  Eigen::MatrixXd state_matrix;
  Eigen::VectorXd forcing;
  Eigen::VectorXd injections;
  Eigen::MatrixXd injection_map;
  double gamma = 0.0;  ///< distributed only

  std::size_t node_count() const { return params.size(); }
  Eigen::Index state_size() const { return state_matrix.rows(); }
  Eigen::Index voltage_offset() const {
    return kind == ControllerKind::kDistributed ? static_cast<Eigen::Index>(node_count()) : 0;
  }

  /// Forcing vector for a different injection vector.
  Eigen::VectorXd forcing_for(const Eigen::VectorXd& injections) const;
  /// The all-nominal state V^nom·1 in this layout.
  Eigen::VectorXd nominal_state() const;

  Eigen::VectorXd voltages(const Eigen::VectorXd& state) const;
  std::optional<Eigen::VectorXd> references(const Eigen::VectorXd& state) const;
  NetworkState unpack(const Eigen::VectorXd& state) const;
};

struct OpenLoop {
  Eigen::MatrixXd state_matrix;  ///< −C·L_R with C = diag(1/C_i)
  Eigen::VectorXd forcing;       ///< C·I^inj
};

/// V' = −C L_R V + C I^inj + C u with C = diag(1/C_i).
OpenLoop assemble_open_loop(const GridTopology& lines, const ConverterParams& params,
                            const Eigen::VectorXd& injections);

/// A = −C(L_R + K^P), b = C K^P V^nom 1 + C I^inj.
ClosedLoopSystem assemble_droop_loop(const GridTopology& lines, const ConverterParams& params,
                                     const Eigen::VectorXd& injections);

/// A = [[−γL_C, γL_C − K^V], [C K^P, −C(L_R + K^P)]], b = (K^V V^nom 1, C I^inj).
ClosedLoopSystem assemble_distributed_loop(const GridTopology& lines, const GridTopology& comm,
                                           const ConverterParams& params, double gamma,
                                           const Eigen::VectorXd& injections);

/// Droop: u = K^P(V^nom 1 − V). Distributed: u = K^P(V̂ − V).
Eigen::VectorXd controlled_current(const ConverterParams& params, const NetworkState& state,
                                   ControllerKind kind);

}  // namespace mtdc
