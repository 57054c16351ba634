#pragma once

#include <variant>

#include <Eigen/Dense>

#include "mtdc/grid_graph.hpp"
#include "mtdc/model.hpp"

namespace mtdc {

/// Decentralised proportional droop law u = K^P(V^nom·1 − V).
struct DroopController {
  Eigen::VectorXd gain;  ///< K^P, siemens
  double nominal_voltage = 0.0;

  static DroopController from_params(const ConverterParams& params);
  void validate() const;
};

/// Distributed averaging controller with a uniform communication delay.
///
///   u_i   = K^P_i (V̂_i(t) − V_i(t))
///   V̂_i' = K^V_i (V^nom − V_i(t)) − γ Σ_j c_ij [(V̂_i − V_i)(t−τ) − (V̂_j − V_j)(t−τ)]
///
/// Only the consensus term sees the delay; local measurements are current.
struct DistributedController {
  Eigen::VectorXd gain;       ///< K^P, siemens
  Eigen::VectorXd regulator;  ///< K^V flags
  double gamma = 0.0;
  GridTopology comm;          ///< c_ij edge weights
  double nominal_voltage = 0.0;
  double delay = 0.0;         ///< τ, seconds

  static DistributedController from_params(const ConverterParams& params, GridTopology comm,
                                           double gamma, double delay);
  void validate() const;
};

using Controller = std::variant<DroopController, DistributedController>;

ControllerKind kind_of(const Controller& controller);
double delay_of(const Controller& controller);

Eigen::VectorXd droop_output(const DroopController& ctrl, const Eigen::VectorXd& voltage);

struct DistributedRates {
  Eigen::VectorXd current;          ///< u, amperes
  Eigen::VectorXd reference_rate;   ///< dV̂/dt, volts per second
};

/// Evaluates the delayed distributed law node by node from the edge list.
/// With τ = 0 pass the current values as the delayed arguments.
DistributedRates distributed_rhs(const DistributedController& ctrl, const Eigen::VectorXd& voltage,
                                 const Eigen::VectorXd& reference,
                                 const Eigen::VectorXd& delayed_voltage,
                                 const Eigen::VectorXd& delayed_reference);

/// Splits the delayed part of a closed loop off its state matrix:
///   x'(t) = (A − B·Q) x(t) + B·Q x(t − τ) + b
/// where Q x is the communicated signal (V̂ − V) and B injects the consensus
/// term into the V̂ rows. Empty (zero-column) for the droop controller.
struct DelayCoupling {
  Eigen::MatrixXd input;   ///< B, m×p
  Eigen::MatrixXd output;  ///< Q, p×m
  double delay = 0.0;

  bool empty() const { return input.cols() == 0; }
};

DelayCoupling delay_coupling(const Controller& controller, Eigen::Index state_size);

/// Replaces the gains in `params` with the controller's, keeping capacitances.
ConverterParams params_with_controller(const ConverterParams& params, const Controller& controller);

/// Closes the loop of `lines` with `controller` for the given injections.
ClosedLoopSystem close_loop(const GridTopology& lines, const ConverterParams& params,
                            const Controller& controller, const Eigen::VectorXd& injections);

}  // namespace mtdc
